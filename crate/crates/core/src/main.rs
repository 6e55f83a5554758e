fn main() {
    std::process::exit(premeasure::cli::run(std::env::args_os()));
}
