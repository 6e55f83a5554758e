mod common;

use common::*;
use premeasure::ring::run_stream;
use premeasure::verify::{check_strict_positivity, needed_m, run_suite};
use premeasure::{
    build_partition, build_schedule, certify_boundary, certify_max_decay, check_additivity,
    check_permutation_invariance, kappa, ring_union, CantorSpace, DyadicMass, FastLine, RationalLine, RingElement,
    Schedule, Space, Trace, VerifyError,
};

const CAP: u64 = 1_000_000;

fn d(s: &str) -> DyadicMass {
    s.parse().unwrap()
}

fn line_schedule(depth: usize) -> (Schedule, Trace<RationalLine>) {
    build_schedule(&RationalLine::canonical(), depth, CAP).unwrap()
}

#[test]
fn cantor_certificates_are_zero() {
    let (sched, trace) = build_schedule(&CantorSpace::canonical(), 3, CAP).unwrap();
    for (i, j_max) in [(1, 3), (2, 2), (3, 1)] {
        let cert = certify_boundary(&sched, &trace, i, j_max).unwrap();
        assert_eq!(cert.chain.len() as u64, j_max);
        assert!(cert.chain.iter().all(|l| l.bound.is_zero()));
        assert!(cert.claim.is_zero());
    }
}

#[test]
fn line_chain_for_the_first_boundary() {
    let (sched, trace) = build_schedule(&FastLine::canonical(), 4, CAP).unwrap();
    let cert = certify_boundary(&sched, &trace, 1, 4).unwrap();
    let bounds: Vec<_> = cert.chain.iter().map(|l| l.bound.clone()).collect();
    assert_eq!(bounds, vec![d("3/4"), d("1/4"), d("1/64"), d("1/4096")]);
    assert!(cert.claim <= bounds[0].shr(3));
    // Removing the holes halves the cover exactly.
    assert_eq!(cert.chain[0].after_holes, Some(bounds[0].half()));
    for w in cert.chain.windows(2) {
        assert_eq!(w[0].after_holes, Some(w[0].bound.half()));
        assert!(w[1].bound <= w[0].bound.half());
    }
    assert_eq!(cert.chain[3].after_holes, None);
}

#[test]
fn hole_identity_holds_for_the_second_boundary() {
    let (sched, trace) = line_schedule(3);
    let cert = certify_boundary(&sched, &trace, 2, 2).unwrap();
    assert_eq!(cert.chain[0].bound, d("49/64"));
    assert_eq!(cert.chain[0].after_holes, Some(d("49/128")));
}

#[test]
fn zero_j_max_is_a_precondition_error() {
    let (sched, trace) = line_schedule(1);
    assert!(matches!(certify_boundary(&sched, &trace, 1, 0), Err(VerifyError::Precondition(_))));
}

#[test]
fn max_decay_examples() {
    let (sched, trace) = line_schedule(3);
    let values: Vec<_> = (1..=3).map(|m| certify_max_decay(&sched, &trace, m).unwrap()).collect();
    assert!(values[0] <= DyadicMass::one());
    assert_eq!(premeasure::max_cell_mass(&trace.stage(1).unwrap()).unwrap(), d("1/2"));
    assert!(values[2] <= d("1/4"));
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(matches!(certify_max_decay(&sched, &trace, 4), Err(VerifyError::InsufficientDepth { m: 4 })));
}

#[test]
fn additivity_examples() {
    let s = t1_space();
    let handles: Vec<_> = (1..=3).map(|k| s.enumerate(k)).collect();
    let st = run_stream(&s, &handles).unwrap().pop().unwrap();
    let report = check_additivity(&st, 1000, 7).unwrap();
    assert_eq!(report.violations, 0);
    assert_eq!(report.seed, 7);
    assert_eq!(report, check_additivity(&st, 1000, 7).unwrap());

    // All 2^4 open parts against each other, by hand.
    let sigs: Vec<_> = st.cells().iter().map(|c| st.signature(c)).collect();
    let element = |mask: u32| {
        let mut e = RingElement::empty(3);
        for (k, s) in sigs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                e.open_part.insert(s.clone());
            }
        }
        e
    };
    for a in 0..16u32 {
        for b in 0..16u32 {
            if a & b != 0 {
                continue;
            }
            let (ea, eb) = (element(a), element(b));
            let sum = &kappa(&st, &ea).unwrap() + &kappa(&st, &eb).unwrap();
            assert_eq!(kappa(&st, &ring_union(&ea, &eb).unwrap()).unwrap(), sum);
        }
    }
    let points = RingElement { boundary_part: st.boundary_support(), ..RingElement::empty(3) };
    let one = element(1);
    assert_eq!(kappa(&st, &ring_union(&one, &points).unwrap()).unwrap(), kappa(&st, &one).unwrap());
}

#[test]
fn needed_m_examples() {
    assert_eq!(needed_m(&d("1/4")), Some(3));
    assert_eq!(needed_m(&d("1")), Some(1));
    assert_eq!(needed_m(&d("1/8")), Some(4));
    assert_eq!(needed_m(&d("3/16")), Some(4));
    assert_eq!(needed_m(&DyadicMass::zero()), None);
}

#[test]
fn partition_examples() {
    let (sched, trace) = line_schedule(3);
    let cert = build_partition(&sched, &trace, &d("1/4")).unwrap();
    assert_eq!(cert.m, 3);
    assert!(cert.cells.iter().all(|p| p.mass <= d("1/4")));
    assert!(cert.tail_bound <= d("1/4"));
    assert!(cert.boundary.kappa.is_zero());
    assert!(cert.boundary.certificates.iter().all(|c| c.claim <= d("1/4")));

    // The pieces cover every probe point exactly once.
    let st = trace.stage(cert.stage).unwrap();
    assert_eq!(cert.cells.len(), st.cells().len());
    let mut regions: Vec<_> = st.cells().iter().map(|c| &c.region).collect();
    regions.push(st.outside());
    let support = st.boundary_support();
    for x in probes(&regions) {
        let hits = st.cells().iter().filter(|c| in_open(&c.region, &x)).count()
            + usize::from(in_open(st.outside(), &x))
            + usize::from(support.contains(&x));
        assert_eq!(hits, 1, "{x}");
    }

    let cert = build_partition(&sched, &trace, &DyadicMass::one()).unwrap();
    assert_eq!(cert.m, 1);

    let (sched, trace) = line_schedule(2);
    assert!(matches!(build_partition(&sched, &trace, &d("1/8")), Err(VerifyError::InsufficientDepth { m: 4 })));
}

#[test]
fn permutation_examples() {
    let s = t1_space();
    let prefix: Vec<_> = (1..=3).map(|k| s.enumerate(k)).collect();
    let probes = vec![line(&[("0", "2")]), line(&[("0", "1/2")]), line(&[("1", "3")])];
    let same = check_permutation_invariance(&s, &prefix, &[0, 1, 2], &probes).unwrap();
    assert!(same.probes.iter().all(|p| p.original == p.permuted));

    let swapped = check_permutation_invariance(&s, &prefix, &[1, 0, 2], &probes).unwrap();
    assert_eq!(swapped.probes[0].original, Some(1));
    assert_eq!(swapped.probes[0].permuted, Some(2));
    assert_eq!(swapped.probes[1].original, None);
    assert_eq!(swapped.probes[1].permuted, None);

    assert!(matches!(
        check_permutation_invariance(&s, &prefix, &[0, 0, 2], &probes),
        Err(VerifyError::Precondition(_))
    ));
}

#[test]
fn positivity_on_both_adapters() {
    let (sched, trace) = line_schedule(3);
    let masses = check_strict_positivity(&trace, 50).unwrap();
    assert_eq!(masses.len(), 50.min(sched.len()));
    assert!(masses.iter().all(|m| !m.is_zero()));
    let (_, trace) = build_schedule(&CantorSpace::canonical(), 3, CAP).unwrap();
    let masses = check_strict_positivity(&trace, 50).unwrap();
    assert_eq!(masses.len(), trace.len().min(50));
    assert!(masses.iter().all(|m| !m.is_zero()));
}

#[test]
fn cantor_suite_passes() {
    let (sched, trace) = build_schedule(&CantorSpace::canonical(), 3, CAP).unwrap();
    let report = run_suite(&sched, &trace, 50, 1).unwrap();
    assert_eq!(report.boundaries.len(), 3);
    assert!(report.boundaries.iter().all(|c| c.claim.is_zero()));
    assert!(report.additivity.iter().all(|a| a.violations == 0));
    assert_eq!(report.max_decay.len(), 3);
}
