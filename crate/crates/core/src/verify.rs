//! Certificates for the quantitative claims at finite stage.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dyadic::DyadicMass;
use crate::mass::{kappa, max_cell_mass, tail_budget, MassError};
use crate::ring::{ring_difference, ring_union, run_stream, RingElement, RingError, Stage};
use crate::schedule::{cover_union, Schedule, ScheduleError, Trace};
use crate::space::{BasisHandle, Space};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("halving fails for boundary {i} at j = {j}: {detail}")]
    ChainViolation { i: u64, j: u64, detail: String },
    #[error("largest cell mass {max} at stage {stage} exceeds 2^(1-{m})")]
    DecayViolation { m: u64, stage: usize, max: DyadicMass },
    #[error("additivity fails at stage {stage} (seed {seed}, sample {sample}): {detail}")]
    AdditivityViolation { seed: u64, stage: usize, sample: usize, detail: String },
    #[error("the schedule must reach block (1,{m})")]
    InsufficientDepth { m: u64 },
    #[error("probe {region} is representable in one run but not the other")]
    MembershipViolation { region: String, original: Option<usize>, permuted: Option<usize> },
    #[error("inserted set W_{position} has zero mass at its insertion stage")]
    PositivityViolation { position: usize },
    #[error("total mass {total} plus tail {tail} exceeds 1 at stage {stage}")]
    BudgetViolation { stage: usize, total: DyadicMass, tail: DyadicMass },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Mass(#[from] MassError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainLink {
    pub j: u64,
    /// `κ(∪𝒢_{i,j})`.
    pub bound: DyadicMass,
    /// `κ(∪𝒢_{i,j} − ∪ closures of 𝓕_{i,j+1})`, when block `(i,j+1)` exists.
    pub after_holes: Option<DyadicMass>,
}

/// `κ*(∂V_i) ≤ claim`, witnessed by the covers `𝒢_{i,1}, …, 𝒢_{i,j_max}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryBoundCertificate {
    pub i: u64,
    pub stage: usize,
    pub chain: Vec<ChainLink>,
    pub claim: DyadicMass,
}

/// The region `∪𝒢_{i,j}` with the closures of the holes `𝓕_{i,j+1}` removed.
pub fn cover_minus_holes<X: Space>(space: &X, schedule: &Schedule, i: u64, j: u64) -> Result<X::Region, ScheduleError> {
    let cover = schedule.cover_region(space, i, j)?;
    let holes: Vec<X::Region> = schedule
        .block(i, j + 1)?
        .holes
        .iter()
        .map(|&k| space.enumerate(k).region)
        .filter(|r| !space.is_empty(&space.meet(r, &cover)))
        .collect();
    Ok(space.meet(&cover, &space.exterior(&space.join_all(holes))))
}

/// Evaluates the cover chain of `∂V_i` at the final stage of the trace and
/// checks the halving at every step, including the exact hole identity.
pub fn certify_boundary<X: Space>(
    schedule: &Schedule,
    trace: &Trace<X>,
    i: u64,
    j_max: u64,
) -> Result<BoundaryBoundCertificate, VerifyError> {
    let stage = trace.final_stage().ok_or_else(|| VerifyError::Precondition("empty trace".into()))?;
    certify_boundary_at(schedule, stage, i, j_max)
}

pub fn certify_boundary_at<X: Space>(
    schedule: &Schedule,
    stage: &Stage<X>,
    i: u64,
    j_max: u64,
) -> Result<BoundaryBoundCertificate, VerifyError> {
    if j_max == 0 {
        return Err(VerifyError::Precondition("j_max must be at least 1".into()));
    }
    let space = stage.space();
    let mut chain: Vec<ChainLink> = Vec::new();
    for j in 1..=j_max {
        let bound = kappa(stage, &cover_union(schedule, i, j, stage)?)?;
        chain.push(ChainLink { j, bound, after_holes: None });
    }
    for j in 1..j_max {
        let region = cover_minus_holes(space, schedule, i, j)?;
        let after = kappa(stage, &stage.decompose(&region)?)?;
        let bound = &chain[j as usize - 1].bound;
        if after != bound.half() {
            return Err(VerifyError::ChainViolation {
                i,
                j,
                detail: format!("removing the holes leaves {after}, expected {}", bound.half()),
            });
        }
        let next = &chain[j as usize].bound;
        if next > &after {
            return Err(VerifyError::ChainViolation {
                i,
                j,
                detail: format!("next cover has mass {next}, more than half of {bound}"),
            });
        }
        chain[j as usize - 1].after_holes = Some(after);
    }
    let first = chain[0].bound.clone();
    for link in &chain {
        if link.bound > first.shr(link.j - 1) {
            return Err(VerifyError::ChainViolation {
                i,
                j: link.j,
                detail: format!("{} exceeds {first} * 2^(1-{})", link.bound, link.j),
            });
        }
    }
    let claim = chain.last().expect("j_max >= 1").bound.clone();
    Ok(BoundaryBoundCertificate { i, stage: stage.index(), chain, claim })
}

/// The largest cell mass once block `(1,m)` is inserted, checked against
/// `2^(1-m)`.
pub fn certify_max_decay<X: Space>(schedule: &Schedule, trace: &Trace<X>, m: u64) -> Result<DyadicMass, VerifyError> {
    let block = schedule.block(1, m).map_err(|_| VerifyError::InsufficientDepth { m })?;
    let stage = trace.stage(block.g as usize)?;
    let max = max_cell_mass(&stage)?;
    if max > DyadicMass::one().shr(m - 1) {
        return Err(VerifyError::DecayViolation { m, stage: stage.index(), max });
    }
    Ok(max)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdditivityReport {
    pub seed: u64,
    pub stage: usize,
    pub pairs: usize,
    pub covers: usize,
    pub violations: usize,
}

fn random_split<P: Ord + Clone>(
    rng: &mut ChaCha8Rng,
    stage: usize,
    atoms: &[crate::ring::CellSignature],
    points: &[P],
) -> (RingElement<P>, RingElement<P>) {
    let mut a = RingElement::empty(stage);
    let mut b = RingElement::empty(stage);
    for s in atoms {
        match rng.gen_range(0..3) {
            0 => {
                a.open_part.insert(s.clone());
            }
            1 => {
                b.open_part.insert(s.clone());
            }
            _ => {}
        }
    }
    for p in points {
        match rng.gen_range(0..3) {
            0 => {
                a.boundary_part.insert(p.clone());
            }
            1 => {
                b.boundary_part.insert(p.clone());
            }
            _ => {}
        }
    }
    (a, b)
}

/// Seeded random disjoint pairs `κ(d1 ⊎ d2) = κ(d1) + κ(d2)`, and random
/// finite covers `κ(d) ≤ Σ κ(piece)`.
pub fn check_additivity<X: Space>(
    stage: &Stage<X>,
    samples: usize,
    seed: u64,
) -> Result<AdditivityReport, VerifyError> {
    if stage.cells().len() < 2 {
        return Err(VerifyError::Precondition(format!("stage {} has fewer than two cells", stage.index())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: Vec<_> = stage.cells().iter().map(|c| stage.signature(c)).collect();
    let points: Vec<X::Point> = stage.boundary_support().into_iter().collect();
    let n = stage.index();
    let fail = |sample: usize, detail: String| VerifyError::AdditivityViolation { seed, stage: n, sample, detail };
    for sample in 0..samples {
        let (d1, d2) = random_split(&mut rng, n, &atoms, &points);
        let joined = ring_union(&d1, &d2)?;
        let (k1, k2, k) = (kappa(stage, &d1)?, kappa(stage, &d2)?, kappa(stage, &joined)?);
        if k != &k1 + &k2 {
            return Err(fail(sample, format!("{k} != {k1} + {k2}")));
        }
        let points_only = RingElement { open_part: BTreeSet::new(), ..d1.clone() };
        if !kappa(stage, &points_only)?.is_zero() {
            return Err(fail(sample, "a boundary-only element has positive mass".into()));
        }
    }
    for sample in 0..samples {
        let (d, _) = random_split(&mut rng, n, &atoms, &points);
        let count = rng.gen_range(1..=4);
        let mut pieces = vec![RingElement::empty(n); count];
        for s in &d.open_part {
            let k = rng.gen_range(0..count);
            pieces[k].open_part.insert(s.clone());
        }
        for p in &d.boundary_part {
            let k = rng.gen_range(0..count);
            pieces[k].boundary_part.insert(p.clone());
        }
        for s in atoms.choose_multiple(&mut rng, atoms.len().min(3)) {
            let k = rng.gen_range(0..count);
            pieces[k].open_part.insert(s.clone());
        }
        let mut union = RingElement::empty(n);
        let mut sum = DyadicMass::zero();
        for p in &pieces {
            union = ring_union(&union, p)?;
            sum = &sum + &kappa(stage, p)?;
        }
        if !ring_difference(&d, &union)?.is_empty() {
            return Err(fail(sample, "cover pieces miss part of the element".into()));
        }
        let k = kappa(stage, &d)?;
        if k > sum {
            return Err(fail(sample, format!("{k} exceeds the cover sum {sum}")));
        }
    }
    Ok(AdditivityReport { seed, stage: n, pairs: samples, covers: samples, violations: 0 })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionPiece {
    pub region: String,
    pub mass: DyadicMass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryPiece {
    pub points: Vec<String>,
    /// `κ` of the boundary points as a ring element at the partition stage.
    pub kappa: DyadicMass,
    pub certificates: Vec<BoundaryBoundCertificate>,
}

/// A finite partition of the space whose pieces all have mass or bound at
/// most `epsilon`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionCertificate {
    pub epsilon: DyadicMass,
    pub m: u64,
    pub stage: usize,
    pub cells: Vec<PartitionPiece>,
    pub tail: PartitionPiece,
    pub tail_bound: DyadicMass,
    pub boundary: BoundaryPiece,
}

/// The least `m >= 1` with `2^(1-m) <= epsilon`.
pub fn needed_m(epsilon: &DyadicMass) -> Option<u64> {
    if epsilon.is_zero() {
        return None;
    }
    (1..).find(|&m| DyadicMass::one().shr(m - 1) <= *epsilon)
}

pub fn build_partition<X: Space>(
    schedule: &Schedule,
    trace: &Trace<X>,
    epsilon: &DyadicMass,
) -> Result<PartitionCertificate, VerifyError> {
    let m = needed_m(epsilon).ok_or_else(|| VerifyError::Precondition("epsilon must be positive".into()))?;
    let block = schedule.block(1, m).map_err(|_| VerifyError::InsufficientDepth { m })?;
    let stage = trace.stage(block.g as usize)?;
    let space = stage.space();
    let mut cells = Vec::with_capacity(stage.cells().len());
    let mut sorted: Vec<_> = stage.cells().iter().collect();
    sorted.sort_by(|a, b| a.region.cmp(&b.region));
    for c in sorted {
        if &c.mass > epsilon {
            return Err(VerifyError::DecayViolation { m, stage: stage.index(), max: c.mass.clone() });
        }
        cells.push(PartitionPiece { region: space.format_region(&c.region), mass: c.mass.clone() });
    }
    let tail_bound = tail_budget(&stage);
    if &tail_bound > epsilon {
        return Err(VerifyError::Precondition(format!("tail bound {tail_bound} exceeds epsilon")));
    }
    let support = stage.boundary_support();
    let points_elem = RingElement { boundary_part: support.clone(), ..RingElement::empty(stage.index()) };
    let boundary_kappa = kappa(&stage, &points_elem)?;
    let final_stage = trace.final_stage().expect("nonempty trace");
    let mut certificates = Vec::new();
    let mut i = 1;
    while schedule.block(i, 2).is_ok() {
        let j_max = (2..).take_while(|&j| schedule.block(i, j).is_ok()).last().expect("block (i,2) exists");
        certificates.push(certify_boundary_at(schedule, final_stage, i, j_max)?);
        i += 1;
    }
    Ok(PartitionCertificate {
        epsilon: epsilon.clone(),
        m,
        stage: stage.index(),
        cells,
        tail: PartitionPiece { region: space.format_region(stage.outside()), mass: tail_bound.clone() },
        tail_bound,
        boundary: BoundaryPiece {
            points: support.iter().map(|p| space.format_point(p)).collect(),
            kappa: boundary_kappa,
            certificates,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeOutcome {
    pub region: String,
    /// First stage of each run at which the probe decomposes.
    pub original: Option<usize>,
    pub permuted: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PermutationReport {
    pub permutation: Vec<usize>,
    pub probes: Vec<ProbeOutcome>,
}

fn first_representable<X: Space>(stages: &[Stage<X>], region: &X::Region) -> Option<usize> {
    stages.iter().find(|s| s.decompose(region).is_ok()).map(|s| s.index())
}

/// Runs the prefix in its own order and permuted, and checks that every probe
/// region lands in the ring at some stage of both runs or of neither.
pub fn check_permutation_invariance<X: Space>(
    space: &X,
    prefix: &[BasisHandle<X::Region>],
    permutation: &[usize],
    probes: &[X::Region],
) -> Result<PermutationReport, VerifyError> {
    if prefix.len() > 8 {
        return Err(VerifyError::Precondition("prefix longer than 8".into()));
    }
    let mut check: Vec<usize> = permutation.to_vec();
    check.sort_unstable();
    if check != (0..prefix.len()).collect::<Vec<_>>() {
        return Err(VerifyError::Precondition("not a permutation of the prefix".into()));
    }
    let permuted: Vec<_> = permutation.iter().map(|&k| prefix[k].clone()).collect();
    let a = run_stream(space, prefix)?;
    let b = run_stream(space, &permuted)?;
    let mut outcomes = Vec::new();
    for r in probes {
        let (original, permuted) = (first_representable(&a, r), first_representable(&b, r));
        if original.is_some() != permuted.is_some() {
            return Err(VerifyError::MembershipViolation { region: space.format_region(r), original, permuted });
        }
        outcomes.push(ProbeOutcome { region: space.format_region(r), original, permuted });
    }
    Ok(PermutationReport { permutation: permutation.to_vec(), probes: outcomes })
}

/// Every one of the first `count` inserted sets has positive mass at its
/// insertion stage.
pub fn check_strict_positivity<X: Space>(trace: &Trace<X>, count: usize) -> Result<Vec<DyadicMass>, VerifyError> {
    let count = count.min(trace.len());
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let mut stage = trace.stage(1)?;
    loop {
        let pos = stage.index();
        let k = kappa(&stage, &stage.decompose(&trace.handle_at(pos).region)?)?;
        if k.is_zero() {
            return Err(VerifyError::PositivityViolation { position: pos });
        }
        out.push(k);
        if pos == count {
            return Ok(out);
        }
        stage.refine_in_place(&trace.handle_at(pos + 1))?;
    }
}

/// `total + 2^(-k) <= 1` at the given stage.
pub fn check_budget<X: Space>(stage: &Stage<X>) -> Result<(), VerifyError> {
    let tail = tail_budget(stage);
    if stage.total_mass() + &tail > DyadicMass::one() {
        return Err(VerifyError::BudgetViolation { stage: stage.index(), total: stage.total_mass().clone(), tail });
    }
    Ok(())
}

/// Everything `verify` checks on a built schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub adapter: String,
    pub depth: usize,
    pub stages: usize,
    pub boundaries: Vec<BoundaryBoundCertificate>,
    pub max_decay: Vec<DyadicMass>,
    pub additivity: Vec<AdditivityReport>,
    pub positivity: Vec<DyadicMass>,
}

pub fn run_suite<X: Space>(
    schedule: &Schedule,
    trace: &Trace<X>,
    samples: usize,
    seed: u64,
) -> Result<SuiteReport, VerifyError> {
    let final_stage = trace.final_stage().ok_or_else(|| VerifyError::Precondition("empty trace".into()))?;
    let mut boundaries = Vec::new();
    let mut i = 1;
    while schedule.block(i, 1).is_ok() {
        let j_max = (1..).take_while(|&j| schedule.block(i, j).is_ok()).last().expect("block (i,1) exists");
        boundaries.push(certify_boundary_at(schedule, final_stage, i, j_max)?);
        i += 1;
    }
    let mut max_decay = Vec::new();
    let mut m = 1;
    while schedule.block(1, m).is_ok() {
        max_decay.push(certify_max_decay(schedule, trace, m)?);
        m += 1;
    }
    let mut additivity = Vec::new();
    let last = trace.len().min(12);
    let mut budget = Ok(());
    trace.walk(1, |s| {
        if budget.is_ok() {
            budget = check_budget(s);
        }
        Ok(())
    })?;
    budget?;
    for n in 1..=last {
        let stage = trace.stage(n)?;
        if stage.cells().len() >= 2 {
            additivity.push(check_additivity(&stage, samples, seed.wrapping_add(n as u64))?);
        }
    }
    let positivity = check_strict_positivity(trace, 50)?;
    Ok(SuiteReport {
        adapter: final_stage.space().name().to_string(),
        depth: schedule.depth,
        stages: trace.len(),
        boundaries,
        max_decay,
        additivity,
        positivity,
    })
}
