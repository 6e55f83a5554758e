mod common;

use std::collections::BTreeSet;

use common::*;
use premeasure::ring::run_stream;
use premeasure::{
    kappa, kappa_lifted, max_cell_mass, mu, ring_difference, ring_union, CellSignature, DyadicMass, MassError,
    RationalLine, RingElement, Space, Stage, Trace,
};
use proptest::prelude::*;

fn d(s: &str) -> DyadicMass {
    s.parse().unwrap()
}

fn t1_trace() -> Trace<RationalLine> {
    let s = t1_space();
    let handles: Vec<_> = (1..=3).map(|k| s.enumerate(k)).collect();
    Trace::record(&s, &handles, 1).unwrap()
}

#[test]
fn mu_examples() {
    let tr = t1_trace();
    let st1 = tr.stage(1).unwrap();
    let v1 = st1.signature(&st1.cells()[0]);
    assert_eq!(mu(&st1, &v1).unwrap(), d("1/2"));
    assert_eq!(mu(&st1, &CellSignature::empty(1)).unwrap(), DyadicMass::zero());
    let st3 = tr.stage(3).unwrap();
    let hole = st3.decompose(&line(&[("9/4", "11/4")])).unwrap();
    assert_eq!(hole.open_part.len(), 1);
    assert_eq!(mu(&st3, hole.open_part.iter().next().unwrap()).unwrap(), d("1/8"));
    let missing = CellSignature::from_flags(&[false, false, true, false]);
    assert!(matches!(mu(&st3, &missing), Err(MassError::UnknownCell(_))));
}

#[test]
fn kappa_examples() {
    let tr = t1_trace();
    let st2 = tr.stage(2).unwrap();
    let st3 = tr.stage(3).unwrap();
    assert_eq!(kappa(&st2, &st2.decompose(&line(&[("0", "2")])).unwrap()).unwrap(), d("1/2"));
    assert_eq!(kappa(&st3, &st3.decompose(&line(&[("1", "3")])).unwrap()).unwrap(), d("1/2"));
    assert_eq!(kappa(&st2, &RingElement::empty(2)).unwrap(), DyadicMass::zero());
    assert_eq!(kappa(&st3, &RingElement::empty(2)), Err(MassError::StageMismatch { element: 2, stage: 3 }));
}

#[test]
fn kappa_lifted_examples() {
    let tr = t1_trace();
    let e = tr.stage(2).unwrap().decompose(&line(&[("0", "2")])).unwrap();
    assert_eq!(kappa_lifted(&tr, &e).unwrap(), d("1/2"));
    let st3 = tr.stage(3).unwrap();
    let e3 = st3.decompose(&line(&[("1", "3")])).unwrap();
    assert_eq!(kappa_lifted(&tr, &e3).unwrap(), kappa(&st3, &e3).unwrap());

    let c = t2_space();
    let handles: Vec<_> = (1..=3).map(|k| c.enumerate(k)).collect();
    let tr = Trace::record(&c, &handles, 2).unwrap();
    for n in 1..=3 {
        let st = tr.stage(n).unwrap();
        let e = st.decompose(&cyl("0")).unwrap();
        assert_eq!(kappa(&st, &e).unwrap(), d("1/2"));
        assert_eq!(kappa_lifted(&tr, &e).unwrap(), d("1/2"));
    }
}

#[test]
fn max_cell_mass_examples() {
    let tr = t1_trace();
    assert_eq!(max_cell_mass(&tr.stage(1).unwrap()).unwrap(), d("1/2"));
    assert_eq!(max_cell_mass(&tr.stage(3).unwrap()).unwrap(), d("1/4"));
    let c = t2_space();
    let handles: Vec<_> = (1..=3).map(|k| c.enumerate(k)).collect();
    let stages = run_stream(&c, &handles).unwrap();
    let mut masses: Vec<_> = stages[2].cells().iter().map(|c| c.mass.clone()).collect();
    masses.sort();
    assert_eq!(masses, vec![d("1/8"), d("1/4"), d("1/4")]);
    assert_eq!(max_cell_mass(&stages[2]).unwrap(), d("1/4"));
}

#[test]
fn tail_budget_examples() {
    let tr = t1_trace();
    for (n, want) in [(1, "1/2"), (3, "1/8")] {
        let st = tr.stage(n).unwrap();
        assert_eq!(premeasure::tail_budget(&st), d(want));
    }
    for n in 1..=3 {
        let st = tr.stage(n).unwrap();
        assert!((st.total_mass() + &premeasure::tail_budget(&st)) <= DyadicMass::one());
    }
}

fn random_stages(idx: &[u64]) -> Vec<Stage<RationalLine>> {
    let l = RationalLine::canonical();
    let handles: Vec<_> = idx.iter().map(|&k| l.enumerate(k)).collect();
    run_stream(&l, &handles).unwrap()
}

fn distinct(v: Vec<u64>) -> Vec<u64> {
    let mut seen = BTreeSet::new();
    v.into_iter().filter(|k| seen.insert(*k)).collect()
}

fn pick(stage: &Stage<RationalLine>, mask: &[bool], shift: usize) -> RingElement<num_rational::BigRational> {
    let mut e = RingElement::empty(stage.index());
    for (k, c) in stage.cells().iter().enumerate() {
        if mask[(k + shift) % mask.len()] {
            e.open_part.insert(stage.signature(c));
        }
    }
    for (k, p) in stage.boundary_support().into_iter().enumerate() {
        if mask[(k + shift + 7) % mask.len()] {
            e.boundary_part.insert(p);
        }
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kappa_is_additive_and_monotone(
        idx in prop::collection::vec(1u64..300, 10).prop_map(distinct),
        m1 in prop::collection::vec(any::<bool>(), 1..40),
        m2 in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let stages = random_stages(&idx);
        let st = stages.last().unwrap();
        let a = pick(st, &m1, 0);
        let b = pick(st, &m2, 3);
        let b_only = ring_difference(&b, &a).unwrap();
        let u = ring_union(&a, &b_only).unwrap();
        let ka = kappa(st, &a).unwrap();
        let kb = kappa(st, &b_only).unwrap();
        prop_assert_eq!(kappa(st, &u).unwrap(), &ka + &kb);
        prop_assert!(ka <= kappa(st, &u).unwrap());
        // Boundary points alone carry no mass.
        let points = RingElement { boundary_part: a.boundary_part.clone(), ..RingElement::empty(st.index()) };
        prop_assert_eq!(kappa(st, &points).unwrap(), DyadicMass::zero());
    }

    #[test]
    fn lifting_never_changes_kappa(
        idx in prop::collection::vec(1u64..300, 10).prop_map(distinct),
        mask in prop::collection::vec(any::<bool>(), 1..30),
    ) {
        let l = RationalLine::canonical();
        let handles: Vec<_> = idx.iter().map(|&k| l.enumerate(k)).collect();
        let tr = Trace::record(&l, &handles, 3).unwrap();
        for n in 1..=tr.len() {
            let st = tr.stage(n).unwrap();
            let e = pick(&st, &mask, n);
            prop_assert_eq!(kappa_lifted(&tr, &e).unwrap(), kappa(&st, &e).unwrap());
        }
    }

    #[test]
    fn max_cell_mass_never_increases(idx in prop::collection::vec(1u64..300, 14).prop_map(distinct)) {
        let stages = random_stages(&idx);
        for w in stages.windows(2) {
            prop_assert!(max_cell_mass(&w[1]).unwrap() <= max_cell_mass(&w[0]).unwrap());
        }
    }
}
