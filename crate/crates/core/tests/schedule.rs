mod common;

use std::collections::BTreeSet;

use common::*;
use premeasure::schedule::diagonal_blocks;
use premeasure::{
    build_schedule, cover_union, kappa, permuted_stream, CantorSpace, FastLine, RationalLine, Schedule, ScheduleError,
    Space, Trace,
};

const CAP: u64 = 1_000_000;

fn line_schedule(depth: usize) -> (Schedule, Trace<RationalLine>) {
    build_schedule(&RationalLine::canonical(), depth, CAP).unwrap()
}

#[test]
fn diagonal_order() {
    assert_eq!(diagonal_blocks(3), vec![(1, 1), (2, 1), (1, 2), (3, 1), (2, 2), (1, 3)]);
    assert_eq!(diagonal_blocks(1), vec![(1, 1)]);
}

#[test]
fn zero_depth_is_rejected() {
    assert!(matches!(build_schedule(&CantorSpace::canonical(), 0, CAP), Err(ScheduleError::ZeroDepth)));
}

#[test]
fn cantor_blocks_have_no_covers() {
    let c = CantorSpace::canonical();
    let (sched, trace) = build_schedule(&c, 3, CAP).unwrap();
    for b in &sched.blocks {
        assert!(b.covers.is_empty(), "({}, {})", b.i, b.j);
        if b.j >= 2 {
            let before = trace.stage(b.start as usize).unwrap();
            assert_eq!(b.holes.len(), before.cells().len());
        } else {
            assert!(b.holes.is_empty());
        }
        let st = trace.stage(b.g as usize).unwrap();
        let e = cover_union(&sched, b.i, b.j, &st).unwrap();
        assert!(e.is_empty());
        assert_eq!(kappa(&st, &e).unwrap(), premeasure::DyadicMass::zero());
    }
}

#[test]
fn line_depth_two_blocks() {
    let (sched, _) = line_schedule(2);
    let coords: Vec<_> = sched.blocks.iter().map(|b| (b.i, b.j)).collect();
    assert_eq!(coords, vec![(1, 1), (2, 1), (1, 2)]);
    let b11 = sched.block(1, 1).unwrap();
    assert_eq!(b11.covers, vec![8, 9]);
    assert_eq!(b11.g, 9);
    let b21 = sched.block(2, 1).unwrap();
    assert!(b21.covers.iter().min().unwrap() > &b11.g);
    assert!(matches!(sched.block(3, 1), Err(ScheduleError::UnknownBlock { i: 3, j: 1 })));
}

#[test]
fn depth_one_stream_is_the_first_block() {
    let (sched, trace) = line_schedule(1);
    let b = &sched.blocks[0];
    let order: Vec<u64> = b.insertion_order().collect();
    assert_eq!(sched.stream(), order);
    assert_eq!(trace.stream(), order.as_slice());
    let handles: Vec<u64> = permuted_stream(&sched, &RationalLine::canonical()).iter().map(|h| h.index).collect();
    assert_eq!(handles, order);
}

#[test]
fn every_hole_sits_in_exactly_one_cell() {
    let l = RationalLine::canonical();
    let (sched, trace) = line_schedule(3);
    for b in sched.blocks.iter().filter(|b| b.j >= 2) {
        let before = trace.stage(b.start as usize).unwrap();
        let holes: Vec<_> = b.holes.iter().map(|&k| l.enumerate(k).region).collect();
        assert_eq!(holes.len(), before.cells().len());
        let mut used = BTreeSet::new();
        for cell in before.cells() {
            let inside: Vec<usize> =
                (0..holes.len()).filter(|&n| l.closure_strictly_inside(&holes[n], &cell.region)).collect();
            assert_eq!(inside.len(), 1, "block ({}, {})", b.i, b.j);
            assert!(used.insert(inside[0]));
        }
    }
}

#[test]
fn covers_contain_the_boundary() {
    let l = RationalLine::canonical();
    let (sched, trace) = line_schedule(3);
    for b in &sched.blocks {
        let cover = sched.cover_region(&l, b.i, b.j).unwrap();
        let boundary = l.boundary(&l.enumerate(b.i));
        assert!(!boundary.is_empty());
        for p in &boundary {
            assert!(in_open(&cover, p), "({}, {}) misses {p}", b.i, b.j);
        }
        let st = trace.stage(b.covers_inserted_by()).unwrap();
        let e = cover_union(&sched, b.i, b.j, &st).unwrap();
        for p in &boundary {
            assert!(st.element_contains(&e, p).unwrap());
        }
    }
}

#[test]
fn cover_chains_shrink_past_the_holes() {
    let l = RationalLine::canonical();
    let (sched, _) = line_schedule(3);
    for b in sched.blocks.iter().filter(|b| b.j >= 2) {
        let cover = sched.cover_region(&l, b.i, b.j).unwrap();
        let prev = sched.cover_region(&l, b.i, b.j - 1).unwrap();
        let holes: Vec<_> = b.holes.iter().map(|&k| l.enumerate(k).region).collect();
        let allowed = l.meet(&prev, &l.exterior(&l.join_all(holes.clone())));
        assert!(l.subset(&cover, &allowed));
        let mut regions = vec![&cover, &prev];
        regions.extend(holes.iter());
        for x in probes(&regions) {
            if in_open(&cover, &x) {
                assert!(in_open(&prev, &x));
                assert!(holes.iter().all(|h| !in_closure(h, &x)), "{x} in a hole closure");
            }
        }
    }
}

#[test]
fn blocks_fill_contiguous_ranges() {
    let (sched, trace) = line_schedule(3);
    let mut prev_g = 0;
    let mut prev_max_cover = 0;
    for b in &sched.blocks {
        assert_eq!(b.start, prev_g);
        assert!(b.g > b.start);
        let all: Vec<u64> = b.insertion_order().collect();
        let set: BTreeSet<u64> = all.iter().copied().collect();
        assert_eq!(set.len(), all.len());
        assert_eq!(set, (b.start + 1..=b.g).collect());
        if let Some(&lo) = b.covers.iter().min() {
            assert!(lo > prev_max_cover);
            prev_max_cover = *b.covers.iter().max().unwrap();
        }
        prev_g = b.g;
    }
    let stream = sched.stream();
    let mut sorted = stream.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (1..=sched.len() as u64).collect::<Vec<_>>());
    assert_eq!(trace.stream(), stream.as_slice());
    assert_eq!(trace.len(), sched.len());
}

#[test]
fn cover_union_needs_a_late_enough_stage() {
    let (sched, trace) = line_schedule(2);
    let b = sched.block(2, 1).unwrap();
    let early = trace.stage(b.start as usize).unwrap();
    assert!(matches!(cover_union(&sched, 2, 1, &early), Err(ScheduleError::StageTooEarly { i: 2, j: 1, .. })));
}

#[test]
fn both_scalars_build_the_same_schedule() {
    let (fast, _) = build_schedule(&FastLine::canonical(), 3, CAP).unwrap();
    let (exact, _) = line_schedule(3);
    assert_eq!(fast, exact);
}

#[test]
fn blocks_serialize_with_letter_keys() {
    let (sched, _) = line_schedule(1);
    let v = serde_json::to_value(&sched.blocks[0]).unwrap();
    assert_eq!(v["G"], serde_json::json!([8, 9]));
    assert_eq!(v["F"], serde_json::json!([]));
    assert_eq!(v["g"], 9);
}
