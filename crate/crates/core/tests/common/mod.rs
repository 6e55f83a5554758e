#![allow(dead_code)]

use std::collections::BTreeSet;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use premeasure::space::{Endpoint, Interval};
use premeasure::{Antichain, CantorPoint, CantorSpace, Intervals, RationalLine, Space, Word};

pub fn q(s: &str) -> BigRational {
    BigRational::from_str(s).unwrap()
}

pub fn iv(a: &str, b: &str) -> Interval<BigRational> {
    Interval::bounded(q(a), q(b)).unwrap()
}

/// A region of the line from `(a, b)` string pairs.
pub fn line(parts: &[(&str, &str)]) -> Intervals<BigRational> {
    Intervals::from_intervals(parts.iter().map(|(a, b)| iv(a, b)).collect())
}

pub fn cyl(words: &str) -> Antichain {
    CantorSpace::canonical().parse_region(words).unwrap()
}

pub fn word(s: &str) -> Word {
    Word(s.chars().map(|c| c == '1').collect())
}

/// The figure configuration `V_1 = (0,2)`, `V_2 = (1,3)`, `V_3 = (9/4,11/4)`.
pub fn t1_space() -> RationalLine {
    RationalLine::with_prefix(vec![line(&[("0", "2")]), line(&[("1", "3")]), line(&[("9/4", "11/4")])]).unwrap()
}

/// The Cantor configuration `V_1 = 0`, `V_2 = 01`, `V_3 = 1`.
pub fn t2_space() -> CantorSpace {
    CantorSpace::with_prefix(vec![cyl("0"), cyl("01"), cyl("1")]).unwrap()
}

/// Ladder entries built level by level straight from the definition: every
/// tile, straddler and wide straddler in the window, each section sorted by
/// the distance of its midpoint from 1/2 with the left one first.
pub fn ladder_oracle(count: usize) -> Vec<(BigRational, BigRational)> {
    let mut out = Vec::new();
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut m = 0u32;
    while out.len() < count {
        let p = BigInt::from(3u64.pow(m));
        let r = 3 + i64::from(m / 8);
        let lo = BigRational::from_integer(BigInt::from(-r));
        let hi = BigRational::from_integer(BigInt::from(r + 1));
        for width in [1i64, 2, 4] {
            let mut section = Vec::new();
            let span = (2 * r + 1) * 3i64.pow(m);
            for k in -(r * 3i64.pow(m)) - 4..=(-(r * 3i64.pow(m)) + span + 4) {
                let a = BigRational::new(BigInt::from(k), p.clone());
                let b = BigRational::new(BigInt::from(k + width), p.clone());
                if a >= lo && b <= hi {
                    section.push((a, b));
                }
            }
            section.sort_by(|x, y| {
                let cx = (&x.0 + &x.1) / BigRational::from_integer(BigInt::from(2));
                let cy = (&y.0 + &y.1) / BigRational::from_integer(BigInt::from(2));
                let dx = (&cx - &half).abs();
                let dy = (&cy - &half).abs();
                dx.cmp(&dy).then(cx.cmp(&cy))
            });
            out.extend(section);
        }
        m += 1;
    }
    out.truncate(count);
    out
}

/// Endpoints of a line region as plain rational pairs, infinities mapped to
/// `None`.
pub fn parts(r: &Intervals<BigRational>) -> Vec<(Option<BigRational>, Option<BigRational>)> {
    r.parts()
        .iter()
        .map(|p| {
            let f = |e: &Endpoint<BigRational>| match e {
                Endpoint::At(x) => Some(x.clone()),
                _ => None,
            };
            (f(&p.lo), f(&p.hi))
        })
        .collect()
}

/// Open-set membership computed from endpoints alone.
pub fn in_open(r: &Intervals<BigRational>, x: &BigRational) -> bool {
    parts(r).iter().any(|(a, b)| a.as_ref().is_none_or(|a| a < x) && b.as_ref().is_none_or(|b| x < b))
}

pub fn in_closure(r: &Intervals<BigRational>, x: &BigRational) -> bool {
    parts(r).iter().any(|(a, b)| a.as_ref().is_none_or(|a| a <= x) && b.as_ref().is_none_or(|b| x <= b))
}

/// Every endpoint, every midpoint between consecutive endpoints, and a point
/// beyond each end.
pub fn probes(regions: &[&Intervals<BigRational>]) -> Vec<BigRational> {
    let mut ends: BTreeSet<BigRational> = BTreeSet::new();
    for r in regions {
        for (a, b) in parts(r) {
            ends.extend(a);
            ends.extend(b);
        }
    }
    ends.insert(BigRational::zero());
    let v: Vec<_> = ends.into_iter().collect();
    let two = BigRational::from_integer(BigInt::from(2));
    let mut out = v.clone();
    for w in v.windows(2) {
        out.push((&w[0] + &w[1]) / &two);
    }
    out.push(v[0].clone() - BigRational::one());
    out.push(v[v.len() - 1].clone() + BigRational::one());
    out.sort();
    out
}

/// Every sequence `w 0^ω` and `w 1^ω` for words of length `len`.
pub fn cantor_probes(len: usize) -> Vec<CantorPoint> {
    let mut out = Vec::new();
    for bits in 0..(1u32 << len) {
        let w = Word((0..len).map(|k| (bits >> (len - 1 - k)) & 1 == 1).collect());
        out.push(CantorPoint { head: w.clone(), tail: false });
        out.push(CantorPoint { head: w, tail: true });
    }
    out
}

/// Cylinder membership from prefixes alone.
pub fn in_cantor(r: &Antichain, p: &CantorPoint) -> bool {
    r.words().iter().any(|w| w.0.iter().enumerate().all(|(k, &b)| p.head.0.get(k).copied().unwrap_or(p.tail) == b))
}
