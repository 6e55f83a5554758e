//! The real line with a ternary ladder of rational intervals as its basis.
//!
//! Level `m` uses the step `s = 3^-m` and the window `[-R_m, R_m + 1]` with
//! `R_m = 3 + floor(m / 8)`. It lists, in order:
//!
//! 1. tiles `(k s, (k + 1) s)` inside the window,
//! 2. straddlers `((k - 1) s, (k + 1) s)` around interior grid points,
//! 3. wide straddlers `((k - 2) s, (k + 2) s)`.
//!
//! Each section is ordered by the distance of its midpoint from `1/2`, the
//! left one first on ties. Widths `s`, `2s` and `4s` never coincide across
//! levels, so the width of an interval identifies its level and section and
//! the enumeration is a bijection onto the ladder. The first ten entries are
//!
//! | index | interval |
//! |------:|----------|
//! | 1 | (0,1) |
//! | 2 | (-1,0) |
//! | 3 | (1,2) |
//! | 4 | (-2,-1) |
//! | 5 | (2,3) |
//! | 6 | (-3,-2) |
//! | 7 | (3,4) |
//! | 8 | (-1,1) |
//! | 9 | (0,2) |
//! | 10 | (-2,0) |

use std::collections::{BTreeSet, HashSet};
use std::marker::PhantomData;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::interval::{Endpoint, Interval, IntervalLocator, Intervals};
use super::{check_inside, BasisHandle, Injection, Space, SpaceError};
use crate::scalar::Scalar;

/// Deepest ladder level whose indices fit in a `u64`.
pub const MAX_LEVEL: u32 = 34;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Tile,
    Narrow,
    Wide,
}

const SECTIONS: [Section; 3] = [Section::Tile, Section::Narrow, Section::Wide];

impl Section {
    /// Half-width in steps for straddlers; tiles are handled separately.
    fn reach(self) -> i128 {
        match self {
            Section::Tile => 0,
            Section::Narrow => 1,
            Section::Wide => 2,
        }
    }
}

fn pow3(m: u32) -> i128 {
    3i128.pow(m)
}

fn radius(m: u32) -> i128 {
    3 + (m / 8) as i128
}

fn tile_count(m: u32) -> i128 {
    (2 * radius(m) + 1) * pow3(m)
}

fn section_bounds(m: u32, sec: Section) -> (i128, i128) {
    let p = pow3(m);
    let r = radius(m);
    match sec {
        Section::Tile => (-r * p, (r + 1) * p - 1),
        Section::Narrow => (-r * p + 1, (r + 1) * p - 1),
        Section::Wide => (-r * p + 2, (r + 1) * p - 2),
    }
}

fn section_offset(m: u32, sec: Section) -> i128 {
    let n = tile_count(m);
    match sec {
        Section::Tile => 0,
        Section::Narrow => n,
        Section::Wide => 2 * n - 1,
    }
}

fn level_size(m: u32) -> i128 {
    3 * tile_count(m) - 4
}

/// Number of canonical entries before level `m`.
fn level_base(m: u32) -> i128 {
    (0..m).map(level_size).sum()
}

/// Position of `k` within its section, counted from the middle outwards.
fn rank(m: u32, sec: Section, k: i128) -> i128 {
    let p = pow3(m);
    match sec {
        Section::Tile => {
            let t = 2 * k + 1 - p;
            if t == 0 {
                0
            } else {
                let d = t.abs() / 2;
                2 * d - 1 + i128::from(t > 0)
            }
        }
        _ => {
            let t = 2 * k - p;
            let d = (t.abs() - 1) / 2;
            2 * d + i128::from(t > 0)
        }
    }
}

fn unrank(m: u32, sec: Section, r: i128) -> i128 {
    let p = pow3(m);
    match sec {
        Section::Tile => {
            if r == 0 {
                (p - 1) / 2
            } else {
                let d = (r + 1) / 2;
                let t = if r % 2 == 0 { 2 * d } else { -2 * d };
                (t + p - 1) / 2
            }
        }
        _ => {
            let d = r / 2;
            let t = if r % 2 == 1 { 2 * d + 1 } else { -(2 * d + 1) };
            (t + p) / 2
        }
    }
}

/// Largest `k` on the left half of a section (ranks fall as `k` grows there).
fn left_end(m: u32) -> i128 {
    (pow3(m) - 1) / 2
}

fn canonical_index(m: u32, sec: Section, k: i128) -> u64 {
    (level_base(m) + section_offset(m, sec) + rank(m, sec, k) + 1) as u64
}

fn decode(c: u64) -> (u32, Section, i128) {
    assert!(c >= 1, "basis indices start at 1");
    let mut m = 0u32;
    let mut base = 0i128;
    let c = c as i128;
    loop {
        assert!(m <= MAX_LEVEL, "index {c} lies beyond the deepest supported level");
        let size = level_size(m);
        if c <= base + size {
            break;
        }
        base += size;
        m += 1;
    }
    let r = c - 1 - base;
    let n = tile_count(m);
    let (sec, r) = if r < n {
        (Section::Tile, r)
    } else if r < 2 * n - 1 {
        (Section::Narrow, r - n)
    } else {
        (Section::Wide, r - (2 * n - 1))
    };
    (m, sec, unrank(m, sec, r))
}

/// Endpoints `(lo, hi)` in units of `3^-m`.
fn grid_span(sec: Section, k: i128) -> (i128, i128) {
    match sec {
        Section::Tile => (k, k + 1),
        _ => (k - sec.reach(), k + sec.reach()),
    }
}

fn big_floor(x: &BigRational) -> i128 {
    x.floor().to_integer().to_i128().expect("grid coordinate fits in i128")
}

fn big_ceil(x: &BigRational) -> i128 {
    x.ceil().to_integer().to_i128().expect("grid coordinate fits in i128")
}

/// A finite bound of a region component, in grid units of level `m`, clamped
/// to a large sentinel for the infinities.
fn scaled(e: &Endpoint<BigRational>, p: i128, up: bool) -> i128 {
    match e {
        Endpoint::NegInf => i128::MIN / 4,
        Endpoint::PosInf => i128::MAX / 4,
        Endpoint::At(x) => {
            let v = x * BigRational::from_integer(BigInt::from(p));
            if up {
                big_ceil(&v)
            } else {
                big_floor(&v)
            }
        }
    }
}

/// The real line over an exact scalar `S`, optionally with an injected prefix
/// of basis intervals.
#[derive(Clone, Debug)]
pub struct Line<S> {
    inj: Arc<Injection<Intervals<S>>>,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> Default for Line<S> {
    fn default() -> Self {
        Self::canonical()
    }
}

impl<S: Scalar> Line<S> {
    pub fn canonical() -> Self {
        Line { inj: Arc::new(Injection { regions: Vec::new(), canonical: Vec::new() }), _scalar: PhantomData }
    }

    /// Overrides indices `1..=n` with the given intervals. Each must be one
    /// bounded open interval and no interval may repeat.
    pub fn with_prefix(prefix: Vec<Intervals<S>>) -> Result<Self, SpaceError> {
        let mut canonical = Vec::new();
        for (k, r) in prefix.iter().enumerate() {
            let [iv] = r.parts() else {
                return Err(SpaceError::NotABasisElement(r.to_string()));
            };
            if iv.lo.finite().is_none() || iv.hi.finite().is_none() || prefix[..k].contains(r) {
                return Err(SpaceError::NotABasisElement(r.to_string()));
            }
            if let Some(c) = ladder_index(r) {
                canonical.push(c);
            }
        }
        canonical.sort_unstable();
        Ok(Line { inj: Arc::new(Injection { regions: prefix, canonical }), _scalar: PhantomData })
    }

    pub fn prefix(&self) -> &[Intervals<S>] {
        &self.inj.regions
    }

    fn ladder_region(m: u32, sec: Section, k: i128) -> Intervals<S> {
        let p = pow3(m) as i64;
        let (a, b) = grid_span(sec, k);
        let iv = Interval::bounded(S::ratio(a as i64, p), S::ratio(b as i64, p)).expect("lo < hi");
        Intervals::single(iv)
    }

    /// The canonical position of `c` mapped through the injection, or `None`
    /// if the canonical entry was injected.
    fn overall(&self, c: u64) -> Option<u64> {
        self.inj.overall_index(c)
    }

    fn canonical_floor(&self, min_index: u64) -> u64 {
        if min_index <= self.inj.len() {
            1
        } else {
            self.inj.to_canonical(min_index)
        }
    }

    fn level_of(c: u64) -> u32 {
        decode(c).0
    }

    /// Smallest acceptable canonical index among `k` in `[k1, k2]` of one
    /// section with rank at least `r0`.
    fn best_in_range(
        &self,
        m: u32,
        sec: Section,
        k1: i128,
        k2: i128,
        r0: i128,
        skip: &mut dyn FnMut(u64) -> bool,
    ) -> Option<u64> {
        let (lo, hi) = section_bounds(m, sec);
        let (k1, k2) = (k1.max(lo), k2.min(hi));
        if k1 > k2 {
            return None;
        }
        let mid = left_end(m);
        let mut best: Option<u64> = None;
        // Left half: rank decreases as k grows.
        let (a, b) = (k1, k2.min(mid));
        if a <= b && rank(m, sec, a) >= r0 {
            let (mut l, mut r) = (a, b);
            while l < r {
                let c = l + (r - l + 1) / 2;
                if rank(m, sec, c) >= r0 {
                    l = c;
                } else {
                    r = c - 1;
                }
            }
            let mut k = l;
            while k >= a {
                let c = canonical_index(m, sec, k);
                if !skip(c) {
                    best = Some(c);
                    break;
                }
                k -= 1;
            }
        }
        // Right half: rank increases with k.
        let (a, b) = (k1.max(mid + 1), k2);
        if a <= b && rank(m, sec, b) >= r0 {
            let (mut l, mut r) = (a, b);
            while l < r {
                let c = l + (r - l) / 2;
                if rank(m, sec, c) >= r0 {
                    r = c;
                } else {
                    l = c + 1;
                }
            }
            let mut k = l;
            while k <= b {
                let c = canonical_index(m, sec, k);
                if best.is_some_and(|x| x < c) {
                    break;
                }
                if !skip(c) {
                    best = Some(best.map_or(c, |x| x.min(c)));
                    break;
                }
                k += 1;
            }
        }
        best
    }

    fn rank_floor(m: u32, sec: Section, c_min: u64) -> i128 {
        (c_min as i128 - 1 - level_base(m) - section_offset(m, sec)).max(0)
    }

    fn handle(&self, index: u64) -> BasisHandle<Intervals<S>> {
        self.enumerate(index)
    }
}

/// Canonical ladder index of a single interval, if it is on the ladder.
fn ladder_index<S: Scalar>(r: &Intervals<S>) -> Option<u64> {
    let [iv] = r.parts() else { return None };
    let lo = iv.lo.finite()?.to_big();
    let hi = iv.hi.finite()?.to_big();
    let w = &hi - &lo;
    let (a, b) = (w.numer().clone(), w.denom().clone());
    let sec = if a == BigInt::one() {
        Section::Tile
    } else if a == BigInt::from(2) {
        Section::Narrow
    } else if a == BigInt::from(4) {
        Section::Wide
    } else {
        return None;
    };
    let mut m = 0u32;
    let mut d = b;
    while d > BigInt::one() {
        if !(&d % 3u32).is_zero() {
            return None;
        }
        d /= 3u32;
        m += 1;
        if m > MAX_LEVEL {
            return None;
        }
    }
    let scaled = &lo * BigRational::from_integer(BigInt::from(pow3(m)));
    if !scaled.is_integer() {
        return None;
    }
    let k = scaled.to_integer().to_i128()? + sec.reach();
    let (klo, khi) = section_bounds(m, sec);
    if k < klo || k > khi {
        return None;
    }
    Some(canonical_index(m, sec, k))
}

impl<S: Scalar> Space for Line<S> {
    type Region = Intervals<S>;
    type Point = S;
    type Locator = IntervalLocator<S>;

    fn name(&self) -> &'static str {
        "rational-line"
    }

    fn empty(&self) -> Intervals<S> {
        Intervals::empty()
    }

    fn whole(&self) -> Intervals<S> {
        Intervals::whole()
    }

    fn is_empty(&self, a: &Intervals<S>) -> bool {
        a.is_empty()
    }

    fn meet(&self, a: &Intervals<S>, b: &Intervals<S>) -> Intervals<S> {
        a.meet(b)
    }

    fn join(&self, a: &Intervals<S>, b: &Intervals<S>) -> Intervals<S> {
        a.join(b)
    }

    fn join_all(&self, regions: Vec<Intervals<S>>) -> Intervals<S> {
        Intervals::from_intervals(regions.into_iter().flat_map(|r| r.parts().to_vec()).collect())
    }

    fn exterior(&self, a: &Intervals<S>) -> Intervals<S> {
        a.exterior()
    }

    fn boundary_of(&self, a: &Intervals<S>) -> BTreeSet<S> {
        a.boundary()
    }

    fn contains_point(&self, a: &Intervals<S>, p: &S) -> bool {
        a.contains(p)
    }

    fn closure_strictly_inside(&self, a: &Intervals<S>, b: &Intervals<S>) -> bool {
        a.closure_strictly_inside(b)
    }

    fn enumerate(&self, index: u64) -> BasisHandle<Intervals<S>> {
        assert!(index >= 1, "basis indices start at 1");
        if index <= self.inj.len() {
            return BasisHandle { index, region: self.inj.regions[index as usize - 1].clone() };
        }
        let (m, sec, k) = decode(self.inj.to_canonical(index));
        BasisHandle { index, region: Self::ladder_region(m, sec, k) }
    }

    fn index_of(&self, region: &Intervals<S>) -> Result<u64, SpaceError> {
        if let Some(p) = self.inj.position(region) {
            return Ok(p);
        }
        ladder_index(region)
            .and_then(|c| self.overall(c))
            .ok_or_else(|| SpaceError::NotABasisElement(region.to_string()))
    }

    fn find_hole(
        &self,
        u: &Intervals<S>,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<BasisHandle<Intervals<S>>, SpaceError> {
        if u.is_empty() {
            return Err(SpaceError::EmptyRegion);
        }
        let min_index = min_index.max(1);
        let limit = min_index.saturating_add(scan_cap);
        for index in min_index..=self.inj.len() {
            if index >= limit {
                break;
            }
            let h = self.handle(index);
            if !forbidden.contains(&index) && h.region.closure_strictly_inside(u) {
                return Ok(h);
            }
        }
        let c_min = self.canonical_floor(min_index);
        let big: Vec<(Endpoint<BigRational>, Endpoint<BigRational>)> =
            u.parts().iter().map(|iv| (big_end(&iv.lo), big_end(&iv.hi))).collect();
        let mut skip = |c: u64| self.overall(c).is_none_or(|i| forbidden.contains(&i));
        let mut m = Self::level_of(c_min);
        while m <= MAX_LEVEL {
            // An entry's overall position is never below its canonical index.
            if level_base(m) as u64 + 1 >= limit {
                break;
            }
            let p = pow3(m);
            let mut best: Option<u64> = None;
            for (lo, hi) in &big {
                let flo = scaled(lo, p, false);
                let chi = scaled(hi, p, true);
                for sec in SECTIONS {
                    let (k1, k2) = match sec {
                        Section::Tile => (flo + 1, chi - 2),
                        _ => (flo + 1 + sec.reach(), chi - 1 - sec.reach()),
                    };
                    let r0 = Self::rank_floor(m, sec, c_min);
                    if let Some(c) = self.best_in_range(m, sec, k1, k2, r0, &mut skip) {
                        best = Some(best.map_or(c, |b| b.min(c)));
                    }
                }
            }
            if let Some(c) = best {
                let index = self.overall(c).expect("skip filters injected entries");
                if index >= limit {
                    break;
                }
                return Ok(self.handle(index));
            }
            m += 1;
        }
        Err(SpaceError::ScanExhausted { min_index, scan_cap })
    }

    fn finite_subcover(
        &self,
        k: &BTreeSet<S>,
        constraint: &Intervals<S>,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<Vec<BasisHandle<Intervals<S>>>, SpaceError> {
        check_inside(self, k, constraint)?;
        let min_index = min_index.max(1);
        let limit = min_index.saturating_add(scan_cap);
        let c_min = self.canonical_floor(min_index);
        let mut chosen: Vec<BasisHandle<Intervals<S>>> = Vec::new();
        for x in k {
            if chosen.iter().any(|h| h.region.contains(x)) {
                continue;
            }
            let comp = &constraint.parts()[constraint.component_of(x).expect("checked above")];
            let taken: HashSet<u64> = chosen.iter().map(|h| h.index).collect();
            let admissible = |h: &BasisHandle<Intervals<S>>| {
                !forbidden.contains(&h.index)
                    && !taken.contains(&h.index)
                    && h.region.contains(x)
                    && h.region.parts().iter().all(|iv| comp.lo <= iv.lo && iv.hi <= comp.hi)
            };
            let mut found = None;
            for index in min_index..=self.inj.len().min(limit.saturating_sub(1)) {
                let h = self.handle(index);
                if admissible(&h) {
                    found = Some(h);
                    break;
                }
            }
            if found.is_none() {
                found = self.cover_point_on_ladder(x, c_min, limit, &admissible);
            }
            match found {
                Some(h) => chosen.push(h),
                None => return Err(SpaceError::ScanExhausted { min_index, scan_cap }),
            }
        }
        chosen.sort_by_key(|h| h.index);
        Ok(chosen)
    }

    fn format_region(&self, a: &Intervals<S>) -> String {
        format_intervals(a)
    }

    fn format_point(&self, p: &S) -> String {
        p.to_string()
    }

    fn parse_region(&self, s: &str) -> Result<Intervals<S>, SpaceError> {
        parse_intervals(s)
    }
}

impl<S: Scalar> Line<S> {
    fn cover_point_on_ladder(
        &self,
        x: &S,
        c_min: u64,
        limit: u64,
        admissible: &dyn Fn(&BasisHandle<Intervals<S>>) -> bool,
    ) -> Option<BasisHandle<Intervals<S>>> {
        let xb = x.to_big();
        let mut m = Self::level_of(c_min);
        while m <= MAX_LEVEL {
            if level_base(m) as u64 + 1 >= limit {
                return None;
            }
            let p = pow3(m);
            let v = &xb * BigRational::from_integer(BigInt::from(p));
            let on_grid = v.is_integer();
            let f = big_floor(&v);
            let mut best: Option<(u64, u64)> = None;
            for sec in SECTIONS {
                let ks: Vec<i128> = match (sec, on_grid) {
                    (Section::Tile, true) => Vec::new(),
                    (Section::Tile, false) => vec![f],
                    (_, true) => ((f - sec.reach() + 1)..=(f + sec.reach() - 1)).collect(),
                    (_, false) => ((f - sec.reach() + 1)..=(f + sec.reach())).collect(),
                };
                let (lo, hi) = section_bounds(m, sec);
                for kk in ks {
                    if kk < lo || kk > hi {
                        continue;
                    }
                    let c = canonical_index(m, sec, kk);
                    if c < c_min {
                        continue;
                    }
                    let Some(index) = self.overall(c) else { continue };
                    if index >= limit || best.is_some_and(|(b, _)| b <= c) {
                        continue;
                    }
                    let h = BasisHandle { index, region: Self::ladder_region(m, sec, kk) };
                    if admissible(&h) {
                        best = Some((c, index));
                    }
                }
            }
            if let Some((_, index)) = best {
                return Some(self.handle(index));
            }
            m += 1;
        }
        None
    }
}

fn big_end<S: Scalar>(e: &Endpoint<S>) -> Endpoint<BigRational> {
    match e {
        Endpoint::NegInf => Endpoint::NegInf,
        Endpoint::At(x) => Endpoint::At(x.to_big()),
        Endpoint::PosInf => Endpoint::PosInf,
    }
}

pub fn format_intervals<S: Scalar>(a: &Intervals<S>) -> String {
    if a.is_empty() {
        return "∅".to_string();
    }
    a.parts().iter().map(|p| p.to_string()).collect::<Vec<_>>().join("∪")
}

/// Parses `(a,b)∪(c,d)`; `U` may stand for `∪`, and `∅` or `{}` is empty.
pub fn parse_intervals<S: Scalar>(s: &str) -> Result<Intervals<S>, SpaceError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() || t == "∅" || t == "{}" {
        return Ok(Intervals::empty());
    }
    let bad = || SpaceError::Parse(s.to_string());
    let mut parts = Vec::new();
    for piece in t.replace('∪', "U").split('U') {
        let inner = piece.strip_prefix('(').and_then(|p| p.strip_suffix(')')).ok_or_else(bad)?;
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let end = |x: &str| -> Result<Endpoint<S>, SpaceError> {
            match x {
                "-inf" => Ok(Endpoint::NegInf),
                "inf" | "+inf" => Ok(Endpoint::PosInf),
                _ => S::parse(x).map(Endpoint::At).ok_or_else(bad),
            }
        };
        parts.push(Interval::new(end(a)?, end(b)?).ok_or_else(bad)?);
    }
    let joined = Intervals::from_intervals(parts.clone());
    if joined.parts().len() != parts.len() {
        return Err(bad());
    }
    Ok(joined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    type L = Line<Rational64>;

    fn r(s: &str) -> Intervals<Rational64> {
        parse_intervals(s).unwrap()
    }

    #[test]
    fn ranks_invert() {
        for m in 0..4 {
            for sec in SECTIONS {
                let (lo, hi) = section_bounds(m, sec);
                let mut seen: Vec<i128> = (lo..=hi).map(|k| rank(m, sec, k)).collect();
                for k in lo..=hi {
                    assert_eq!(unrank(m, sec, rank(m, sec, k)), k);
                }
                seen.sort();
                assert_eq!(seen, (0..=(hi - lo)).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn published_table() {
        let line = L::canonical();
        let got: Vec<String> = (1..=10).map(|i| line.format_region(&line.enumerate(i).region)).collect();
        let want = ["(0,1)", "(-1,0)", "(1,2)", "(-2,-1)", "(2,3)", "(-3,-2)", "(3,4)", "(-1,1)", "(0,2)", "(-2,0)"];
        assert_eq!(got, want);
    }

    #[test]
    fn round_trip_with_injection() {
        let line = L::with_prefix(vec![r("(0,2)"), r("(1,3)"), r("(9/4,11/4)")]).unwrap();
        assert_eq!(line.enumerate(3).region, r("(9/4,11/4)"));
        assert_eq!(line.enumerate(4).region, r("(0,1)"));
        for i in 1..3000 {
            assert_eq!(line.index_of(&line.enumerate(i).region), Ok(i));
        }
        assert!(matches!(line.index_of(&r("(0,1)U(2,3)")), Err(SpaceError::NotABasisElement(_))));
        assert!(matches!(line.index_of(&r("(0,1/5)")), Err(SpaceError::NotABasisElement(_))));
    }
}
