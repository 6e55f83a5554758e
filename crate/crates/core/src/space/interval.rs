//! Finite unions of open intervals over an ordered scalar, in canonical form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::Locator;

/// An interval endpoint: a finite value or one of the two infinities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint<S> {
    NegInf,
    At(S),
    PosInf,
}

impl<S> Endpoint<S> {
    pub fn finite(&self) -> Option<&S> {
        match self {
            Endpoint::At(x) => Some(x),
            _ => None,
        }
    }
}

impl<S: fmt::Display> fmt::Display for Endpoint<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::NegInf => write!(f, "-inf"),
            Endpoint::At(x) => write!(f, "{x}"),
            Endpoint::PosInf => write!(f, "inf"),
        }
    }
}

/// The open interval `(lo, hi)` with `lo < hi`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval<S> {
    pub lo: Endpoint<S>,
    pub hi: Endpoint<S>,
}

impl<S: Ord> Interval<S> {
    pub fn new(lo: Endpoint<S>, hi: Endpoint<S>) -> Option<Self> {
        (lo < hi).then_some(Interval { lo, hi })
    }

    pub fn bounded(lo: S, hi: S) -> Option<Self> {
        Self::new(Endpoint::At(lo), Endpoint::At(hi))
    }

    pub fn contains(&self, x: &S) -> bool {
        let lo_ok = match &self.lo {
            Endpoint::NegInf => true,
            Endpoint::At(a) => a < x,
            Endpoint::PosInf => false,
        };
        let hi_ok = match &self.hi {
            Endpoint::PosInf => true,
            Endpoint::At(b) => x < b,
            Endpoint::NegInf => false,
        };
        lo_ok && hi_ok
    }
}

impl<S: fmt::Display> fmt::Display for Interval<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

/// A finite union of open intervals. Components are sorted, pairwise disjoint
/// and never overlap; two components may share an endpoint, which then does
/// not belong to the set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Intervals<S> {
    parts: Vec<Interval<S>>,
}

impl<S> Default for Intervals<S> {
    fn default() -> Self {
        Intervals { parts: Vec::new() }
    }
}

impl<S: Ord + Clone> Intervals<S> {
    pub fn empty() -> Self {
        Intervals { parts: Vec::new() }
    }

    pub fn whole() -> Self {
        Intervals { parts: vec![Interval { lo: Endpoint::NegInf, hi: Endpoint::PosInf }] }
    }

    pub fn single(iv: Interval<S>) -> Self {
        Intervals { parts: vec![iv] }
    }

    /// Builds the union of arbitrary intervals.
    pub fn from_intervals(mut ivs: Vec<Interval<S>>) -> Self {
        ivs.sort();
        let mut parts: Vec<Interval<S>> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match parts.last_mut() {
                Some(last) if iv.lo < last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => parts.push(iv),
            }
        }
        Intervals { parts }
    }

    pub fn parts(&self) -> &[Interval<S>] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn meet(&self, other: &Self) -> Self {
        let (a, b) = (&self.parts, &other.parts);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            let lo = (&a[i].lo).max(&b[j].lo);
            let hi = (&a[i].hi).min(&b[j].hi);
            if lo < hi {
                out.push(Interval { lo: lo.clone(), hi: hi.clone() });
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Intervals { parts: out }
    }

    pub fn join(&self, other: &Self) -> Self {
        let mut all = Vec::with_capacity(self.parts.len() + other.parts.len());
        all.extend(self.parts.iter().cloned());
        all.extend(other.parts.iter().cloned());
        Self::from_intervals(all)
    }

    /// The complement of the closure.
    pub fn exterior(&self) -> Self {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut cursor = Endpoint::NegInf;
        for p in &self.parts {
            if cursor < p.lo {
                out.push(Interval { lo: cursor, hi: p.lo.clone() });
            }
            cursor = p.hi.clone();
        }
        if cursor < Endpoint::PosInf {
            out.push(Interval { lo: cursor, hi: Endpoint::PosInf });
        }
        Intervals { parts: out }
    }

    /// Finite endpoints of the components.
    pub fn boundary(&self) -> BTreeSet<S> {
        let mut out = BTreeSet::new();
        for p in &self.parts {
            if let Endpoint::At(x) = &p.lo {
                out.insert(x.clone());
            }
            if let Endpoint::At(x) = &p.hi {
                out.insert(x.clone());
            }
        }
        out
    }

    /// Index of the component containing `x`.
    pub fn component_of(&self, x: &S) -> Option<usize> {
        let probe = Endpoint::At(x.clone());
        let k = self.parts.partition_point(|p| p.lo < probe);
        (k > 0 && self.parts[k - 1].contains(x)).then(|| k - 1)
    }

    pub fn contains(&self, x: &S) -> bool {
        self.component_of(x).is_some()
    }

    pub fn closure_strictly_inside(&self, b: &Self) -> bool {
        if self.parts.is_empty() {
            return !b.is_empty();
        }
        for p in &self.parts {
            // The closure [lo, hi] must sit in one component of b.
            let k = b.parts.partition_point(|q| q.lo <= p.lo);
            if k == 0 {
                return false;
            }
            let q = &b.parts[k - 1];
            let lo_ok = q.lo < p.lo || p.lo == Endpoint::NegInf;
            let hi_ok = p.hi < q.hi || (p.hi == Endpoint::PosInf && q.hi == Endpoint::PosInf);
            if !(lo_ok && hi_ok) {
                return false;
            }
        }
        !b.meet(&self.exterior()).is_empty()
    }
}

impl<S: fmt::Display> fmt::Display for Intervals<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        for (k, p) in self.parts.iter().enumerate() {
            if k > 0 {
                write!(f, "U")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Component index keyed by left endpoint.
#[derive(Clone, Debug)]
pub struct IntervalLocator<S> {
    by_lo: BTreeMap<Endpoint<S>, (Endpoint<S>, usize)>,
}

impl<S> Default for IntervalLocator<S> {
    fn default() -> Self {
        IntervalLocator { by_lo: BTreeMap::new() }
    }
}

impl<S: Ord + Clone + Send + Sync> Locator<Intervals<S>> for IntervalLocator<S> {
    fn insert(&mut self, region: &Intervals<S>, id: usize) {
        for p in region.parts() {
            self.by_lo.insert(p.lo.clone(), (p.hi.clone(), id));
        }
    }

    fn remove(&mut self, region: &Intervals<S>, id: usize) {
        for p in region.parts() {
            if let Some((_, owner)) = self.by_lo.get(&p.lo) {
                if *owner == id {
                    self.by_lo.remove(&p.lo);
                }
            }
        }
    }

    fn query(&self, region: &Intervals<S>, out: &mut Vec<usize>) {
        for p in region.parts() {
            for (_, (hi, id)) in self.by_lo.range(..p.hi.clone()).rev() {
                if *hi <= p.lo {
                    break;
                }
                out.push(*id);
            }
        }
    }
}
