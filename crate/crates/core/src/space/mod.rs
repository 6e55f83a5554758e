//! Spaces presented as an enumerated basis of regular open sets with an exact
//! region algebra.

pub mod cantor;
pub mod interval;
pub mod line;

use std::collections::{BTreeSet, HashSet};
use std::fmt::Debug;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

pub use cantor::{Antichain, CantorPoint, CantorSpace, Word};
pub use interval::{Endpoint, Interval, Intervals};
pub use line::Line;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpaceError {
    #[error("region {0} is not a single basis element")]
    NotABasisElement(String),
    #[error("cannot bore a hole into the empty region")]
    EmptyRegion,
    #[error("no admissible basis set found within {scan_cap} indices after {min_index}")]
    ScanExhausted { min_index: u64, scan_cap: u64 },
    #[error("point {point} is not inside the constraint region")]
    InfeasibleCover { point: String },
    #[error("cannot parse region literal `{0}`")]
    Parse(String),
}

/// A basis element together with its position in the enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BasisHandle<R> {
    pub index: u64,
    pub region: R,
}

/// Maps region components to cell ids so a stage can find the cells that
/// meet a region without scanning all of them.
pub trait Locator<R>: Default + Send + Sync {
    fn insert(&mut self, region: &R, id: usize);
    fn remove(&mut self, region: &R, id: usize);
    /// Appends the ids of cells whose region may meet `region`; may repeat ids.
    fn query(&self, region: &R, out: &mut Vec<usize>);
}

/// A second countable, locally compact, non-atomic Hausdorff space given by
/// an enumerated basis of nonempty regular open sets with compact closure.
pub trait Space: Clone + Send + Sync + 'static {
    type Region: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static;
    type Point: Clone + Eq + Ord + Hash + Debug + Send + Sync + 'static;
    type Locator: Locator<Self::Region>;

    fn name(&self) -> &'static str;

    fn empty(&self) -> Self::Region;
    fn whole(&self) -> Self::Region;
    fn is_empty(&self, a: &Self::Region) -> bool;
    fn meet(&self, a: &Self::Region, b: &Self::Region) -> Self::Region;
    fn join(&self, a: &Self::Region, b: &Self::Region) -> Self::Region;
    /// The interior of the complement.
    fn exterior(&self, a: &Self::Region) -> Self::Region;
    /// The topological boundary of an arbitrary canonical region.
    fn boundary_of(&self, a: &Self::Region) -> BTreeSet<Self::Point>;
    fn contains_point(&self, a: &Self::Region, p: &Self::Point) -> bool;
    /// True iff the closure of `a` lies in `b` and `b` minus that closure is
    /// nonempty.
    fn closure_strictly_inside(&self, a: &Self::Region, b: &Self::Region) -> bool;

    fn join_all(&self, regions: Vec<Self::Region>) -> Self::Region {
        regions.iter().fold(self.empty(), |acc, r| self.join(&acc, r))
    }

    fn subset(&self, a: &Self::Region, b: &Self::Region) -> bool {
        &self.meet(a, b) == a
    }

    fn meet_exterior(&self, a: &Self::Region, v: &BasisHandle<Self::Region>) -> Self::Region {
        self.meet(a, &self.exterior(&v.region))
    }

    /// The interior of the closure.
    fn regularize(&self, a: &Self::Region) -> Self::Region {
        self.exterior(&self.exterior(a))
    }

    fn boundary(&self, v: &BasisHandle<Self::Region>) -> BTreeSet<Self::Point> {
        self.boundary_of(&v.region)
    }

    /// The basis element at a 1-based position.
    ///
    /// # Panics
    /// Panics if `index` is 0 or beyond the largest representable level.
    fn enumerate(&self, index: u64) -> BasisHandle<Self::Region>;

    fn index_of(&self, region: &Self::Region) -> Result<u64, SpaceError>;

    /// Smallest index `>= min_index`, not forbidden, whose region has closure
    /// strictly inside `u`.
    fn find_hole(
        &self,
        u: &Self::Region,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<BasisHandle<Self::Region>, SpaceError> {
        self.scan_hole(u, forbidden, min_index, scan_cap)
    }

    /// Linear scan over the enumeration; the reference for `find_hole`.
    fn scan_hole(
        &self,
        u: &Self::Region,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<BasisHandle<Self::Region>, SpaceError> {
        if self.is_empty(u) {
            return Err(SpaceError::EmptyRegion);
        }
        let start = min_index.max(1);
        for index in start..start.saturating_add(scan_cap) {
            if forbidden.contains(&index) {
                continue;
            }
            let h = self.enumerate(index);
            if self.closure_strictly_inside(&h.region, u) {
                return Ok(h);
            }
        }
        Err(SpaceError::ScanExhausted { min_index: start, scan_cap })
    }

    /// Covers the points of `k` by basis sets inside `constraint`. Points are
    /// handled in ascending order; each point not yet covered receives the
    /// smallest admissible index containing it.
    fn finite_subcover(
        &self,
        k: &BTreeSet<Self::Point>,
        constraint: &Self::Region,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<Vec<BasisHandle<Self::Region>>, SpaceError> {
        self.scan_subcover(k, constraint, forbidden, min_index, scan_cap)
    }

    /// Linear scan over the enumeration; the reference for `finite_subcover`.
    fn scan_subcover(
        &self,
        k: &BTreeSet<Self::Point>,
        constraint: &Self::Region,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<Vec<BasisHandle<Self::Region>>, SpaceError> {
        check_inside(self, k, constraint)?;
        let start = min_index.max(1);
        let mut chosen: Vec<BasisHandle<Self::Region>> = Vec::new();
        for p in k {
            if chosen.iter().any(|h| self.contains_point(&h.region, p)) {
                continue;
            }
            let mut found = None;
            for index in start..start.saturating_add(scan_cap) {
                if forbidden.contains(&index) || chosen.iter().any(|h| h.index == index) {
                    continue;
                }
                let h = self.enumerate(index);
                if self.contains_point(&h.region, p) && self.subset(&h.region, constraint) {
                    found = Some(h);
                    break;
                }
            }
            match found {
                Some(h) => chosen.push(h),
                None => return Err(SpaceError::ScanExhausted { min_index: start, scan_cap }),
            }
        }
        chosen.sort_by_key(|h| h.index);
        Ok(chosen)
    }

    fn format_region(&self, a: &Self::Region) -> String;
    fn format_point(&self, p: &Self::Point) -> String;
    fn parse_region(&self, s: &str) -> Result<Self::Region, SpaceError>;
}

pub(crate) fn check_inside<X: Space>(
    space: &X,
    k: &BTreeSet<X::Point>,
    constraint: &X::Region,
) -> Result<(), SpaceError> {
    for p in k {
        if !space.contains_point(constraint, p) {
            return Err(SpaceError::InfeasibleCover { point: space.format_point(p) });
        }
    }
    Ok(())
}

/// Bookkeeping for an injected prefix: indices `1..=n` are the injected
/// regions, later indices run through the canonical enumeration with the
/// injected members removed.
#[derive(Clone, Debug, Default)]
pub(crate) struct Injection<R> {
    pub regions: Vec<R>,
    /// Canonical indices of injected regions that also belong to the
    /// canonical family, sorted.
    pub canonical: Vec<u64>,
}

impl<R: PartialEq> Injection<R> {
    pub fn len(&self) -> u64 {
        self.regions.len() as u64
    }

    /// Canonical index that sits at overall position `index > n`.
    pub fn to_canonical(&self, index: u64) -> u64 {
        let r = index - self.len();
        let mut c = r;
        loop {
            let below = self.canonical.partition_point(|&x| x <= c) as u64;
            let next = r + below;
            if next == c {
                return c;
            }
            c = next;
        }
    }

    /// Overall position of canonical index `c`, or `None` when `c` was
    /// injected (and so lives in the prefix).
    pub fn overall_index(&self, c: u64) -> Option<u64> {
        if self.canonical.binary_search(&c).is_ok() {
            return None;
        }
        let below = self.canonical.partition_point(|&x| x < c) as u64;
        Some(self.len() + c - below)
    }

    pub fn position(&self, region: &R) -> Option<u64> {
        self.regions.iter().position(|r| r == region).map(|p| p as u64 + 1)
    }
}
