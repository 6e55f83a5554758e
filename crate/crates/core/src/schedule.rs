//! The boundary-annihilating rearrangement of the basis: blocks
//! `R_{i,j} = (F_{i,j}, G_{i,j}, H_{i,j})` laid out along diagonals, and the
//! stage trace of the permuted insertion stream.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::dyadic::DyadicMass;
use crate::ring::{init_stage, RingElement, RingError, Stage, StepReport};
use crate::space::{BasisHandle, Space, SpaceError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("block ({i},{j}) was not built")]
    UnknownBlock { i: u64, j: u64 },
    #[error("cover sets of block ({i},{j}) are inserted by stage {needed}, got stage {available}")]
    StageTooEarly { i: u64, j: u64, needed: usize, available: usize },
    #[error("stage {requested} outside a trace of length {len}")]
    StageOutOfRange { requested: usize, len: usize },
    #[error("depth must be at least 1")]
    ZeroDepth,
}

/// One block: hole indices `F`, cover indices `G` and remainder indices `H`,
/// which together fill the index range `(start, g]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScheduleBlock {
    pub i: u64,
    pub j: u64,
    #[serde(rename = "F")]
    pub holes: Vec<u64>,
    #[serde(rename = "G")]
    pub covers: Vec<u64>,
    #[serde(rename = "H")]
    pub remainder: Vec<u64>,
    pub g: u64,
    #[serde(skip)]
    pub start: u64,
}

impl ScheduleBlock {
    /// Insertion order inside the block: holes, then covers, then the rest,
    /// each ascending.
    pub fn insertion_order(&self) -> impl Iterator<Item = u64> + '_ {
        self.holes.iter().chain(&self.covers).chain(&self.remainder).copied()
    }

    /// Stream position of the last cover set.
    pub fn covers_inserted_by(&self) -> usize {
        (self.start as usize) + self.holes.len() + self.covers.len()
    }

    /// Stream position of the last hole.
    pub fn holes_inserted_by(&self) -> usize {
        (self.start as usize) + self.holes.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub depth: usize,
    pub blocks: Vec<ScheduleBlock>,
}

impl Schedule {
    pub fn block(&self, i: u64, j: u64) -> Result<&ScheduleBlock, ScheduleError> {
        self.blocks.iter().find(|b| b.i == i && b.j == j).ok_or(ScheduleError::UnknownBlock { i, j })
    }

    /// The permutation `π` as the flattened list of basis indices.
    pub fn stream(&self) -> Vec<u64> {
        self.blocks.iter().flat_map(|b| b.insertion_order()).collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.g as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `∪𝒢_{i,j}` as a region.
    pub fn cover_region<X: Space>(&self, space: &X, i: u64, j: u64) -> Result<X::Region, ScheduleError> {
        let b = self.block(i, j)?;
        Ok(space.join_all(b.covers.iter().map(|&k| space.enumerate(k).region).collect()))
    }
}

/// Diagonal order: by `i + j`, then by `j`.
pub fn diagonal_blocks(depth: usize) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for d in 2..=(depth as u64 + 1) {
        for j in 1..d {
            out.push((d - j, j));
        }
    }
    out
}

/// A run of stages kept as snapshots plus the insertion stream; stages
/// between snapshots are recomputed on demand.
#[derive(Clone, Debug)]
pub struct Trace<X: Space> {
    space: X,
    stream: Vec<u64>,
    checkpoints: Vec<Stage<X>>,
}

impl<X: Space> Trace<X> {
    /// Runs the handles in order, keeping every `every`-th stage and the last.
    pub fn record(space: &X, handles: &[BasisHandle<X::Region>], every: usize) -> Result<Self, RingError> {
        let mut trace = Trace { space: space.clone(), stream: Vec::new(), checkpoints: Vec::new() };
        let mut stage: Option<Stage<X>> = None;
        for (n, h) in handles.iter().enumerate() {
            match stage.as_mut() {
                None => stage = Some(init_stage(space, h)?),
                Some(s) => {
                    s.refine_in_place(h)?;
                }
            }
            trace.stream.push(h.index);
            if (n + 1) % every.max(1) == 0 || n + 1 == handles.len() {
                trace.checkpoints.push(stage.clone().expect("set above"));
            }
        }
        Ok(trace)
    }

    pub fn space(&self) -> &X {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.stream.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream.is_empty()
    }

    pub fn stream(&self) -> &[u64] {
        &self.stream
    }

    pub fn handle_at(&self, pos: usize) -> BasisHandle<X::Region> {
        self.space.enumerate(self.stream[pos - 1])
    }

    pub fn checkpoints(&self) -> &[Stage<X>] {
        &self.checkpoints
    }

    pub fn final_stage(&self) -> Option<&Stage<X>> {
        self.checkpoints.last()
    }

    /// The stage after `n` insertions.
    pub fn stage(&self, n: usize) -> Result<Stage<X>, ScheduleError> {
        if n == 0 || n > self.len() {
            return Err(ScheduleError::StageOutOfRange { requested: n, len: self.len() });
        }
        let k = self.checkpoints.partition_point(|s| s.index() <= n);
        let mut stage = match k {
            0 => init_stage(&self.space, &self.handle_at(1))?,
            _ => self.checkpoints[k - 1].clone(),
        };
        while stage.index() < n {
            stage.refine_in_place(&self.handle_at(stage.index() + 1))?;
        }
        Ok(stage)
    }

    /// Calls `visit` on every stage from `from` to the end, in order.
    pub fn walk(
        &self,
        from: usize,
        mut visit: impl FnMut(&Stage<X>) -> Result<(), ScheduleError>,
    ) -> Result<(), ScheduleError> {
        let mut stage = self.stage(from)?;
        visit(&stage)?;
        while stage.index() < self.len() {
            stage.refine_in_place(&self.handle_at(stage.index() + 1))?;
            visit(&stage)?;
        }
        Ok(())
    }
}

pub fn build_schedule<X: Space>(space: &X, depth: usize, scan_cap: u64) -> Result<(Schedule, Trace<X>), ScheduleError> {
    build_schedule_with(space, depth, scan_cap, |_, _| {})
}

/// Builds the first `depth` complete diagonals of blocks. `observe` sees each
/// stage right after it is refined, together with the step report.
pub fn build_schedule_with<X: Space>(
    space: &X,
    depth: usize,
    scan_cap: u64,
    mut observe: impl FnMut(&Stage<X>, &StepReport),
) -> Result<(Schedule, Trace<X>), ScheduleError> {
    if depth == 0 {
        return Err(ScheduleError::ZeroDepth);
    }
    let mut blocks: Vec<ScheduleBlock> = Vec::new();
    let mut trace = Trace { space: space.clone(), stream: Vec::new(), checkpoints: Vec::new() };
    let mut stage: Option<Stage<X>> = None;
    let mut prev_g = 0u64;
    for (i, j) in diagonal_blocks(depth) {
        let boundary = space.boundary(&space.enumerate(i));
        let mut holes = Vec::new();
        let (constraint, taken) = if j == 1 {
            (space.whole(), HashSet::new())
        } else {
            let current = stage.as_ref().expect("block (1,1) precedes every later block");
            let mut cells: Vec<&X::Region> = current.cells().iter().map(|c| &c.region).collect();
            cells.sort();
            let mut taken = HashSet::new();
            let mut hole_regions = Vec::with_capacity(cells.len());
            for region in cells {
                let h = space.find_hole(region, &taken, prev_g + 1, scan_cap)?;
                taken.insert(h.index);
                holes.push(h.index);
                hole_regions.push(h.region);
            }
            holes.sort_unstable();
            let previous = blocks.iter().find(|b| b.i == i && b.j == j - 1).expect("block (i,j-1) precedes (i,j)");
            let prev_cover = space.join_all(previous.covers.iter().map(|&k| space.enumerate(k).region).collect());
            let relevant = hole_regions.into_iter().filter(|r| !space.is_empty(&space.meet(r, &prev_cover)));
            (space.meet(&prev_cover, &space.exterior(&space.join_all(relevant.collect()))), taken)
        };
        let covers: Vec<u64> = space
            .finite_subcover(&boundary, &constraint, &taken, prev_g + 1, scan_cap)?
            .into_iter()
            .map(|h| h.index)
            .collect();
        let mut g = prev_g;
        g = g.max(holes.last().copied().unwrap_or(0)).max(covers.iter().copied().max().unwrap_or(0));
        if j == 1 {
            g = g.max(i);
        }
        let used: BTreeSet<u64> = holes.iter().chain(&covers).copied().collect();
        let remainder: Vec<u64> = (prev_g + 1..=g).filter(|k| !used.contains(k)).collect();
        let block = ScheduleBlock { i, j, holes, covers, remainder, g, start: prev_g };
        for index in block.insertion_order() {
            let h = space.enumerate(index);
            match stage.as_mut() {
                None => {
                    let s = init_stage(space, &h)?;
                    let report = StepReport {
                        position: 1,
                        basis_index: index,
                        splits: Vec::new(),
                        persisted_inside: 0,
                        new_region: Some(s.total_mass().clone()),
                        total_before: DyadicMass::zero(),
                        total_after: s.total_mass().clone(),
                    };
                    observe(&s, &report);
                    stage = Some(s);
                }
                Some(s) => {
                    let report = s.refine_in_place(&h)?;
                    observe(s, &report);
                }
            }
            trace.stream.push(index);
        }
        if let Some(s) = &stage {
            if trace.checkpoints.last().is_none_or(|c| c.index() < s.index()) {
                trace.checkpoints.push(s.clone());
            }
        }
        prev_g = g;
        blocks.push(block);
    }
    Ok((Schedule { depth, blocks }, trace))
}

/// `∪𝒢_{i,j}` decomposed at `stage`.
pub fn cover_union<X: Space>(
    schedule: &Schedule,
    i: u64,
    j: u64,
    stage: &Stage<X>,
) -> Result<RingElement<X::Point>, ScheduleError> {
    let b = schedule.block(i, j)?;
    let needed = b.covers_inserted_by();
    if stage.index() < needed {
        return Err(ScheduleError::StageTooEarly { i, j, needed, available: stage.index() });
    }
    let region = schedule.cover_region(stage.space(), i, j)?;
    Ok(stage.decompose(&region)?)
}

pub fn permuted_stream<X: Space>(schedule: &Schedule, space: &X) -> Vec<BasisHandle<X::Region>> {
    schedule.stream().into_iter().map(|k| space.enumerate(k)).collect()
}
