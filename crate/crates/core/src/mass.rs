//! The set functions `μ_m` on cells and `κ_n` on ring elements, in exact
//! dyadic arithmetic.

use thiserror::Error;

use crate::dyadic::{DyadicMass, DyadicSum};
use crate::ring::{CellSignature, RingElement, RingError, Stage};
use crate::schedule::Trace;
use crate::space::Space;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MassError {
    #[error("no cell with signature {0} at this stage")]
    UnknownCell(String),
    #[error("element from stage {element} evaluated at stage {stage}")]
    StageMismatch { element: usize, stage: usize },
    #[error("kappa changed from {expected} to {found} at stage {stage}")]
    ConsistencyViolation { stage: usize, expected: DyadicMass, found: DyadicMass },
    #[error("stage has no cells")]
    EmptyStage,
    #[error(transparent)]
    Ring(#[from] RingError),
}

/// The mass of a cell. The all-EXT signature stands for `∅` and has mass 0.
pub fn mu<X: Space>(stage: &Stage<X>, sig: &CellSignature) -> Result<DyadicMass, MassError> {
    if sig.is_empty_set() {
        return Ok(DyadicMass::zero());
    }
    stage.cell(sig).map(|c| c.mass.clone()).ok_or_else(|| MassError::UnknownCell(sig.to_string()))
}

/// `κ_n(B ⊎ C) = Σ μ_n(A)` over the cells `A` of `B`; the points of `C` are
/// ignored.
pub fn kappa<X: Space>(stage: &Stage<X>, d: &RingElement<X::Point>) -> Result<DyadicMass, MassError> {
    if d.stage != stage.index() {
        return Err(MassError::StageMismatch { element: d.stage, stage: stage.index() });
    }
    let mut sum = DyadicSum::new();
    for sig in &d.open_part {
        sum.add(&mu(stage, sig)?);
    }
    Ok(sum.finish())
}

/// Evaluates `d` at its own stage and at every later stage of the trace,
/// returning the common value.
pub fn kappa_lifted<X: Space>(trace: &Trace<X>, d: &RingElement<X::Point>) -> Result<DyadicMass, MassError> {
    let mut stage =
        trace.stage(d.stage).map_err(|_| MassError::StageMismatch { element: d.stage, stage: trace.len() })?;
    let expected = kappa(&stage, d)?;
    let open = stage.open_region(d)?;
    let points = RingElement { boundary_part: d.boundary_part.clone(), ..RingElement::empty(0) };
    while stage.index() < trace.len() {
        let next = trace.handle_at(stage.index() + 1);
        stage.refine_in_place(&next)?;
        let mut lifted = stage.decompose(&open)?;
        lifted.boundary_part.extend(points.boundary_part.iter().cloned());
        let found = kappa(&stage, &lifted)?;
        if found != expected {
            return Err(MassError::ConsistencyViolation { stage: stage.index(), expected, found });
        }
    }
    Ok(expected)
}

pub fn max_cell_mass<X: Space>(stage: &Stage<X>) -> Result<DyadicMass, MassError> {
    stage.cells().iter().map(|c| &c.mass).max().cloned().ok_or(MassError::EmptyStage)
}

/// `2^(-k)`: everything later stages can still grant to new regions.
pub fn tail_budget<X: Space>(stage: &Stage<X>) -> DyadicMass {
    DyadicMass::pow2_neg(stage.index() as u64)
}
