//! Exact finite-stage construction of a strictly positive, non-atomic
//! premeasure on a space given by an enumerated basis of regular open sets.
//!
//! The pipeline runs in four layers:
//! [`space`] supplies the region algebra and basis enumeration,
//! [`ring`] refines cells as basis sets are inserted,
//! [`mass`] evaluates the dyadic set functions,
//! [`schedule`] rearranges the basis so that boundaries lose their mass, and
//! [`verify`] turns the resulting trace into checkable certificates.

pub mod cli;
pub mod dyadic;
pub mod mass;
pub mod ring;
pub mod scalar;
pub mod schedule;
pub mod space;
pub mod verify;

use num_rational::{BigRational, Rational64};

pub use dyadic::DyadicMass;
pub use mass::{kappa, kappa_lifted, max_cell_mass, mu, tail_budget, MassError};
pub use ring::{
    classify, init_stage, ring_difference, ring_union, Cell, CellSignature, Classification, Origin, RingElement,
    RingError, Stage, StepReport,
};
pub use scalar::Scalar;
pub use schedule::{
    build_schedule, build_schedule_with, cover_union, permuted_stream, Schedule, ScheduleBlock, ScheduleError, Trace,
};
pub use space::{Antichain, BasisHandle, CantorPoint, CantorSpace, Intervals, Line, Space, SpaceError, Word};
pub use verify::{
    build_partition, certify_boundary, certify_max_decay, check_additivity, check_permutation_invariance, VerifyError,
};

/// Arbitrary-precision rationals.
pub type Rational = BigRational;

/// The rational line with unbounded endpoints.
pub type RationalLine = Line<BigRational>;

/// The rational line with `i64` fractions, fast enough for deep schedules.
pub type FastLine = Line<Rational64>;

/// Regions of [`RationalLine`].
pub type LineRegion = Intervals<BigRational>;
