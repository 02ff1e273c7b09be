//! Integration of infinitesimal (super) Lie algebra actions.
//!
//! A representation of a Lie algebra by vector fields on a chart is turned
//! into a group action by flowing along the fields. The same machinery lifts
//! paths of the group through the induced foliation of `G × M`, which is how
//! the obstructions to integrability (incomplete fields, nontrivial
//! holonomy) are detected.
//!
//! Modules, bottom-up:
//!
//! * [`grassmann`] finite exterior algebras and supernumbers
//! * [`algebra`] structure constants and (graded) brackets
//! * [`group`] group models, exponential/logarithm, group paths
//! * [`expr`] the coefficient expression language
//! * [`fields`] charts, vector fields, representations
//! * [`flows`] flows, path lifting, completeness and holonomy
//! * [`action`] reconstruction and verification of the global action

pub mod action;
pub mod algebra;
pub mod expr;
pub mod fields;
pub mod flows;
pub mod grassmann;
pub mod group;
mod rk;

pub use action::{ActionEngine, ActionError, ActionResult, Route};
pub use algebra::{AlgebraElement, AlgebraError, ResidualReport, StructureConstants};
pub use expr::{Expr, ExprError, VarContext};
pub use fields::{Chart, FieldError, Representation, VectorField};
pub use flows::{CompletenessReport, FlowError, FlowOptions, FlowProblem, LeafSample, Trajectory};
pub use grassmann::{GrassmannError, Parity, Supernumber};
pub use group::{Group, GroupElement, GroupError, GroupPath, Segment};
