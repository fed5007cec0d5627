//! Implicit Runge–Kutta stepping of the mode system with static
//! condensation.

pub mod condense;
pub mod mesh;
pub mod newton;
pub mod tableau;

pub use condense::{
    apply_stage_matrix, condensation_operators, condensed_step, resolvent, CondensationOperators, CondensedSystem,
    ModeFamily, ModeSystemState, StepReport, Stepper,
};
pub use mesh::{graded_mesh, TimeMesh};
pub use newton::{newton_solve, NewtonOptions, NewtonReport};
pub use tableau::{make_tableau, ButcherTableau, Scheme};
