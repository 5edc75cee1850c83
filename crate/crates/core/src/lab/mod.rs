//! Builtin curve families, experiment drivers and report emitters.

pub mod experiments;
pub mod family;
pub mod report;

pub use experiments::{
    run_almgren_equivalence, run_bound_check, run_convergence, run_parameterized_convergence,
    run_radical_convergence, run_weaknorm_example, self_comparison_floor, Settings,
};
pub use family::{Family, FamilyKind, Member, NIndex};
pub use report::{ExperimentReport, Row};
