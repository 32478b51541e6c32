//! Invariant Einstein metrics on real flag manifolds of split classical Lie algebras.

pub mod algebra;
pub mod checks;
pub mod curvature;
pub mod einstein;
pub mod error;
pub mod flag;
pub mod invariant;
pub mod polynomial;

pub use algebra::{build_algebra, AlgebraElement, AlgebraModel, Family, Label, RootLabel};
pub use checks::{check_flag, check_solved, CheckOutcome, CheckReport};
pub use curvature::{
    einstein_defect, ricci_form, ricci_in_basis, scalar_curvature, u_map, EinsteinDefect, ReducedModel, RicciForm,
};
pub use einstein::{
    closed_form_solutions, dedup_homothety, equivalence_screen, numeric_solutions, solve, table1, table1_row,
    table1_row_from, EinsteinSolution, EquivalenceGroup, GroupStatus, Provenance, Relation, SolutionSet, SolveMode,
    Table1Row, TableFamily,
};
pub use error::{Error, Result};
pub use flag::{
    decompose_isotropy, discrete_generators, enumerate_small_flags, make_flag, parse_flag, split_reductive,
    Decomposition, FlagSpec, Submodule,
};
pub use invariant::{
    invariant_metric_space, make_metric, metric_space_for, normal_metric, orthonormal_frame, CoefficientKind, Frame,
    InvariantMetric, MetricSpace,
};
