//! Kronecker-structured Galerkin systems on `X ⊗ P`: assembly, mean-based
//! PCG, the enhanced system, prolongation and energies.

mod coupling;
mod enhanced;
mod operator;
mod quadrature;
mod solution;
mod space;

pub use coupling::{assemble_coupling, CouplingEntry, CouplingFamily};
pub use enhanced::{solve_enhanced, EnhancedSolution};
pub use operator::{
    pcg, KroneckerOperator, LinearOperator, MeanFactor, MeanPreconditioner, Preconditioner, SolveStats,
    SolverOptions, StiffnessFamily,
};
pub use quadrature::{map_to, TriangleRule};
pub use solution::{
    assemble_load, b0_energy, b_energy, prolong, solve, solve_problem, solve_problem_on, DiscreteProblem, GalerkinSolution,
    Prolongation,
};
pub use space::{diagonal, spmv_acc, FemSpace};
