//! Two-level spatial indicators on the uniform refinement, hierarchical
//! parametric indicators on the detail index set, and their combination.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{
    assemble_load, diagonal, prolong, CouplingFamily, FemSpace, GalerkinSolution, KroneckerOperator, LinearOperator,
    StiffnessFamily, TriangleRule,
};
use crate::meshkit::TwoLevelOverlay;
use crate::model::ProblemSpec;
use crate::paramkit::{active_dimension, IndexSet};

/// Indicators of one iterate. `spatial` follows the order of
/// `overlay.new_vertices`, `parametric` the order of the detail set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicators {
    pub spatial: Vec<f64>,
    pub parametric: Vec<f64>,
    pub detail: IndexSet,
    pub eta_spatial: f64,
    pub eta_parametric: f64,
    pub eta: f64,
}

impl ErrorIndicators {
    pub fn new(spatial: Vec<f64>, parametric: Vec<f64>, detail: IndexSet) -> Self {
        let (eta, eta_spatial, eta_parametric) = overall(&spatial, &parametric);
        ErrorIndicators {
            spatial,
            parametric,
            detail,
            eta_spatial,
            eta_parametric,
            eta,
        }
    }

    /// `η(M)` for positions into N⁺.
    pub fn spatial_sum(&self, positions: &[usize]) -> f64 {
        l2(positions.iter().map(|&i| self.spatial[i]))
    }

    /// `η(𝔐)` for positions into Q.
    pub fn parametric_sum(&self, positions: &[usize]) -> f64 {
        l2(positions.iter().map(|&i| self.parametric[i]))
    }
}

fn l2(values: impl Iterator<Item = f64>) -> f64 {
    values.map(|v| v * v).sum::<f64>().sqrt()
}

/// `(η, η(N⁺), η(Q))`.
pub fn overall(spatial: &[f64], parametric: &[f64]) -> (f64, f64, f64) {
    let s = l2(spatial.iter().copied());
    let p = l2(parametric.iter().copied());
    (s.hypot(p), s, p)
}

/// `η(z)² = Σ_{ν∈P} |F(φ̂_z P_ν) - B(u, φ̂_z P_ν)|² / (Â_0)_{zz}` for z ∈ N⁺.
///
/// `fine_stiffness` must live on `overlay.fine` and cover dimension `M_P`.
pub fn spatial_indicators(
    u: &GalerkinSolution,
    overlay: &TwoLevelOverlay,
    fine_stiffness: &StiffnessFamily,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    let fine_space = fine_stiffness.space();
    if fine_space.mesh().as_ref() != &overlay.fine {
        return Err(Error::SpaceMismatch("stiffness family is not on the overlay mesh".into()));
    }
    let coarse = u.mesh();
    let nc = coarse.num_vertices();
    if overlay.fine.num_vertices() != nc + coarse.edge_table().len() || &overlay.fine.vertices()[..nc] != coarse.vertices()
    {
        return Err(Error::SpaceMismatch("overlay was not built from the solution's mesh".into()));
    }
    let p = u.indices();
    let u_hat = prolong(u, fine_space.clone(), p)?;
    let coupling = CouplingFamily::square(p, active_dimension(p));
    let op = KroneckerOperator::new(fine_stiffness, &coupling)?;
    let mut residual = assemble_load(fine_space, &spec.rhs, p, TriangleRule::default());
    let mut bu = vec![0.0; op.len()];
    op.apply(u_hat.coefficients(), &mut bu);
    residual.iter_mut().zip(&bu).for_each(|(r, b)| *r -= b);

    let diag = diagonal(fine_stiffness.mean());
    let n = fine_space.dim();
    overlay
        .new_vertices
        .iter()
        .map(|nv| {
            let i = fine_space.free_index(nv.vertex).ok_or_else(|| {
                Error::InvariantViolation(format!("new vertex {} is not a free node", nv.vertex))
            })?;
            let sq: f64 = (0..p.len()).map(|k| residual[k * n + i].powi(2)).sum();
            Ok((sq / diag[i]).sqrt())
        })
        .collect()
}

/// `η(ν) = ‖a_0^{1/2} ∇e_ν‖` with `A_0 e_ν = r_ν`, `r_ν` the residual of
/// `u` tested with `φ_z P_ν`, for every ν in `detail`.
///
/// `stiffness` must be on `u`'s mesh and cover dimension `M_P + 1`.
pub fn parametric_indicators(
    u: &GalerkinSolution,
    detail: &IndexSet,
    stiffness: &StiffnessFamily,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    if stiffness.space().mesh() != u.mesh() {
        return Err(Error::SpaceMismatch("stiffness family is not on the solution's mesh".into()));
    }
    let p = u.indices();
    let coupling = CouplingFamily::new(detail, p, active_dimension(p) + 1);
    if coupling.max_coupled_dim() > stiffness.max_dim() {
        return Err(Error::SpaceMismatch(format!(
            "detail couplings reach dimension {} but only {} stiffness modes are assembled",
            coupling.max_coupled_dim(),
            stiffness.max_dim()
        )));
    }
    let space: &Arc<FemSpace> = stiffness.space();
    let load = assemble_load(space, &spec.rhs, detail, TriangleRule::default());
    let n = space.dim();
    if n == 0 {
        return Ok(vec![0.0; detail.len()]);
    }
    stiffness.mean_factor()?;
    (0..detail.len())
        .into_par_iter()
        .map(|k| {
            let mut r = load[k * n..(k + 1) * n].to_vec();
            for e in coupling.row(k) {
                crate::galerkin::spmv_acc(stiffness.get(e.m), -e.value, u.block(e.col), &mut r);
            }
            if r.iter().all(|&v| v == 0.0) {
                return Ok(0.0);
            }
            let e = stiffness.solve_mean(&r)?;
            let sq: f64 = e.iter().zip(&r).map(|(a, b)| a * b).sum();
            Ok(sq.max(0.0).sqrt())
        })
        .collect()
}

/// Everything the marking step needs from one iterate.
#[derive(Debug)]
pub struct Estimate {
    pub overlay: TwoLevelOverlay,
    pub indicators: ErrorIndicators,
}

/// Builds the uniform refinement of `u`'s mesh and the detail set of its
/// index set, then evaluates both indicator families. `stiffness` is the
/// family `u` was solved with; it must cover dimension `M_P + 1`.
pub fn estimate(u: &GalerkinSolution, stiffness: &StiffnessFamily, spec: &ProblemSpec) -> Result<Estimate> {
    let overlay = crate::meshkit::uniform_refine(u.mesh());
    let fine = Arc::new(FemSpace::new(Arc::new(overlay.fine.clone())));
    let fine_stiffness =
        StiffnessFamily::assemble(fine, spec, active_dimension(u.indices()), TriangleRule::default());
    let spatial = spatial_indicators(u, &overlay, &fine_stiffness, spec)?;
    let detail = crate::paramkit::detail_index_set(u.indices());
    let parametric = parametric_indicators(u, &detail, stiffness, spec)?;
    Ok(Estimate {
        overlay,
        indicators: ErrorIndicators::new(spatial, parametric, detail),
    })
}
