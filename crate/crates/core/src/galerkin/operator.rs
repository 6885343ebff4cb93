use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use sprs::CsMat;
use sprs_ldl::{Ldl, LdlNumeric};

use super::coupling::CouplingFamily;
use super::quadrature::TriangleRule;
use super::space::{spmv_acc, FemSpace};
use crate::error::{Error, Result};
use crate::model::ProblemSpec;

/// Sparse LDLᵀ factors of `A_0`. A 1×1 system is kept as a scalar since the
/// fill-reducing ordering needs at least two unknowns.
pub enum MeanFactor {
    Scalar(f64),
    Ldl(LdlNumeric<f64, usize>),
}

impl MeanFactor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            MeanFactor::Scalar(d) => rhs.iter().map(|r| r / d).collect(),
            MeanFactor::Ldl(f) => f.solve(rhs),
        }
    }
}

/// The operators `A_0..A_M` on one P1 space. `A_0` carries the mean field.
/// The sparse factorization of `A_0` is computed on first use and shared.
pub struct StiffnessFamily {
    space: Arc<FemSpace>,
    matrices: Vec<CsMat<f64>>,
    factor: OnceLock<std::result::Result<Arc<MeanFactor>, String>>,
}

impl std::fmt::Debug for StiffnessFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StiffnessFamily")
            .field("dim", &self.space.dim())
            .field("max_dim", &self.max_dim())
            .finish()
    }
}

impl StiffnessFamily {
    /// Assembles `A_m` for `m = 0..=max_dim`.
    pub fn assemble(space: Arc<FemSpace>, spec: &ProblemSpec, max_dim: u32, rule: TriangleRule) -> Self {
        let matrices = (0..=max_dim)
            .into_par_iter()
            .map(|m| {
                let integrals = if m == 0 {
                    match spec.mean_field.as_constant() {
                        Some(c) => (0..space.mesh().num_triangles()).map(|t| c * space.area(t)).collect(),
                        None => space.element_integrals(rule, |x| spec.coefficient(0, x)),
                    }
                } else if spec.is_deterministic() {
                    vec![0.0; space.mesh().num_triangles()]
                } else if rule == TriangleRule::Exact {
                    (0..space.mesh().num_triangles())
                        .map(|t| spec.modes.triangle_integral(m, space.mesh().corners(t)))
                        .collect()
                } else {
                    space.element_integrals(rule, |x| spec.coefficient(m, x))
                };
                space.stiffness_from_integrals(&integrals)
            })
            .collect();
        Self::from_matrices(space, matrices)
    }

    pub fn from_matrices(space: Arc<FemSpace>, matrices: Vec<CsMat<f64>>) -> Self {
        assert!(!matrices.is_empty(), "the mean stiffness is required");
        StiffnessFamily {
            space,
            matrices,
            factor: OnceLock::new(),
        }
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn mean(&self) -> &CsMat<f64> {
        &self.matrices[0]
    }

    pub fn get(&self, m: u32) -> &CsMat<f64> {
        &self.matrices[m as usize]
    }

    pub fn max_dim(&self) -> u32 {
        (self.matrices.len() - 1) as u32
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn mean_factor(&self) -> Result<&MeanFactor> {
        let f = self.factor.get_or_init(|| {
            if self.dim() == 0 {
                return Err("empty system".to_string());
            }
            if self.dim() == 1 {
                let d = self.mean().get(0, 0).copied().unwrap_or(0.0);
                return if d > 0.0 {
                    Ok(Arc::new(MeanFactor::Scalar(d)))
                } else {
                    Err(format!("nonpositive pivot {d}"))
                };
            }
            Ldl::new()
                .check_symmetry(sprs::SymmetryCheck::DontCheckSymmetry)
                .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
                .numeric(self.mean().view())
                .map(|f| Arc::new(MeanFactor::Ldl(f)))
                .map_err(|e| e.to_string())
        });
        match f {
            Ok(f) => Ok(f),
            Err(e) => Err(Error::Factorization(e.clone())),
        }
    }

    /// Solves `A_0 x = rhs`.
    pub fn solve_mean(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.mean_factor()?.solve(rhs))
    }
}

pub trait LinearOperator: Sync {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// `B = A_0 ⊗ I + Σ_m A_m ⊗ G_m`, applied blockwise: block `ν` of the
/// result is `A_0 x_ν + Σ_{(m, μ)} (G_m)_{νμ} A_m x_μ`.
pub struct KroneckerOperator<'a> {
    stiffness: &'a StiffnessFamily,
    coupling: &'a CouplingFamily,
    mean_only: bool,
}

impl<'a> KroneckerOperator<'a> {
    pub fn new(stiffness: &'a StiffnessFamily, coupling: &'a CouplingFamily) -> Result<Self> {
        if coupling.num_rows() != coupling.num_cols() {
            return Err(Error::SpaceMismatch("Kronecker operator needs a square coupling".into()));
        }
        if coupling.max_coupled_dim() > stiffness.max_dim() {
            return Err(Error::SpaceMismatch(format!(
                "coupling reaches dimension {} but only {} stiffness modes are assembled",
                coupling.max_coupled_dim(),
                stiffness.max_dim()
            )));
        }
        Ok(KroneckerOperator {
            stiffness,
            coupling,
            mean_only: false,
        })
    }

    /// The mean part `A_0 ⊗ I` only, i.e. the form `B_0`.
    pub fn mean_only(stiffness: &'a StiffnessFamily, coupling: &'a CouplingFamily) -> Self {
        KroneckerOperator {
            stiffness,
            coupling,
            mean_only: true,
        }
    }

    fn blocks(&self) -> usize {
        self.coupling.num_rows()
    }
}

impl LinearOperator for KroneckerOperator<'_> {
    fn len(&self) -> usize {
        self.stiffness.dim() * self.blocks()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.stiffness.dim();
        if n == 0 {
            return;
        }
        let mean_only = self.mean_only;
        y.par_chunks_mut(n).enumerate().for_each(|(nu, y_nu)| {
            y_nu.fill(0.0);
            spmv_acc(self.stiffness.mean(), 1.0, &x[nu * n..(nu + 1) * n], y_nu);
            if mean_only {
                return;
            }
            for e in self.coupling.row(nu) {
                spmv_acc(self.stiffness.get(e.m), e.value, &x[e.col * n..(e.col + 1) * n], y_nu);
            }
        });
    }
}

/// Block-diagonal `A_0 ⊗ I` preconditioner using the cached factorization.
pub struct MeanPreconditioner<'a> {
    factor: &'a MeanFactor,
    n: usize,
}

impl<'a> MeanPreconditioner<'a> {
    pub fn new(stiffness: &'a StiffnessFamily) -> Result<Self> {
        Ok(MeanPreconditioner {
            factor: stiffness.mean_factor()?,
            n: stiffness.dim(),
        })
    }
}

impl Preconditioner for MeanPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.par_chunks_mut(self.n)
            .zip(r.par_chunks(self.n))
            .for_each(|(z_nu, r_nu)| z_nu.copy_from_slice(&self.factor.solve(r_nu)));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual in the preconditioner-induced norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients on `x` (used as the initial guess).
/// Converged when `sqrt(r·M⁻¹r) ≤ tol · sqrt(b·M⁻¹b)`.
pub fn pcg(
    op: &impl LinearOperator,
    pre: &impl Preconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<SolveStats> {
    let len = op.len();
    assert_eq!(b.len(), len);
    assert_eq!(x.len(), len);
    let mut z = vec![0.0; len];
    pre.apply(b, &mut z);
    let b_norm = dot(b, &z).max(0.0).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats::default());
    }

    let mut r = vec![0.0; len];
    op.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    pre.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut q = vec![0.0; len];
    let mut history = Vec::new();

    for it in 0..=opts.max_iter {
        let rel = rz.max(0.0).sqrt() / b_norm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        if it == opts.max_iter {
            break;
        }
        op.apply(&p, &mut q);
        let alpha = rz / dot(&p, &q);
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= alpha * qi);
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::SolverFailure {
        iterations: opts.max_iter,
        last: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}
