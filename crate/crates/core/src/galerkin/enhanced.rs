use std::sync::Arc;

use rayon::prelude::*;

use super::coupling::CouplingFamily;
use super::operator::{pcg, KroneckerOperator, LinearOperator, MeanFactor, Preconditioner, SolveStats, SolverOptions, StiffnessFamily};
use super::quadrature::TriangleRule;
use super::solution::{assemble_load, GalerkinSolution, Prolongation};
use super::space::FemSpace;
use crate::error::{Error, Result};
use crate::meshkit::{uniform_refine, Mesh, TwoLevelOverlay};
use crate::model::ProblemSpec;
use crate::paramkit::{active_dimension, IndexSet};

/// Galerkin solution in `X̂ ⊗ P + X ⊗ Q`, kept in the direct-sum basis.
#[derive(Debug)]
pub struct EnhancedSolution {
    pub overlay: TwoLevelOverlay,
    /// The `X̂ ⊗ P` component.
    pub fine_part: GalerkinSolution,
    /// The `X ⊗ Q` component.
    pub detail_part: GalerkinSolution,
    /// `A_m` on `T̂` up to `M_{P∪Q}`.
    pub fine_stiffness: StiffnessFamily,
    pub stats: SolveStats,
}

impl EnhancedSolution {
    /// The index set `P ∪ Q`, with P's positions first.
    pub fn combined_indices(&self) -> IndexSet {
        self.fine_part.indices().union(self.detail_part.indices())
    }

    /// `û` as a single function on `(T̂, P ∪ Q)`.
    pub fn combined(&self) -> Result<GalerkinSolution> {
        let all = self.combined_indices();
        let fine = self.fine_part.space().clone();
        let pro = Prolongation::new(self.detail_part.space().clone(), fine.clone())?;
        let n = fine.dim();
        let mut coeffs = vec![0.0; n * all.len()];
        for (k, nu) in self.fine_part.indices().iter().enumerate() {
            let j = all.position(nu).expect("union");
            coeffs[j * n..(j + 1) * n].copy_from_slice(self.fine_part.block(k));
        }
        for (k, nu) in self.detail_part.indices().iter().enumerate() {
            let j = all.position(nu).expect("union");
            coeffs[j * n..(j + 1) * n].copy_from_slice(&pro.apply(self.detail_part.block(k)));
        }
        GalerkinSolution::new(fine, all, coeffs)
    }
}

/// Unknown layout: `#P` blocks of length `dim X̂`, then `#Q` blocks of
/// length `dim X`.
struct EnhancedOperator<'a> {
    fine: KroneckerOperator<'a>,
    pro: &'a Prolongation,
    /// Position in `P ∪ Q` of every unknown block, and the inverse map.
    slot: Vec<usize>,
    block_of_slot: Vec<usize>,
    num_p: usize,
    n_fine: usize,
    n_coarse: usize,
}

impl EnhancedOperator<'_> {
    fn offset(&self, k: usize) -> usize {
        if k < self.num_p {
            k * self.n_fine
        } else {
            self.num_p * self.n_fine + (k - self.num_p) * self.n_coarse
        }
    }

    fn block_len(&self, k: usize) -> usize {
        if k < self.num_p {
            self.n_fine
        } else {
            self.n_coarse
        }
    }
}

impl LinearOperator for EnhancedOperator<'_> {
    fn len(&self) -> usize {
        self.num_p * self.n_fine + (self.slot.len() - self.num_p) * self.n_coarse
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nf = self.n_fine;
        let blocks = self.slot.len();
        let mut xf = vec![0.0; nf * blocks];
        xf.par_chunks_mut(nf).enumerate().for_each(|(j, out)| {
            let k = self.block_of_slot[j];
            let xk = &x[self.offset(k)..self.offset(k) + self.block_len(k)];
            if k < self.num_p {
                out.copy_from_slice(xk);
            } else {
                out.copy_from_slice(&self.pro.apply(xk));
            }
        });
        let mut yf = vec![0.0; nf * blocks];
        self.fine.apply(&xf, &mut yf);
        let parts: Vec<Vec<f64>> = (0..blocks)
            .into_par_iter()
            .map(|k| {
                let j = self.slot[k];
                let yk = &yf[j * nf..(j + 1) * nf];
                if k < self.num_p {
                    yk.to_vec()
                } else {
                    self.pro.apply_transpose(yk)
                }
            })
            .collect();
        for (k, part) in parts.into_iter().enumerate() {
            let o = self.offset(k);
            y[o..o + part.len()].copy_from_slice(&part);
        }
    }
}

struct EnhancedPreconditioner<'a> {
    fine: &'a MeanFactor,
    coarse: Option<&'a MeanFactor>,
    num_p: usize,
    n_fine: usize,
    n_coarse: usize,
}

impl Preconditioner for EnhancedPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let split = self.num_p * self.n_fine;
        let (zp, zq) = z.split_at_mut(split);
        let (rp, rq) = r.split_at(split);
        zp.par_chunks_mut(self.n_fine)
            .zip(rp.par_chunks(self.n_fine))
            .for_each(|(zi, ri)| zi.copy_from_slice(&self.fine.solve(ri)));
        if let Some(coarse) = self.coarse {
            zq.par_chunks_mut(self.n_coarse)
                .zip(rq.par_chunks(self.n_coarse))
                .for_each(|(zi, ri)| zi.copy_from_slice(&coarse.solve(ri)));
        }
    }
}

/// Solves on the enhanced space `X̂ ⊗ P + X ⊗ Q` where `X̂` lives on the
/// uniform refinement of `mesh`. The detail blocks use the coarse basis,
/// mapped into the fine space by exact interpolation.
pub fn solve_enhanced(
    mesh: Arc<Mesh>,
    p: &IndexSet,
    q: &IndexSet,
    spec: &ProblemSpec,
    opts: &SolverOptions,
) -> Result<EnhancedSolution> {
    if q.iter().any(|nu| p.contains(nu)) {
        return Err(Error::InvalidInput("detail set intersects the active set".into()));
    }
    let overlay = uniform_refine(&mesh);
    let coarse = Arc::new(FemSpace::new(mesh.clone()));
    let fine = Arc::new(FemSpace::new(Arc::new(overlay.fine.clone())));
    let all = p.union(q);
    let rule = TriangleRule::default();
    let fine_stiffness = StiffnessFamily::assemble(fine.clone(), spec, active_dimension(&all), rule);
    let coarse_mean = StiffnessFamily::assemble(coarse.clone(), spec, 0, rule);
    let coupling = CouplingFamily::square(&all, active_dimension(&all));
    let pro = Prolongation::new(coarse.clone(), fine.clone())?;

    let slot: Vec<usize> = p
        .iter()
        .chain(q.iter())
        .map(|nu| all.position(nu).expect("union"))
        .collect();
    let mut block_of_slot = vec![0; slot.len()];
    for (k, &j) in slot.iter().enumerate() {
        block_of_slot[j] = k;
    }
    let op = EnhancedOperator {
        fine: KroneckerOperator::new(&fine_stiffness, &coupling)?,
        pro: &pro,
        slot,
        block_of_slot,
        num_p: p.len(),
        n_fine: fine.dim(),
        n_coarse: coarse.dim(),
    };

    // Load: only the zero index carries data, and it lies in P.
    let fine_load = assemble_load(&fine, &spec.rhs, p, rule);
    let mut b = vec![0.0; op.len()];
    b[..fine_load.len()].copy_from_slice(&fine_load);

    let mut x = vec![0.0; op.len()];
    let stats = if op.len() == 0 {
        SolveStats::default()
    } else {
        let pre = EnhancedPreconditioner {
            fine: fine_stiffness.mean_factor()?,
            coarse: if coarse.dim() > 0 && !q.is_empty() {
                Some(coarse_mean.mean_factor()?)
            } else {
                None
            },
            num_p: p.len(),
            n_fine: fine.dim(),
            n_coarse: coarse.dim(),
        };
        pcg(&op, &pre, &b, &mut x, opts)?
    };

    let split = p.len() * fine.dim();
    let mut fine_part = GalerkinSolution::new(fine, p.clone(), x[..split].to_vec())?;
    fine_part.stats = stats.clone();
    let mut detail_part = GalerkinSolution::new(coarse, q.clone(), x[split..].to_vec())?;
    detail_part.stats = stats.clone();
    Ok(EnhancedSolution {
        overlay,
        fine_part,
        detail_part,
        fine_stiffness,
        stats,
    })
}
