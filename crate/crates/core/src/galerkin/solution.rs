use std::sync::Arc;

use super::coupling::CouplingFamily;
use super::operator::{pcg, KroneckerOperator, LinearOperator, MeanPreconditioner, SolveStats, SolverOptions, StiffnessFamily};
use super::quadrature::TriangleRule;
use super::space::FemSpace;
use crate::error::{Error, Result};
use crate::meshkit::Mesh;
use crate::model::{ProblemSpec, ScalarField};
use crate::paramkit::{active_dimension, IndexSet};

/// A function in `X ⊗ P`: one coefficient block of length `dim X` per
/// index, in index-set order.
#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    space: Arc<FemSpace>,
    indices: IndexSet,
    coeffs: Vec<f64>,
    pub stats: SolveStats,
}

impl GalerkinSolution {
    pub fn new(space: Arc<FemSpace>, indices: IndexSet, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() * indices.len() {
            return Err(Error::SpaceMismatch(format!(
                "{} coefficients for dim X = {} and #P = {}",
                coeffs.len(),
                space.dim(),
                indices.len()
            )));
        }
        Ok(GalerkinSolution {
            space,
            indices,
            coeffs,
            stats: SolveStats::default(),
        })
    }

    pub fn zeros(space: Arc<FemSpace>, indices: IndexSet) -> Self {
        let coeffs = vec![0.0; space.dim() * indices.len()];
        GalerkinSolution {
            space,
            indices,
            coeffs,
            stats: SolveStats::default(),
        }
    }

    pub fn space(&self) -> &Arc<FemSpace> {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    pub fn indices(&self) -> &IndexSet {
        &self.indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient block of the index at position `k`.
    pub fn block(&self, k: usize) -> &[f64] {
        let n = self.space.dim();
        &self.coeffs[k * n..(k + 1) * n]
    }

    /// `dim X · #P`.
    pub fn num_dofs(&self) -> usize {
        self.coeffs.len()
    }

    /// Value of the `y`-coefficient block `k` at a physical point, by
    /// locating the containing triangle.
    pub fn eval_block(&self, k: usize, x: [f64; 2]) -> Option<f64> {
        let mesh = self.mesh();
        let (t, bary) = mesh.locate(x)?;
        let block = self.block(k);
        Some(
            mesh.triangles()[t]
                .vertices
                .iter()
                .zip(bary)
                .map(|(&v, l)| self.space.free_index(v).map_or(0.0, |i| block[i]) * l)
                .sum(),
        )
    }

    pub fn same_space(&self, other: &GalerkinSolution) -> bool {
        (Arc::ptr_eq(&self.space, &other.space) || self.mesh() == other.mesh()) && self.indices == other.indices
    }

    pub fn sub(&self, other: &GalerkinSolution) -> Result<GalerkinSolution> {
        if !self.same_space(other) {
            return Err(Error::SpaceMismatch("difference of functions on different spaces".into()));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        GalerkinSolution::new(self.space.clone(), self.indices.clone(), coeffs)
    }
}

/// The right-hand side `F(φ_z P_ν)`; only the `𝟘` block is nonzero for a
/// deterministic `f`.
pub fn assemble_load(space: &FemSpace, f: &ScalarField, indices: &IndexSet, rule: TriangleRule) -> Vec<f64> {
    let n = space.dim();
    let mut out = vec![0.0; n * indices.len()];
    if let Some(k) = indices.position(&crate::paramkit::MultiIndex::zero()) {
        out[k * n..(k + 1) * n].copy_from_slice(&space.load_vector(rule, f));
    }
    out
}

/// Solves `B(u, v) = F(v)` on `X ⊗ span{P_ν : ν ∈ indices}` with
/// mean-based PCG. `guess` seeds the iteration.
pub fn solve(
    stiffness: &StiffnessFamily,
    indices: &IndexSet,
    load: &[f64],
    opts: &SolverOptions,
    guess: Option<Vec<f64>>,
) -> Result<GalerkinSolution> {
    let coupling = CouplingFamily::square(indices, active_dimension(indices));
    let op = KroneckerOperator::new(stiffness, &coupling)?;
    if load.len() != op.len() {
        return Err(Error::SpaceMismatch(format!(
            "load has length {} but the system has {} unknowns",
            load.len(),
            op.len()
        )));
    }
    let mut x = guess.unwrap_or_else(|| vec![0.0; op.len()]);
    if x.len() != op.len() {
        return Err(Error::SpaceMismatch("initial guess has the wrong length".into()));
    }
    let stats = if op.len() == 0 {
        SolveStats::default()
    } else {
        let pre = MeanPreconditioner::new(stiffness)?;
        pcg(&op, &pre, load, &mut x, opts)?
    };
    let mut sol = GalerkinSolution::new(stiffness.space().clone(), indices.clone(), x)?;
    sol.stats = stats;
    Ok(sol)
}

/// A Galerkin solve together with the operators it was computed from.
#[derive(Debug)]
pub struct DiscreteProblem {
    pub stiffness: StiffnessFamily,
    pub load: Vec<f64>,
    pub solution: GalerkinSolution,
}

/// Assembles and solves on `(mesh, indices)`. The stiffness family covers
/// dimensions up to `M_P + 1` so it can also serve the parametric
/// estimator.
pub fn solve_problem(
    mesh: Arc<Mesh>,
    indices: &IndexSet,
    spec: &ProblemSpec,
    opts: &SolverOptions,
    guess: Option<Vec<f64>>,
) -> Result<DiscreteProblem> {
    solve_problem_on(Arc::new(FemSpace::new(mesh)), indices, spec, opts, guess)
}

/// [`solve_problem`] on an existing space.
pub fn solve_problem_on(
    space: Arc<FemSpace>,
    indices: &IndexSet,
    spec: &ProblemSpec,
    opts: &SolverOptions,
    guess: Option<Vec<f64>>,
) -> Result<DiscreteProblem> {
    let stiffness = StiffnessFamily::assemble(space.clone(), spec, active_dimension(indices) + 1, TriangleRule::default());
    let load = assemble_load(&space, &spec.rhs, indices, TriangleRule::default());
    let solution = solve(&stiffness, indices, &load, opts, guess)?;
    Ok(DiscreteProblem {
        stiffness,
        load,
        solution,
    })
}

fn check_pair(stiffness: &StiffnessFamily, u: &GalerkinSolution, v: &GalerkinSolution) -> Result<()> {
    if !u.same_space(v) {
        return Err(Error::SpaceMismatch("energy of functions on different spaces".into()));
    }
    if u.space.dim() != stiffness.dim() || u.mesh() != stiffness.space().mesh() {
        return Err(Error::SpaceMismatch("stiffness family belongs to another mesh".into()));
    }
    Ok(())
}

/// `B(u, v)`.
pub fn b_energy(stiffness: &StiffnessFamily, u: &GalerkinSolution, v: &GalerkinSolution) -> Result<f64> {
    check_pair(stiffness, u, v)?;
    let coupling = CouplingFamily::square(u.indices(), active_dimension(u.indices()));
    let op = KroneckerOperator::new(stiffness, &coupling)?;
    let mut bv = vec![0.0; op.len()];
    op.apply(&v.coeffs, &mut bv);
    Ok(u.coeffs.iter().zip(&bv).fold(0.0, |s, (a, b)| s + a * b))
}

/// `B_0(u, v)`.
pub fn b0_energy(stiffness: &StiffnessFamily, u: &GalerkinSolution, v: &GalerkinSolution) -> Result<f64> {
    check_pair(stiffness, u, v)?;
    let coupling = CouplingFamily::square(u.indices(), 0);
    let op = KroneckerOperator::mean_only(stiffness, &coupling);
    let mut bv = vec![0.0; op.len()];
    op.apply(&v.coeffs, &mut bv);
    Ok(u.coeffs.iter().zip(&bv).fold(0.0, |s, (a, b)| s + a * b))
}

/// Interpolation between nested P1 spaces, matrix free. The fine mesh must
/// extend the coarse one: same leading vertices, every later vertex the
/// midpoint of an earlier pair.
#[derive(Debug, Clone)]
pub struct Prolongation {
    coarse: Arc<FemSpace>,
    fine: Arc<FemSpace>,
}

impl Prolongation {
    pub fn new(coarse: Arc<FemSpace>, fine: Arc<FemSpace>) -> Result<Self> {
        let (cm, fm) = (coarse.mesh(), fine.mesh());
        let nc = cm.num_vertices();
        if fm.num_vertices() < nc || cm.vertices() != &fm.vertices()[..nc] {
            return Err(Error::SpaceMismatch("fine mesh does not extend the coarse vertices".into()));
        }
        if (0..nc).any(|v| cm.is_boundary(v) != fm.is_boundary(v)) {
            return Err(Error::SpaceMismatch("boundary flags differ between meshes".into()));
        }
        for v in nc..fm.num_vertices() {
            match fm.parent_edge(v) {
                Some(e) if e.endpoints().1 < v => {}
                _ => {
                    return Err(Error::SpaceMismatch(format!(
                        "fine vertex {v} is not a bisection midpoint"
                    )))
                }
            }
        }
        Ok(Prolongation { coarse, fine })
    }

    pub fn coarse(&self) -> &Arc<FemSpace> {
        &self.coarse
    }

    pub fn fine(&self) -> &Arc<FemSpace> {
        &self.fine
    }

    /// Coarse free-node vector to fine free-node vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let fm = self.fine.mesh();
        let mut values = self.coarse.vertex_values(x);
        values.resize(fm.num_vertices(), 0.0);
        for v in self.coarse.mesh().num_vertices()..fm.num_vertices() {
            let (a, b) = fm.parent_edge(v).expect("checked at construction").endpoints();
            values[v] = 0.5 * (values[a] + values[b]);
        }
        self.fine.restrict_vertex_values(&values)
    }

    /// Adjoint of [`Prolongation::apply`].
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let fm = self.fine.mesh();
        let mut values = self.fine.vertex_values(y);
        let nc = self.coarse.mesh().num_vertices();
        for v in (nc..fm.num_vertices()).rev() {
            let (a, b) = fm.parent_edge(v).expect("checked at construction").endpoints();
            let w = 0.5 * values[v];
            values[a] += w;
            values[b] += w;
        }
        values.truncate(nc);
        self.coarse.restrict_vertex_values(&values)
    }
}

/// Represents `u` on a finer mesh and a larger index set; new indices get
/// zero blocks.
pub fn prolong(u: &GalerkinSolution, finer: Arc<FemSpace>, larger: &IndexSet) -> Result<GalerkinSolution> {
    if !u.indices().is_subset_of(larger) {
        return Err(Error::SpaceMismatch("target index set does not contain the source set".into()));
    }
    let pro = Prolongation::new(u.space().clone(), finer.clone())?;
    let n = finer.dim();
    let mut coeffs = vec![0.0; n * larger.len()];
    for (k, nu) in u.indices().iter().enumerate() {
        let j = larger.position(nu).expect("subset checked");
        coeffs[j * n..(j + 1) * n].copy_from_slice(&pro.apply(u.block(k)));
    }
    GalerkinSolution::new(finer, larger.clone(), coeffs)
}
