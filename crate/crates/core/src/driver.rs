//! The adaptive loop: solve, estimate, mark, refine or enrich, repeat.
//!
//! Besides the loop itself this module holds the post-processing used by the
//! experiments: cumulative cost, a nested reference solution, effectivity
//! indices, fitted rates and the CSV trace format.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate, Estimate};
use crate::galerkin::{
    b_energy, prolong, solve_problem_on, DiscreteProblem, FemSpace, GalerkinSolution, SolverOptions,
};
use crate::marking::{decide, Case, Criterion, MarkingDecision, MarkingParams};
use crate::meshkit::{realized_new_vertices, refine, uniform_refine, Mesh};
use crate::model::{contrast_bounds, ProblemSpec};
use crate::paramkit::{active_dimension, IndexSet};

/// Relative slack of the online checks.
pub const CHECK_SLACK: f64 = 1e-6;

/// Stopping rule and solver settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunOptions {
    /// Stop once `η ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Stop before solving on a space with more than this many unknowns.
    pub max_dof: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Abort with an error when an online check fails. When off, the
    /// measured quantities are still recorded.
    pub enforce_checks: bool,
    /// Keep every iterate in the trace (memory heavy, for tests).
    #[serde(skip)]
    pub keep_solutions: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tol: 1e-2,
            max_iter: 1000,
            max_dof: 200_000,
            solver_tol: 1e-10,
            solver_max_iter: 100_000,
            enforce_checks: true,
            keep_solutions: false,
        }
    }
}

impl RunOptions {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            max_iter: self.solver_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineType {
    Spatial,
    Parametric,
    /// The last iterate of a run.
    None,
}

impl fmt::Display for RefineType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefineType::Spatial => "spatial",
            RefineType::Parametric => "parametric",
            RefineType::None => "none",
        })
    }
}

/// Quantities measured between iterate ℓ-1 and ℓ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepCheck {
    /// `‖u_ℓ - u_{ℓ-1}‖²_B`, computed from the prolonged difference.
    pub increment_sq: f64,
    /// `|‖u_ℓ‖² - ‖u_{ℓ-1}‖² - ‖u_ℓ - u_{ℓ-1}‖²| / ‖u_ℓ‖²`.
    pub pythagoras_defect: f64,
    /// `(λ/K) η_{ℓ-1}(N⁺ ∩ N_ℓ, 𝔐_{ℓ-1})²`.
    pub reduction_bound: f64,
}

impl StepCheck {
    pub fn reduction_holds(&self) -> bool {
        self.reduction_bound <= (1.0 + CHECK_SLACK) * self.increment_sq
    }
}

/// One row of the trace. `refine_type`, `case` and `marked` describe the
/// step taken after this iterate.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub dim_x: usize,
    pub card_p: usize,
    pub n_total: usize,
    pub eta: f64,
    pub eta_spatial: f64,
    pub eta_param: f64,
    pub energy_sq: f64,
    pub refine_type: RefineType,
    pub case: Option<Case>,
    pub marked: usize,
    pub max_active_dim: u32,
    pub solver_iters: usize,
    pub solver_residual: f64,
    pub wall_time_s: f64,
    pub step: Option<StepCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIter,
    MaxDof,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveTrace {
    pub criterion: Criterion,
    pub params: MarkingParams,
    pub options: RunOptions,
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
    pub cost: usize,
    /// `λ/K` used by the reduction check.
    pub reduction_constant: f64,
    pub reference_energy: Option<f64>,
    pub effectivity: Option<Vec<Option<f64>>>,
    /// Largest ratio `e_{ℓ+1}/e_ℓ` of reference errors.
    pub max_convergence_ratio: Option<f64>,
    /// Last iterate and its detail set.
    #[serde(skip)]
    pub last: Option<(GalerkinSolution, IndexSet)>,
    #[serde(skip)]
    pub solutions: Vec<GalerkinSolution>,
}

impl AdaptiveTrace {
    pub fn reached_tolerance(&self) -> bool {
        self.stop == Some(StopReason::Tolerance)
    }

    /// Index L of the last record.
    pub fn last_iter(&self) -> Option<usize> {
        self.records.last().map(|r| r.iter)
    }
}

/// A run that stopped on an error, with everything computed before it.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub trace: AdaptiveTrace,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.trace.records.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// `Σ_ℓ N_ℓ`.
pub fn cumulative_cost(n: &[usize]) -> usize {
    n.iter().sum()
}

struct Previous {
    solution: GalerkinSolution,
    energy: f64,
    estimate: Estimate,
    decision: MarkingDecision,
    detail: IndexSet,
}

/// Runs the adaptive algorithm from `mesh` and `P = {𝟘}`.
pub fn run_adaptive(
    spec: &ProblemSpec,
    mesh: Mesh,
    criterion: Criterion,
    params: MarkingParams,
    opts: &RunOptions,
) -> std::result::Result<AdaptiveTrace, Box<RunFailure>> {
    let mut trace = AdaptiveTrace {
        criterion,
        params,
        options: opts.clone(),
        records: Vec::new(),
        stop: None,
        cost: 0,
        reduction_constant: 0.0,
        reference_energy: None,
        effectivity: None,
        max_convergence_ratio: None,
        last: None,
        solutions: Vec::new(),
    };
    match adaptive_loop(spec, mesh, criterion, &params, opts, &mut trace) {
        Ok(()) => Ok(trace),
        Err(error) => Err(Box::new(RunFailure { error, trace })),
    }
}

fn adaptive_loop(
    spec: &ProblemSpec,
    mesh: Mesh,
    criterion: Criterion,
    params: &MarkingParams,
    opts: &RunOptions,
    trace: &mut AdaptiveTrace,
) -> Result<()> {
    spec.validate()?;
    params.validate(criterion)?;
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {} must be nonnegative", opts.tol)));
    }
    let lambda = contrast_bounds(spec)?.lambda;
    let solver = opts.solver();

    let mut mesh = Arc::new(mesh);
    let mut indices = IndexSet::new();
    let mut prev: Option<Previous> = None;
    let mut k_overlap = 0usize;

    for iter in 0.. {
        let start = Instant::now();
        let space = Arc::new(FemSpace::new(mesh.clone()));
        let carried = match &prev {
            Some(p) => Some(prolong(&p.solution, space.clone(), &indices)?),
            None => None,
        };
        let DiscreteProblem {
            stiffness, solution, ..
        } = solve_problem_on(space, &indices, spec, &solver, carried.as_ref().map(|c| c.coefficients().to_vec()))?;
        let energy = b_energy(&stiffness, &solution, &solution)?;

        let step = match (&prev, &carried) {
            (Some(p), Some(c)) => {
                let d = solution.sub(c)?;
                let increment_sq = b_energy(&stiffness, &d, &d)?;
                let pythagoras_defect = if energy > 0.0 {
                    (energy - p.energy - increment_sq).abs() / energy
                } else {
                    0.0
                };
                let marked_sq = match &p.decision {
                    MarkingDecision::Spatial(_) => {
                        let r = realized_new_vertices(&p.estimate.overlay, p.solution.mesh(), &mesh);
                        p.estimate.indicators.spatial_sum(&r).powi(2)
                    }
                    MarkingDecision::Parametric(m) => p.estimate.indicators.parametric_sum(m).powi(2),
                    MarkingDecision::Terminate => 0.0,
                };
                let check = StepCheck {
                    increment_sq,
                    pythagoras_defect,
                    reduction_bound: lambda / k_overlap.max(1) as f64 * marked_sq,
                };
                if opts.enforce_checks {
                    verify_step(iter, &check, p, energy, &mesh, &indices)?;
                }
                Some(check)
            }
            _ => None,
        };

        let est = estimate(&solution, &stiffness, spec)?;
        k_overlap = est
            .overlay
            .hat_overlap_counts(mesh.num_triangles())
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(k_overlap);
        trace.reduction_constant = lambda / k_overlap.max(1) as f64;
        let ind = &est.indicators;
        let n_total = solution.num_dofs();
        trace.cost += n_total;
        trace.records.push(IterationRecord {
            iter,
            dim_x: solution.space().dim(),
            card_p: indices.len(),
            n_total,
            eta: ind.eta,
            eta_spatial: ind.eta_spatial,
            eta_param: ind.eta_parametric,
            energy_sq: energy,
            refine_type: RefineType::None,
            case: None,
            marked: 0,
            max_active_dim: active_dimension(&indices),
            solver_iters: solution.stats.iterations,
            solver_residual: solution.stats.relative_residual,
            wall_time_s: 0.0,
            step,
        });
        if opts.keep_solutions {
            trace.solutions.push(solution.clone());
        }
        let detail = ind.detail.clone();

        let stop = if ind.eta <= opts.tol {
            Some(StopReason::Tolerance)
        } else if iter >= opts.max_iter {
            Some(StopReason::MaxIter)
        } else {
            None
        };
        if let Some(reason) = stop {
            finish(trace, reason, start, solution, detail);
            return Ok(());
        }

        let marking = decide(criterion, ind, params, &mesh, &est.overlay)?;
        let record = trace.records.last_mut().expect("pushed above");
        record.case = marking.case;
        record.marked = marking.decision.num_marked();
        let (candidate_mesh, candidate_indices) = match &marking.decision {
            MarkingDecision::Spatial(m) => {
                record.refine_type = RefineType::Spatial;
                let refined = match marking.trial_mesh {
                    Some(t) => t,
                    None => refine(&mesh, &est.overlay.edges_of(m))?,
                };
                (Some(refined), indices.clone())
            }
            MarkingDecision::Parametric(m) => {
                record.refine_type = RefineType::Parametric;
                let mut larger = indices.clone();
                larger.extend(m.iter().map(|&k| ind.detail.get(k).clone()));
                (None, larger)
            }
            MarkingDecision::Terminate => {
                finish(trace, StopReason::Tolerance, start, solution, detail);
                return Ok(());
            }
        };
        let next_dim = match &candidate_mesh {
            Some(m) => FemSpace::new(Arc::new(m.clone())).dim(),
            None => solution.space().dim(),
        };
        if next_dim * candidate_indices.len() > opts.max_dof {
            trace.records.last_mut().expect("pushed above").refine_type = RefineType::None;
            finish(trace, StopReason::MaxDof, start, solution, detail);
            return Ok(());
        }
        trace.records.last_mut().expect("pushed above").wall_time_s = start.elapsed().as_secs_f64();
        prev = Some(Previous {
            solution,
            energy,
            estimate: est,
            decision: marking.decision,
            detail,
        });
        indices = candidate_indices;
        if let Some(m) = candidate_mesh {
            mesh = Arc::new(m);
        }
    }
    unreachable!("the loop only exits by returning")
}

fn finish(trace: &mut AdaptiveTrace, reason: StopReason, start: Instant, u: GalerkinSolution, detail: IndexSet) {
    if let Some(r) = trace.records.last_mut() {
        r.wall_time_s = start.elapsed().as_secs_f64();
    }
    trace.stop = Some(reason);
    trace.last = Some((u, detail));
}

fn verify_step(
    iter: usize,
    check: &StepCheck,
    prev: &Previous,
    energy: f64,
    mesh: &Mesh,
    indices: &IndexSet,
) -> Result<()> {
    if check.pythagoras_defect >= CHECK_SLACK {
        return Err(Error::InvariantViolation(format!(
            "iteration {iter}: Pythagoras defect {:e}",
            check.pythagoras_defect
        )));
    }
    if energy < prev.energy - 1e-8 {
        return Err(Error::InvariantViolation(format!(
            "iteration {iter}: energy decreased from {} to {energy}",
            prev.energy
        )));
    }
    if !check.reduction_holds() {
        return Err(Error::InvariantViolation(format!(
            "iteration {iter}: reduction bound {:e} exceeds increment {:e}",
            check.reduction_bound, check.increment_sq
        )));
    }
    let mesh_changed = mesh.num_vertices() != prev.solution.mesh().num_vertices();
    let set_changed = indices.len() != prev.solution.indices().len();
    if mesh_changed == set_changed {
        return Err(Error::InvariantViolation(format!(
            "iteration {iter}: expected exactly one of mesh and index set to change"
        )));
    }
    // Q_{ℓ-1} \ P_ℓ ⊆ Q_ℓ
    let detail = crate::paramkit::detail_index_set(indices);
    if let Some(nu) = prev.detail.iter().find(|nu| !indices.contains(nu) && !detail.contains(nu)) {
        return Err(Error::InvariantViolation(format!(
            "iteration {iter}: detail index {nu:?} dropped out of the detail set"
        )));
    }
    Ok(())
}

/// A reference solution on the uniform refinement of the final mesh and
/// the index set `P_L ∪ Q_L`.
#[derive(Debug)]
pub struct ReferenceSolution {
    pub problem: DiscreteProblem,
    pub energy: f64,
}

pub fn reference_solution(
    trace: &AdaptiveTrace,
    spec: &ProblemSpec,
    opts: &SolverOptions,
    max_dof: usize,
) -> Result<ReferenceSolution> {
    let (u, detail) = trace
        .last
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trace has no final iterate".into()))?;
    let indices = u.indices().union(detail);
    let fine = Arc::new(uniform_refine(u.mesh()).fine);
    let space = Arc::new(FemSpace::new(fine));
    let n = space.dim() * indices.len();
    if n > max_dof {
        return Err(Error::InvalidInput(format!(
            "reference space has {n} unknowns, above the cap {max_dof}"
        )));
    }
    let guess = prolong(u, space.clone(), &indices)?;
    let problem = solve_problem_on(space, &indices, spec, opts, Some(guess.coefficients().to_vec()))?;
    let energy = b_energy(&problem.stiffness, &problem.solution, &problem.solution)?;
    Ok(ReferenceSolution { problem, energy })
}

/// `η / (E_ref - E)^{1/2}`, or `None` when `E_ref - E ≤ 10·solver_tol·E_ref`.
pub fn effectivity_index(eta: f64, energy: f64, reference_energy: f64, solver_tol: f64) -> Option<f64> {
    let gap = reference_energy - energy;
    if gap <= 10.0 * solver_tol * reference_energy.abs() || gap <= 0.0 {
        None
    } else {
        Some(eta / gap.sqrt())
    }
}

/// ζ_ℓ for every record. The reference must contain the final iterate's
/// space.
pub fn effectivity(trace: &AdaptiveTrace, reference: &ReferenceSolution, solver_tol: f64) -> Result<Vec<Option<f64>>> {
    check_nested(trace, reference)?;
    Ok(trace
        .records
        .iter()
        .map(|r| effectivity_index(r.eta, r.energy_sq, reference.energy, solver_tol))
        .collect())
}

fn check_nested(trace: &AdaptiveTrace, reference: &ReferenceSolution) -> Result<()> {
    let (u, _) = trace
        .last
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("trace has no final iterate".into()))?;
    let r = &reference.problem.solution;
    let nc = u.mesh().num_vertices();
    let nested = r.mesh().num_vertices() >= nc
        && r.mesh().vertices()[..nc] == u.mesh().vertices()[..]
        && u.indices().is_subset_of(r.indices());
    if nested {
        Ok(())
    } else {
        Err(Error::SpaceMismatch("reference space does not contain the final iterate".into()))
    }
}

/// `e_{ℓ+1}/e_ℓ` with `e_ℓ = (E_ref - E_ℓ)^{1/2}`, skipping vanishing errors.
pub fn convergence_ratios(trace: &AdaptiveTrace, reference_energy: f64) -> Vec<f64> {
    let errors: Vec<f64> = trace
        .records
        .iter()
        .map(|r| (reference_energy - r.energy_sq).max(0.0).sqrt())
        .collect();
    errors
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect()
}

/// Computes the reference solution and stores the reference energy,
/// effectivity series and largest convergence ratio in the trace.
pub fn attach_reference(
    trace: &mut AdaptiveTrace,
    spec: &ProblemSpec,
    opts: &SolverOptions,
    max_dof: usize,
) -> Result<ReferenceSolution> {
    let reference = reference_solution(trace, spec, opts, max_dof)?;
    trace.effectivity = Some(effectivity(trace, &reference, opts.tol)?);
    trace.reference_energy = Some(reference.energy);
    trace.max_convergence_ratio = convergence_ratios(trace, reference.energy)
        .into_iter()
        .reduce(f64::max);
    Ok(reference)
}

/// Least-squares slope of `log η` against `log N`.
pub fn fit_slope(n: &[f64], eta: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(eta)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!("{} usable points, need at least 3", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-14 * k * (1.0 + mx * mx) {
        return Err(Error::InvalidInput("all N values coincide".into()));
    }
    Ok(sxy / sxx)
}

pub fn fit_rate(trace: &AdaptiveTrace) -> Result<f64> {
    let n: Vec<f64> = trace.records.iter().map(|r| r.n_total as f64).collect();
    let eta: Vec<f64> = trace.records.iter().map(|r| r.eta).collect();
    fit_slope(&n, &eta)
}

/// Maxima of `values` over consecutive blocks of `window` entries starting
/// at `start`; the last block may be shorter.
pub fn windowed_maxima(values: &[f64], start: usize, window: usize) -> Vec<f64> {
    if start >= values.len() || window == 0 {
        return Vec::new();
    }
    values[start..]
        .chunks(window)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Whether the block maxima of η after iteration 5 strictly decrease.
pub fn windowed_max_decreasing(trace: &AdaptiveTrace) -> bool {
    let eta: Vec<f64> = trace.records.iter().map(|r| r.eta).collect();
    windowed_maxima(&eta, 5, 10).windows(2).all(|w| w[1] < w[0])
}

pub const CSV_HEADER: &str = "iter,refine_type,dim_x,card_p,n_total,eta,eta_spatial,eta_param,energy_sq,marked,max_active_dim,solver_iters,cum_cost,zeta";

/// Writes the trace as CSV. Wall times are left out so equal runs give
/// equal bytes.
pub fn write_csv<W: Write>(trace: &AdaptiveTrace, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut cum = 0usize;
    for (i, r) in trace.records.iter().enumerate() {
        cum += r.n_total;
        let zeta = trace
            .effectivity
            .as_ref()
            .and_then(|z| z.get(i).copied().flatten())
            .map(|z| format!("{z:.16e}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{},{}",
            r.iter,
            r.refine_type,
            r.dim_x,
            r.card_p,
            r.n_total,
            r.eta,
            r.eta_spatial,
            r.eta_param,
            r.energy_sq,
            r.marked,
            r.max_active_dim,
            r.solver_iters,
            cum,
            zeta
        )?;
    }
    Ok(())
}
