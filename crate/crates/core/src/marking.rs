//! Dörfler and maximum marking, and the four composite criteria that decide
//! between mesh refinement and parametric enrichment.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ErrorIndicators;
use crate::meshkit::{realized_new_vertices, refine, Mesh, TwoLevelOverlay};

/// Relative slack for the weak-marking checks.
const WEAK_MARKING_SLACK: f64 = 1e-12;

static WEAK_MARKING_CHECKS: AtomicUsize = AtomicUsize::new(0);

/// Number of weak-marking checks performed by this process so far.
pub fn weak_marking_checks() -> usize {
    WEAK_MARKING_CHECKS.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    A,
    B,
    C,
    D,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::A, Criterion::B, Criterion::C, Criterion::D];

    /// B and D compare error reductions via a trial refinement.
    pub fn uses_trial_refinement(self) -> bool {
        matches!(self, Criterion::B | Criterion::D)
    }

    /// C and D use the maximum criterion on the detail set.
    pub fn uses_maximum(self) -> bool {
        matches!(self, Criterion::C | Criterion::D)
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::A => "A",
            Criterion::B => "B",
            Criterion::C => "C",
            Criterion::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Criterion::A),
            "B" | "b" => Ok(Criterion::B),
            "C" | "c" => Ok(Criterion::C),
            "D" | "d" => Ok(Criterion::D),
            other => Err(Error::InvalidInput(format!("unknown criterion '{other}' (expected A, B, C or D)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkingParams {
    pub theta_x: f64,
    pub theta_p: f64,
    pub vartheta: f64,
}

impl MarkingParams {
    pub fn new(theta_x: f64, theta_p: f64, vartheta: f64) -> Self {
        MarkingParams {
            theta_x,
            theta_p,
            vartheta,
        }
    }

    /// `0 < θ_X ≤ 1`, `ϑ > 0`, and `0 < θ_P ≤ 1` (A, B) or `0 ≤ θ_P ≤ 1`
    /// (C, D).
    pub fn validate(&self, criterion: Criterion) -> Result<()> {
        if !(self.theta_x > 0.0 && self.theta_x <= 1.0) {
            return Err(Error::InvalidInput(format!("theta_x = {} must lie in (0, 1]", self.theta_x)));
        }
        let p_ok = if criterion.uses_maximum() {
            (0.0..=1.0).contains(&self.theta_p)
        } else {
            self.theta_p > 0.0 && self.theta_p <= 1.0
        };
        if !p_ok {
            let range = if criterion.uses_maximum() { "[0, 1]" } else { "(0, 1]" };
            return Err(Error::InvalidInput(format!(
                "theta_p = {} must lie in {range} for criterion {criterion}",
                self.theta_p
            )));
        }
        if !(self.vartheta > 0.0 && self.vartheta.is_finite()) {
            return Err(Error::InvalidInput(format!("vartheta = {} must be positive", self.vartheta)));
        }
        Ok(())
    }
}

/// Positions sorted by descending value, ties by ascending position.
fn descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Minimal-cardinality set with `θ² Σ η² ≤ Σ_marked η²`, built greedily
/// from the largest values. Returned in ascending position order.
pub fn doerfler(values: &[f64], theta: f64) -> Vec<usize> {
    let order = descending(values);
    let total: f64 = order.iter().map(|&i| values[i] * values[i]).sum();
    let goal = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        if acc >= goal {
            break;
        }
        acc += values[i] * values[i];
        marked.push(i);
    }
    marked.sort_unstable();
    marked
}

/// `{ i : η_i ≥ (1 - θ_P) max η }`, ascending.
pub fn maximum_mark(values: &[f64], theta_p: f64) -> Vec<usize> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    let threshold = (1.0 - theta_p) * max;
    (0..values.len()).filter(|&i| values[i] >= threshold).collect()
}

fn sum_sq(values: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&i| values[i] * values[i]).sum::<f64>().sqrt()
}

fn unmarked_max(values: &[f64], set: &[usize]) -> f64 {
    let mut marked = vec![false; values.len()];
    set.iter().for_each(|&i| marked[i] = true);
    (0..values.len()).filter(|&i| !marked[i]).map(|i| values[i]).fold(0.0, f64::max)
}

/// Every unmarked value is at most `√(1-θ²)/θ · η(marked)`.
pub fn check_weak_doerfler(values: &[f64], set: &[usize], theta: f64) -> Result<()> {
    WEAK_MARKING_CHECKS.fetch_add(1, Ordering::Relaxed);
    let bound = (1.0 - theta * theta).max(0.0).sqrt() / theta * sum_sq(values, set);
    let worst = unmarked_max(values, set);
    if worst > bound * (1.0 + WEAK_MARKING_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::InvariantViolation(format!(
            "Dörfler weak marking: unmarked {worst:e} exceeds {bound:e}"
        )));
    }
    Ok(())
}

/// Every unmarked value is at most `(1-θ_P) · η(marked)`.
pub fn check_weak_maximum(values: &[f64], set: &[usize], theta_p: f64) -> Result<()> {
    WEAK_MARKING_CHECKS.fetch_add(1, Ordering::Relaxed);
    let bound = (1.0 - theta_p) * sum_sq(values, set);
    let worst = unmarked_max(values, set);
    if worst > bound * (1.0 + WEAK_MARKING_SLACK) + f64::MIN_POSITIVE {
        return Err(Error::InvariantViolation(format!(
            "maximum weak marking: unmarked {worst:e} exceeds {bound:e}"
        )));
    }
    Ok(())
}

/// Which branch of the criterion fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Spatial refinement.
    A,
    /// Parametric enrichment.
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarkingDecision {
    /// Positions into N⁺.
    Spatial(Vec<usize>),
    /// Positions into Q.
    Parametric(Vec<usize>),
    Terminate,
}

impl MarkingDecision {
    pub fn num_marked(&self) -> usize {
        match self {
            MarkingDecision::Spatial(m) | MarkingDecision::Parametric(m) => m.len(),
            MarkingDecision::Terminate => 0,
        }
    }
}

/// The decision plus the quantities it was based on.
#[derive(Debug, Clone)]
pub struct Marking {
    pub decision: MarkingDecision,
    pub case: Option<Case>,
    /// Left side of the case test, `ϑ η(Q)` or `ϑ η(𝔐̃)`.
    pub parametric_side: f64,
    /// Right side, `η(N⁺)` or `η(R̃)`.
    pub spatial_side: f64,
    /// Candidate sets before the case choice.
    pub spatial_candidates: Vec<usize>,
    pub parametric_candidates: Vec<usize>,
    /// `R̃ = N⁺ ∩ Ñ` for B and D.
    pub realized: Option<Vec<usize>>,
    /// `refine(T, M̃)` for B and D, reusable as the next mesh.
    pub trial_mesh: Option<Mesh>,
}

fn parametric_candidates(criterion: Criterion, values: &[f64], params: &MarkingParams) -> Result<Vec<usize>> {
    if criterion.uses_maximum() {
        let set = maximum_mark(values, params.theta_p);
        check_weak_maximum(values, &set, params.theta_p)?;
        Ok(set)
    } else {
        let set = doerfler(values, params.theta_p);
        check_weak_doerfler(values, &set, params.theta_p)?;
        Ok(set)
    }
}

/// Applies one of the four criteria. `overlay` must be the uniform
/// refinement of `mesh` the spatial indicators were computed on.
pub fn decide(
    criterion: Criterion,
    indicators: &ErrorIndicators,
    params: &MarkingParams,
    mesh: &Mesh,
    overlay: &TwoLevelOverlay,
) -> Result<Marking> {
    params.validate(criterion)?;
    if indicators.spatial.len() != overlay.len() {
        return Err(Error::SpaceMismatch(format!(
            "{} spatial indicators for {} new vertices",
            indicators.spatial.len(),
            overlay.len()
        )));
    }
    let spatial = &indicators.spatial;
    let parametric = &indicators.parametric;
    let mut out = Marking {
        decision: MarkingDecision::Terminate,
        case: None,
        parametric_side: 0.0,
        spatial_side: 0.0,
        spatial_candidates: Vec::new(),
        parametric_candidates: Vec::new(),
        realized: None,
        trial_mesh: None,
    };
    if indicators.eta == 0.0 {
        return Ok(out);
    }

    let m_tilde = doerfler(spatial, params.theta_x);
    check_weak_doerfler(spatial, &m_tilde, params.theta_x)?;
    let mm_tilde = parametric_candidates(criterion, parametric, params)?;

    if criterion.uses_trial_refinement() {
        let trial = refine(mesh, &overlay.edges_of(&m_tilde))?;
        let realized = realized_new_vertices(overlay, mesh, &trial);
        out.parametric_side = params.vartheta * sum_sq(parametric, &mm_tilde);
        out.spatial_side = sum_sq(spatial, &realized);
        out.realized = Some(realized);
        out.trial_mesh = Some(trial);
    } else {
        out.parametric_side = params.vartheta * indicators.eta_parametric;
        out.spatial_side = indicators.eta_spatial;
    }

    if out.parametric_side <= out.spatial_side {
        out.case = Some(Case::A);
        out.decision = MarkingDecision::Spatial(m_tilde.clone());
    } else {
        out.case = Some(Case::B);
        out.decision = MarkingDecision::Parametric(mm_tilde.clone());
    }
    out.spatial_candidates = m_tilde;
    out.parametric_candidates = mm_tilde;
    if out.decision.num_marked() == 0 {
        return Err(Error::InvariantViolation(format!(
            "criterion {criterion} produced an empty marking with η = {:e}",
            indicators.eta
        )));
    }
    Ok(out)
}
