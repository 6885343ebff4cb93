//! Problem data: the affine coefficient `a(x, y) = a0(x) + Σ y_m a_m(x)`
//! with planar cosine modes, the right-hand side, and the norm-equivalence
//! constants.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::meshkit::Point;

/// A deterministic scalar field on the physical domain.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Function(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn function(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Function(Arc::new(f))
    }

    pub fn eval(&self, x: Point) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Function(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(c) => Some(*c),
            ScalarField::Function(_) => None,
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Planar Fourier modes of increasing total order,
/// `a_m(x) = A m^{-σ} cos(2π β1(m) x1) cos(2π β2(m) x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineModes {
    pub amplitude: f64,
    pub sigma: f64,
}

impl CosineModes {
    /// `(β1(m), β2(m))` for `m ≥ 1`.
    pub fn frequencies(m: u32) -> (u32, u32) {
        assert!(m >= 1);
        let k = total_order(m);
        let beta1 = m - k * (k + 1) / 2;
        (beta1, k - beta1)
    }

    /// `‖a_m‖_∞ = A m^{-σ}`.
    pub fn sup_norm(&self, m: u32) -> f64 {
        self.amplitude * f64::from(m).powf(-self.sigma)
    }

    pub fn eval(&self, m: u32, x: Point) -> f64 {
        let (b1, b2) = Self::frequencies(m);
        let two_pi = 2.0 * std::f64::consts::PI;
        self.sup_norm(m) * (two_pi * f64::from(b1) * x[0]).cos() * (two_pi * f64::from(b2) * x[1]).cos()
    }

    /// `∫_T a_m dx` in closed form. With `cos(a x1) cos(b x2) =
    /// Re(e^{i(a x1 + b x2)} + e^{i(a x1 - b x2)}) / 2` each term is twice
    /// the area times a second divided difference of `exp`.
    pub fn triangle_integral(&self, m: u32, corners: [Point; 3]) -> f64 {
        let (b1, b2) = Self::frequencies(m);
        let two_pi = 2.0 * std::f64::consts::PI;
        let (a, b) = (two_pi * f64::from(b1), two_pi * f64::from(b2));
        let [p0, p1, p2] = corners;
        let area = 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
        let wave = |kx: f64, ky: f64| {
            let z = corners.map(|p| Complex64::new(0.0, kx * p[0] + ky * p[1]));
            exp_divided_difference(z[0], z[1], z[2]).re
        };
        self.sup_norm(m) * area * (wave(a, b) + wave(a, -b))
    }
}

/// `(e^h - 1) / h`.
fn phi1(h: Complex64) -> Complex64 {
    if h.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 2..24 {
            term = term * h / f64::from(n);
            sum += term;
        }
        sum
    } else {
        (h.exp() - 1.0) / h
    }
}

/// `exp[z0, z1, z2]`, stable for clustered and coincident nodes.
fn exp_divided_difference(z0: Complex64, z1: Complex64, z2: Complex64) -> Complex64 {
    let z = [z0, z1, z2];
    let pairs = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let (ia, ic, ib) = pairs
        .into_iter()
        .max_by(|p, q| (z[p.0] - z[p.1]).norm().total_cmp(&(z[q.0] - z[q.1]).norm()))
        .unwrap();
    let spread = (z[ic] - z[ia]).norm();
    if spread < 0.5 {
        // e^{z0} Σ_n h_n(0, h1, h2) / (n + 2)!, h_n complete homogeneous
        let (h1, h2) = (z1 - z0, z2 - z0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut fact = 2.0;
        let mut p1 = Complex64::new(1.0, 0.0);
        let mut complete = Vec::from([Complex64::new(1.0, 0.0)]);
        for n in 0..30 {
            if n > 0 {
                p1 *= h1;
                // h_n = h1^n + h2 h_{n-1}
                let next = p1 + h2 * complete[n - 1];
                complete.push(next);
                fact *= (n + 2) as f64;
            }
            sum += complete[n] / fact;
        }
        return z0.exp() * sum;
    }
    let dd = |x: Complex64, y: Complex64| x.exp() * phi1(y - x);
    (dd(z[ib], z[ic]) - dd(z[ia], z[ib])) / (z[ic] - z[ia])
}

/// `k(m) = ⌊-1/2 + sqrt(1/4 + 2m)⌋`, corrected for rounding so that
/// `k(k+1)/2 ≤ m < (k+1)(k+2)/2`.
fn total_order(m: u32) -> u32 {
    let m = u64::from(m);
    let mut k = (-0.5 + (0.25 + 2.0 * m as f64).sqrt()).floor() as u64;
    while k * (k + 1) / 2 > m {
        k -= 1;
    }
    while (k + 1) * (k + 2) / 2 <= m {
        k += 1;
    }
    k as u32
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mean_field: ScalarField,
    pub a0_min: f64,
    pub a0_max: f64,
    pub modes: CosineModes,
    pub rhs: ScalarField,
}

impl ProblemSpec {
    /// The benchmark problem: `a0 ≡ 1`, `f ≡ 1`, and the given amplitude and
    /// decay of the cosine modes.
    pub fn cosine(amplitude: f64, sigma: f64) -> Result<Self> {
        if sigma <= 1.0 {
            return Err(Error::DivergentSeries { sigma });
        }
        if !(amplitude >= 0.0) {
            return Err(Error::InvalidInput(format!("amplitude {amplitude} must be non-negative")));
        }
        Ok(ProblemSpec {
            mean_field: ScalarField::Constant(1.0),
            a0_min: 1.0,
            a0_max: 1.0,
            modes: CosineModes { amplitude, sigma },
            rhs: ScalarField::Constant(1.0),
        })
    }

    /// The benchmark problem parametrized by `τ = A ζ(σ)`.
    pub fn cosine_with_tau(tau: f64, sigma: f64) -> Result<Self> {
        Self::cosine(amplitude_from_tau(tau, sigma)?, sigma)
    }

    /// A problem without parametric dependence.
    pub fn deterministic() -> Self {
        Self::cosine(0.0, 2.0).expect("valid deterministic problem")
    }

    /// The benchmark of the numerical experiments: `σ = 2`, `τ = 0.9`.
    pub fn benchmark() -> Self {
        Self::cosine_with_tau(0.9, 2.0).expect("valid benchmark problem")
    }

    pub fn is_deterministic(&self) -> bool {
        self.modes.amplitude == 0.0
    }

    /// `τ = (1 / a0_min) Σ ‖a_m‖_∞ = A ζ(σ) / a0_min`.
    pub fn tau(&self) -> Result<f64> {
        if self.modes.amplitude == 0.0 {
            return Ok(0.0);
        }
        Ok(self.modes.amplitude * zeta(self.modes.sigma)? / self.a0_min)
    }

    /// Coefficient `a_m`; `m = 0` is the mean field.
    pub fn coefficient(&self, m: u32, x: Point) -> f64 {
        if m == 0 {
            self.mean_field.eval(x)
        } else {
            self.modes.eval(m, x)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0_min > 0.0 && self.a0_min <= self.a0_max) {
            return Err(Error::InvalidInput(format!(
                "mean-field bounds must satisfy 0 < a0_min <= a0_max (got {}, {})",
                self.a0_min, self.a0_max
            )));
        }
        let tau = self.tau()?;
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::InadmissibleProblem { tau });
        }
        Ok(())
    }
}

/// λ and Λ with `λ B(v,v) ≤ B0(v,v) ≤ Λ B(v,v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastBounds {
    pub lambda: f64,
    pub big_lambda: f64,
}

impl ContrastBounds {
    pub fn new(a0_min: f64, a0_max: f64, tau: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::InadmissibleProblem { tau });
        }
        Ok(ContrastBounds {
            lambda: a0_min / (a0_max * (1.0 + tau)),
            big_lambda: a0_max / (a0_min * (1.0 - tau)),
        })
    }
}

pub fn contrast_bounds(spec: &ProblemSpec) -> Result<ContrastBounds> {
    ContrastBounds::new(spec.a0_min, spec.a0_max, spec.tau()?)
}

/// Riemann zeta for real `s > 1`: partial sum plus an Euler–Maclaurin tail.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::DivergentSeries { sigma: s });
    }
    const N: u32 = 64;
    let head: f64 = (1..N).rev().map(|n| f64::from(n).powf(-s)).sum();
    let n = f64::from(N);
    // Σ_{k≥N} k^{-s} = N^{1-s}/(s-1) + N^{-s}/2 + Σ_j B_{2j}/(2j)! s(s+1)..(s+2j-2) N^{-s-2j+1}
    let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0];
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = n.powf(-s - 1.0);
    for (j, b) in bernoulli.iter().enumerate() {
        tail += b / fact * rising * power;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        fact *= (k + 3.0) * (k + 4.0);
        power /= n * n;
    }
    Ok(head + tail)
}

/// `A = τ / ζ(σ)`.
pub fn amplitude_from_tau(tau: f64, sigma: f64) -> Result<f64> {
    let z = zeta(sigma)?;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InadmissibleProblem { tau });
    }
    Ok(tau / z)
}

pub fn fourier_mode(m: u32, amplitude: f64, sigma: f64) -> impl Fn(Point) -> f64 {
    let modes = CosineModes { amplitude, sigma };
    move |x| modes.eval(m, x)
}

/// Where the initial mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    LShape,
    File(PathBuf),
}

/// How the mode amplitude is fixed in a config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeRule {
    Tau(f64),
    Amplitude(f64),
}

/// Problem configuration read from `key = value` lines.
///
/// Recognised keys: `sigma`, `tau` or `amplitude` (not both), `mesh`
/// (`lshape` or a path), `rhs` (`one`). Blank lines and `#` comments are
/// ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub sigma: f64,
    pub amplitude: AmplitudeRule,
    pub mesh: MeshSource,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            sigma: 2.0,
            amplitude: AmplitudeRule::Tau(0.9),
            mesh: MeshSource::LShape,
        }
    }
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ProblemConfig::default();
        let mut seen_tau = false;
        let mut seen_amplitude = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("'{key}' needs a number, got '{value}'")))
            };
            match key {
                "sigma" => cfg.sigma = number()?,
                "tau" => {
                    seen_tau = true;
                    cfg.amplitude = AmplitudeRule::Tau(number()?);
                }
                "amplitude" => {
                    seen_amplitude = true;
                    cfg.amplitude = AmplitudeRule::Amplitude(number()?);
                }
                "mesh" => {
                    cfg.mesh = if value == "lshape" {
                        MeshSource::LShape
                    } else {
                        MeshSource::File(PathBuf::from(value))
                    }
                }
                "rhs" => {
                    if value != "one" {
                        return Err(err(format!("unsupported rhs '{value}' (only 'one')")));
                    }
                }
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
            if seen_tau && seen_amplitude {
                return Err(err("'tau' and 'amplitude' are mutually exclusive".into()));
            }
        }
        Ok(cfg)
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let spec = match self.amplitude {
            AmplitudeRule::Tau(tau) => {
                if self.sigma <= 1.0 {
                    return Err(Error::DivergentSeries { sigma: self.sigma });
                }
                if !(0.0..1.0).contains(&tau) {
                    return Err(Error::InadmissibleProblem { tau });
                }
                ProblemSpec::cosine_with_tau(tau, self.sigma)?
            }
            AmplitudeRule::Amplitude(a) => ProblemSpec::cosine(a, self.sigma)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frequencies() {
        assert_eq!(total_order(1), 1);
        assert_eq!(CosineModes::frequencies(1), (0, 1));
        assert_eq!(total_order(3), 2);
        assert_eq!(CosineModes::frequencies(3), (0, 2));
        assert_eq!(CosineModes::frequencies(5), (2, 0));
        // every total order k contributes k+1 modes
        for k in 1..40u32 {
            let first = k * (k + 1) / 2;
            for m in first..first + k + 1 {
                let (b1, b2) = CosineModes::frequencies(m);
                assert_eq!(b1 + b2, k);
            }
        }
    }

    #[test]
    fn first_mode_closed_form() {
        let a = fourier_mode(1, 0.5, 2.0);
        for &x in &[[0.1, 0.2], [-0.7, 0.9]] {
            assert!((a(x) - 0.5 * (2.0 * PI * x[1]).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn sup_norm_is_attained() {
        let modes = CosineModes { amplitude: 0.3, sigma: 2.0 };
        for m in 1..30 {
            assert!((modes.eval(m, [0.0, 0.0]) - modes.sup_norm(m)).abs() < 1e-15);
            assert!((modes.sup_norm(m) - 0.3 / f64::from(m * m)).abs() < 1e-15);
        }
    }

    fn zeta_by_summation(s: f64) -> f64 {
        // direct sum with an integral tail bound; accurate to ~1e-14 for s ≥ 2
        let n = 2_000_000u64;
        let head: f64 = (1..=n).rev().map(|k| (k as f64).powf(-s)).sum();
        head + (n as f64 + 0.5).powf(1.0 - s) / (s - 1.0)
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0).unwrap() - PI * PI / 6.0).abs() < 1e-13);
        assert!((zeta(4.0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-13);
        for &s in &[1.5, 2.5, 3.3] {
            assert!((zeta(s).unwrap() - zeta_by_summation(s)).abs() < 1e-10, "s = {s}");
        }
        assert!(matches!(zeta(1.0), Err(Error::DivergentSeries { .. })));
    }

    #[test]
    fn amplitude_examples() {
        let a = amplitude_from_tau(0.9, 2.0).unwrap();
        assert!((a - 0.547).abs() < 5e-4);
        assert!((a - 5.4 / (PI * PI)).abs() < 1e-13);
        assert_eq!(amplitude_from_tau(0.0, 3.0).unwrap(), 0.0);
        let a = amplitude_from_tau(0.5, 4.0).unwrap();
        assert!((a - 45.0 / PI.powi(4)).abs() < 1e-13);
        assert!((a - 0.5 / zeta_by_summation(4.0)).abs() < 1e-12);
        assert!(amplitude_from_tau(0.5, 0.9).is_err());
    }

    #[test]
    fn contrast_examples() {
        let b = contrast_bounds(&ProblemSpec::benchmark()).unwrap();
        assert!((b.lambda - 1.0 / 1.9).abs() < 1e-12);
        assert!((b.big_lambda - 10.0).abs() < 1e-10);
        let b = contrast_bounds(&ProblemSpec::deterministic()).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 1.0));
        let b = ContrastBounds::new(1.0, 2.0, 0.5).unwrap();
        assert!((b.lambda - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.big_lambda - 4.0).abs() < 1e-15);
        assert!(matches!(ContrastBounds::new(1.0, 1.0, 1.0), Err(Error::InadmissibleProblem { .. })));
    }

    #[test]
    fn partial_sums_increase_to_tau() {
        let spec = ProblemSpec::benchmark();
        let tau = spec.tau().unwrap();
        let mut sum = 0.0;
        for m in 1..5000 {
            let next = sum + spec.modes.sup_norm(m);
            assert!(next > sum && next < tau);
            sum = next;
        }
        assert!(tau - sum < 1e-3);
    }

    #[test]
    fn config_parsing() {
        let cfg = ProblemConfig::parse("sigma = 3\namplitude = 0.2 # comment\nmesh = lshape\nrhs = one\n").unwrap();
        assert_eq!(cfg.sigma, 3.0);
        assert_eq!(cfg.amplitude, AmplitudeRule::Amplitude(0.2));
        assert!(ProblemConfig::parse("tau = 0.5\namplitude = 0.2\n").is_err());
        assert!(matches!(ProblemConfig::parse("colour = red"), Err(Error::Config { line: 1, .. })));
        let cfg = ProblemConfig::parse("tau = 1.1").unwrap();
        assert!(matches!(cfg.problem(), Err(Error::InadmissibleProblem { .. })));
    }
}
