//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sgfem::driver::RunOptions;
use sgfem::marking::{Criterion, MarkingParams};
use sgfem::meshkit::{read_mesh, Mesh};
use sgfem::model::{AmplitudeRule, MeshSource, ProblemConfig, ProblemSpec};

/// Fully resolved settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub criterion: Criterion,
    pub theta_x: f64,
    pub theta_p: f64,
    pub vartheta: f64,
    pub tol: f64,
    pub sigma: f64,
    pub tau: Option<f64>,
    pub amplitude: Option<f64>,
    pub mesh: String,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub max_dof: usize,
    pub output: Option<PathBuf>,
    pub with_reference: bool,
    pub reference_max_dof: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            criterion: Criterion::A,
            theta_x: 0.5,
            theta_p: 0.5,
            vartheta: 1.0,
            tol: 1e-2,
            sigma: 2.0,
            tau: Some(0.9),
            amplitude: None,
            mesh: "lshape".into(),
            solver_tol: 1e-10,
            max_iter: 1000,
            max_dof: 200_000,
            output: None,
            with_reference: false,
            reference_max_dof: 5_000_000,
        }
    }
}

/// Values that may come from either the config file or the flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub criterion: Option<Criterion>,
    pub theta_x: Option<f64>,
    pub theta_p: Option<f64>,
    pub vartheta: Option<f64>,
    pub tol: Option<f64>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub amplitude: Option<f64>,
    pub mesh: Option<String>,
    pub solver_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_dof: Option<usize>,
    pub output: Option<PathBuf>,
    pub with_reference: Option<bool>,
    pub reference_max_dof: Option<usize>,
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        set!(criterion, theta_x, theta_p, vartheta, tol, sigma, mesh, solver_tol, max_iter, max_dof, with_reference, reference_max_dof);
        if o.output.is_some() {
            self.output = o.output.clone();
        }
        // tau and amplitude replace each other
        if o.tau.is_some() {
            self.tau = o.tau;
            self.amplitude = None;
        }
        if o.amplitude.is_some() {
            self.amplitude = o.amplitude;
            self.tau = None;
        }
    }

    pub fn params(&self) -> MarkingParams {
        MarkingParams::new(self.theta_x, self.theta_p, self.vartheta)
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            max_dof: self.max_dof,
            solver_tol: self.solver_tol,
            ..Default::default()
        }
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let amplitude = match (self.tau, self.amplitude) {
            (Some(t), None) => AmplitudeRule::Tau(t),
            (None, Some(a)) => AmplitudeRule::Amplitude(a),
            _ => bail!("exactly one of tau and amplitude must be set"),
        };
        let cfg = ProblemConfig {
            sigma: self.sigma,
            amplitude,
            mesh: mesh_source(&self.mesh),
        };
        Ok(cfg.problem()?)
    }

    pub fn initial_mesh(&self) -> Result<Mesh> {
        match mesh_source(&self.mesh) {
            MeshSource::LShape => Ok(Mesh::initial_lshape()),
            MeshSource::File(path) => {
                let file = std::fs::File::open(&path).with_context(|| format!("opening mesh {}", path.display()))?;
                Ok(read_mesh(std::io::BufReader::new(file)).with_context(|| format!("reading mesh {}", path.display()))?)
            }
        }
    }
}

fn mesh_source(s: &str) -> MeshSource {
    if s == "lshape" {
        MeshSource::LShape
    } else {
        MeshSource::File(PathBuf::from(s))
    }
}

const MODEL_KEYS: [&str; 5] = ["sigma", "tau", "amplitude", "mesh", "rhs"];

/// Reads a config file. Model keys go through the problem parser (which
/// enforces `tau` xor `amplitude`); the remaining keys configure the run.
pub fn read_config(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<Overrides> {
    let mut o = Overrides::default();
    // keep line numbers intact for the problem parser
    let mut model_text = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = content.split_once('=') else {
            model_text.push_str(content);
            model_text.push('\n');
            continue;
        };
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if MODEL_KEYS.contains(&key.as_str()) {
            model_text.push_str(content);
            model_text.push('\n');
            match key.as_str() {
                "sigma" => o.sigma = Some(number(line, &key, value)?),
                "tau" => o.tau = Some(number(line, &key, value)?),
                "amplitude" => o.amplitude = Some(number(line, &key, value)?),
                "mesh" => o.mesh = Some(value.to_string()),
                _ => {}
            }
            continue;
        }
        model_text.push('\n');
        match key.as_str() {
            "criterion" => {
                o.criterion = Some(value.parse().map_err(|e| anyhow::anyhow!("line {line}: {e}"))?)
            }
            "theta_x" => o.theta_x = Some(number(line, &key, value)?),
            "theta_p" => o.theta_p = Some(number(line, &key, value)?),
            "vartheta" => o.vartheta = Some(number(line, &key, value)?),
            "tol" => o.tol = Some(number(line, &key, value)?),
            "solver_tol" => o.solver_tol = Some(number(line, &key, value)?),
            "max_iter" => o.max_iter = Some(count(line, &key, value)?),
            "max_dof" => o.max_dof = Some(count(line, &key, value)?),
            "reference_max_dof" => o.reference_max_dof = Some(count(line, &key, value)?),
            "output" => o.output = Some(PathBuf::from(value)),
            "with_reference" => {
                o.with_reference = Some(match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => bail!("line {line}: 'with_reference' needs true or false, got '{value}'"),
                })
            }
            _ => bail!("line {line}: unknown key '{key}'"),
        }
    }
    ProblemConfig::parse(&model_text)?;
    Ok(o)
}

fn number(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("line {line}: '{key}' needs a number, got '{value}'"))
}

fn count(line: usize, key: &str, value: &str) -> Result<usize> {
    // accept 2e5 style integers
    if let Ok(n) = value.parse::<usize>() {
        return Ok(n);
    }
    match value.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e18 => Ok(x as usize),
        _ => bail!("line {line}: '{key}' needs a nonnegative integer, got '{value}'"),
    }
}

/// Parses `0.3`, `0.1,0.5,0.9`, `0.1..0.9` (step 0.1) or `0.1..0.9:0.2`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (b, step.trim().parse::<f64>()?),
            None => (rest, 0.1),
        };
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        if !(step > 0.0) || b < a {
            bail!("bad range '{s}'");
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| round12(a + i as f64 * step)).collect());
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value '{v}' in '{s}'")))
        .collect()
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

pub fn parse_criteria(s: &str) -> Result<Vec<Criterion>> {
    s.split(',')
        .map(|c| c.trim().parse::<Criterion>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.3").unwrap(), vec![0.3]);
        assert_eq!(parse_grid("0.1, 0.5").unwrap(), vec![0.1, 0.5]);
        let g = parse_grid("0.1..0.9").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[8], 0.9);
        assert_eq!(parse_grid("0.2..0.8:0.3").unwrap(), vec![0.2, 0.5, 0.8]);
        assert!(parse_grid("0.9..0.1").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn config_file() {
        let o = parse_config("criterion = D\ntheta_x = 0.7 # comment\nsigma = 3\ntau = 0.5\nmax_dof = 2e5\n").unwrap();
        assert_eq!(o.criterion, Some(Criterion::D));
        assert_eq!(o.theta_x, Some(0.7));
        assert_eq!(o.sigma, Some(3.0));
        assert_eq!(o.max_dof, Some(200_000));
        let err = parse_config("tau = 0.5\n\namplitude = 0.1\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 3"), "{err:#}");
        assert!(parse_config("colour = red").is_err());
    }

    #[test]
    fn flags_override() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            amplitude: Some(0.2),
            theta_p: Some(0.3),
            ..Default::default()
        });
        assert_eq!((c.tau, c.amplitude, c.theta_p), (None, Some(0.2), 0.3));
    }
}
