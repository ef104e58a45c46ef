//! Command-line surface and the validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hardylab_core::functionals::HardyParams;
use hardylab_core::ModelSpace;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hardylab", version, about = "Sharp weighted Hardy inequalities on model manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sharp, remainder and Taylor constants for (p, beta, k).
    Constants(CommonArgs),
    /// Hardy quotients of the near-extremal family along an epsilon ladder.
    SweepSharp(CommonArgs),
    /// Remainder ratios over a (theta, epsilon) grid and the gamma companion test.
    SweepRemainder(CommonArgs),
    /// Discrete Rayleigh-quotient minimization.
    Rayleigh(CommonArgs),
    /// Randomized Jacobi dominance trials and the Newton chain.
    #[command(alias = "compare")]
    CompareJacobi(CommonArgs),
    /// Improved, pointwise, log-integral, Taylor and Laplacian checks.
    CheckInequalities(CommonArgs),
    /// The full acceptance suite.
    VerifyAll(CommonArgs),
}

impl Command {
    pub fn parts(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Constants(a) => (Experiment::Constants, a),
            Command::SweepSharp(a) => (Experiment::SweepSharp, a),
            Command::SweepRemainder(a) => (Experiment::SweepRemainder, a),
            Command::Rayleigh(a) => (Experiment::Rayleigh, a),
            Command::CompareJacobi(a) => (Experiment::CompareJacobi, a),
            Command::CheckInequalities(a) => (Experiment::CheckInequalities, a),
            Command::VerifyAll(a) => (Experiment::VerifyAll, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Constants,
    SweepSharp,
    SweepRemainder,
    Rayleigh,
    CompareJacobi,
    CheckInequalities,
    VerifyAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    EuclideanPoint,
    EuclideanSubspace,
    CylinderSection,
    CylinderAxis,
    Hemisphere,
    #[value(alias = "torus-subtorus")]
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model manifold.
    #[arg(long)]
    pub model: Option<ModelChoice>,
    /// Ambient dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Submanifold dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Codimension, for model-free commands.
    #[arg(long)]
    pub k: Option<usize>,
    /// Working radius: torus tube radius, or ball radius for Euclidean models.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub transverse_mass: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Comma-separated theta values.
    #[arg(long)]
    pub theta: Option<String>,
    /// Log base D.
    #[arg(long = "D")]
    pub d: Option<f64>,
    /// Comma-separated epsilon values, or `default` / `deep`.
    #[arg(long)]
    pub eps_ladder: Option<String>,
    /// Rayleigh grid size.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Relative tolerance of the sharp-constant fit.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
    /// Force the sequential code path.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRecord {
    pub kind: ModelChoice,
    pub m: usize,
    /// Submanifold dimension; the sphere dimension for cylinder and hemisphere models.
    pub n: usize,
    pub eta: Option<f64>,
    pub transverse_mass: Option<f64>,
}

impl ModelRecord {
    pub fn build(&self) -> Result<ModelSpace, String> {
        let (m, n) = (self.m, self.n);
        let base = match self.kind {
            ModelChoice::EuclideanPoint => ModelSpace::euclidean_point(m),
            ModelChoice::EuclideanSubspace => ModelSpace::euclidean_subspace(m, n),
            ModelChoice::CylinderSection => ModelSpace::cylinder_section(n),
            ModelChoice::CylinderAxis => ModelSpace::cylinder_axis(n),
            ModelChoice::Hemisphere => ModelSpace::hemisphere(n),
            ModelChoice::Torus => ModelSpace::torus_subtorus(m, n, self.eta.unwrap_or(1.0)),
        }
        .map_err(|e| e.to_string())?;
        let mut model = match (self.kind, self.eta) {
            (ModelChoice::EuclideanPoint | ModelChoice::EuclideanSubspace, Some(r)) => base.with_radius(r).map_err(|e| e.to_string())?,
            _ => base,
        };
        if let Some(t) = self.transverse_mass {
            model = model.with_transverse_mass(t).map_err(|e| e.to_string())?;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsRecord {
    pub p: f64,
    pub beta: f64,
    pub k: usize,
}

/// Validated configuration; echoed verbatim in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: Option<ModelRecord>,
    pub params: Option<ParamsRecord>,
    pub alpha: Option<f64>,
    pub theta: Option<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub eps_ladder: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub sequential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("{what}: cannot parse '{v}' as a number")))
        })
        .collect()
}

fn default_dims(kind: ModelChoice) -> (usize, usize) {
    match kind {
        ModelChoice::EuclideanPoint => (3, 0),
        ModelChoice::EuclideanSubspace => (3, 1),
        ModelChoice::CylinderSection | ModelChoice::CylinderAxis => (2, 1),
        ModelChoice::Hemisphere => (2, 2),
        ModelChoice::Torus => (2, 1),
    }
}

impl RunConfig {
    pub fn from_args(experiment: Experiment, a: &CommonArgs) -> Result<Self, ConfigError> {
        let model = match a.model {
            None => {
                if a.m.is_some() || a.n.is_some() || a.eta.is_some() {
                    return Err(ConfigError("--m, --n and --eta need --model".into()));
                }
                None
            }
            Some(kind) => {
                let (dm, dn) = default_dims(kind);
                let mut rec = ModelRecord {
                    kind,
                    m: a.m.unwrap_or(dm),
                    n: a.n.unwrap_or(dn),
                    eta: a.eta,
                    transverse_mass: a.transverse_mass,
                };
                let built = rec.build().map_err(ConfigError)?;
                // For the cylinder and sphere models n is the sphere dimension and fixes m.
                if matches!(kind, ModelChoice::CylinderSection | ModelChoice::CylinderAxis | ModelChoice::Hemisphere) {
                    if let Some(given) = a.m {
                        if given != built.m {
                            return Err(ConfigError(format!("{} has m={}, not {given}", built.id(), built.m)));
                        }
                    }
                    rec.m = built.m;
                }
                Some((rec, built.k()))
            }
        };
        let (model, model_k) = match model {
            Some((r, k)) => (Some(r), Some(k)),
            None => (None, None),
        };
        let k = match (model_k, a.k) {
            (Some(mk), Some(k)) if k != mk => {
                return Err(ConfigError(format!("--k={k} contradicts the model codimension {mk}")))
            }
            (Some(mk), _) => Some(mk),
            (None, k) => k,
        };
        let needs_params = matches!(
            experiment,
            Experiment::Constants | Experiment::SweepSharp | Experiment::SweepRemainder | Experiment::Rayleigh
        );
        let wants_params = needs_params
            || a.p.is_some()
            || a.beta.is_some()
            || (k.is_some() && matches!(experiment, Experiment::CheckInequalities | Experiment::VerifyAll));
        let params = if wants_params {
            let Some(k) = k else {
                return Err(ConfigError("codimension unknown: give --model or --k".into()));
            };
            let p = a.p.unwrap_or(2.0);
            let beta = a.beta.unwrap_or(-(k as f64) - 1.0);
            HardyParams::new(p, beta, k).map_err(|e| ConfigError(e.to_string()))?;
            Some(ParamsRecord { p, beta, k })
        } else {
            None
        };
        if matches!(experiment, Experiment::SweepSharp | Experiment::SweepRemainder | Experiment::Rayleigh) && model.is_none() {
            return Err(ConfigError("this experiment needs --model".into()));
        }
        let eps_ladder = match a.eps_ladder.as_deref() {
            None => None,
            Some("default") => Some(hardylab_core::sharpness::default_eps_ladder()),
            Some("deep") => Some(hardylab_core::sharpness::deep_eps_ladder()),
            Some(s) => {
                let v = parse_list(s, "--eps-ladder")?;
                if v.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    return Err(ConfigError("--eps-ladder values must be positive".into()));
                }
                Some(v)
            }
        };
        let theta = a.theta.as_deref().map(|s| parse_list(s, "--theta")).transpose()?;
        if let (Some(th), Some(pr)) = (&theta, params) {
            if th.iter().any(|t| !(*t > 1.0 / pr.p && *t < 2.0 / pr.p)) {
                return Err(ConfigError("--theta values must lie in (1/p, 2/p)".into()));
            }
        }
        if let Some(g) = a.grid {
            if g < 64 {
                return Err(ConfigError("--grid must be at least 64".into()));
            }
        }
        if let Some(t) = a.tol {
            if !(t > 0.0) {
                return Err(ConfigError("--tol must be positive".into()));
            }
        }
        if let Some(d) = a.d {
            if !(d > 0.0) {
                return Err(ConfigError("--D must be positive".into()));
            }
        }
        Ok(Self {
            experiment,
            model,
            params,
            alpha: a.alpha,
            theta,
            d: a.d,
            eps_ladder,
            grid: a.grid,
            tol: a.tol,
            seed: a.seed,
            out: a.out.clone(),
            format: a.format,
            sequential: a.sequential,
        })
    }

    pub fn model_space(&self) -> Option<ModelSpace> {
        self.model.as_ref().map(|m| m.build().expect("validated model"))
    }

    pub fn hardy_params(&self) -> Option<HardyParams> {
        self.params.map(|p| HardyParams::new(p.p, p.beta, p.k).expect("validated params"))
    }
}
