use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use hamray::model::{BumpPotential, FlatPotential, HamiltonianModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PhasePortrait,
    Simulate,
    Exact,
    Period,
    Inverse,
    Rays,
    EntropyCheck,
    Asymptotics,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Self::PhasePortrait => "phase-portrait",
            Self::Simulate => "simulate",
            Self::Exact => "exact",
            Self::Period => "period",
            Self::Inverse => "inverse",
            Self::Rays => "rays",
            Self::EntropyCheck => "entropy-check",
            Self::Asymptotics => "asymptotics",
        }
    }
}

/// `standard`, `homogeneous`, or `bump:A,X,m` for `g = A (1 - (1 - (x/X)²)^m)` on `|x| ≤ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    Standard,
    Homogeneous,
    Bump { amplitude: f64, radius: f64, exponent: i32 },
}

impl std::str::FromStr for ModelSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "homogeneous" => Ok(Self::Homogeneous),
            _ => {
                let Some(args) = s.strip_prefix("bump:") else {
                    bail!("unknown model {s:?}; expected standard, homogeneous or bump:A,X,m");
                };
                let parts: Vec<&str> = args.split(',').collect();
                if parts.len() != 3 {
                    bail!("bump model needs three parameters A,X,m, got {args:?}");
                }
                let amplitude = parts[0].trim().parse().context("bump amplitude")?;
                let radius = parts[1].trim().parse().context("bump radius")?;
                let exponent = parts[2].trim().parse().context("bump exponent")?;
                BumpPotential::<f64>::new(amplitude, radius, exponent)?;
                Ok(Self::Bump { amplitude, radius, exponent })
            }
        }
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        match m {
            ModelSpec::Standard => "standard".into(),
            ModelSpec::Homogeneous => "homogeneous".into(),
            ModelSpec::Bump { amplitude, radius, exponent } => format!("bump:{amplitude},{radius},{exponent}"),
        }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn HamiltonianModel<f64>>> {
        Ok(match *self {
            Self::Standard => Box::new(BumpPotential::<f64>::standard()),
            Self::Homogeneous => Box::new(FlatPotential),
            Self::Bump { amplitude, radius, exponent } => Box::new(BumpPotential::new(amplitude, radius, exponent)?),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "hamray", version, about = "Characteristics, entropy solutions and inverse design for u_t + (u²/2 + g(x))_x = 0")]
pub struct Args {
    /// Experiment to run.
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// standard | homogeneous | bump:A,X,m
    #[arg(long)]
    pub model: Option<ModelSpec>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resolution: cells, samples, rays or tests depending on the experiment.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Final time or horizon.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Comma-separated output times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance (monotone test, ray crossings, shooting).
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON file whose fields override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fields of a config file; every field is optional and wins over the matching flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<Experiment>,
    model: Option<ModelSpec>,
    out: Option<PathBuf>,
    n: Option<usize>,
    cfl: Option<f64>,
    tmax: Option<f64>,
    times: Option<Vec<f64>>,
    seed: Option<u64>,
    tol: Option<f64>,
}

/// Fully resolved run configuration. `None` fields take per-experiment defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: ModelSpec,
    #[serde(skip)]
    pub out: PathBuf,
    pub n: Option<usize>,
    pub cfl: f64,
    pub tmax: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub seed: u64,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn resolve(args: Args) -> Result<Self> {
        let file = match &args.config {
            Some(path) => read_config(path)?,
            None => FileConfig::default(),
        };
        let experiment = file.experiment.or(args.experiment).context("no experiment given (--experiment)")?;
        let cfg = Self {
            experiment,
            model: file.model.or(args.model).unwrap_or(ModelSpec::Standard),
            out: file.out.or(args.out).unwrap_or_else(|| PathBuf::from("out")),
            n: file.n.or(args.n),
            cfl: file.cfl.or(args.cfl).unwrap_or(hamray::fvm::DEFAULT_CFL),
            tmax: file.tmax.or(args.tmax),
            times: file.times.or(args.times),
            seed: file.seed.or(args.seed).unwrap_or(1),
            tol: file.tol.or(args.tol),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            bail!("cfl must lie in (0, 1], got {}", self.cfl);
        }
        if let Some(t) = self.tmax {
            if !(t > 0.0 && t.is_finite()) {
                bail!("tmax must be positive, got {t}");
            }
        }
        if let Some(ts) = &self.times {
            if ts.is_empty() || ts.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                bail!("times must be positive");
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0) {
                bail!("tol must be positive, got {tol}");
            }
        }
        if self.n == Some(0) {
            bail!("n must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn tmax_or(&self, default: f64) -> f64 {
        self.tmax.unwrap_or(default)
    }

    pub fn times_or(&self, default: &[f64]) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs_round_trip() {
        for s in ["standard", "homogeneous", "bump:2,1.5,6"] {
            let m: ModelSpec = s.parse().unwrap();
            assert_eq!(String::from(m), s);
        }
        assert!("bump:1,1".parse::<ModelSpec>().is_err());
        assert!("bump:1,1,2".parse::<ModelSpec>().is_err());
        assert!("quartic".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let args = |out: &str| Args::parse_from(["hamray", "--experiment", "period", "--out", out]);
        let a = RunConfig::resolve(args("a")).unwrap();
        let b = RunConfig::resolve(args("b")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::resolve(Args::parse_from(["hamray", "--experiment", "period", "--n", "5"])).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn bad_values_are_rejected() {
        let r = RunConfig::resolve(Args::parse_from(["hamray", "--experiment", "simulate", "--cfl", "2"]));
        assert!(r.is_err());
        assert!(RunConfig::resolve(Args::parse_from(["hamray"])).is_err());
    }
}
