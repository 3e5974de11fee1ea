//! Flags of every subcommand. Each parameter struct also serializes, so the
//! run manifest can echo it and `replay` can read it back.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qwsearch::experiments::{log_sizes, Method};
use qwsearch::model::{DEFAULT_GAMMA_WG, DEFAULT_J_C, DEFAULT_SPACING};
use qwsearch::optimize::grid;
use qwsearch::spectral::EtaSearch;
use qwsearch::CouplingModel;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "qwsearch", version, about = "Quantum-walk spatial search on long-range atom chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Spectral gap and overlaps over a grid of target strengths.
    GapScan(GapScanArgs),
    /// Optimal target strength, optimal time and the fidelity trace.
    Search(SearchArgs),
    /// Optimal search over a range of chain sizes, optionally fitted.
    Sweep(SweepArgs),
    /// Optimal search for targets across the chain.
    Boundary(BoundaryArgs),
    /// Peak fidelity under decay and dephasing.
    Noise(NoiseArgs),
    /// Master equation against effective-Hamiltonian trajectories.
    CrossValidate(CrossValidateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GapScan(_) => "gap-scan",
            Command::Search(_) => "search",
            Command::Sweep(_) => "sweep",
            Command::Boundary(_) => "boundary",
            Command::Noise(_) => "noise",
            Command::CrossValidate(_) => "cross-validate",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    FreeSpace,
    PowerLaw,
    WaveguideGap,
    WaveguideProp,
    Cavity,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Power-law exponent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Waveguide coupling strength in units of gamma (default 20).
    #[arg(long)]
    pub gamma_wg: Option<f64>,
    /// Band-gap decay constant.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Cavity-mediated coupling in units of gamma (default 10).
    #[arg(long)]
    pub jc: Option<f64>,
    /// Lattice spacing in units of the wavelength.
    #[arg(long)]
    pub spacing: Option<f64>,
}

fn reject(model: ModelName, flags: &[(&str, bool)]) -> Result<(), CliError> {
    for (flag, given) in flags {
        if *given {
            return Err(CliError::Usage(format!(
                "--{flag} does not apply to --model {}",
                model.to_possible_value().expect("named variant").get_name()
            )));
        }
    }
    Ok(())
}

impl ModelArgs {
    pub fn to_model(&self) -> Result<CouplingModel, CliError> {
        let a = self.alpha.is_some();
        let g = self.gamma_wg.is_some();
        let k = self.kappa.is_some();
        let j = self.jc.is_some();
        let m = self.model;
        let model = match m {
            ModelName::FreeSpace => {
                reject(m, &[("alpha", a), ("gamma-wg", g), ("kappa", k), ("jc", j)])?;
                CouplingModel::free_space()
            }
            ModelName::PowerLaw => {
                reject(m, &[("gamma-wg", g), ("kappa", k), ("jc", j)])?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| CliError::Usage("--model power-law needs --alpha".into()))?;
                CouplingModel::pure_power_law(alpha)?
            }
            ModelName::WaveguideGap => {
                reject(m, &[("alpha", a), ("jc", j)])?;
                let kappa = self
                    .kappa
                    .ok_or_else(|| CliError::Usage("--model waveguide-gap needs --kappa".into()))?;
                CouplingModel::waveguide_bandgap(self.gamma_wg.unwrap_or(DEFAULT_GAMMA_WG), kappa)?
            }
            ModelName::WaveguideProp => {
                reject(m, &[("alpha", a), ("kappa", k), ("jc", j)])?;
                CouplingModel::waveguide_propagating(self.gamma_wg.unwrap_or(DEFAULT_GAMMA_WG))?
            }
            ModelName::Cavity => {
                reject(m, &[("alpha", a), ("gamma-wg", g), ("kappa", k)])?;
                CouplingModel::cavity(self.jc.unwrap_or(DEFAULT_J_C))?
            }
        };
        Ok(model.with_spacing(self.spacing.unwrap_or(DEFAULT_SPACING))?)
    }
}

/// Flags shared by every experiment.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RunArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Base seed of every random stream.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Upper bound on worker threads.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Pin gamma_wg = 20, jc = 10, target 20 and 500 trajectories.
    #[arg(long)]
    pub paper_defaults: bool,
}

/// `lo:hi:points:log|lin`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub log: bool,
}

impl Default for EtaGrid {
    fn default() -> Self {
        let s = EtaSearch::default();
        EtaGrid {
            lo: s.lo,
            hi: s.hi,
            points: s.points,
            log: true,
        }
    }
}

fn parse_scale(s: &str) -> Result<bool, String> {
    match s {
        "log" => Ok(true),
        "lin" => Ok(false),
        other => Err(format!("scale must be log or lin, got {other:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("invalid {what}: {s:?}"))
}

impl FromStr for EtaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("expected lo:hi:points:log|lin, got {s:?}"));
        }
        let g = EtaGrid {
            lo: parse_num(parts[0], "lower bound")?,
            hi: parse_num(parts[1], "upper bound")?,
            points: parse_num(parts[2], "point count")?,
            log: parse_scale(parts[3])?,
        };
        if g.points == 0 {
            return Err("the grid needs at least one point".into());
        }
        if !(g.lo.is_finite() && g.hi.is_finite() && g.hi > g.lo) {
            return Err(format!("need lo < hi, got {s:?}"));
        }
        if g.log && g.lo <= 0.0 {
            return Err("a log grid needs lo > 0".into());
        }
        Ok(g)
    }
}

impl EtaGrid {
    pub fn values(&self) -> Vec<f64> {
        grid(self.lo, self.hi, self.points, self.log)
    }

    pub fn search(&self) -> EtaSearch {
        EtaSearch {
            lo: self.lo,
            hi: self.hi,
            points: self.points,
            ..EtaSearch::default()
        }
    }
}

/// A single size or `lo:hi:points:log|lin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sizes(pub Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            1 => Ok(Sizes(vec![parse_num(parts[0], "size")?])),
            4 => {
                let lo: usize = parse_num(parts[0], "lower size")?;
                let hi: usize = parse_num(parts[1], "upper size")?;
                let points: usize = parse_num(parts[2], "point count")?;
                if points == 0 || lo == 0 || hi < lo {
                    return Err(format!("need 0 < lo <= hi and points > 0, got {s:?}"));
                }
                let sizes = if parse_scale(parts[3])? {
                    log_sizes(lo, hi, points)
                } else {
                    let mut v: Vec<usize> = grid(lo as f64, hi as f64, points, false)
                        .into_iter()
                        .map(|x| x.round() as usize)
                        .collect();
                    v.dedup();
                    v
                };
                Ok(Sizes(sizes))
            }
            _ => Err(format!("expected a size or lo:hi:points:log|lin, got {s:?}")),
        }
    }
}

impl Sizes {
    pub fn single(&self) -> Result<usize, CliError> {
        match self.0.as_slice() {
            [n] => Ok(*n),
            _ => Err(CliError::Usage("this command takes a single --n".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GapScanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Sizes,
    /// 1-based target sites, comma separated (default 20).
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    #[arg(long, default_value = "0.01:10000:200:log")]
    pub eta_grid: EtaGrid,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Sizes,
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    /// Bracket and resolution of the coarse eta scan.
    #[arg(long, default_value = "0.01:10000:200:log")]
    pub eta_grid: EtaGrid,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "64:512:8:log")]
    pub n: Sizes,
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    #[arg(long, default_value = "0.01:10000:200:log")]
    pub eta_grid: EtaGrid,
    /// Also fit eta_opt t_opt = a n^b.
    #[arg(long)]
    pub fit: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BoundaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "500")]
    pub n: Sizes,
    /// Targets to study (default 1,50,150,250,350,450,499).
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Lindblad,
    Effective,
    Both,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Lindblad => Method::Lindblad,
            MethodName::Effective => Method::Effective,
            MethodName::Both => Method::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct NoiseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: Sizes,
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    /// Dephasing rates in units of gamma, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dephasing: Vec<f64>,
    /// Include collective decay.
    #[arg(long)]
    pub decay: bool,
    #[arg(long, value_enum, default_value = "effective")]
    pub method: MethodName,
    /// Trajectories per setting (default 500).
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CrossValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "30")]
    pub n: Sizes,
    #[arg(long, value_delimiter = ',')]
    pub target: Option<Vec<usize>>,
    /// Dephasing rate in units of gamma.
    #[arg(long, default_value_t = 0.0)]
    pub dephasing: f64,
    #[arg(long)]
    pub decay: bool,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Evolution window; defaults to 1.5 times the noiseless optimal time.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
