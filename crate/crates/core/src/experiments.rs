//! Size sweeps with power-law fits, boundary tables and noise studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{find_t_opt, FidelityTrace, SearchResult};
use crate::error::{Error, Result};
use crate::io::{csv, fmt_num};
use crate::model::{CouplingModel, SearchProblem};
use crate::opensys::{average_trajectories, evolve_master, NoiseConfig};
use crate::optimize::grid;
use crate::spectral::{find_eta_opt_with, BaseSpectrum, EtaSearch, GapOptimum, GapSolver};

/// Default target site (1-based).
pub const DEFAULT_TARGET: usize = 20;

/// How targets are placed as the chain grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TargetRule {
    /// The same 1-based sites for every `n`.
    Fixed { targets: Vec<usize> },
    /// A single site at `round(fraction * n)`, clamped into the chain.
    Proportional { fraction: f64 },
}

impl Default for TargetRule {
    fn default() -> Self {
        TargetRule::Fixed {
            targets: vec![DEFAULT_TARGET],
        }
    }
}

impl TargetRule {
    pub fn fixed(targets: Vec<usize>) -> Self {
        TargetRule::Fixed { targets }
    }

    pub fn targets_for(&self, n: usize) -> Vec<usize> {
        match self {
            TargetRule::Fixed { targets } => targets.clone(),
            TargetRule::Proportional { fraction } => {
                vec![((fraction * n as f64).round() as usize).clamp(1, n.max(1))]
            }
        }
    }
}

/// `n` values, `points` of them log-spaced between `lo` and `hi` and rounded.
pub fn log_sizes(lo: usize, hi: usize, points: usize) -> Vec<usize> {
    let mut out: Vec<usize> = grid(lo as f64, hi as f64, points, true)
        .into_iter()
        .map(|x| x.round() as usize)
        .collect();
    out.dedup();
    out
}

/// Eight log-spaced sizes from 64 to 512.
pub fn default_sizes() -> Vec<usize> {
    log_sizes(64, 512, 8)
}

/// Optimal `eta` followed by the optimal time at that `eta`.
pub fn optimal_search(problem: &SearchProblem, search: &EtaSearch) -> Result<(GapOptimum, SearchResult)> {
    let solver = GapSolver::for_problem(problem)?;
    let gap = find_eta_opt_with(&solver, search)?;
    let result = find_t_opt(problem, &gap)?;
    Ok((gap, result))
}

/// One size of a sweep. Failed sizes keep `n` and carry NaN elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub eta_opt: f64,
    pub gap_min: f64,
    pub t_gap: f64,
    pub t_opt: f64,
    pub f_max: f64,
    pub eta_t: f64,
    pub flagged: bool,
    pub error: Option<String>,
}

impl ScalingRow {
    fn from_result(n: usize, gap: &GapOptimum, res: &SearchResult) -> Self {
        ScalingRow {
            n,
            eta_opt: gap.eta_opt,
            gap_min: gap.gap_min,
            t_gap: gap.t_gap,
            t_opt: res.t_opt,
            f_max: res.f_max,
            eta_t: res.eta_t,
            flagged: res.flagged,
            error: None,
        }
    }

    fn failed(n: usize, err: &Error) -> Self {
        ScalingRow {
            n,
            eta_opt: f64::NAN,
            gap_min: f64::NAN,
            t_gap: f64::NAN,
            t_opt: f64::NAN,
            f_max: f64::NAN,
            eta_t: f64::NAN,
            flagged: true,
            error: Some(err.to_string()),
        }
    }

    /// Usable for fitting.
    pub fn is_valid(&self) -> bool {
        !self.flagged && self.eta_t.is_finite() && self.eta_t > 0.0
    }
}

pub const SCALING_HEADER: &str = "n,eta_opt,gap_min,t_gap,t_opt,f_max,eta_t";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDataset {
    pub model: CouplingModel,
    pub targets: TargetRule,
    pub rows: Vec<ScalingRow>,
}

impl ScalingDataset {
    pub fn to_csv(&self) -> String {
        csv(
            SCALING_HEADER,
            self.rows.iter().map(|r| {
                std::iter::once(r.n.to_string()).chain(
                    [r.eta_opt, r.gap_min, r.t_gap, r.t_opt, r.f_max, r.eta_t]
                        .into_iter()
                        .map(fmt_num),
                )
            }),
        )
    }
}

/// Runs the optimal-search pipeline for every size; sizes run concurrently
/// and the rows come back in ascending `n`.
pub fn sweep_sizes(model: &CouplingModel, n_list: &[usize], rule: &TargetRule) -> Result<ScalingDataset> {
    sweep_sizes_with(model, n_list, rule, &EtaSearch::default())
}

pub fn sweep_sizes_with(
    model: &CouplingModel,
    n_list: &[usize],
    rule: &TargetRule,
    search: &EtaSearch,
) -> Result<ScalingDataset> {
    model.validate()?;
    if n_list.is_empty() {
        return Err(Error::Validation("size list is empty".into()));
    }
    let mut sizes = n_list.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let rows = sizes
        .par_iter()
        .map(|&n| {
            let run = || {
                let problem = SearchProblem::new(n, rule.targets_for(n), *model, 0.0)?;
                optimal_search(&problem, search)
            };
            match run() {
                Ok((gap, res)) => ScalingRow::from_result(n, &gap, &res),
                Err(err) => ScalingRow::failed(n, &err),
            }
        })
        .collect();
    Ok(ScalingDataset {
        model: *model,
        targets: rule.clone(),
        rows,
    })
}

/// `eta_opt t_opt = a n^b`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

impl PowerLawFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    pub fn eval(&self, n: f64) -> f64 {
        self.a * n.powf(self.b)
    }
}

fn valid_points(dataset: &ScalingDataset) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = dataset
        .rows
        .iter()
        .filter(|r| r.is_valid())
        .map(|r| ((r.n as f64).ln(), r.eta_t.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Validation(format!(
            "power-law fit needs at least 3 valid rows, got {}",
            pts.len()
        )));
    }
    Ok(pts)
}

/// Least squares on `(ln n, ln eta_t)`, R^2 measured in log space.
pub fn fit_power_law(dataset: &ScalingDataset) -> Result<PowerLawFit> {
    let pts = valid_points(dataset)?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("power-law fit needs at least two distinct sizes".into()));
    }
    let b = sxy / sxx;
    let intercept = my - b * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - b * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(PowerLawFit {
        a: intercept.exp(),
        b,
        r2,
    })
}

/// Prefactor of `a n^b` with the exponent held at `b`.
pub fn fit_prefactor(dataset: &ScalingDataset, b: f64) -> Result<f64> {
    let pts = valid_points(dataset)?;
    let m = pts.len() as f64;
    Ok((pts.iter().map(|p| p.1 - b * p.0).sum::<f64>() / m).exp())
}

/// One target of a boundary study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub w: usize,
    pub eta_opt: f64,
    pub t_opt: f64,
    pub f_max: f64,
}

pub const BOUNDARY_HEADER: &str = "w,eta_opt,t_opt,f_max";

pub fn boundary_csv(rows: &[BoundaryRow]) -> String {
    csv(
        BOUNDARY_HEADER,
        rows.iter().map(|r| {
            [r.w.to_string(), fmt_num(r.eta_opt), fmt_num(r.t_opt), fmt_num(r.f_max)]
        }),
    )
}

/// Re-optimizes `eta` and the search time for each single target.
pub fn boundary_study(model: &CouplingModel, n: usize, targets: &[usize]) -> Result<Vec<BoundaryRow>> {
    if targets.is_empty() {
        return Err(Error::Validation("boundary study needs at least one target".into()));
    }
    for &w in targets {
        SearchProblem::new(n, vec![w], *model, 0.0)?;
    }
    let base = BaseSpectrum::new(model, n)?;
    let search = EtaSearch::default();
    targets
        .par_iter()
        .map(|&w| {
            let problem = SearchProblem::new(n, vec![w], *model, 0.0)?;
            let solver = GapSolver::new(&base, &[w])?;
            let gap = find_eta_opt_with(&solver, &search)?;
            let res = find_t_opt(&problem, &gap)?;
            Ok(BoundaryRow {
                w,
                eta_opt: gap.eta_opt,
                t_opt: res.t_opt,
                f_max: res.f_max,
            })
        })
        .collect()
}

/// Which open-system method a noise study runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lindblad,
    #[default]
    Effective,
    Both,
}

impl Method {
    fn runs_master(self) -> bool {
        matches!(self, Method::Lindblad | Method::Both)
    }

    fn runs_trajectories(self) -> bool {
        matches!(self, Method::Effective | Method::Both)
    }
}

/// Peak fidelity of one noise setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub method: Method,
    pub gamma_ph: f64,
    pub decay: bool,
    pub f_max: f64,
    pub t_at_max: f64,
    pub stderr_at_max: f64,
}

/// Noise table plus the noiseless reference it was run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStudy {
    pub eta_opt: f64,
    pub t_opt: f64,
    pub t_max: f64,
    pub noiseless: SearchResult,
    pub rows: Vec<NoiseRow>,
    #[serde(skip)]
    pub traces: Vec<FidelityTrace>,
}

pub const NOISE_HEADER: &str = "method,gamma_ph,decay,f_max,t_at_max,stderr_at_max";

impl NoiseStudy {
    pub fn to_csv(&self) -> String {
        csv(
            NOISE_HEADER,
            self.rows.iter().map(|r| {
                let method = match r.method {
                    Method::Lindblad => "lindblad",
                    Method::Effective => "effective",
                    Method::Both => "both",
                };
                [
                    method.to_string(),
                    fmt_num(r.gamma_ph),
                    (r.decay as u8).to_string(),
                    fmt_num(r.f_max),
                    fmt_num(r.t_at_max),
                    fmt_num(r.stderr_at_max),
                ]
            }),
        )
    }

    /// Noiseless baseline row of a method.
    pub fn baseline(&self, method: Method) -> Option<&NoiseRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.gamma_ph == 0.0 && !r.decay)
    }

    pub fn row(&self, method: Method, gamma_ph: f64, decay: bool) -> Option<&NoiseRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.gamma_ph == gamma_ph && r.decay == decay)
    }
}

/// Window of a noise study relative to the noiseless optimal time.
pub const NOISE_WINDOW: f64 = 1.5;

/// Peak fidelity under each dephasing rate (with or without decay) at the
/// noiseless optimum; a noiseless baseline row is always included.
pub fn noise_study(
    problem: &SearchProblem,
    gamma_ph_list: &[f64],
    include_decay: bool,
    noise: &NoiseConfig,
    method: Method,
) -> Result<NoiseStudy> {
    if gamma_ph_list.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(Error::Validation("dephasing rates must be non-negative".into()));
    }
    noise.validate()?;
    let (gap, noiseless) = optimal_search(problem, &EtaSearch::default())?;
    let at_opt = problem.with_eta(gap.eta_opt);
    let t_max = NOISE_WINDOW * noiseless.t_opt;

    let mut settings = vec![(0.0, false)];
    let requested: Vec<f64> = if gamma_ph_list.is_empty() { vec![0.0] } else { gamma_ph_list.to_vec() };
    for g in requested {
        if !settings.contains(&(g, include_decay)) {
            settings.push((g, include_decay));
        }
    }

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &(gamma_ph, decay) in &settings {
        let cfg = NoiseConfig {
            gamma_ph,
            include_decay: decay,
            ..*noise
        };
        let mut record = |m: Method, trace: FidelityTrace| {
            let (k, f) = trace.peak();
            let se = trace.stderr.as_ref().map_or(0.0, |s| s[k]);
            rows.push(NoiseRow {
                method: m,
                gamma_ph,
                decay,
                f_max: f,
                t_at_max: trace.times[k],
                stderr_at_max: se,
            });
            traces.push(trace);
        };
        if method.runs_trajectories() {
            record(Method::Effective, average_trajectories(&at_opt, &cfg, t_max)?);
        }
        if method.runs_master() {
            record(Method::Lindblad, evolve_master(&at_opt, &cfg, t_max)?);
        }
    }
    Ok(NoiseStudy {
        eta_opt: gap.eta_opt,
        t_opt: noiseless.t_opt,
        t_max,
        noiseless,
        rows,
        traces,
    })
}

/// Optimal search for each target set on one chain.
pub fn multi_target_times(
    model: &CouplingModel,
    n: usize,
    target_sets: &[Vec<usize>],
) -> Result<Vec<SearchResult>> {
    target_sets
        .par_iter()
        .map(|targets| {
            let problem = SearchProblem::new(n, targets.clone(), *model, 0.0)?;
            Ok(optimal_search(&problem, &EtaSearch::default())?.1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(points: &[(usize, f64)]) -> ScalingDataset {
        ScalingDataset {
            model: CouplingModel::free_space(),
            targets: TargetRule::default(),
            rows: points
                .iter()
                .map(|&(n, y)| ScalingRow {
                    n,
                    eta_opt: 1.0,
                    gap_min: 1.0,
                    t_gap: std::f64::consts::PI,
                    t_opt: y,
                    f_max: 1.0,
                    eta_t: y,
                    flagged: false,
                    error: None,
                })
                .collect(),
        }
    }

    #[test]
    fn exact_power_laws() {
        let ns = [64, 100, 200, 400, 1000];
        let d = synthetic(&ns.map(|n| (n, 2.0 * (n as f64).sqrt())));
        let fit = fit_power_law(&d).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-10 && (fit.b - 0.5).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let d = synthetic(&ns.map(|n| (n, 0.5 * n as f64)));
        assert!((fit_power_law(&d).unwrap().b - 1.0).abs() < 1e-10);
        assert!((fit_prefactor(&d, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fit_scale_invariance() {
        let pts = [(64, 3.1), (90, 3.9), (128, 4.4), (181, 5.6), (256, 6.1)];
        let base = fit_power_law(&synthetic(&pts)).unwrap();
        let scaled = fit_power_law(&synthetic(&pts.map(|(n, y)| (n, 7.0 * y)))).unwrap();
        assert!((scaled.a / base.a - 7.0).abs() < 1e-10);
        assert!((scaled.b - base.b).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&base.r2));
    }

    #[test]
    fn fit_needs_three_valid_rows() {
        let mut d = synthetic(&[(10, 1.0), (20, 2.0), (40, 4.0)]);
        d.rows[1].flagged = true;
        assert!(fit_power_law(&d).is_err());
    }

    #[test]
    fn default_grid() {
        let sizes = default_sizes();
        assert_eq!(sizes.len(), 8);
        assert_eq!(sizes[0], 64);
        assert_eq!(*sizes.last().unwrap(), 512);
        assert!(sizes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn target_rules() {
        assert_eq!(TargetRule::default().targets_for(100), vec![20]);
        let p = TargetRule::Proportional { fraction: 0.5 };
        assert_eq!(p.targets_for(100), vec![50]);
        assert_eq!(TargetRule::Proportional { fraction: 0.0 }.targets_for(10), vec![1]);
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let d = sweep_sizes(&CouplingModel::cavity(10.0).unwrap(), &[96, 48, 64], &TargetRule::default()).unwrap();
        assert_eq!(d.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![48, 64, 96]);
        for r in &d.rows {
            assert!(r.is_valid());
            assert!((r.t_gap * r.gap_min - std::f64::consts::PI).abs() < 1e-12);
            assert!((r.t_opt - r.t_gap).abs() / r.t_gap < 0.05);
        }
        let doc = d.to_csv();
        assert!(doc.starts_with("n,eta_opt,gap_min,t_gap,t_opt,f_max,eta_t\n"));
        assert_eq!(doc.lines().count(), 4);
    }

    #[test]
    fn failed_sizes_are_flagged_rows() {
        // target 20 does not exist on a 10-site chain
        let d = sweep_sizes(&CouplingModel::cavity(10.0).unwrap(), &[10, 40], &TargetRule::default()).unwrap();
        assert!(d.rows[0].flagged && d.rows[0].error.is_some());
        assert!(d.rows[1].is_valid());
    }

    #[test]
    fn cavity_boundary_is_flat() {
        let rows = boundary_study(&CouplingModel::cavity(10.0).unwrap(), 100, &[1, 37, 100]).unwrap();
        for r in &rows[1..] {
            assert!((r.t_opt - rows[0].t_opt).abs() < 1e-9);
        }
        assert!(boundary_csv(&rows).starts_with("w,eta_opt,t_opt,f_max\n"));
    }

    #[test]
    fn noise_study_small() {
        let p = SearchProblem::new(20, vec![8], CouplingModel::free_space(), 0.0).unwrap();
        let noise = NoiseConfig {
            n_traj: 20,
            ..Default::default()
        };
        let study = noise_study(&p, &[1.0], false, &noise, Method::Both).unwrap();
        assert_eq!(study.rows.len(), 4);
        let base = study.baseline(Method::Effective).unwrap();
        assert!((base.f_max - study.noiseless.f_max).abs() < 1e-3);
        let me_base = study.baseline(Method::Lindblad).unwrap();
        assert!((me_base.f_max - base.f_max).abs() < 1e-6);
        let noisy = study.row(Method::Effective, 1.0, false).unwrap();
        assert!(noisy.f_max < base.f_max);
        assert!(study.to_csv().starts_with(NOISE_HEADER));
    }
}
