use std::path::{Path, PathBuf};

use serde::Serialize;

use qwsearch::dynamics::fidelity_trace;
use qwsearch::experiments::{
    boundary_csv, boundary_study, fit_power_law, noise_study, optimal_search, sweep_sizes_with, TargetRule,
    DEFAULT_TARGET, NOISE_WINDOW,
};
use qwsearch::opensys::{compare_methods, NoiseConfig, DEFAULT_TRAJECTORIES};
use qwsearch::spectral::{gap_curve, gap_curve_csv};
use qwsearch::SearchProblem;

use crate::args::{
    BoundaryArgs, Command, CrossValidateArgs, GapScanArgs, ModelArgs, NoiseArgs, ReplayArgs, RunArgs, SearchArgs,
    SweepArgs,
};
use crate::manifest::{Manifest, Outputs};
use crate::CliError;

/// Targets studied by `boundary` unless given.
pub const BOUNDARY_TARGETS: [usize; 7] = [1, 50, 150, 250, 350, 450, 499];
/// Samples per `pi / gap` in the written fidelity trace of `search`.
const TRACE_SAMPLES: usize = 1201;

/// Runs one command and returns the paths it wrote.
pub fn run(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Replay(args) => replay(&args),
        other => {
            let (workers, out) = match run_args(&other) {
                Some(r) => (r.workers, r.out.clone()),
                None => unreachable!("replay handled above"),
            };
            execute(&other, &out, workers)
        }
    }
}

fn run_args(command: &Command) -> Option<&RunArgs> {
    Some(match command {
        Command::GapScan(a) => &a.run,
        Command::Search(a) => &a.run,
        Command::Sweep(a) => &a.run,
        Command::Boundary(a) => &a.run,
        Command::Noise(a) => &a.run,
        Command::CrossValidate(a) => &a.run,
        Command::Replay(_) => return None,
    })
}

fn execute(command: &Command, out: &Path, workers: Option<usize>) -> Result<Vec<PathBuf>, CliError> {
    let compute = || compute(command);
    let (outputs, params, seed) = match workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {w} workers: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    outputs.write(out, command.name(), params, seed)
}

fn replay(args: &ReplayArgs) -> Result<Vec<PathBuf>, CliError> {
    let manifest = Manifest::read(&args.manifest)?;
    let mut command = parse_recorded(&manifest)?;
    let (out, workers) = {
        let run = run_args_mut(&mut command);
        if let Some(dir) = &args.out {
            run.out = dir.clone();
        }
        (run.out.clone(), run.workers)
    };
    execute(&command, &out, workers)
}

fn run_args_mut(command: &mut Command) -> &mut RunArgs {
    match command {
        Command::GapScan(a) => &mut a.run,
        Command::Search(a) => &mut a.run,
        Command::Sweep(a) => &mut a.run,
        Command::Boundary(a) => &mut a.run,
        Command::Noise(a) => &mut a.run,
        Command::CrossValidate(a) => &mut a.run,
        Command::Replay(_) => unreachable!("manifests never record replay"),
    }
}

fn parse_recorded(m: &Manifest) -> Result<Command, CliError> {
    let p = m.params.clone();
    Ok(match m.command.as_str() {
        "gap-scan" => Command::GapScan(serde_json::from_value(p)?),
        "search" => Command::Search(serde_json::from_value(p)?),
        "sweep" => Command::Sweep(serde_json::from_value(p)?),
        "boundary" => Command::Boundary(serde_json::from_value(p)?),
        "noise" => Command::Noise(serde_json::from_value(p)?),
        "cross-validate" => Command::CrossValidate(serde_json::from_value(p)?),
        other => return Err(CliError::Usage(format!("manifest records unknown command {other:?}"))),
    })
}

type Computed = (Outputs, serde_json::Value, u64);

fn compute(command: &Command) -> Result<Computed, CliError> {
    match command {
        Command::GapScan(a) => finish(a, a.run.seed, gap_scan(a)?),
        Command::Search(a) => finish(a, a.run.seed, search(a)?),
        Command::Sweep(a) => finish(a, a.run.seed, sweep(a)?),
        Command::Boundary(a) => finish(a, a.run.seed, boundary(a)?),
        Command::Noise(a) => finish(a, a.run.seed, noise(a)?),
        Command::CrossValidate(a) => finish(a, a.run.seed, cross_validate(a)?),
        Command::Replay(_) => unreachable!("replay is dispatched before computing"),
    }
}

fn finish<P: Serialize>(params: &P, seed: u64, outputs: Outputs) -> Result<Computed, CliError> {
    Ok((outputs, serde_json::to_value(params)?, seed))
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Rejects flags that `--paper-defaults` would set anyway.
fn check_paper_defaults(
    run: &RunArgs,
    model: &ModelArgs,
    target: &Option<Vec<usize>>,
    trajectories: Option<usize>,
) -> Result<(), CliError> {
    if !run.paper_defaults {
        return Ok(());
    }
    let clashes = [
        ("gamma-wg", model.gamma_wg.is_some()),
        ("jc", model.jc.is_some()),
        ("target", target.is_some()),
        ("trajectories", trajectories.is_some()),
    ];
    match clashes.iter().find(|(_, given)| *given) {
        Some((flag, _)) => Err(CliError::Usage(format!("--paper-defaults conflicts with --{flag}"))),
        None => Ok(()),
    }
}

fn targets_or_default(target: &Option<Vec<usize>>) -> Vec<usize> {
    target.clone().unwrap_or_else(|| vec![DEFAULT_TARGET])
}

fn problem(model: &ModelArgs, n: usize, target: &Option<Vec<usize>>) -> Result<SearchProblem, CliError> {
    Ok(SearchProblem::new(n, targets_or_default(target), model.to_model()?, 0.0)?)
}

fn gap_scan(a: &GapScanArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, None)?;
    let p = problem(&a.model, a.n.single()?, &a.target)?;
    let points = gap_curve(&p, &a.eta_grid.values())?;
    let mut out = Outputs::new();
    out.add("gap_curve.csv", gap_curve_csv(&points));
    Ok(out)
}

fn search(a: &SearchArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, None)?;
    let p = problem(&a.model, a.n.single()?, &a.target)?;
    let (gap, result) = optimal_search(&p, &a.eta_grid.search())?;
    let trace = fidelity_trace(&p.with_eta(gap.eta_opt), 3.0 * gap.t_gap, TRACE_SAMPLES)?;
    let mut out = Outputs::new();
    out.add("search_result.json", json(&result)?);
    out.add("gap_optimum.json", json(&gap)?);
    out.add("fidelity_trace.csv", trace.to_csv());
    Ok(out)
}

fn sweep(a: &SweepArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, None)?;
    let model = a.model.to_model()?;
    let rule = TargetRule::fixed(targets_or_default(&a.target));
    let dataset = sweep_sizes_with(&model, &a.n.0, &rule, &a.eta_grid.search())?;
    let mut out = Outputs::new();
    out.add("scaling.csv", dataset.to_csv());
    if a.fit {
        out.add("fit.json", json(&fit_power_law(&dataset)?)?);
    }
    Ok(out)
}

fn boundary(a: &BoundaryArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, None)?;
    let model = a.model.to_model()?;
    let targets = a.target.clone().unwrap_or_else(|| BOUNDARY_TARGETS.to_vec());
    let rows = boundary_study(&model, a.n.single()?, &targets)?;
    let mut out = Outputs::new();
    out.add("boundary.csv", boundary_csv(&rows));
    Ok(out)
}

fn noise_config(run: &RunArgs, trajectories: Option<usize>) -> NoiseConfig {
    NoiseConfig {
        n_traj: trajectories.unwrap_or(DEFAULT_TRAJECTORIES),
        base_seed: run.seed,
        ..NoiseConfig::default()
    }
}

fn noise(a: &NoiseArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, a.trajectories)?;
    let p = problem(&a.model, a.n.single()?, &a.target)?;
    let cfg = noise_config(&a.run, a.trajectories);
    let study = noise_study(&p, &a.dephasing, a.decay, &cfg, a.method.into())?;
    let mut out = Outputs::new();
    out.add("noise.csv", study.to_csv());
    out.add("noise.json", json(&study)?);
    for (k, trace) in study.traces.iter().enumerate() {
        out.add(&format!("noise_trace_{k}.csv"), trace.to_csv());
    }
    Ok(out)
}

fn cross_validate(a: &CrossValidateArgs) -> Result<Outputs, CliError> {
    check_paper_defaults(&a.run, &a.model, &a.target, a.trajectories)?;
    let p = problem(&a.model, a.n.single()?, &a.target)?;
    let (gap, result) = optimal_search(&p, &Default::default())?;
    let t_max = a.t_max.unwrap_or(NOISE_WINDOW * result.t_opt);
    let cfg = NoiseConfig {
        gamma_ph: a.dephasing,
        include_decay: a.decay,
        ..noise_config(&a.run, a.trajectories)
    };
    let report = compare_methods(&p.with_eta(gap.eta_opt), &cfg, t_max)?;
    let mut out = Outputs::new();
    out.add("comparison.json", json(&report)?);
    out.add(&report.me_trace_csv, report.me_trace.to_csv());
    out.add(&report.eff_trace_csv, report.eff_trace.to_csv());
    Ok(out)
}
