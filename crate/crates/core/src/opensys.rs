//! Open-system search: the master equation on the single-excitation block
//! and stochastic effective-Hamiltonian trajectories for dephasing.
//!
//! In the single-excitation basis the collective decay dissipator reduces to
//! the anticommutator loss `-(G rho + rho G)/2` (its recycling term feeds the
//! vacuum, which never returns population), and local sigma-z dephasing at
//! rate `gamma_ph` damps every coherence `rho_ij` (i != j) at `4 gamma_ph`.
//!
//! Trajectories realise the same dephasing with random on-site energies that
//! are redrawn every step. Because they are diagonal they are applied as exact
//! phase kicks split symmetrically around each coherent step, with phase
//! variance `4 gamma_ph dt` per step so that coherences decay as
//! `exp(-4 gamma_ph t)` on average.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_size, steps_for, FidelityTrace, Rk4Stepper};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_coupling_matrices, effective_hamiltonian_from, search_hamiltonian_from, target_state,
    uniform_state, StateVector,
};
use crate::linalg::{max_row_sum, to_complex, CMatrix, CVector, C64, I};
use crate::model::SearchProblem;

/// Largest chain evolved with a dense density matrix.
pub const MASTER_EQUATION_LIMIT: usize = 256;
/// Largest chain accepted by [`compare_methods`].
pub const COMPARISON_LIMIT: usize = 64;
pub const DEFAULT_TRAJECTORIES: usize = 500;
pub const DEFAULT_SEED: u64 = 42;

/// Density matrix on the single-excitation block; `1 - trace` is the vacuum
/// population.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub CMatrix);

impl DensityMatrix {
    pub fn pure(psi: &StateVector) -> Self {
        DensityMatrix(&psi.0 * psi.0.adjoint())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `<w|rho|w>`
    pub fn expectation(&self, w: &StateVector) -> f64 {
        w.0.dotc(&(&self.0 * &w.0)).re
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()) * C64::from(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Noise settings shared by both open-system methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gamma_ph: f64,
    pub include_decay: bool,
    pub n_traj: usize,
    pub base_seed: u64,
    /// Fixed step; `None` applies the step-size rule.
    pub dt: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            gamma_ph: 0.0,
            include_decay: false,
            n_traj: DEFAULT_TRAJECTORIES,
            base_seed: DEFAULT_SEED,
            dt: None,
        }
    }
}

impl NoiseConfig {
    pub fn dephasing(gamma_ph: f64) -> Self {
        NoiseConfig {
            gamma_ph,
            ..Default::default()
        }
    }

    pub fn decay() -> Self {
        NoiseConfig {
            include_decay: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_ph >= 0.0 && self.gamma_ph.is_finite()) {
            return Err(Error::Validation(format!(
                "dephasing rate must be non-negative, got {}",
                self.gamma_ph
            )));
        }
        if self.n_traj == 0 {
            return Err(Error::Validation("need at least one trajectory".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Validation(format!("time step must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.gamma_ph == 0.0 && !self.include_decay
    }
}

/// `-i[H, rho] - (G rho + rho G)/2 - 4 gamma_ph offdiag(rho)`
pub fn lindblad_rhs(rho: &CMatrix, h: &CMatrix, g: &CMatrix, gamma_ph: f64) -> CMatrix {
    let k = h - g * (I * 0.5);
    lindblad_rhs_k(rho, &k, gamma_ph)
}

/// Right-hand side with `K = H - iG/2` already formed.
fn lindblad_rhs_k(rho: &CMatrix, k: &CMatrix, gamma_ph: f64) -> CMatrix {
    let kr = k * rho;
    let mut out = (&kr - kr.adjoint()) * (-I);
    if gamma_ph != 0.0 {
        let n = rho.nrows();
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    out[(i, j)] -= rho[(i, j)] * (4.0 * gamma_ph);
                }
            }
        }
    }
    out
}

/// Open-system operators of a problem.
struct OpenOperators {
    h_coh: CMatrix,
    g: CMatrix,
}

fn open_operators(problem: &SearchProblem, include_decay: bool) -> Result<OpenOperators> {
    problem.validate()?;
    let couplings = build_coupling_matrices(problem)?;
    let h_coh = search_hamiltonian_from(&couplings, problem)?.h;
    let n = problem.n;
    let g = if include_decay {
        to_complex(&couplings.g)
    } else {
        CMatrix::zeros(n, n)
    };
    Ok(OpenOperators { h_coh, g })
}

fn master_step_rule(ops: &OpenOperators, gamma_ph: f64) -> f64 {
    let strength = max_row_sum(&ops.h_coh) + 0.5 * max_row_sum(&ops.g) + 4.0 * gamma_ph;
    if strength > 0.0 {
        0.05 / strength
    } else {
        0.05
    }
}

fn trajectory_step_rule(problem: &SearchProblem, include_decay: bool) -> Result<f64> {
    let couplings = build_coupling_matrices(problem)?;
    let h = effective_hamiltonian_from(&couplings, problem, include_decay)?.h;
    Ok(step_size(&h))
}

fn check_time(t_max: f64) -> Result<()> {
    if t_max > 0.0 && t_max.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("t_max must be positive, got {t_max}")))
    }
}

/// RK4 integration of the master equation from `|s><s|`, `F = <w|rho|w>`
/// recorded at every step.
pub fn evolve_master(problem: &SearchProblem, noise: &NoiseConfig, t_max: f64) -> Result<FidelityTrace> {
    noise.validate()?;
    check_time(t_max)?;
    let n = problem.n;
    if n > MASTER_EQUATION_LIMIT {
        return Err(Error::Capacity {
            method: "master equation",
            limit: MASTER_EQUATION_LIMIT,
            n,
        });
    }
    let ops = open_operators(problem, noise.include_decay)?;
    let dt_rule = noise.dt.unwrap_or_else(|| master_step_rule(&ops, noise.gamma_ph));
    let (steps, dt) = steps_for(t_max, dt_rule);
    let k = &ops.h_coh - &ops.g * (I * 0.5);
    let gamma = noise.gamma_ph;
    let w = target_state(&problem.targets, n)?;
    let mut rho = DensityMatrix::pure(&uniform_state(n)).0;
    let check_every = (steps / 50).max(1);

    let mut times = Vec::with_capacity(steps + 1);
    let mut fidelity = Vec::with_capacity(steps + 1);
    times.push(0.0);
    fidelity.push(DensityMatrix(rho.clone()).expectation(&w));
    let half = C64::from(dt / 2.0);
    let full = C64::from(dt);
    let sixth = C64::from(dt / 6.0);
    let two = C64::from(2.0);
    for step in 1..=steps {
        let k1 = lindblad_rhs_k(&rho, &k, gamma);
        let k2 = lindblad_rhs_k(&(&rho + &k1 * half), &k, gamma);
        let k3 = lindblad_rhs_k(&(&rho + &k2 * half), &k, gamma);
        let k4 = lindblad_rhs_k(&(&rho + &k3 * full), &k, gamma);
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;

        let state = DensityMatrix(rho);
        let tr = state.trace();
        if !tr.is_finite() || tr > 1.0 + 1e-6 {
            return Err(Error::NumericalInstability(format!(
                "density-matrix trace reached {tr} at step {step}"
            )));
        }
        if step % check_every == 0 || step == steps {
            let lowest = state.min_eigenvalue();
            if lowest < -1e-6 {
                return Err(Error::NumericalInstability(format!(
                    "density matrix lost positivity (eigenvalue {lowest}) at step {step}"
                )));
            }
        }
        times.push(if step == steps { t_max } else { step as f64 * dt });
        fidelity.push(state.expectation(&w));
        rho = state.0;
    }
    Ok(FidelityTrace {
        times,
        fidelity,
        stderr: None,
    })
}

/// Seed of trajectory `index`.
pub fn trajectory_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Runs one trajectory of `steps` steps of `stepper`, calling
/// `observe(t, psi)` at `t = 0` and after every step.
pub fn run_trajectory<F>(
    stepper: &Rk4Stepper,
    psi0: &CVector,
    steps: usize,
    t_max: f64,
    gamma_ph: f64,
    seed: u64,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(f64, &CVector),
{
    let n = psi0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // each half kick carries phase variance 2 gamma_ph dt
    let half_sigma = (2.0 * gamma_ph * stepper.dt).sqrt();
    let kick = |psi: &mut CVector, rng: &mut ChaCha8Rng| {
        for z in psi.iter_mut() {
            let x: f64 = StandardNormal.sample(rng);
            *z *= C64::from_polar(1.0, -half_sigma * x);
        }
    };
    let reference = psi0.norm();
    let mut psi = psi0.clone();
    observe(0.0, &psi);
    if gamma_ph > 0.0 {
        kick(&mut psi, &mut rng);
    }
    let mut next = DVector::zeros(n);
    for step in 1..=steps {
        next.gemv(C64::from(1.0), stepper.step_matrix(), &psi, C64::from(0.0));
        std::mem::swap(&mut psi, &mut next);
        let norm = psi.norm();
        if !norm.is_finite() || norm > reference * (1.0 + 1e-6) {
            return Err(Error::NumericalInstability(format!(
                "trajectory norm grew to {norm} at step {step}"
            )));
        }
        if gamma_ph > 0.0 {
            kick(&mut psi, &mut rng);
        }
        let t = if step == steps { t_max } else { step as f64 * stepper.dt };
        observe(t, &psi);
        if gamma_ph > 0.0 && step < steps {
            kick(&mut psi, &mut rng);
        }
    }
    Ok(())
}

struct TrajectorySetup {
    stepper: Rk4Stepper,
    steps: usize,
    psi0: CVector,
    w: CVector,
}

fn trajectory_setup(problem: &SearchProblem, noise: &NoiseConfig, t_max: f64) -> Result<TrajectorySetup> {
    noise.validate()?;
    check_time(t_max)?;
    problem.validate()?;
    let couplings = build_coupling_matrices(problem)?;
    let h = effective_hamiltonian_from(&couplings, problem, noise.include_decay)?.h;
    let (steps, dt) = steps_for(t_max, noise.dt.unwrap_or_else(|| step_size(&h)));
    Ok(TrajectorySetup {
        stepper: Rk4Stepper::new(&h, dt),
        steps,
        psi0: uniform_state(problem.n).0,
        w: target_state(&problem.targets, problem.n)?.0,
    })
}

fn fidelity_samples(setup: &TrajectorySetup, t_max: f64, gamma_ph: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut times = Vec::with_capacity(setup.steps + 1);
    let mut fidelity = Vec::with_capacity(setup.steps + 1);
    run_trajectory(&setup.stepper, &setup.psi0, setup.steps, t_max, gamma_ph, seed, |t, psi| {
        times.push(t);
        fidelity.push(setup.w.dotc(psi).norm_sqr());
    })?;
    Ok((times, fidelity))
}

/// Trajectories advanced together as the columns of one real matrix.
const BATCH: usize = 16;

/// Real form `[[Re P, -Im P], [Im P, Re P]]` of a complex step matrix `P`,
/// acting on states stored as `[re; im]`.
fn real_block(p: &CMatrix) -> DMatrix<f64> {
    let n = p.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = p[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Fidelity samples of one trajectory per seed. Each trajectory draws the
/// same kicks from its stream as [`run_trajectory`].
fn batch_fidelity_samples(
    setup: &TrajectorySetup,
    block: &DMatrix<f64>,
    gamma_ph: f64,
    seeds: &[u64],
) -> Result<Vec<Vec<f64>>> {
    let n = setup.psi0.len();
    let width = seeds.len();
    let mut x = DMatrix::from_fn(2 * n, width, |r, _| {
        if r < n {
            setup.psi0[r].re
        } else {
            setup.psi0[r - n].im
        }
    });
    let mut next = DMatrix::zeros(2 * n, width);
    let mut rngs: Vec<ChaCha8Rng> = seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect();
    let half_sigma = (2.0 * gamma_ph * setup.stepper.dt).sqrt();
    let kick = |x: &mut DMatrix<f64>, rngs: &mut [ChaCha8Rng]| {
        for (c, rng) in rngs.iter_mut().enumerate() {
            let mut col = x.column_mut(c);
            for i in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                let (s, co) = (half_sigma * z).sin_cos();
                let (re, im) = (col[i], col[n + i]);
                col[i] = re * co + im * s;
                col[n + i] = im * co - re * s;
            }
        }
    };
    let weights: Vec<(usize, C64)> = setup
        .w
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm_sqr() > 0.0)
        .map(|(i, z)| (i, z.conj()))
        .collect();
    let mut fidelity = vec![Vec::with_capacity(setup.steps + 1); width];
    let record = |x: &DMatrix<f64>, fidelity: &mut Vec<Vec<f64>>| {
        for (c, out) in fidelity.iter_mut().enumerate() {
            let amp: C64 = weights.iter().map(|&(i, w)| w * C64::new(x[(i, c)], x[(n + i, c)])).sum();
            out.push(amp.norm_sqr());
        }
    };
    let reference = setup.psi0.norm();

    record(&x, &mut fidelity);
    if gamma_ph > 0.0 {
        kick(&mut x, &mut rngs);
    }
    for step in 1..=setup.steps {
        next.gemm(1.0, block, &x, 0.0);
        std::mem::swap(&mut x, &mut next);
        for c in 0..width {
            let norm = x.column(c).norm();
            if !norm.is_finite() || norm > reference * (1.0 + 1e-6) {
                return Err(Error::NumericalInstability(format!(
                    "trajectory norm grew to {norm} at step {step}"
                )));
            }
        }
        if gamma_ph > 0.0 {
            kick(&mut x, &mut rngs);
        }
        record(&x, &mut fidelity);
        if gamma_ph > 0.0 && step < setup.steps {
            kick(&mut x, &mut rngs);
        }
    }
    Ok(fidelity)
}

/// One noisy effective-Hamiltonian trajectory.
pub fn dephasing_trajectory(
    problem: &SearchProblem,
    noise: &NoiseConfig,
    t_max: f64,
    seed: u64,
) -> Result<FidelityTrace> {
    let setup = trajectory_setup(problem, noise, t_max)?;
    let (times, fidelity) = fidelity_samples(&setup, t_max, noise.gamma_ph, seed)?;
    Ok(FidelityTrace {
        times,
        fidelity,
        stderr: None,
    })
}

/// Mean fidelity over `noise.n_traj` trajectories with its standard error.
/// Without dephasing the single deterministic trajectory is returned with
/// zero error.
pub fn average_trajectories(problem: &SearchProblem, noise: &NoiseConfig, t_max: f64) -> Result<FidelityTrace> {
    let indices: Vec<usize> = (0..noise.n_traj).collect();
    average_trajectory_indices(problem, noise, t_max, &indices)
}

/// Trajectory average over an explicit set of indices; the result does not
/// depend on their order.
pub fn average_trajectory_indices(
    problem: &SearchProblem,
    noise: &NoiseConfig,
    t_max: f64,
    indices: &[usize],
) -> Result<FidelityTrace> {
    let setup = trajectory_setup(problem, noise, t_max)?;
    if noise.gamma_ph == 0.0 {
        let (times, fidelity) = fidelity_samples(&setup, t_max, 0.0, noise.base_seed)?;
        let stderr = Some(vec![0.0; times.len()]);
        return Ok(FidelityTrace {
            times,
            fidelity,
            stderr,
        });
    }
    if indices.len() < 2 {
        return Err(Error::Validation("averaging needs at least two trajectories".into()));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let block = real_block(setup.stepper.step_matrix());
    let batches: Vec<Vec<Vec<f64>>> = sorted
        .par_chunks(BATCH)
        .map(|chunk| {
            let seeds: Vec<u64> = chunk.iter().map(|&i| trajectory_seed(noise.base_seed, i)).collect();
            batch_fidelity_samples(&setup, &block, noise.gamma_ph, &seeds)
        })
        .collect::<Result<_>>()?;
    let runs: Vec<Vec<f64>> = batches.into_iter().flatten().collect();

    let times = (0..=setup.steps)
        .map(|k| if k == setup.steps { t_max } else { k as f64 * setup.stepper.dt })
        .collect::<Vec<_>>();
    let m = runs.len() as f64;
    let samples = times.len();
    let mut mean = vec![0.0; samples];
    for f in &runs {
        for (acc, x) in mean.iter_mut().zip(f) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let mut var = vec![0.0; samples];
    for f in &runs {
        for ((acc, x), mu) in var.iter_mut().zip(f).zip(&mean) {
            *acc += (x - mu) * (x - mu);
        }
    }
    let stderr = var.iter().map(|v| (v / (m - 1.0)).sqrt() / m.sqrt()).collect();
    Ok(FidelityTrace {
        times,
        fidelity: mean,
        stderr: Some(stderr),
    })
}

/// Master equation against the effective-Hamiltonian method on one grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_abs_diff: f64,
    /// Fraction of samples with `|F_me - F_eff| <= 3 stderr + 1e-9`.
    pub within_band_fraction: f64,
    pub me_trace_csv: String,
    pub eff_trace_csv: String,
    #[serde(skip)]
    pub me_trace: FidelityTrace,
    #[serde(skip)]
    pub eff_trace: FidelityTrace,
}

/// Floor of the agreement band, covering integration round-off when the
/// trajectory average is deterministic.
pub const BAND_FLOOR: f64 = 1e-9;

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

pub fn compare_methods(problem: &SearchProblem, noise: &NoiseConfig, t_max: f64) -> Result<ComparisonReport> {
    noise.validate()?;
    if problem.n > COMPARISON_LIMIT {
        return Err(Error::Capacity {
            method: "method comparison",
            limit: COMPARISON_LIMIT,
            n: problem.n,
        });
    }
    let ops = open_operators(problem, noise.include_decay)?;
    let dt = noise.dt.unwrap_or_else(|| {
        master_step_rule(&ops, noise.gamma_ph)
            .min(trajectory_step_rule(problem, noise.include_decay).unwrap_or(f64::INFINITY))
    });
    let shared = NoiseConfig { dt: Some(dt), ..*noise };
    let me = evolve_master(problem, &shared, t_max)?;
    let eff = average_trajectories(problem, &shared, t_max)?;
    let se = eff.stderr.clone().unwrap_or_else(|| vec![0.0; eff.len()]);
    let mut max_abs_diff = 0.0f64;
    let mut inside = 0usize;
    for k in 0..me.len() {
        let d = (me.fidelity[k] - eff.fidelity[k]).abs();
        max_abs_diff = max_abs_diff.max(d);
        if d <= 3.0 * se[k] + BAND_FLOOR {
            inside += 1;
        }
    }
    Ok(ComparisonReport {
        max_abs_diff,
        within_band_fraction: inside as f64 / me.len() as f64,
        me_trace_csv: "me_trace.csv".into(),
        eff_trace_csv: "eff_trace.csv".into(),
        me_trace: me,
        eff_trace: eff,
    })
}
