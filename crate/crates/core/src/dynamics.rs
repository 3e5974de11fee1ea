//! Closed and non-Hermitian propagation, fidelity traces and optimal times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{build_search_hamiltonian, target_state, uniform_state, StateVector};
use crate::io::{csv, fmt_num};
use crate::linalg::{eig_descending, max_row_sum, CMatrix, CVector, EigenDecomposition, C64, I};
use crate::model::SearchProblem;
use crate::optimize::golden_section_maximize;
use crate::spectral::GapOptimum;

/// Sampled fidelity `F(t)`, optionally with a per-sample standard error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl FidelityTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index and value of the largest sample.
    pub fn peak(&self) -> (usize, f64) {
        self.fidelity
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, f)| if f > best.1 { (k, f) } else { best })
    }

    pub fn to_csv(&self) -> String {
        let header = if self.stderr.is_some() {
            "t,fidelity,stderr"
        } else {
            "t,fidelity"
        };
        csv(
            header,
            (0..self.len()).map(|k| {
                let mut row = vec![fmt_num(self.times[k]), fmt_num(self.fidelity[k])];
                if let Some(se) = &self.stderr {
                    row.push(fmt_num(se[k]));
                }
                row
            }),
        )
    }
}

/// Optimal search time and the fidelity reached there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub t_opt: f64,
    pub f_max: f64,
    pub eta: f64,
    /// `eta * t_opt`
    pub eta_t: f64,
    /// No interior fidelity peak was found; `t_opt` is the end of the window.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged: bool,
}

impl SearchResult {
    fn new(t_opt: f64, f_max: f64, eta: f64, flagged: bool) -> Self {
        SearchResult {
            t_opt,
            f_max,
            eta,
            eta_t: eta * t_opt,
            flagged,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

/// Exact evolution under a Hermitian Hamiltonian via its eigenbasis.
#[derive(Debug, Clone)]
pub struct ClosedPropagator {
    eig: EigenDecomposition,
}

impl ClosedPropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        Ok(ClosedPropagator {
            eig: eig_descending(h)?,
        })
    }

    pub fn from_decomposition(eig: EigenDecomposition) -> Self {
        ClosedPropagator { eig }
    }

    pub fn decomposition(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// `exp(-i H t) psi0`
    pub fn propagate(&self, psi0: &StateVector, t: f64) -> StateVector {
        if t == 0.0 {
            return psi0.clone();
        }
        let mut c = self.eig.coefficients(&psi0.0);
        for (ck, &e) in c.iter_mut().zip(&self.eig.values) {
            *ck *= C64::from_polar(1.0, -e * t);
        }
        StateVector(&self.eig.vectors * c)
    }

    /// `|<w| exp(-i H t) |psi0>|^2` as a cheap function of `t`.
    pub fn fidelity_fn(&self, psi0: &StateVector, w: &StateVector) -> FidelityFn {
        let cs = self.eig.coefficients(&psi0.0);
        let cw = self.eig.coefficients(&w.0);
        FidelityFn {
            energies: self.eig.values.clone(),
            weights: cw.iter().zip(cs.iter()).map(|(a, b)| a.conj() * b).collect(),
        }
    }
}

/// `F(t) = |sum_k a_k exp(-i E_k t)|^2`
#[derive(Debug, Clone)]
pub struct FidelityFn {
    energies: Vec<f64>,
    weights: Vec<C64>,
}

impl FidelityFn {
    pub fn eval(&self, t: f64) -> f64 {
        self.energies
            .iter()
            .zip(&self.weights)
            .map(|(&e, &a)| a * C64::from_polar(1.0, -e * t))
            .sum::<C64>()
            .norm_sqr()
    }
}

pub fn propagate_closed(h: &CMatrix, psi0: &StateVector, t: f64) -> Result<StateVector> {
    Ok(ClosedPropagator::new(h)?.propagate(psi0, t))
}

fn closed_fidelity(problem: &SearchProblem) -> Result<FidelityFn> {
    problem.validate()?;
    let hs = build_search_hamiltonian(problem)?;
    let prop = ClosedPropagator::new(&hs.h)?;
    let s = uniform_state(problem.n);
    let w = target_state(&problem.targets, problem.n)?;
    Ok(prop.fidelity_fn(&s, &w))
}

fn time_grid(t_max: f64, samples: usize) -> Vec<f64> {
    let last = (samples - 1) as f64;
    (0..samples)
        .map(|k| if k == samples - 1 { t_max } else { t_max * k as f64 / last })
        .collect()
}

fn check_window(t_max: f64, samples: usize) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Validation(format!("t_max must be positive, got {t_max}")));
    }
    if samples < 2 {
        return Err(Error::Validation("a fidelity trace needs at least 2 samples".into()));
    }
    Ok(())
}

/// Closed-system `F(t)` on a uniform grid `[0, t_max]`.
pub fn fidelity_trace(problem: &SearchProblem, t_max: f64, samples: usize) -> Result<FidelityTrace> {
    check_window(t_max, samples)?;
    let f = closed_fidelity(problem)?;
    let times = time_grid(t_max, samples);
    let fidelity = times.par_iter().map(|&t| f.eval(t)).collect();
    Ok(FidelityTrace {
        times,
        fidelity,
        stderr: None,
    })
}

/// Samples per `pi / gap` in the optimal-time scan.
const SAMPLES_PER_PERIOD: f64 = 400.0;
/// A peak counts as good once it reaches this fraction of the scanned maximum.
pub const GOOD_PEAK_FRACTION: f64 = 0.95;
const T_REL_TOL: f64 = 1e-5;

/// Earliest good fidelity peak within `3 t_gap` (then `10 t_gap`) of the start.
pub fn find_t_opt(problem: &SearchProblem, gap_opt: &GapOptimum) -> Result<SearchResult> {
    let problem = problem.with_eta(gap_opt.eta_opt);
    let f = closed_fidelity(&problem)?;
    find_t_opt_with(&f, gap_opt.t_gap, problem.eta)
}

/// Optimal time of an already prepared fidelity function, `t_gap` setting the scale.
pub fn find_t_opt_with(f: &FidelityFn, t_gap: f64, eta: f64) -> Result<SearchResult> {
    if !(t_gap > 0.0 && t_gap.is_finite()) {
        return Err(Error::Validation(format!("time scale must be positive, got {t_gap}")));
    }
    let mut last = None;
    for periods in [3.0, 10.0] {
        let t_max = periods * t_gap;
        let samples = (periods * SAMPLES_PER_PERIOD) as usize + 1;
        let times = time_grid(t_max, samples);
        let values: Vec<f64> = times.iter().map(|&t| f.eval(t)).collect();
        if let Some(k) = earliest_good_peak(&values) {
            let (t, ft) = golden_section_maximize(|t| f.eval(t), times[k - 1], times[k + 1], T_REL_TOL);
            let (t, ft) = if ft >= values[k] { (t, ft) } else { (times[k], values[k]) };
            return Ok(SearchResult::new(t, ft.min(1.0), eta, false));
        }
        last = Some((t_max, values[samples - 1]));
    }
    let (t_max, f_end) = last.expect("at least one window scanned");
    Ok(SearchResult::new(t_max, f_end.min(1.0), eta, true))
}

fn earliest_good_peak(values: &[f64]) -> Option<usize> {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len() - 1).find(|&k| {
        values[k] >= values[k - 1] && values[k] >= values[k + 1] && values[k] >= GOOD_PEAK_FRACTION * top
    })
}

/// Step-size rule for the fourth-order integrator.
pub fn step_size(h: &CMatrix) -> f64 {
    let norm = max_row_sum(h);
    if norm > 0.0 {
        0.05 / norm
    } else {
        0.05
    }
}

/// One fixed step of classic RK4 for `psi' = -i H psi`, stored as the
/// polynomial `1 + A + A^2/2 + A^3/6 + A^4/24` with `A = -i H dt`.
#[derive(Debug, Clone)]
pub struct Rk4Stepper {
    step: CMatrix,
    pub dt: f64,
}

impl Rk4Stepper {
    pub fn new(h: &CMatrix, dt: f64) -> Self {
        let n = h.nrows();
        let a = h * (-I * dt);
        let id = CMatrix::identity(n, n);
        let mut p = &id + &a * C64::from(0.25);
        p = &id + (&a * p) * C64::from(1.0 / 3.0);
        p = &id + (&a * p) * C64::from(0.5);
        p = &id + &a * p;
        Rk4Stepper { step: p, dt }
    }

    pub fn step_matrix(&self) -> &CMatrix {
        &self.step
    }

    pub fn apply(&self, psi: &CVector) -> CVector {
        &self.step * psi
    }
}

fn check_norm(psi: &CVector, reference: f64) -> Result<()> {
    let norm = psi.norm();
    if !norm.is_finite() || norm > reference * (1.0 + 1e-6) {
        return Err(Error::NumericalInstability(format!(
            "state norm grew to {norm} from {reference}"
        )));
    }
    Ok(())
}

/// Fixed-step RK4 of `psi' = -i H_eff psi`; returns the `steps + 1` states
/// from `t = 0` to `t = steps * dt`.
pub fn propagate_nonhermitian(
    h_eff: &CMatrix,
    psi0: &StateVector,
    dt: f64,
    steps: usize,
) -> Result<Vec<StateVector>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("time step must be positive, got {dt}")));
    }
    let stepper = Rk4Stepper::new(h_eff, dt);
    let reference = psi0.norm();
    let mut out = Vec::with_capacity(steps + 1);
    let mut psi = psi0.0.clone();
    out.push(psi0.clone());
    for _ in 0..steps {
        psi = stepper.apply(&psi);
        check_norm(&psi, reference)?;
        out.push(StateVector(psi.clone()));
    }
    Ok(out)
}

/// Number of steps and the step length covering `[0, t_max]` with steps no
/// longer than the rule allows.
pub fn steps_for(t_max: f64, dt_rule: f64) -> (usize, f64) {
    let steps = ((t_max / dt_rule).ceil() as usize).max(1);
    (steps, t_max / steps as f64)
}

/// `|<w|psi(t)>|^2` under `H_eff` sampled at every RK4 step up to `t_max`.
pub fn nonhermitian_fidelity_trace(
    h_eff: &CMatrix,
    psi0: &StateVector,
    w: &StateVector,
    t_max: f64,
) -> Result<FidelityTrace> {
    check_window(t_max, 2)?;
    let (steps, dt) = steps_for(t_max, step_size(h_eff));
    let stepper = Rk4Stepper::new(h_eff, dt);
    let reference = psi0.norm();
    let mut times = Vec::with_capacity(steps + 1);
    let mut fidelity = Vec::with_capacity(steps + 1);
    let mut psi = psi0.0.clone();
    times.push(0.0);
    fidelity.push(w.0.dotc(&psi).norm_sqr());
    for k in 1..=steps {
        psi = stepper.apply(&psi);
        check_norm(&psi, reference)?;
        times.push(if k == steps { t_max } else { k as f64 * dt });
        fidelity.push(w.0.dotc(&psi).norm_sqr());
    }
    Ok(FidelityTrace {
        times,
        fidelity,
        stderr: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_effective_hamiltonian;
    use crate::linalg::to_complex;
    use crate::model::CouplingModel;
    use crate::spectral::find_eta_opt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CVector::from_fn(n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let norm = v.norm();
        StateVector(v / C64::from(norm))
    }

    /// Textbook RK4 on explicit stage vectors; shares nothing with the stepper.
    fn rk4_oracle(h: &CMatrix, psi: &CVector, t: f64, steps: usize) -> CVector {
        let dt = t / steps as f64;
        let f = |v: &CVector| h * v * (-I);
        let mut y = psi.clone();
        for _ in 0..steps {
            let k1 = f(&y);
            let k2 = f(&(&y + &k1 * C64::from(dt / 2.0)));
            let k3 = f(&(&y + &k2 * C64::from(dt / 2.0)));
            let k4 = f(&(&y + &k3 * C64::from(dt)));
            y += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
        }
        y
    }

    #[test]
    fn identity_at_zero_time() {
        let h = random_hermitian(5, 1);
        let psi = random_state(5, 2);
        let out = propagate_closed(&h, &psi, 0.0).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn rabi_half_period() {
        let j = 0.7;
        let h = to_complex(&crate::linalg::RMatrix::from_row_slice(2, 2, &[0.0, j, j, 0.0]));
        let psi = StateVector::from_real(&[1.0, 0.0]);
        let out = propagate_closed(&h, &psi, PI / (2.0 * j)).unwrap();
        assert!(out.0[0].norm() < 1e-12);
        assert!((out.0[1] - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn closed_matches_integrator_oracle() {
        let h = random_hermitian(8, 7);
        let psi = random_state(8, 8);
        let exact = propagate_closed(&h, &psi, 2.3).unwrap();
        let oracle = rk4_oracle(&h, &psi.0, 2.3, 4000);
        assert!((exact.0 - oracle).norm() < 1e-6);
    }

    #[test]
    fn norm_and_time_composition() {
        let h = random_hermitian(12, 3);
        let prop = ClosedPropagator::new(&h).unwrap();
        let psi = random_state(12, 4);
        for t in [0.1, 1.0, 17.0, 250.0] {
            assert!((prop.propagate(&psi, t).norm() - 1.0).abs() < 1e-9);
        }
        let direct = prop.propagate(&psi, 3.7);
        let composed = prop.propagate(&prop.propagate(&psi, 1.2), 2.5);
        assert!((direct.0 - composed.0).norm() < 1e-9);
    }

    #[test]
    fn trace_starts_at_initial_overlap_and_stays_bounded() {
        let p = SearchProblem::new(40, vec![20, 5], CouplingModel::free_space(), 1.2).unwrap();
        let trace = fidelity_trace(&p, 200.0, 501).unwrap();
        assert!((trace.fidelity[0] - 2.0 / 40.0).abs() < 1e-12);
        assert!(trace.fidelity.iter().all(|&f| (0.0..=1.0 + 1e-9).contains(&f)));
        assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*trace.times.last().unwrap(), 200.0);
        assert!(fidelity_trace(&p, 0.0, 10).is_err());
        assert!(fidelity_trace(&p, 1.0, 1).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = FidelityTrace {
            times: vec![0.0, 1.0],
            fidelity: vec![0.5, 0.25],
            stderr: Some(vec![0.0, 0.125]),
        };
        let doc = trace.to_csv();
        assert!(doc.starts_with("t,fidelity,stderr\n"));
        assert_eq!(doc.lines().nth(2).unwrap().split(',').count(), 3);
    }

    #[test]
    fn cavity_search_is_nearly_perfect() {
        let n = 128;
        let p = SearchProblem::new(n, vec![20], CouplingModel::cavity(10.0).unwrap(), 0.0).unwrap();
        let opt = find_eta_opt(&p, (1e-2, 1e4)).unwrap();
        let res = find_t_opt(&p, &opt).unwrap();
        assert!(!res.flagged);
        assert!(res.f_max > 0.98, "{res:?}");
        assert!((res.t_opt / opt.t_gap - 1.0).abs() < 0.05);
        assert!((res.eta_t - res.eta * res.t_opt).abs() <= 1e-12 * res.eta_t);
    }

    #[test]
    fn multi_node_speedup() {
        let n = 120;
        let model = CouplingModel::cavity(10.0).unwrap();
        let t = |targets: Vec<usize>| {
            let p = SearchProblem::new(n, targets, model, 0.0).unwrap();
            let opt = find_eta_opt(&p, (1e-2, 1e4)).unwrap();
            find_t_opt(&p, &opt).unwrap().t_opt
        };
        let t1 = t(vec![20]);
        for targets in [vec![20, 60], vec![20, 60, 100]] {
            let k = targets.len() as f64;
            let ratio = t(targets) / t1;
            assert!((ratio * k.sqrt() - 1.0).abs() < 0.10, "k = {k}: {ratio}");
        }
    }

    #[test]
    fn earliest_peak_rule() {
        let v = [0.0, 0.5, 0.2, 0.97, 0.1, 1.0, 0.3];
        assert_eq!(earliest_good_peak(&v), Some(3));
        assert_eq!(earliest_good_peak(&[0.1, 0.2, 0.3]), None);
    }

    #[test]
    fn monotone_trace_is_flagged() {
        // a single eigenvalue difference with a huge period relative to t_gap
        let f = FidelityFn {
            energies: vec![0.0, 1e-6],
            weights: vec![C64::new(0.5, 0.0), C64::new(-0.5, 0.0)],
        };
        let res = find_t_opt_with(&f, 1.0, 2.0).unwrap();
        assert!(res.flagged);
        assert_eq!(res.t_opt, 10.0);
        let json = res.to_json();
        assert!(json.contains("\"flagged\""));
    }

    #[test]
    fn result_json_fields() {
        let res = SearchResult::new(2.0, 0.9, 3.0, false);
        let v: serde_json::Value = serde_json::from_str(&res.to_json()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 4);
        for k in ["t_opt", "f_max", "eta", "eta_t"] {
            assert!(keys.contains(&k.to_string()));
        }
        assert_eq!(v["eta_t"], 6.0);
    }

    #[test]
    fn hermitian_rk4_matches_closed() {
        let h = random_hermitian(8, 11);
        let psi = random_state(8, 12);
        let dt = step_size(&h);
        let steps = (3.0 / dt).ceil() as usize;
        let states = propagate_nonhermitian(&h, &psi, dt, steps).unwrap();
        let exact = propagate_closed(&h, &psi, dt * steps as f64).unwrap();
        assert!((states.last().unwrap().0.clone() - exact.0).norm() < 1e-6);
        assert_eq!(states.len(), steps + 1);
    }

    #[test]
    fn single_atom_decay() {
        let gamma = 1.3;
        let h = CMatrix::from_element(1, 1, C64::new(0.0, -gamma / 2.0));
        let psi = StateVector::from_real(&[1.0]);
        let dt = step_size(&h);
        let steps = (2.0 / dt).round() as usize;
        let states = propagate_nonhermitian(&h, &psi, dt, steps).unwrap();
        for (k, s) in states.iter().enumerate().step_by(50) {
            let t = k as f64 * dt;
            assert!((s.norm_squared() - (-gamma * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn growth_is_an_instability() {
        let h = CMatrix::from_element(1, 1, C64::new(0.0, 0.5));
        let psi = StateVector::from_real(&[1.0]);
        let err = propagate_nonhermitian(&h, &psi, 0.01, 10).unwrap_err();
        assert!(matches!(err, Error::NumericalInstability(_)));
    }

    #[test]
    fn decay_trace_converges_in_step_size() {
        let p = SearchProblem::new(16, vec![5], CouplingModel::free_space(), 1.1).unwrap();
        let h = build_effective_hamiltonian(&p, true).unwrap().h;
        let s = uniform_state(16);
        let w = target_state(&[5], 16).unwrap();
        let t_max = 20.0;
        let run = |dt: f64| {
            let steps = (t_max / dt).round() as usize;
            let states = propagate_nonhermitian(&h, &s, dt, steps).unwrap();
            w.0.dotc(&states.last().unwrap().0).norm_sqr()
        };
        let dt = step_size(&h);
        let dt = t_max / (t_max / dt).ceil();
        assert!((run(dt) - run(dt / 2.0)).abs() < 1e-6);
        let trace = nonhermitian_fidelity_trace(&h, &s, &w, t_max).unwrap();
        assert!((trace.fidelity.last().unwrap() - run(dt)).abs() < 1e-12);
        let norms: Vec<f64> = propagate_nonhermitian(&h, &s, dt, 200)
            .unwrap()
            .iter()
            .map(|v| v.norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}
