//! Eigenanalysis of the search Hamiltonian.
//!
//! Two routes are provided. [`spectral_summary`] diagonalizes `H_s` densely.
//! [`GapSolver`] diagonalizes the graph Hamiltonian once and then treats
//! `eta H_t = eta |w><w|` as a rank-one update: the eigenvalues of `H_s` are
//! the roots of the secular equation
//!
//! ```text
//! 1 = eta * sum_j |<v_j|w>|^2 / (E - d_j)
//! ```
//!
//! where `(d_j, v_j)` are the eigenpairs of `H_0`. The top two roots and their
//! overlaps cost `O(n)` per `eta`, which makes dense gap scans cheap.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    build_search_hamiltonian, target_real, uniform_real, uniform_state, target_state,
    CouplingMatrices,
};
use crate::io::{csv, fmt_num};
use crate::linalg::{eig_descending, EigenDecomposition, RMatrix};
use crate::model::{CouplingModel, SearchProblem};
use crate::optimize::{golden_section_minimize, grid};

/// Gaps below this are treated as a degenerate top pair.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Top two eigenpairs of `H_s` and their overlaps with `|s>` and `|w>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub ov_s0: f64,
    pub ov_s1: f64,
    pub ov_w0: f64,
    pub ov_w1: f64,
    /// The top pair is degenerate; overlaps are then split evenly from the
    /// projector onto the two-dimensional eigenspace.
    pub degenerate: bool,
}

impl SpectralSummary {
    fn from_pairs(top: (f64, f64, f64), second: (f64, f64, f64)) -> Self {
        let (e0, ov_s0, ov_w0) = top;
        let (e1, ov_s1, ov_w1) = second;
        let gap = (e0 - e1).max(0.0);
        if gap < DEGENERACY_TOL {
            let s = 0.5 * (ov_s0 + ov_s1);
            let w = 0.5 * (ov_w0 + ov_w1);
            SpectralSummary {
                e0,
                e1,
                gap,
                ov_s0: s,
                ov_s1: s,
                ov_w0: w,
                ov_w1: w,
                degenerate: true,
            }
        } else {
            SpectralSummary {
                e0,
                e1,
                gap,
                ov_s0,
                ov_s1,
                ov_w0,
                ov_w1,
                degenerate: false,
            }
        }
    }
}

fn require_pair(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Validation(format!(
            "spectral gap needs at least two sites, got n = {n}"
        )))
    } else {
        Ok(())
    }
}

/// Summary from a dense decomposition of `H_s`.
pub fn summary_from_decomposition(
    eig: &EigenDecomposition,
    targets: &[usize],
) -> Result<SpectralSummary> {
    let n = eig.dim();
    require_pair(n)?;
    let s = uniform_state(n);
    let w = target_state(targets, n)?;
    let pair = |k: usize| {
        let phi = eig.vector(k);
        (
            eig.values[k],
            phi.dotc(&s.0).norm_sqr(),
            phi.dotc(&w.0).norm_sqr(),
        )
    };
    Ok(SpectralSummary::from_pairs(pair(0), pair(1)))
}

/// Dense-route summary of the search Hamiltonian of `problem`.
pub fn spectral_summary(problem: &SearchProblem) -> Result<SpectralSummary> {
    require_pair(problem.n)?;
    let hs = build_search_hamiltonian(problem)?;
    let eig = eig_descending(&hs.h)?;
    summary_from_decomposition(&eig, &problem.targets)
}

/// Eigen-decomposition of the (oriented, real) graph Hamiltonian of a chain.
#[derive(Debug, Clone)]
pub struct BaseSpectrum {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: RMatrix,
    pub orientation: f64,
}

impl BaseSpectrum {
    pub fn new(model: &CouplingModel, n: usize) -> Result<Self> {
        let couplings = CouplingMatrices::assemble(model, n)?;
        Ok(Self::from_couplings(&couplings))
    }

    pub fn from_couplings(couplings: &CouplingMatrices) -> Self {
        let eig = couplings.graph_hamiltonian().symmetric_eigen();
        let n = couplings.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = RMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        BaseSpectrum {
            values,
            vectors,
            orientation: couplings.orientation(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Weights below this are numerically zero; such eigenvectors of `H_0`
/// are untouched by the target term.
const ACTIVE_WEIGHT: f64 = 1e-28;

/// Rank-one secular solver for the top of the spectrum of `H_0 + eta |w><w|`.
#[derive(Debug, Clone)]
pub struct GapSolver {
    poles: Vec<f64>,
    /// `<v_j|w>`
    cw: Vec<f64>,
    /// `<v_j|s>`
    cs: Vec<f64>,
    active: Vec<usize>,
    total_weight: f64,
}

struct Root {
    energy: f64,
    ov_s: f64,
    ov_w: f64,
}

impl GapSolver {
    pub fn new(base: &BaseSpectrum, targets: &[usize]) -> Result<Self> {
        let n = base.n();
        require_pair(n)?;
        let w = target_real(targets, n)?;
        let s = uniform_real(n);
        let cw: Vec<f64> = (0..n).map(|k| base.vectors.column(k).dot(&w)).collect();
        let cs: Vec<f64> = (0..n).map(|k| base.vectors.column(k).dot(&s)).collect();
        let active: Vec<usize> = (0..n).filter(|&k| cw[k] * cw[k] > ACTIVE_WEIGHT).collect();
        let total_weight = active.iter().map(|&k| cw[k] * cw[k]).sum();
        Ok(GapSolver {
            poles: base.values.clone(),
            cw,
            cs,
            active,
            total_weight,
        })
    }

    pub fn for_problem(problem: &SearchProblem) -> Result<Self> {
        problem.validate()?;
        let base = BaseSpectrum::new(&problem.model, problem.n)?;
        Self::new(&base, &problem.targets)
    }

    /// Energy gap `E0 - E1` at target strength `eta`.
    pub fn gap(&self, eta: f64) -> f64 {
        self.summary(eta).gap
    }

    pub fn summary(&self, eta: f64) -> SpectralSummary {
        let mut candidates: Vec<Root> = Vec::with_capacity(4);
        if eta > 0.0 && !self.active.is_empty() {
            let top = self.active[0];
            let upper = self.poles[top] + eta * self.total_weight;
            candidates.push(self.root(eta, top, upper, None));
            if let Some(&next) = self.active.get(1) {
                // the root between the two highest weighted poles
                candidates.push(self.root(eta, next, self.poles[top], Some(top)));
            }
        }
        // eigenvalues of H_0 untouched by the update
        let untouched = |k: usize| eta <= 0.0 || !self.active.contains(&k);
        candidates.extend(
            (0..self.poles.len())
                .filter(|&k| untouched(k))
                .take(2)
                .map(|k| Root {
                    energy: self.poles[k],
                    ov_s: self.cs[k] * self.cs[k],
                    ov_w: self.cw[k] * self.cw[k],
                }),
        );
        candidates.sort_by(|a, b| b.energy.total_cmp(&a.energy));
        let top = &candidates[0];
        let second = &candidates[1];
        SpectralSummary::from_pairs(
            (top.energy, top.ov_s, top.ov_w),
            (second.energy, second.ov_s, second.ov_w),
        )
    }

    /// Root of the secular function between the active pole `left` and
    /// `right` (an energy; `right_pole` names it when it is itself a pole).
    fn root(&self, eta: f64, left: usize, right: f64, right_pole: Option<usize>) -> Root {
        let d_left = self.poles[left];
        let width = right - d_left;
        // Offsets of every active pole from a chosen origin; the root is
        // located as origin + tau to keep precision next to the origin pole.
        let secular = |origin: f64, tau: f64| {
            1.0 - eta
                * self
                    .active
                    .iter()
                    .map(|&j| self.cw[j] * self.cw[j] / (tau + (origin - self.poles[j])))
                    .sum::<f64>()
        };
        let mid = 0.5 * width;
        let (origin, mut lo, mut hi) = match right_pole {
            Some(_) if secular(d_left, mid) < 0.0 => (right, d_left - right + mid, 0.0),
            _ => (d_left, 0.0, width),
        };
        for _ in 0..200 {
            let tau = 0.5 * (lo + hi);
            if tau <= lo || tau >= hi {
                break;
            }
            if secular(origin, tau) < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
        }
        let tau = 0.5 * (lo + hi);

        let (mut norm2, mut sw, mut ss) = (0.0, 0.0, 0.0);
        for &j in &self.active {
            let u = self.cw[j] / (tau + (origin - self.poles[j]));
            norm2 += u * u;
            sw += self.cw[j] * u;
            ss += self.cs[j] * u;
        }
        Root {
            energy: origin + tau,
            ov_s: ss * ss / norm2,
            ov_w: sw * sw / norm2,
        }
    }
}

/// One point of a gap curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub eta: f64,
    pub summary: SpectralSummary,
}

pub const GAP_CURVE_HEADER: &str = "eta,gap,E0,E1,ov_s0,ov_s1,ov_w0,ov_w1";

/// Spectral summaries over a strictly increasing, positive `eta` grid.
pub fn gap_curve(problem: &SearchProblem, eta_grid: &[f64]) -> Result<Vec<GapPoint>> {
    if eta_grid.is_empty() {
        return Err(Error::Validation("eta grid is empty".into()));
    }
    if eta_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Validation("eta grid must be positive".into()));
    }
    if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("eta grid must be strictly increasing".into()));
    }
    let solver = GapSolver::for_problem(problem)?;
    Ok(eta_grid
        .par_iter()
        .map(|&eta| GapPoint {
            eta,
            summary: solver.summary(eta),
        })
        .collect())
}

pub fn gap_curve_csv(points: &[GapPoint]) -> String {
    csv(
        GAP_CURVE_HEADER,
        points.iter().map(|p| {
            let s = &p.summary;
            [p.eta, s.gap, s.e0, s.e1, s.ov_s0, s.ov_s1, s.ov_w0, s.ov_w1]
                .into_iter()
                .map(fmt_num)
        }),
    )
}

/// Scan-and-refine settings for the optimal target strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSearch {
    pub lo: f64,
    pub hi: f64,
    /// Points of the geometric coarse scan.
    pub points: usize,
    /// Relative tolerance of the golden-section refinement.
    pub rel_tol: f64,
}

impl Default for EtaSearch {
    fn default() -> Self {
        EtaSearch {
            lo: 1e-2,
            hi: 1e4,
            points: 200,
            rel_tol: 1e-4,
        }
    }
}

impl EtaSearch {
    pub fn with_bracket(lo: f64, hi: f64) -> Self {
        EtaSearch {
            lo,
            hi,
            ..Default::default()
        }
    }
}

/// Location of the minimum spectral gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapOptimum {
    pub eta_opt: f64,
    pub gap_min: f64,
    /// `pi / gap_min`
    pub t_gap: f64,
    pub summary_at_opt: SpectralSummary,
}

pub fn find_eta_opt(problem: &SearchProblem, bracket: (f64, f64)) -> Result<GapOptimum> {
    let solver = GapSolver::for_problem(problem)?;
    find_eta_opt_with(&solver, &EtaSearch::with_bracket(bracket.0, bracket.1))
}

/// Coarse geometric scan followed by golden-section refinement.
pub fn find_eta_opt_with(solver: &GapSolver, search: &EtaSearch) -> Result<GapOptimum> {
    let EtaSearch {
        lo,
        hi,
        points,
        rel_tol,
    } = *search;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Validation(format!(
            "eta bracket must satisfy 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if points < 3 {
        return Err(Error::Validation("eta scan needs at least 3 points".into()));
    }
    let etas = grid(lo, hi, points, true);
    let gaps: Vec<f64> = etas.iter().map(|&e| solver.gap(e)).collect();
    let k = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 || k == points - 1 {
        return Err(Error::BracketEdge { eta: etas[k], lo, hi });
    }
    let (eta_opt, _) = golden_section_minimize(|e| solver.gap(e), etas[k - 1], etas[k + 1], rel_tol);
    let summary = solver.summary(eta_opt);
    Ok(GapOptimum {
        eta_opt,
        gap_min: summary.gap,
        t_gap: PI / summary.gap,
        summary_at_opt: summary,
    })
}
