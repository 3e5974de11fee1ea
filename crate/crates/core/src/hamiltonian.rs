//! Single-excitation Hamiltonians of the search problem.
//!
//! Basis state `|j>` has atom `j` excited and all others in the ground state.
//! The graph Hamiltonian is built from the coherent couplings with a zero
//! diagonal; the target Hamiltonian is the projector onto `|w>`.
//!
//! ## Orientation
//!
//! The search runs on the spectral edge occupied by the uniform state `|s>`.
//! When the couplings are on average negative (free space at one-wavelength
//! spacing) `|s>` sits at the bottom of the coherent spectrum, so the coherent
//! couplings enter with a global minus sign. The dynamics of `-J + eta H_t - iG/2`
//! is the complex conjugate of that of `J - eta H_t - iG/2`, so every fidelity
//! equals the one obtained by detuning the target by `-eta` in the physical
//! frame. The collective decay matrix is never flipped.

use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::{to_complex, CMatrix, CVector, RMatrix, C64, I};
use crate::model::{validate_targets, CouplingModel, SearchProblem};

/// Coherent couplings `J` and collective decay rates `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub j: RMatrix,
    pub g: RMatrix,
}

impl CouplingMatrices {
    /// Assembles both matrices for an open chain of `n` atoms.
    pub fn assemble(model: &CouplingModel, n: usize) -> Result<Self> {
        model.validate()?;
        let mut j = RMatrix::zeros(n, n);
        let mut g = RMatrix::zeros(n, n);
        // Couplings depend on |a - b| only, one evaluation per distance.
        let mut by_distance = Vec::with_capacity(n);
        for d in 1..n {
            by_distance.push(model.coupling(d as f64 * model.spacing)?);
        }
        let self_decay = model.self_decay();
        for a in 0..n {
            g[(a, a)] = self_decay;
            for b in a + 1..n {
                let c = by_distance[b - a - 1];
                j[(a, b)] = c.j;
                j[(b, a)] = c.j;
                g[(a, b)] = c.gamma;
                g[(b, a)] = c.gamma;
            }
        }
        Ok(CouplingMatrices { j, g })
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    /// `+1` when `<s|J|s> >= 0`, `-1` otherwise.
    pub fn orientation(&self) -> f64 {
        if self.j.sum() < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Graph Hamiltonian `H_0` with the search orientation applied.
    pub fn graph_hamiltonian(&self) -> RMatrix {
        &self.j * self.orientation()
    }
}

pub fn build_coupling_matrices(problem: &SearchProblem) -> Result<CouplingMatrices> {
    problem.validate()?;
    CouplingMatrices::assemble(&problem.model, problem.n)
}

/// A pure state in the single-excitation sector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub CVector);

impl StateVector {
    pub fn from_real(amplitudes: &[f64]) -> Self {
        StateVector(CVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| C64::new(a, 0.0)),
        ))
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

/// Equal superposition `|s>` of all `n` basis states.
pub fn uniform_state(n: usize) -> StateVector {
    let a = 1.0 / (n as f64).sqrt();
    StateVector(CVector::from_element(n, C64::new(a, 0.0)))
}

/// Equal superposition `|w>` of the (1-based) target nodes.
pub fn target_state(targets: &[usize], n: usize) -> Result<StateVector> {
    validate_targets(targets, n)?;
    let a = 1.0 / (targets.len() as f64).sqrt();
    let mut v = CVector::zeros(n);
    for &t in targets {
        v[t - 1] = C64::new(a, 0.0);
    }
    Ok(StateVector(v))
}

/// Target Hamiltonian `H_t = |w><w|`.
pub fn build_target_projector(targets: &[usize], n: usize) -> Result<CMatrix> {
    validate_targets(targets, n)?;
    let weight = 1.0 / targets.len() as f64;
    let mut p = CMatrix::zeros(n, n);
    for &a in targets {
        for &b in targets {
            p[(a - 1, b - 1)] = C64::new(weight, 0.0);
        }
    }
    Ok(p)
}

/// Hermitian search Hamiltonian `H_s = H_0 + eta H_t`.
#[derive(Debug, Clone)]
pub struct SearchHamiltonian {
    pub h: CMatrix,
    pub eta: f64,
    /// Sign applied to the coherent couplings, see the module docs.
    pub orientation: f64,
}

pub fn build_search_hamiltonian(problem: &SearchProblem) -> Result<SearchHamiltonian> {
    let couplings = build_coupling_matrices(problem)?;
    search_hamiltonian_from(&couplings, problem)
}

/// Builds `H_s` from already assembled couplings.
pub fn search_hamiltonian_from(
    couplings: &CouplingMatrices,
    problem: &SearchProblem,
) -> Result<SearchHamiltonian> {
    let orientation = couplings.orientation();
    let mut h = to_complex(&couplings.graph_hamiltonian());
    add_target_term(&mut h, &problem.targets, problem.eta)?;
    Ok(SearchHamiltonian {
        h,
        eta: problem.eta,
        orientation,
    })
}

fn add_target_term(h: &mut CMatrix, targets: &[usize], eta: f64) -> Result<()> {
    validate_targets(targets, h.nrows())?;
    let weight = eta / targets.len() as f64;
    for &a in targets {
        for &b in targets {
            h[(a - 1, b - 1)] += C64::new(weight, 0.0);
        }
    }
    Ok(())
}

/// Non-Hermitian effective Hamiltonian `H_0 - (i/2) G + eta H_t`.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub h: CMatrix,
    pub eta: f64,
    pub include_decay: bool,
}

pub fn build_effective_hamiltonian(
    problem: &SearchProblem,
    include_decay: bool,
) -> Result<EffectiveHamiltonian> {
    let couplings = build_coupling_matrices(problem)?;
    effective_hamiltonian_from(&couplings, problem, include_decay)
}

pub fn effective_hamiltonian_from(
    couplings: &CouplingMatrices,
    problem: &SearchProblem,
    include_decay: bool,
) -> Result<EffectiveHamiltonian> {
    let mut h = search_hamiltonian_from(couplings, problem)?.h;
    if include_decay {
        h -= to_complex(&couplings.g) * (I * 0.5);
    }
    Ok(EffectiveHamiltonian {
        h,
        eta: problem.eta,
        include_decay,
    })
}

/// `|s>` as a plain real vector.
pub(crate) fn uniform_real(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0 / (n as f64).sqrt())
}

/// `|w>` as a plain real vector, targets 1-based.
pub(crate) fn target_real(targets: &[usize], n: usize) -> Result<DVector<f64>> {
    validate_targets(targets, n)?;
    let a = 1.0 / (targets.len() as f64).sqrt();
    let mut v = DVector::zeros(n);
    for &t in targets {
        v[t - 1] = a;
    }
    Ok(v)
}
