//! Coupling models, unit conventions and the search-problem record.
//!
//! Energies are measured in units of the free-space single-atom decay rate
//! `gamma`, lengths in units of the atomic transition wavelength `lambda_a`
//! and times in units of `1/gamma`. With `lambda_a = 1` the atomic wave number
//! is `k_a = 2 pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed unit convention of the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitConvention {
    pub gamma_free: f64,
    pub lambda_a: f64,
    pub k_a: f64,
}

impl UnitConvention {
    pub const STANDARD: UnitConvention = UnitConvention {
        gamma_free: 1.0,
        lambda_a: 1.0,
        k_a: 2.0 * PI,
    };
}

impl Default for UnitConvention {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Default waveguide decay rate into the guided mode.
pub const DEFAULT_GAMMA_WG: f64 = 20.0;
/// Default dispersive cavity coupling `g^2 / Delta`.
pub const DEFAULT_J_C: f64 = 10.0;
/// Default nearest-neighbour spacing.
pub const DEFAULT_SPACING: f64 = 1.0;

/// Coherent coupling `J` and collective decay `Gamma` between two atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub j: f64,
    pub gamma: f64,
}

fn check_distance(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "atom separation must be positive and finite, got {r}"
        )))
    }
}

/// Dipole-dipole exchange in free space for dipoles perpendicular to the chain.
pub fn coupling_free_space(r: f64) -> Result<Coupling> {
    check_distance(r)?;
    let x = UnitConvention::STANDARD.k_a * r;
    let (s, c) = x.sin_cos();
    let (x2, x3) = (x * x, x * x * x);
    Ok(Coupling {
        j: 0.75 * (-c / x + s / x2 + c / x3),
        gamma: 1.5 * (s / x + c / x2 - s / x3),
    })
}

/// Pure power law `J = r^-alpha` without dissipation.
pub fn coupling_pure_power_law(r: f64, alpha: f64) -> Result<Coupling> {
    check_distance(r)?;
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(Coupling {
        j: r.powf(-alpha),
        gamma: 0.0,
    })
}

/// Waveguide with the transition inside the band gap: exponentially
/// localized exchange, dissipation suppressed.
pub fn coupling_waveguide_bandgap(r: f64, gamma_wg: f64, kappa: f64) -> Result<Coupling> {
    check_distance(r)?;
    Ok(Coupling {
        j: 0.5 * gamma_wg * (-kappa * r).exp(),
        gamma: 0.0,
    })
}

/// Waveguide with the transition above the cutoff (propagating guided mode).
pub fn coupling_waveguide_propagating(r: f64, gamma_wg: f64) -> Result<Coupling> {
    check_distance(r)?;
    let (s, c) = (UnitConvention::STANDARD.k_a * r).sin_cos();
    Ok(Coupling {
        j: 0.5 * gamma_wg * s,
        gamma: 0.5 * gamma_wg * c,
    })
}

/// Dispersive cavity: distance-independent exchange, free-space dissipation.
pub fn coupling_cavity(r: f64, j_c: f64) -> Result<Coupling> {
    let free = coupling_free_space(r)?;
    Ok(Coupling {
        j: j_c,
        gamma: free.gamma,
    })
}

/// Physical system behind the pairwise couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingKind {
    FreeSpace,
    PurePowerLaw { alpha: f64 },
    WaveguideBandgap { gamma_wg: f64, kappa: f64 },
    WaveguidePropagating { gamma_wg: f64 },
    Cavity { j_c: f64 },
}

impl CouplingKind {
    pub fn name(&self) -> &'static str {
        match self {
            CouplingKind::FreeSpace => "free-space",
            CouplingKind::PurePowerLaw { .. } => "power-law",
            CouplingKind::WaveguideBandgap { .. } => "waveguide-gap",
            CouplingKind::WaveguidePropagating { .. } => "waveguide-prop",
            CouplingKind::Cavity { .. } => "cavity",
        }
    }
}

/// A coupling model together with the chain spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingModel {
    pub kind: CouplingKind,
    pub spacing: f64,
}

impl CouplingModel {
    pub fn new(kind: CouplingKind, spacing: f64) -> Result<Self> {
        let model = CouplingModel { kind, spacing };
        model.validate()?;
        Ok(model)
    }

    pub fn free_space() -> Self {
        Self::unchecked(CouplingKind::FreeSpace)
    }

    pub fn pure_power_law(alpha: f64) -> Result<Self> {
        Self::new(CouplingKind::PurePowerLaw { alpha }, DEFAULT_SPACING)
    }

    pub fn waveguide_bandgap(gamma_wg: f64, kappa: f64) -> Result<Self> {
        Self::new(
            CouplingKind::WaveguideBandgap { gamma_wg, kappa },
            DEFAULT_SPACING,
        )
    }

    pub fn waveguide_propagating(gamma_wg: f64) -> Result<Self> {
        Self::new(
            CouplingKind::WaveguidePropagating { gamma_wg },
            DEFAULT_SPACING,
        )
    }

    pub fn cavity(j_c: f64) -> Result<Self> {
        Self::new(CouplingKind::Cavity { j_c }, DEFAULT_SPACING)
    }

    fn unchecked(kind: CouplingKind) -> Self {
        CouplingModel {
            kind,
            spacing: DEFAULT_SPACING,
        }
    }

    pub fn with_spacing(self, spacing: f64) -> Result<Self> {
        Self::new(self.kind, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive, got {v}")))
            }
        };
        positive("spacing", self.spacing)?;
        match self.kind {
            CouplingKind::FreeSpace => Ok(()),
            CouplingKind::PurePowerLaw { alpha } => positive("alpha", alpha),
            CouplingKind::WaveguideBandgap { gamma_wg, kappa } => {
                positive("gamma_wg", gamma_wg)?;
                if kappa >= 0.0 && kappa.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "kappa must be non-negative, got {kappa}"
                    )))
                }
            }
            CouplingKind::WaveguidePropagating { gamma_wg } => positive("gamma_wg", gamma_wg),
            CouplingKind::Cavity { j_c } => positive("j_c", j_c),
        }
    }

    /// Pairwise coupling at separation `r`.
    pub fn coupling(&self, r: f64) -> Result<Coupling> {
        match self.kind {
            CouplingKind::FreeSpace => coupling_free_space(r),
            CouplingKind::PurePowerLaw { alpha } => coupling_pure_power_law(r, alpha),
            CouplingKind::WaveguideBandgap { gamma_wg, kappa } => {
                coupling_waveguide_bandgap(r, gamma_wg, kappa)
            }
            CouplingKind::WaveguidePropagating { gamma_wg } => {
                coupling_waveguide_propagating(r, gamma_wg)
            }
            CouplingKind::Cavity { j_c } => coupling_cavity(r, j_c),
        }
    }

    /// Single-atom decay rate, the diagonal of the collective decay matrix.
    pub fn self_decay(&self) -> f64 {
        match self.kind {
            CouplingKind::FreeSpace | CouplingKind::Cavity { .. } => {
                UnitConvention::STANDARD.gamma_free
            }
            CouplingKind::PurePowerLaw { .. } | CouplingKind::WaveguideBandgap { .. } => 0.0,
            // r -> 0 limit of the tabulated (Gamma/2) cos(k_a r)
            CouplingKind::WaveguidePropagating { gamma_wg } => 0.5 * gamma_wg,
        }
    }

    /// Separation of atoms `i` and `j` (any index base).
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        i.abs_diff(j) as f64 * self.spacing
    }
}

/// A spatial-search instance: chain length, marked nodes, couplings and the
/// strength `eta` of the target Hamiltonian.
///
/// Target indices are 1-based, as in `|1>, ..., |n>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub n: usize,
    pub targets: Vec<usize>,
    pub model: CouplingModel,
    pub eta: f64,
}

impl SearchProblem {
    pub fn new(n: usize, targets: Vec<usize>, model: CouplingModel, eta: f64) -> Result<Self> {
        let problem = SearchProblem {
            n,
            targets,
            model,
            eta,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Validation("n must be at least 1".into()));
        }
        validate_targets(&self.targets, self.n)?;
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Validation(format!(
                "eta must be non-negative and finite, got {}",
                self.eta
            )));
        }
        self.model.validate()
    }

    /// Same problem with a different target strength.
    pub fn with_eta(&self, eta: f64) -> Self {
        SearchProblem {
            eta,
            ..self.clone()
        }
    }

    /// Number of marked nodes.
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    /// Zero-based target indices.
    pub fn target_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.targets.iter().map(|&t| t - 1)
    }
}

/// Checks that `targets` is a non-empty list of distinct indices in `1..=n`.
pub fn validate_targets(targets: &[usize], n: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Validation("at least one target is required".into()));
    }
    if targets.len() > n {
        return Err(Error::Validation(format!(
            "{} targets exceed chain length {n}",
            targets.len()
        )));
    }
    for (idx, &t) in targets.iter().enumerate() {
        if t == 0 || t > n {
            return Err(Error::Validation(format!(
                "target {t} outside 1..={n}"
            )));
        }
        if targets[..idx].contains(&t) {
            return Err(Error::Validation(format!("duplicate target {t}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from a 40-digit evaluation of the free-space formulas.
    const FREE_R1: (f64, f64) = (-0.116_342_625_965_809_05, 0.037_995_443_865_876_664);
    const FREE_R05: (f64, f64) = (0.214_543_763_812_943_39, -0.151_981_775_463_506_66);
    const FREE_R2: (f64, f64) = (-0.059_305_155_990_321_694, 0.009_498_860_966_469_166);

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn units_are_fixed() {
        let u = UnitConvention::default();
        assert_eq!(u.gamma_free, 1.0);
        assert_eq!(u.lambda_a, 1.0);
        assert_eq!(u.k_a, 2.0 * PI);
    }

    #[test]
    fn free_space_reference_values() {
        for (r, (j, g)) in [(1.0, FREE_R1), (0.5, FREE_R05), (2.0, FREE_R2)] {
            let c = coupling_free_space(r).unwrap();
            assert!(close(c.j, j, 1e-14), "J({r}) = {}", c.j);
            assert!(close(c.gamma, g, 1e-14), "Gamma({r}) = {}", c.gamma);
        }
        let c = coupling_free_space(1.0).unwrap();
        assert!(close(c.j, -0.116343, 1e-6));
        assert!(close(c.gamma, 0.0379954, 1e-7));
    }

    #[test]
    fn free_space_half_wavelength_is_dominated_by_near_field() {
        // At x = pi the 1/x^3 term contributes -1/pi^3, opposite in sign to the 1/x term.
        let x = PI;
        let far = -(x.cos()) / x;
        let near = x.cos() / x.powi(3);
        assert!(far > 0.0 && near < 0.0);
        let c = coupling_free_space(0.5).unwrap();
        assert!(close(c.j, 0.75 * (far + near), 1e-15));
    }

    #[test]
    fn free_space_vanishes_far_away() {
        let mut envelope = f64::INFINITY;
        for r in [10.0, 100.0, 1000.0, 1e5] {
            let c = coupling_free_space(r).unwrap();
            let x = 2.0 * PI * r;
            let bound = 0.75 * (1.0 / x + 1.0 / (x * x) + 1.0 / (x * x * x));
            assert!(c.j.abs() <= bound && c.gamma.abs() <= 2.0 * bound);
            assert!(bound < envelope);
            envelope = bound;
        }
    }

    #[test]
    fn free_space_bounded_by_envelope_on_integer_grid() {
        for r in 1..=100 {
            let r = r as f64;
            let x = 2.0 * PI * r;
            let bound = 0.75 * (1.0 / x + 1.0 / (x * x) + 1.0 / (x * x * x));
            assert!(coupling_free_space(r).unwrap().j.abs() <= bound);
        }
    }

    #[test]
    fn non_positive_distance_is_domain_error() {
        assert!(matches!(coupling_free_space(0.0), Err(Error::Domain(_))));
        assert!(matches!(coupling_free_space(-1.0), Err(Error::Domain(_))));
        assert!(coupling_pure_power_law(0.0, 1.0).is_err());
        assert!(coupling_waveguide_bandgap(-2.0, 20.0, 0.1).is_err());
        assert!(coupling_waveguide_propagating(0.0, 20.0).is_err());
        assert!(coupling_cavity(0.0, 10.0).is_err());
        assert!(coupling_free_space(f64::NAN).is_err());
    }

    #[test]
    fn pure_power_law_values() {
        assert_eq!(coupling_pure_power_law(1.0, 0.5).unwrap(), Coupling { j: 1.0, gamma: 0.0 });
        assert_eq!(coupling_pure_power_law(4.0, 0.5).unwrap(), Coupling { j: 0.5, gamma: 0.0 });
        let c = coupling_pure_power_law(2.0, 1.2).unwrap();
        assert!(close(c.j, 0.435_275_281_648_062_07, 1e-15));
        assert_eq!(c.gamma, 0.0);
    }

    #[test]
    fn waveguide_bandgap_values() {
        let c = coupling_waveguide_bandgap(1.0, 20.0, 0.001).unwrap();
        assert!(close(c.j, 9.990_004_998_333_75, 1e-12));
        assert_eq!(c.gamma, 0.0);
        for r in [0.5, 1.0, 17.0, 1e4] {
            assert_eq!(coupling_waveguide_bandgap(r, 20.0, 0.0).unwrap().j, 10.0);
        }
        let c = coupling_waveguide_bandgap(200.0, 20.0, 0.005).unwrap();
        assert!(close(c.j, 3.678_794_411_714_423, 1e-12));
    }

    #[test]
    fn waveguide_bandgap_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for r in 1..=500 {
            let j = coupling_waveguide_bandgap(r as f64, 20.0, 0.001).unwrap().j;
            assert!(j < prev);
            prev = j;
        }
    }

    #[test]
    fn waveguide_propagating_values() {
        let c = coupling_waveguide_propagating(0.25, 20.0).unwrap();
        assert!(close(c.j, 10.0, 1e-12) && close(c.gamma, 0.0, 1e-12));
        let c = coupling_waveguide_propagating(1.0, 20.0).unwrap();
        assert!(close(c.j, 0.0, 1e-12) && close(c.gamma, 10.0, 1e-12));
        let c = coupling_waveguide_propagating(0.125, 20.0).unwrap();
        assert!(close(c.j, 7.071_067_811_865_475, 1e-12));
        assert!(close(c.gamma, 7.071_067_811_865_475, 1e-12));
    }

    #[test]
    fn cavity_values() {
        let c = coupling_cavity(1.0, 10.0).unwrap();
        assert_eq!(c.j, 10.0);
        assert!(close(c.gamma, FREE_R1.1, 1e-14));
        for r in [0.3, 1.0, 7.0, 500.0] {
            assert_eq!(coupling_cavity(r, 10.0).unwrap().j, 10.0);
        }
    }

    #[test]
    fn couplings_are_bitwise_reproducible() {
        let models = [
            CouplingModel::free_space(),
            CouplingModel::pure_power_law(1.2).unwrap(),
            CouplingModel::waveguide_bandgap(20.0, 0.001).unwrap(),
            CouplingModel::waveguide_propagating(20.0).unwrap(),
            CouplingModel::cavity(10.0).unwrap(),
        ];
        for m in models {
            for (i, j) in [(1usize, 5usize), (7, 2), (3, 300)] {
                let a = m.coupling(m.distance(i, j)).unwrap();
                let b = m.coupling(m.distance(j, i)).unwrap();
                assert_eq!(a.j.to_bits(), b.j.to_bits());
                assert_eq!(a.gamma.to_bits(), b.gamma.to_bits());
            }
        }
    }

    #[test]
    fn model_validation() {
        assert!(CouplingModel::pure_power_law(0.0).is_err());
        assert!(CouplingModel::waveguide_bandgap(0.0, 0.1).is_err());
        assert!(CouplingModel::waveguide_bandgap(20.0, -0.1).is_err());
        assert!(CouplingModel::waveguide_bandgap(20.0, 0.0).is_ok());
        assert!(CouplingModel::cavity(-1.0).is_err());
        assert!(CouplingModel::free_space().with_spacing(0.0).is_err());
    }

    #[test]
    fn problem_validation() {
        let m = CouplingModel::cavity(10.0).unwrap();
        assert!(SearchProblem::new(4, vec![1, 4], m, 1.0).is_ok());
        assert!(SearchProblem::new(4, vec![], m, 1.0).is_err());
        assert!(SearchProblem::new(4, vec![0], m, 1.0).is_err());
        assert!(SearchProblem::new(4, vec![5], m, 1.0).is_err());
        assert!(SearchProblem::new(4, vec![2, 2], m, 1.0).is_err());
        assert!(SearchProblem::new(4, vec![2], m, -1.0).is_err());
        assert!(SearchProblem::new(0, vec![1], m, 1.0).is_err());
    }

    #[test]
    fn model_serde_round_trip() {
        let m = CouplingModel::waveguide_bandgap(20.0, 0.005).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"waveguide_bandgap\""));
        let back: CouplingModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
