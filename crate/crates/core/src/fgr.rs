//! Golden-rule rates for transitions between hybridized states, with the
//! second-order correction from virtual phonon-assisted transitions.
//!
//! Energies are in meV, returned rates in μeV.

use crate::bath::BathSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate_real, QuadOptions};
use crate::system::SystemSpec;
use crate::units::{mev_to_uev, sinc};

/// Which transition the golden-rule rate describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotCase {
    /// One dot coupled to the cavity.
    Single,
    /// Two identical dots at the bath's separation; the rate involves the
    /// difference of their couplings.
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    /// Real-transition rate of the upper state, `(N + 1) Γ_ph`.
    pub gamma_plus: f64,
    /// Real-transition rate of the lower state, `N Γ_ph`.
    pub gamma_minus: f64,
    pub gamma_ph: f64,
    /// `(4/R²) ∫ dω/π Γ₊(ω) Γ₋(ω)`, added to both states.
    pub virtual_correction: f64,
}

impl RatePrediction {
    pub fn total_plus(&self) -> f64 {
        self.gamma_plus + self.virtual_correction
    }

    pub fn total_minus(&self) -> f64 {
        self.gamma_minus + self.virtual_correction
    }
}

fn check_energy(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("transition energy must be > 0, got {r}")))
    }
}

/// `Γ_ph` in meV for a single dot: `(π/4) J_11(R)`.
fn gamma_ph_single_mev(bath: &BathSpec, r: f64) -> f64 {
    let x = r / bath.cutoff_energy(0, 0);
    std::f64::consts::FRAC_PI_4 * bath.prefactor() * r.powi(3) * (-x * x).exp()
}

fn gamma_ph_mev(bath: &BathSpec, r: f64, case: DotCase) -> f64 {
    match case {
        DotCase::Single => gamma_ph_single_mev(bath, r),
        DotCase::Pair => {
            let q = r * bath.dot_separation / bath.hbar_sound();
            2.0 * gamma_ph_single_mev(bath, r) * (1.0 - sinc(q))
        }
    }
}

fn check_case(bath: &BathSpec, case: DotCase) -> Result<()> {
    if case == DotCase::Pair {
        let l = &bath.confinement_lengths;
        if l.len() < 2 {
            return Err(Error::Input("pair rates need a bath with two dots".into()));
        }
        if l[0] != l[1] {
            return Err(Error::Input(format!(
                "pair rates assume identical dots, got confinement lengths {} and {} nm",
                l[0], l[1]
            )));
        }
    }
    Ok(())
}

/// `Γ_ph(R) = R³ (D_c − D_v)² / (16π ρ v_s⁵) exp(−(R/E_c)²)` in μeV.
pub fn gamma_ph_case1(bath: &BathSpec, r: f64) -> Result<f64> {
    check_energy(r)?;
    Ok(mev_to_uev(gamma_ph_mev(bath, r, DotCase::Single)))
}

/// `Γ₀ (1 − sinc(R d / ħv_s))` with `Γ₀` twice the single-dot rate, in μeV.
pub fn gamma_ph_case2(bath: &BathSpec, r: f64) -> Result<f64> {
    check_energy(r)?;
    check_case(bath, DotCase::Pair)?;
    Ok(mev_to_uev(gamma_ph_mev(bath, r, DotCase::Pair)))
}

pub fn gamma_ph(bath: &BathSpec, r: f64, case: DotCase) -> Result<f64> {
    match case {
        DotCase::Single => gamma_ph_case1(bath, r),
        DotCase::Pair => gamma_ph_case2(bath, r),
    }
}

/// `(4/R²) ∫₀^{12 E_c} dω/π N(N+1) Γ_ph(ω)²` in μeV.
///
/// `N(N+1) = (2 sinh(ω/2kT))⁻²`, so the integrand is evaluated as
/// `(Γ_ph/ω)² (ω / 2 sinh(ω/2kT))²`, which stays finite at ω → 0.
pub fn virtual_rate(bath: &BathSpec, r: f64, case: DotCase) -> Result<f64> {
    check_energy(r)?;
    check_case(bath, case)?;
    let kt = bath.thermal_energy();
    let integrand = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let y = w / (2.0 * kt);
        let thermal = if y < 1e-6 { kt * (1.0 - y * y / 6.0) } else { w / (2.0 * y.sinh()) };
        let g = gamma_ph_mev(bath, w, case) / w;
        g * g * thermal * thermal
    };
    let upper = bath.integration_limit(0, 0);
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_intervals: 4000,
    };
    let integral = integrate_real(integrand, 0.0, upper, opts)?;
    Ok(mev_to_uev(4.0 / (r * r) * integral / std::f64::consts::PI))
}

/// Real rates at `R` plus the virtual correction.
pub fn rates_with_virtual(bath: &BathSpec, r: f64, case: DotCase) -> Result<RatePrediction> {
    let ph = gamma_ph(bath, r, case)?;
    let n = bath.bose(r);
    Ok(RatePrediction {
        gamma_plus: (n + 1.0) * ph,
        gamma_minus: n * ph,
        gamma_ph: ph,
        virtual_correction: virtual_rate(bath, r, case)?,
    })
}

/// Splitting `R` between the hybridized states that exchange phonons, from
/// the eigenvalues of `H₀`: the gap of a two-level system, half the full
/// spectral width for three levels (the two outer polaritons straddle the
/// dark state).
pub fn splitting(system: &SystemSpec) -> Result<f64> {
    let (values, _) = system.eigen();
    let span = values[values.len() - 1] - values[0];
    let r = match values.len() {
        2 => span,
        3 => span / 2.0,
        n => {
            return Err(Error::Input(format!(
                "no golden-rule splitting defined for {n} levels"
            )))
        }
    };
    check_energy(r)?;
    Ok(r)
}
