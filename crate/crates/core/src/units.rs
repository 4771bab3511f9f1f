//! Physical constants and unit conversions.
//!
//! Internally every energy is in meV and every time in ps.

/// Planck constant in J·s (exact in SI).
pub const PLANCK_SI: f64 = 6.626_070_15e-34;

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = PLANCK_SI / (2.0 * std::f64::consts::PI);

/// Boltzmann constant in J/K.
pub const K_B_SI: f64 = 1.380_649e-23;

/// Reduced Planck constant in meV·ps (≈ 0.6582119569), derived from the SI
/// value so that every unit path agrees to the last bit.
pub const HBAR: f64 = HBAR_SI / MEV_SI * 1e12;

/// Boltzmann constant in meV/K (≈ 0.08617333262).
pub const K_B: f64 = K_B_SI / MEV_SI;

/// One electronvolt in joules.
pub const EV_SI: f64 = 1.602_176_634e-19;

/// One meV in joules.
pub const MEV_SI: f64 = 1.602_176_634e-22;

pub fn uev_to_mev(x: f64) -> f64 {
    x * 1e-3
}

pub fn mev_to_uev(x: f64) -> f64 {
    x * 1e3
}

/// Sinc with a series branch near zero so that `sinc(0) == 1` exactly.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}
