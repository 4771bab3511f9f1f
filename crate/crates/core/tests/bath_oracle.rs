//! Bath functions against a direct double-quadrature oracle, plus frozen
//! reference values for regression.

use num_complex::Complex64;

use pathint::bath::{build_cumulant_table, correlation_function, cumulant_function, BathSpec};
use pathint::quad::gauss_legendre;
use pathint::units::{EV_SI, HBAR, HBAR_SI, K_B, MEV_SI};

/// Composite Gauss–Legendre on `[a, b]`.
fn composite(f: impl Fn(f64) -> Complex64, a: f64, b: f64, panels: usize, order: usize) -> Complex64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (xk, wk) in x.iter().zip(&w) {
            sum += f(lo + 0.5 * h * (xk + 1.0)) * (wk * 0.5 * h);
        }
    }
    sum
}

/// InGaAs single-dot spectral density at 50 K built from SI constants.
struct Oracle {
    a: f64,
    ec: f64,
    kt: f64,
}

impl Oracle {
    fn ingaas(temperature: f64) -> Self {
        let d = -6.5 * EV_SI;
        let (rho, v, l): (f64, f64, f64) = (5650.0, 4.6e3, 3.3e-9);
        let a = d * d / (4.0 * std::f64::consts::PI.powi(2) * rho * HBAR_SI.powi(3) * v.powi(5)) * MEV_SI * MEV_SI;
        let ec = std::f64::consts::SQRT_2 * HBAR_SI * v / l / MEV_SI;
        Self { a, ec, kt: K_B * temperature }
    }

    fn density(&self, e: f64) -> f64 {
        self.a * e.powi(3) * (-(e / self.ec).powi(2)).exp()
    }

    /// `D(τ) = ∫ J(E) [coth(E/2kT) cos(Eτ/ħ) − i sin(Eτ/ħ)] dE`.
    fn correlation(&self, tau: f64) -> Complex64 {
        composite(
            |e| {
                if e == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let x = e * tau / HBAR;
                let coth = 1.0 / (e / (2.0 * self.kt)).tanh();
                self.density(e) * Complex64::new(coth * x.cos(), -x.sin())
            },
            0.0,
            14.0 * self.ec,
            80,
            24,
        )
    }

    /// `C(t) = −ħ⁻² ∫₀ᵗ (t − τ) D(τ) dτ`, the time-ordered double integral.
    fn cumulant(&self, t: f64) -> Complex64 {
        -composite(|tau| (t - tau) * self.correlation(tau), 0.0, t, (8.0 * t).ceil() as usize, 24) / (HBAR * HBAR)
    }
}

fn bath() -> BathSpec {
    BathSpec::ingaas(50.0, 1, 0.0).unwrap()
}

const TIMES: [f64; 4] = [0.1, 0.5, 1.5, 4.0];

#[test]
fn correlation_matches_energy_quadrature() {
    let o = Oracle::ingaas(50.0);
    let b = bath();
    for t in TIMES {
        let want = o.correlation(t);
        let got = correlation_function(&b, 0, 0, t).unwrap();
        assert!((got - want).norm() <= 1e-12 * o.correlation(0.0).norm(), "t={t}: {got} vs {want}");
    }
}

#[test]
fn cumulant_matches_time_ordered_double_integral() {
    let o = Oracle::ingaas(50.0);
    let b = bath();
    for t in TIMES {
        let want = o.cumulant(t);
        let got = cumulant_function(&b, 0, 0, t).unwrap();
        assert!((got - want).norm() <= 1e-12 * want.norm(), "t={t}: {got} vs {want}");
    }
}

/// `C(t)` at 50 K from the double-integral oracle above.
const FROZEN_C: [(f64, f64, f64); 4] = [
    (0.1, -0.005006065473265929, 7.347091497300326e-5),
    (0.5, -0.11156038342754503, 0.008193301444964248),
    (1.5, -0.45714465737257803, 0.10117854021085838),
    (4.0, -0.5139480312314672, 0.3039663614604467),
];

/// `K(s)` for Δt = 0.18 ps at 50 K.
const FROZEN_K: [(f64, f64); 4] = [
    (-0.01604343311059772, 0.0004238610904125798),
    (-0.01457212362148028, 0.0011943924865883168),
    (-0.010598763738902166, 0.0020372632696831214),
    (-0.005264096296263676, 0.0023190430188651245),
];

#[test]
fn frozen_cumulants() {
    let b = bath();
    for (t, re, im) in FROZEN_C {
        let got = cumulant_function(&b, 0, 0, t).unwrap();
        let want = Complex64::new(re, im);
        assert!((got - want).norm() <= 1e-12 * want.norm(), "t={t}: {got}");
    }
    let table = build_cumulant_table(&b, 0.18, 3).unwrap();
    for (s, (re, im)) in FROZEN_K.iter().enumerate() {
        let got = table.get(0, 0, s);
        assert!((got - Complex64::new(*re, *im)).norm() <= 1e-12, "K({s}) = {got}");
    }
}

#[test]
fn pair_cumulant_vanishes_with_distance_and_matches_self_term_at_contact() {
    let near = BathSpec::ingaas(50.0, 2, 0.0).unwrap();
    let far = BathSpec::ingaas(50.0, 2, 200.0).unwrap();
    for t in TIMES {
        let own = cumulant_function(&near, 0, 0, t).unwrap();
        assert!((cumulant_function(&near, 0, 1, t).unwrap() - own).norm() <= 1e-13 * own.norm());
        // the cross term only sees phonons that crossed the gap: t ≪ d / v_s
        assert!(cumulant_function(&far, 0, 1, t).unwrap().norm() < 1e-6 * own.norm());
    }
}

