//! Acoustic-phonon bath of spherical Gaussian quantum dots with deformation
//! potential coupling.
//!
//! Energies are in meV (the frequency argument of every function is the
//! phonon energy ħω), times in ps. SI material parameters are converted once
//! at construction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::units::{sinc, EV_SI, HBAR, HBAR_SI, K_B, MEV_SI};

/// Quadrature for every ω-integral runs on `[0, CUTOFF_FACTOR · ħv_s/l]`.
pub const CUTOFF_FACTOR: f64 = 12.0;

/// Absolute tolerance of the ω-quadratures.
pub const QUAD_ABS_TOL: f64 = 1e-12;

/// Phonon and material parameters of the bath.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    /// D_c − D_v in eV.
    pub deformation_diff: f64,
    /// Sound velocity in m/s.
    pub sound_velocity: f64,
    /// Mass density in g/cm³.
    pub mass_density: f64,
    /// Temperature in K.
    pub temperature: f64,
    /// Gaussian confinement length per dot in nm; one entry per bath index.
    pub confinement_lengths: Vec<f64>,
    /// Centre-to-centre separation of the dots in nm.
    pub dot_separation: f64,
    // derived
    prefactor: f64,
    hbar_vs: f64,
    kt: f64,
}

impl BathSpec {
    pub fn new(
        deformation_diff: f64,
        sound_velocity: f64,
        mass_density: f64,
        temperature: f64,
        confinement_lengths: Vec<f64>,
        dot_separation: f64,
    ) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("sound_velocity", sound_velocity)?;
        positive("mass_density", mass_density)?;
        positive("temperature", temperature)?;
        if !deformation_diff.is_finite() {
            return Err(Error::Domain("deformation_diff must be finite".into()));
        }
        if confinement_lengths.is_empty() {
            return Err(Error::Domain("at least one confinement length is required".into()));
        }
        for &l in &confinement_lengths {
            positive("confinement length", l)?;
        }
        if !(dot_separation.is_finite() && dot_separation >= 0.0) {
            return Err(Error::Domain(format!("dot_separation must be >= 0, got {dot_separation}")));
        }

        // J = (D_c - D_v)^2 / (4π² ρ ħ³ v_s⁵), in J⁻², then expressed in meV⁻².
        let d = deformation_diff * EV_SI;
        let rho = mass_density * 1e3;
        let denom = 4.0 * std::f64::consts::PI.powi(2) * rho * HBAR_SI.powi(3) * sound_velocity.powi(5);
        let prefactor = d * d / denom * MEV_SI * MEV_SI;
        // ħ v_s in meV·nm
        let hbar_vs = HBAR * 1e-12 * sound_velocity * 1e9;
        Ok(Self {
            deformation_diff,
            sound_velocity,
            mass_density,
            temperature,
            confinement_lengths,
            dot_separation,
            prefactor,
            hbar_vs,
            kt: K_B * temperature,
        })
    }

    /// InGaAs parameters: D_c − D_v = −6.5 eV, v_s = 4.6 km/s,
    /// ρ = 5.65 g/cm³, identical dots with l = 3.3 nm.
    pub fn ingaas(temperature: f64, dots: usize, dot_separation: f64) -> Result<Self> {
        Self::new(-6.5, 4.6e3, 5.65, temperature, vec![3.3; dots.max(1)], dot_separation)
    }

    /// A copy with a different deformation potential difference.
    pub fn with_deformation_diff(&self, deformation_diff: f64) -> Result<Self> {
        Self::new(
            deformation_diff,
            self.sound_velocity,
            self.mass_density,
            self.temperature,
            self.confinement_lengths.clone(),
            self.dot_separation,
        )
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(
            self.deformation_diff,
            self.sound_velocity,
            self.mass_density,
            temperature,
            self.confinement_lengths.clone(),
            self.dot_separation,
        )
    }

    pub fn num_baths(&self) -> usize {
        self.confinement_lengths.len()
    }

    /// Spectral prefactor `J` in meV⁻².
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// ħ v_s in meV·nm.
    pub fn hbar_sound(&self) -> f64 {
        self.hbar_vs
    }

    /// k_B T in meV.
    pub fn thermal_energy(&self) -> f64 {
        self.kt
    }

    /// Effective length `l` of the pair (b, b'), with l² = (l_b² + l_b'²)/4.
    pub fn pair_length(&self, b: usize, bp: usize) -> f64 {
        let lb = self.confinement_lengths[b];
        let lbp = self.confinement_lengths[bp];
        ((lb * lb + lbp * lbp) / 4.0).sqrt()
    }

    /// Gaussian cutoff energy ħv_s/l of the pair, in meV.
    pub fn cutoff_energy(&self, b: usize, bp: usize) -> f64 {
        self.hbar_vs / self.pair_length(b, bp)
    }

    /// Upper limit of the ω-quadratures for the pair.
    pub fn integration_limit(&self, b: usize, bp: usize) -> f64 {
        CUTOFF_FACTOR * self.cutoff_energy(b, bp)
    }

    fn check_pair(&self, b: usize, bp: usize) -> Result<()> {
        let n = self.num_baths();
        if b >= n || bp >= n {
            return Err(Error::Domain(format!("bath index ({b}, {bp}) out of range for {n} baths")));
        }
        Ok(())
    }

    /// Bose occupation N(E) at the bath temperature.
    pub fn bose(&self, energy: f64) -> f64 {
        1.0 / (energy / self.kt).exp_m1()
    }

    /// E·coth(E / 2kT), finite at E → 0.
    fn energy_coth(&self, energy: f64) -> f64 {
        let y = energy / (2.0 * self.kt);
        if y < 1e-6 {
            2.0 * self.kt * (1.0 + y * y / 3.0)
        } else {
            energy / y.tanh()
        }
    }

    fn density_unchecked(&self, b: usize, bp: usize, energy: f64) -> f64 {
        let ec = self.cutoff_energy(b, bp);
        let x = energy / ec;
        let mut value = self.prefactor * energy.powi(3) * (-x * x).exp();
        if b != bp {
            value *= sinc(energy * self.dot_separation / self.hbar_vs);
        }
        value
    }

    fn quad_options() -> QuadOptions {
        QuadOptions {
            abs_tol: QUAD_ABS_TOL,
            rel_tol: 0.0,
            max_intervals: 20_000,
        }
    }
}

/// Phonon spectral density `J_bb'(E)` in meV at phonon energy `E = ħω` (meV).
pub fn spectral_density(spec: &BathSpec, b: usize, bp: usize, energy: f64) -> Result<f64> {
    spec.check_pair(b, bp)?;
    if energy.is_nan() || energy < 0.0 {
        return Err(Error::Domain(format!("phonon energy must be >= 0, got {energy}")));
    }
    Ok(spec.density_unchecked(b, bp, energy))
}

/// Bath correlation function `D_bb'(t)` in meV², depending on |t| only.
pub fn correlation_function(spec: &BathSpec, b: usize, bp: usize, t: f64) -> Result<Complex64> {
    spec.check_pair(b, bp)?;
    if !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {t}")));
    }
    let tau = t.abs() / HBAR;
    let integrand = |e: f64| {
        let j = spec.density_unchecked(b, bp, e);
        if j == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // (N+1) e^{-ix} + N e^{ix} = coth(E/2kT) cos x - i sin x
        let coth = spec.energy_coth(e) / e;
        let x = e * tau;
        Complex64::new(j * coth * x.cos(), -j * x.sin())
    };
    let r = quad::integrate(integrand, 0.0, spec.integration_limit(b, bp), BathSpec::quad_options())?;
    Ok(r.value)
}

/// `sin x − x` with a series branch for small |x|.
fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    } else {
        x.sin() - x
    }
}

/// Cumulant function `C_bb'(t) = −½ ∫₀ᵗ∫₀ᵗ D_bb'(τ₁ − τ₂) dτ₁dτ₂ / ħ²`.
///
/// The time integrals are done in closed form, leaving
/// `C(t) = −∫ dE J(E)/E² [coth(E/2kT)(1 − cos x) + i(sin x − x)]`, `x = Et/ħ`.
pub fn cumulant_function(spec: &BathSpec, b: usize, bp: usize, t: f64) -> Result<Complex64> {
    spec.check_pair(b, bp)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("cumulant time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let tau = t / HBAR;
    let integrand = |e: f64| {
        if e == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // J(E)/E² and E·coth(E/2kT) are both regular at E → 0
        let j_over_e3 = spec.density_unchecked(b, bp, e) / (e * e * e);
        let x = e * tau;
        let half = (0.5 * x).sin();
        let one_minus_cos = 2.0 * half * half;
        Complex64::new(
            -j_over_e3 * spec.energy_coth(e) * one_minus_cos,
            -j_over_e3 * e * sin_minus_x(x),
        )
    };
    let r = quad::integrate(integrand, 0.0, spec.integration_limit(b, bp), BathSpec::quad_options())?;
    Ok(r.value)
}

/// Discrete cumulants `K_bb'(s)`, `s = 0..=L`, on a uniform Trotter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantTable {
    step: f64,
    neighbors: usize,
    baths: usize,
    // [(b * baths + bp) * (L + 1) + s]
    entries: Vec<Complex64>,
}

impl CumulantTable {
    /// Trotter step Δt in ps.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Memory length L.
    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn num_baths(&self) -> usize {
        self.baths
    }

    /// `K_bb'(s)`. Panics on out-of-range indices.
    pub fn get(&self, b: usize, bp: usize, s: usize) -> Complex64 {
        assert!(b < self.baths && bp < self.baths && s <= self.neighbors);
        self.entries[(b * self.baths + bp) * (self.neighbors + 1) + s]
    }

    /// A table with every entry zero (no phonon coupling).
    pub fn zeros(step: f64, neighbors: usize, baths: usize) -> Self {
        Self {
            step,
            neighbors,
            baths,
            entries: vec![Complex64::new(0.0, 0.0); baths * baths * (neighbors + 1)],
        }
    }

    /// Builds a table directly from per-pair lag sequences; `rows[b][bp]`
    /// must have `L + 1` entries and be symmetric in `(b, bp)`.
    pub fn from_entries(step: f64, rows: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let baths = rows.len();
        if baths == 0 || rows.iter().any(|r| r.len() != baths) {
            return Err(Error::Input("cumulant rows must form a square bath matrix".into()));
        }
        let len = rows[0][0].len();
        if len < 2 {
            return Err(Error::Input("cumulant table needs at least lags 0 and 1".into()));
        }
        let mut entries = Vec::with_capacity(baths * baths * len);
        for b in 0..baths {
            for bp in 0..baths {
                if rows[b][bp].len() != len {
                    return Err(Error::Input("every bath pair needs the same number of lags".into()));
                }
                if rows[b][bp] != rows[bp][b] {
                    return Err(Error::Input(format!("K_{b}{bp} differs from K_{bp}{b}")));
                }
                entries.extend_from_slice(&rows[b][bp]);
            }
        }
        Ok(Self {
            step,
            neighbors: len - 1,
            baths,
            entries,
        })
    }
}

/// Builds `K_bb'(s)` for `s = 0..=L` from `C_bb'(nΔt)` by the recursion
/// `K(0) = C(Δt)`,
/// `K(s) = ½[C((s+1)Δt) − (s+1)K(0) − 2Σ_{h=1}^{s−1}(s+1−h)K(h)]`.
pub fn build_cumulant_table(spec: &BathSpec, dt: f64, neighbors: usize) -> Result<CumulantTable> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    if neighbors < 1 {
        return Err(Error::Domain("memory length L must be >= 1".into()));
    }
    let baths = spec.num_baths();
    let width = neighbors + 1;
    let mut entries = vec![Complex64::new(0.0, 0.0); baths * baths * width];
    for b in 0..baths {
        for bp in b..baths {
            let c: Vec<Complex64> = (1..=width)
                .map(|n| cumulant_function(spec, b, bp, n as f64 * dt))
                .collect::<Result<_>>()?;
            let k = cumulants_from_grid(&c);
            entries[(b * baths + bp) * width..(b * baths + bp + 1) * width].copy_from_slice(&k);
            entries[(bp * baths + b) * width..(bp * baths + b + 1) * width].copy_from_slice(&k);
        }
    }
    Ok(CumulantTable {
        step: dt,
        neighbors,
        baths,
        entries,
    })
}

/// `c[n-1] = C(nΔt)` for `n = 1..=L+1`; returns `K(0..=L)`.
fn cumulants_from_grid(c: &[Complex64]) -> Vec<Complex64> {
    let mut k = Vec::with_capacity(c.len());
    k.push(c[0]);
    for s in 1..c.len() {
        let mut acc = c[s] - k[0] * (s as f64 + 1.0);
        for (h, kh) in k.iter().enumerate().take(s).skip(1) {
            acc -= kh * (2.0 * (s + 1 - h) as f64);
        }
        k.push(acc * 0.5);
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bath() -> BathSpec {
        BathSpec::ingaas(50.0, 1, 0.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BathSpec::new(-6.5, 0.0, 5.65, 50.0, vec![3.3], 0.0).is_err());
        assert!(BathSpec::new(-6.5, 4.6e3, 5.65, 0.0, vec![3.3], 0.0).is_err());
        assert!(BathSpec::new(-6.5, 4.6e3, 5.65, 50.0, vec![], 0.0).is_err());
        assert!(BathSpec::new(-6.5, 4.6e3, 5.65, 50.0, vec![3.3], -1.0).is_err());
        assert!(BathSpec::new(6.5, 4.6e3, 5.65, 50.0, vec![3.3], 0.0).is_ok());
    }

    #[test]
    fn density_vanishes_at_zero_and_rejects_negative() {
        let b = bath();
        assert_eq!(spectral_density(&b, 0, 0, 0.0).unwrap(), 0.0);
        assert!(matches!(spectral_density(&b, 0, 0, -1.0), Err(Error::Domain(_))));
        assert!(spectral_density(&b, 0, 1, 1.0).is_err());
    }

    #[test]
    fn cross_density_equals_diagonal_at_zero_separation() {
        let b = BathSpec::ingaas(20.0, 2, 0.0).unwrap();
        for e in [0.1, 0.7, 1.3, 4.0] {
            assert_eq!(
                spectral_density(&b, 0, 1, e).unwrap(),
                spectral_density(&b, 0, 0, e).unwrap()
            );
        }
    }

    #[test]
    fn correlation_is_even_in_time() {
        let b = bath();
        let p = correlation_function(&b, 0, 0, 0.7).unwrap();
        let m = correlation_function(&b, 0, 0, -0.7).unwrap();
        assert_eq!(p, m);
    }

    #[test]
    fn zero_coupling_gives_zero_bath() {
        let b = bath().with_deformation_diff(0.0).unwrap();
        assert_eq!(correlation_function(&b, 0, 0, 1.0).unwrap().norm(), 0.0);
        assert_eq!(cumulant_function(&b, 0, 0, 1.0).unwrap().norm(), 0.0);
        let t = build_cumulant_table(&b, 0.1, 6).unwrap();
        assert!((0..=6).all(|s| t.get(0, 0, s).norm() == 0.0));
    }

    #[test]
    fn cumulant_at_zero_time_is_zero() {
        assert_eq!(cumulant_function(&bath(), 0, 0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(cumulant_function(&bath(), 0, 0, -0.1).is_err());
    }

    #[test]
    fn two_step_reconstruction() {
        let b = bath();
        let dt = 0.1;
        let t = build_cumulant_table(&b, dt, 1).unwrap();
        let c2 = cumulant_function(&b, 0, 0, 2.0 * dt).unwrap();
        let rebuilt = t.get(0, 0, 0) * 2.0 + t.get(0, 0, 1) * 2.0;
        assert!((rebuilt - c2).norm() <= 1e-12 * c2.norm());
    }

    #[test]
    fn table_is_symmetric_with_cross_terms() {
        let b = BathSpec::ingaas(20.0, 2, 5.0).unwrap();
        let t = build_cumulant_table(&b, 0.2, 5).unwrap();
        for s in 0..=5 {
            assert_eq!(t.get(0, 1, s), t.get(1, 0, s));
        }
        assert!(t.get(0, 1, 0).norm() > 0.0);
    }

    #[test]
    fn recursion_matches_second_difference() {
        let c: Vec<Complex64> = (1..=8).map(|n| Complex64::new((n as f64).sqrt(), 0.3 * n as f64)).collect();
        let k = cumulants_from_grid(&c);
        let at = |n: usize| if n == 0 { Complex64::new(0.0, 0.0) } else { c[n - 1] };
        for s in 1..k.len() {
            let second = (at(s + 1) - at(s) * 2.0 + at(s - 1)) * 0.5;
            assert!((k[s] - second).norm() < 1e-13);
        }
    }

    #[test]
    fn from_entries_rejects_asymmetry() {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let rows = vec![vec![vec![z, z], vec![o, z]], vec![vec![z, z], vec![z, z]]];
        assert!(CumulantTable::from_entries(0.1, rows).is_err());
    }
}
