//! Power-law extrapolation `X(L) = X(∞) + α L^(−β)` of fitted parameters to
//! infinite memory length.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::{ExpTerm, PolarizationTrace, RateFit};
use crate::units::{mev_to_uev, uev_to_mev, HBAR};

pub const DEFAULT_BETA: f64 = 2.0;

/// Search range of the free exponent.
const BETA_RANGE: (f64, f64) = (0.25, 8.0);

/// Exponent window accepted as power-law convergence.
pub const POWER_LAW_BETA: (f64, f64) = (1.5, 2.5);

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFamily {
    pub name: String,
    /// `(L, value)`, strictly increasing in `L`.
    pub points: Vec<(usize, f64)>,
}

impl ParameterFamily {
    pub fn new(name: impl Into<String>, points: Vec<(usize, f64)>) -> Result<Self> {
        let name = name.into();
        if points.len() < 3 {
            return Err(Error::Input(format!(
                "family {name:?} has {} points, need at least 3",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Input(format!("family {name:?} needs strictly increasing L")));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Input(format!("family {name:?} has non-finite values")));
        }
        Ok(Self { name, points })
    }

    fn subset(&self, idx: &[usize]) -> Vec<(usize, f64)> {
        idx.iter().map(|&i| self.points[i]).collect()
    }

    pub fn suffix(&self, start: usize) -> Result<Self> {
        Self::new(self.name.clone(), self.points[start..].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value_inf: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Four-point error estimate at the fitted `β`; `None` below 4 points.
    pub error_estimate: Option<f64>,
    /// RMS deviation of the points from the fitted law.
    pub rms: f64,
}

/// Linear least squares for `(X∞, α)` at fixed `β`; returns them with the RMS.
fn linear_fit(points: &[(usize, f64)], beta: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(l, _)| (l as f64).powf(-beta)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let alpha = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let inf = my - alpha * mx;
    let ss: f64 = xs.iter().zip(points).map(|(x, p)| (p.1 - inf - alpha * x).powi(2)).sum();
    (inf, alpha, (ss / n).sqrt())
}

fn best_beta(points: &[(usize, f64)]) -> f64 {
    let rms = |b: f64| linear_fit(points, b).2;
    let (lo, hi) = (BETA_RANGE.0.ln(), BETA_RANGE.1.ln());
    let grid = 160;
    let at = |k: usize| (lo + (hi - lo) * k as f64 / grid as f64).exp();
    let best = (0..=grid)
        .min_by(|&a, &b| rms(at(a)).total_cmp(&rms(at(b))))
        .expect("non-empty grid");
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (rms(c), rms(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * b {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = rms(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = rms(d);
        }
    }
    let mid = 0.5 * (a + b);
    if rms(mid) <= rms(at(best)) {
        mid
    } else {
        at(best)
    }
}

/// Four-point protocol on the last four points: the extrapolation through
/// the last three compared with the one through the first and last two.
pub fn extrapolation_error(family: &ParameterFamily, beta: f64) -> Result<f64> {
    let n = family.points.len();
    if n < 4 {
        return Err(Error::Input(format!(
            "error estimate needs 4 points, family {:?} has {n}",
            family.name
        )));
    }
    let last3 = linear_fit(&family.subset(&[n - 3, n - 2, n - 1]), beta).0;
    let outer = linear_fit(&family.subset(&[n - 4, n - 2, n - 1]), beta).0;
    Ok((last3 - outer).abs())
}

pub fn power_law_fit(family: &ParameterFamily, exponent: Exponent) -> Result<Extrapolation> {
    let beta = match exponent {
        Exponent::Fixed(b) => {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Domain(format!("exponent must be > 0, got {b}")));
            }
            b
        }
        Exponent::Free => {
            if family.points.len() < 4 {
                return Err(Error::Input(format!(
                    "free exponent needs 4 points, family {:?} has {}",
                    family.name,
                    family.points.len()
                )));
            }
            best_beta(&family.points)
        }
    };
    let (value_inf, alpha, rms) = linear_fit(&family.points, beta);
    let error_estimate = if family.points.len() >= 4 {
        Some(extrapolation_error(family, beta)?)
    } else {
        None
    };
    Ok(Extrapolation {
        value_inf,
        alpha,
        beta,
        error_estimate,
        rms,
    })
}

/// Index of the longest suffix (at least four points) whose free exponent
/// lies in [`POWER_LAW_BETA`].
pub fn power_law_suffix(family: &ParameterFamily) -> Option<usize> {
    let n = family.points.len();
    (0..n.saturating_sub(3)).find(|&start| {
        family
            .suffix(start)
            .and_then(|f| power_law_fit(&f, Exponent::Free))
            .map(|e| (POWER_LAW_BETA.0..=POWER_LAW_BETA.1).contains(&e.beta))
            .unwrap_or(false)
    })
}

/// Componentwise extrapolation of a complex parameter.
pub fn power_law_fit_complex(
    ls: &[usize],
    values: &[Complex64],
    beta: f64,
) -> Result<(Complex64, Complex64)> {
    if ls.len() != values.len() {
        return Err(Error::Input("L and value counts differ".into()));
    }
    let re = ParameterFamily::new("re", ls.iter().zip(values).map(|(&l, v)| (l, v.re)).collect())?;
    let im = ParameterFamily::new("im", ls.iter().zip(values).map(|(&l, v)| (l, v.im)).collect())?;
    let r = power_law_fit(&re, Exponent::Fixed(beta))?;
    let i = power_law_fit(&im, Exponent::Fixed(beta))?;
    Ok((Complex64::new(r.value_inf, i.value_inf), Complex64::new(r.alpha, i.alpha)))
}

/// Amplitude of `term` re-referenced from time `from` to time `to`.
fn shift_amplitude(term: &ExpTerm, from: f64, to: f64) -> Complex64 {
    term.amplitude * (-Complex64::i() * term.complex_energy() * (to - from) / HBAR).exp()
}

/// Extrapolates each term of per-`L` fits (amplitudes aligned at the window
/// start of the largest-`L` fit) and adds the non-exponential remainder of
/// the largest-`L` trace on that trace's grid.
pub fn extrapolated_trace(
    ls: &[usize],
    traces: &[PolarizationTrace],
    fits: &[RateFit],
    beta: f64,
) -> Result<PolarizationTrace> {
    if ls.len() != traces.len() || ls.len() != fits.len() {
        return Err(Error::Input("need one trace and one fit per L".into()));
    }
    let Some(last) = fits.last() else {
        return Err(Error::Input("empty family".into()));
    };
    let n_terms = last.terms.len();
    if fits.iter().any(|f| f.terms.len() != n_terms) {
        return Err(Error::Input("fits have different term counts across L".into()));
    }
    let t_ref = last.window.0;
    let mut terms = Vec::with_capacity(n_terms);
    for j in 0..n_terms {
        let amps: Vec<Complex64> = fits
            .iter()
            .map(|f| shift_amplitude(&f.terms[j], f.window.0, t_ref))
            .collect();
        let energies: Vec<Complex64> = fits
            .iter()
            .map(|f| Complex64::new(f.terms[j].frequency, uev_to_mev(f.terms[j].rate)))
            .collect();
        let (amp, _) = power_law_fit_complex(ls, &amps, beta)?;
        let (e, _) = power_law_fit_complex(ls, &energies, beta)?;
        terms.push(ExpTerm {
            amplitude: amp,
            frequency: e.re,
            rate: mev_to_uev(e.im),
        });
    }
    let limit = RateFit {
        terms,
        window: (t_ref, last.window.1),
        residual: 0.0,
    };
    let trace = traces.last().expect("non-empty");
    let remainder = crate::fit::residual_trace(trace, last)?;
    let values = trace
        .times
        .iter()
        .zip(&remainder.values)
        .map(|(&t, &dp)| limit.evaluate(t) + dp)
        .collect();
    PolarizationTrace::new(trace.times.clone(), values, trace.meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(f: impl Fn(f64) -> f64, ls: &[usize]) -> ParameterFamily {
        ParameterFamily::new("x", ls.iter().map(|&l| (l, f(l as f64))).collect()).unwrap()
    }

    const LS: [usize; 6] = [10, 12, 14, 16, 18, 20];

    #[test]
    fn exact_power_law_recovered() {
        let fam = family(|l| 5.0 + 3.0 * l.powi(-2), &LS);
        let e = power_law_fit(&fam, Exponent::Fixed(2.0)).unwrap();
        assert!((e.value_inf - 5.0).abs() < 1e-12);
        assert!((e.alpha - 3.0).abs() < 1e-10);
        assert!(e.error_estimate.unwrap() < 1e-12);
    }

    #[test]
    fn free_exponent_found() {
        let fam = family(|l| 1.0 - 40.0 * l.powf(-1.8), &LS);
        let e = power_law_fit(&fam, Exponent::Free).unwrap();
        assert!((e.beta - 1.8).abs() < 1e-5, "beta = {}", e.beta);
        assert!((e.value_inf - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_family() {
        let fam = family(|_| 7.25, &LS);
        let e = power_law_fit(&fam, Exponent::Fixed(2.0)).unwrap();
        assert!((e.value_inf - 7.25).abs() < 1e-14);
        assert!(e.alpha.abs() < 1e-10);
    }

    #[test]
    fn perturbed_point_gives_positive_error() {
        let mut fam = family(|l| 5.0 + 3.0 * l.powi(-2), &LS);
        fam.points[2].1 += 1e-3;
        assert!(extrapolation_error(&fam, 2.0).unwrap() > 1e-4);
    }

    #[test]
    fn linear_in_values() {
        let fam = family(|l| 2.0 + 0.7 * l.powi(-2) + 1e-3 * (l * 1.7).sin(), &LS);
        let scaled = ParameterFamily::new("x", fam.points.iter().map(|&(l, v)| (l, 3.5 * v)).collect()).unwrap();
        let a = power_law_fit(&fam, Exponent::Fixed(2.0)).unwrap();
        let b = power_law_fit(&scaled, Exponent::Fixed(2.0)).unwrap();
        assert!((3.5 * a.value_inf - b.value_inf).abs() < 1e-12);
        assert!((3.5 * a.alpha - b.alpha).abs() < 1e-9);
        assert!((3.5 * a.error_estimate.unwrap() - b.error_estimate.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn refit_of_fitted_law_is_idempotent() {
        let fam = family(|l| 2.0 + 0.7 * l.powi(-2) + 1e-3 * (l * 1.7).sin(), &LS);
        let a = power_law_fit(&fam, Exponent::Fixed(2.0)).unwrap();
        let again = family(|l| a.value_inf + a.alpha * l.powi(-2), &LS);
        let b = power_law_fit(&again, Exponent::Fixed(2.0)).unwrap();
        assert!((a.value_inf - b.value_inf).abs() < 1e-10);
        assert!((a.alpha - b.alpha).abs() < 1e-10);
    }

    #[test]
    fn input_validation() {
        assert!(ParameterFamily::new("x", vec![(4, 1.0), (6, 1.0)]).is_err());
        assert!(ParameterFamily::new("x", vec![(4, 1.0), (4, 1.0), (6, 2.0)]).is_err());
        let three = family(|l| l, &[4, 6, 8]);
        assert!(extrapolation_error(&three, 2.0).is_err());
        assert!(power_law_fit(&three, Exponent::Free).is_err());
        assert!(power_law_fit(&three, Exponent::Fixed(2.0)).unwrap().error_estimate.is_none());
    }

    #[test]
    fn suffix_skips_preasymptotic_points() {
        let ls = [4, 6, 8, 10, 12, 14, 16, 18];
        let fam = family(|l| if l < 7.0 { 9.0 } else { 1.0 + 20.0 * l.powi(-2) }, &ls);
        assert_eq!(power_law_suffix(&fam), Some(2));
    }

    #[test]
    fn complex_componentwise() {
        let ls = [8, 10, 12];
        let c = |l: f64| Complex64::new(1.0 + 2.0 / (l * l), -0.5 + 4.0 / (l * l));
        let vals: Vec<Complex64> = ls.iter().map(|&l| c(l as f64)).collect();
        let (inf, alpha) = power_law_fit_complex(&ls, &vals, 2.0).unwrap();
        assert!((inf - Complex64::new(1.0, -0.5)).norm() < 1e-12);
        assert!((alpha - Complex64::new(2.0, 4.0)).norm() < 1e-9);
    }
}
