//! Multi-exponential fits of the long-time polarization.
//!
//! Each term is `C_j exp(−i (E_j − iΓ_j)(t − t_ref)/ħ)` with `E_j` the term
//! energy in meV, `Γ_j` the dephasing rate and `t_ref` the window start.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::{mev_to_uev, uev_to_mev, HBAR};

/// Run configuration carried alongside a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMeta {
    pub neighbors: usize,
    pub threshold: f64,
    pub dt: f64,
    pub excitation: usize,
    pub measure: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationTrace {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub meta: TraceMeta,
}

impl PolarizationTrace {
    pub fn new(times: Vec<f64>, values: Vec<Complex64>, meta: TraceMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Input(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() >= 2 {
            let step = times[1] - times[0];
            if step <= 0.0 {
                return Err(Error::Input("times must be strictly increasing".into()));
            }
            for (n, w) in times.windows(2).enumerate() {
                if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(w[1].abs()) {
                    return Err(Error::Input(format!("time grid not uniform at sample {}", n + 1)));
                }
            }
        }
        Ok(Self { times, values, meta })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `[max(L·dt, 0.3·t_end), t_end]`.
    pub fn default_window(&self) -> (f64, f64) {
        let end = self.end_time();
        ((self.meta.neighbors as f64 * self.meta.dt).max(0.3 * end), end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub amplitude: Complex64,
    /// `Re ħω_j` in meV.
    pub frequency: f64,
    /// `Γ_j = −Im ħω_j` in μeV.
    pub rate: f64,
}

impl ExpTerm {
    /// `ħω_j` in meV.
    pub fn complex_energy(&self) -> Complex64 {
        Complex64::new(self.frequency, -uev_to_mev(self.rate))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub terms: Vec<ExpTerm>,
    pub window: (f64, f64),
    /// RMS of `|P − P_fit|` over the window samples.
    pub residual: f64,
}

impl RateFit {
    /// Phases are referenced to the window start.
    pub fn evaluate(&self, t: f64) -> Complex64 {
        let tau = t - self.window.0;
        self.terms
            .iter()
            .map(|term| term.amplitude * (-Complex64::i() * term.complex_energy() * tau / HBAR).exp())
            .sum()
    }
}

const MAX_ITERATIONS: usize = 500;

fn window_indices(trace: &PolarizationTrace, window: (f64, f64)) -> (usize, usize) {
    let tol = 1e-9 * trace.meta.dt.max(1e-300);
    let lo = trace.times.iter().position(|&t| t >= window.0 - tol).unwrap_or(trace.len());
    let hi = trace.times.iter().rposition(|&t| t <= window.1 + tol).map_or(0, |i| i + 1);
    (lo, hi.max(lo))
}

/// Linear-prediction estimate of the `z_j = exp(−iω_j Δt)`.
fn prony_roots(y: &[Complex64], order: usize) -> Result<Vec<Complex64>> {
    let rows = y.len() - order;
    // y[m + order] = Σ_i c_i y[m + i]
    let a = DMatrix::from_fn(rows, order, |m, i| y[m + i]);
    let b = DVector::from_fn(rows, |m, _| y[m + order]);
    let coeffs = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Linalg(format!("linear prediction solve failed: {e}")))?;
    let mut companion = DMatrix::<Complex64>::zeros(order, order);
    for i in 0..order {
        companion[(0, i)] = coeffs[order - 1 - i];
        if i + 1 < order {
            companion[(i + 1, i)] = Complex64::new(1.0, 0.0);
        }
    }
    let roots = Schur::new(companion)
        .eigenvalues()
        .ok_or_else(|| Error::Linalg("companion eigenvalues did not converge".into()))?;
    Ok(roots.iter().copied().collect())
}

fn basis(energies: &[Complex64], taus: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(taus.len(), energies.len(), |m, j| {
        (-Complex64::i() * energies[j] * taus[m] / HBAR).exp()
    })
}

fn linear_amplitudes(energies: &[Complex64], taus: &[f64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    let b = DVector::from_column_slice(y);
    let c = basis(energies, taus)
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Linalg(format!("amplitude solve failed: {e}")))?;
    Ok(c.iter().copied().collect())
}

/// Parameter layout per term: `[Re C, Im C, E (meV), Γ (meV)]`.
fn model_residuals(params: &[f64], taus: &[f64], y: &[Complex64]) -> Vec<Complex64> {
    taus.iter()
        .zip(y)
        .map(|(&tau, &obs)| {
            let mut model = Complex64::new(0.0, 0.0);
            for p in params.chunks_exact(4) {
                let w = Complex64::new(p[2], -p[3]);
                model += Complex64::new(p[0], p[1]) * (-Complex64::i() * w * tau / HBAR).exp();
            }
            model - obs
        })
        .collect()
}

fn cost(res: &[Complex64]) -> f64 {
    res.iter().map(|r| r.norm_sqr()).sum()
}

fn jacobian(params: &[f64], taus: &[f64]) -> DMatrix<f64> {
    let n = params.len();
    let mut jac = DMatrix::zeros(2 * taus.len(), n);
    for (m, &tau) in taus.iter().enumerate() {
        for (j, p) in params.chunks_exact(4).enumerate() {
            let w = Complex64::new(p[2], -p[3]);
            let e = (-Complex64::i() * w * tau / HBAR).exp();
            let f = Complex64::new(p[0], p[1]) * e;
            let cols = [
                e,
                Complex64::i() * e,
                -Complex64::i() * f * (tau / HBAR),
                -f * (tau / HBAR),
            ];
            for (k, d) in cols.iter().enumerate() {
                jac[(2 * m, 4 * j + k)] = d.re;
                jac[(2 * m + 1, 4 * j + k)] = d.im;
            }
        }
    }
    jac
}

/// Damped Gauss-Newton iterations on the stacked real/imaginary residuals.
fn levenberg_marquardt(start: Vec<f64>, taus: &[f64], y: &[Complex64]) -> Result<(Vec<f64>, f64)> {
    let mut params = start;
    let mut res = model_residuals(&params, taus, y);
    let mut current = cost(&res);
    let mut lambda = 1e-3;
    let scale = cost(&y.iter().map(|v| -v).collect::<Vec<_>>()).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITERATIONS {
        if current <= 1e-30 * scale {
            return Ok((params, current));
        }
        let jac = jacobian(&params, taus);
        let r = DVector::from_iterator(res.len() * 2, res.iter().flat_map(|c| [c.re, c.im]));
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * r;
        let grad_scale = grad.amax();
        if grad_scale <= 1e-15 * current.sqrt() * jtj.diagonal().amax().sqrt() {
            return Ok((params, current));
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => a
                    .svd(true, true)
                    .solve(&(-&grad), 1e-15)
                    .map_err(|e| Error::Linalg(format!("damped step solve failed: {e}")))?,
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_res = model_residuals(&trial, taus, y);
            let trial_cost = cost(&trial_res);
            if trial_cost.is_finite() && trial_cost < current {
                let improvement = (current - trial_cost) / current;
                let step_size = step.norm() / (1e-300 + params.iter().map(|p| p * p).sum::<f64>().sqrt());
                params = trial;
                res = trial_res;
                current = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                if improvement < 1e-14 || step_size < 1e-15 {
                    return Ok((params, current));
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent direction left within floating-point resolution
                return Ok((params, current));
            }
        }
    }
    Err(Error::Fit {
        iterations: MAX_ITERATIONS,
        residual: (current / y.len() as f64).sqrt(),
        best: params,
    })
}

/// Fits `n_terms` damped exponentials to the samples inside `window`
/// (defaulting to [`PolarizationTrace::default_window`]).
pub fn fit_exponentials(
    trace: &PolarizationTrace,
    n_terms: usize,
    window: Option<(f64, f64)>,
) -> Result<RateFit> {
    if n_terms == 0 {
        return Err(Error::Input("at least one exponential term is required".into()));
    }
    let window = window.unwrap_or_else(|| trace.default_window());
    let memory_time = trace.meta.neighbors as f64 * trace.meta.dt;
    if window.0 < memory_time * (1.0 - 1e-12) {
        return Err(Error::Input(format!(
            "fit window starts at {} ps, inside the memory time {} ps",
            window.0, memory_time
        )));
    }
    if window.1 <= window.0 {
        return Err(Error::Input(format!("empty fit window [{}, {}]", window.0, window.1)));
    }
    let (lo, hi) = window_indices(trace, window);
    let samples = hi - lo;
    if samples < 10 * n_terms {
        return Err(Error::Input(format!(
            "fit window holds {samples} samples, need at least {}",
            10 * n_terms
        )));
    }
    let y = &trace.values[lo..hi];
    let t_ref = window.0;
    let taus: Vec<f64> = trace.times[lo..hi].iter().map(|t| t - t_ref).collect();
    let dt = trace.meta.dt;

    let roots = prony_roots(y, n_terms)?;
    let energies: Vec<Complex64> = roots
        .iter()
        .map(|z| {
            let z = if z.norm() > 0.0 { *z } else { Complex64::new(1e-300, 0.0) };
            Complex64::i() * HBAR * z.ln() / dt
        })
        .collect();
    let amps = linear_amplitudes(&energies, &taus, y)?;
    let start: Vec<f64> = energies
        .iter()
        .zip(&amps)
        .flat_map(|(w, c)| [c.re, c.im, w.re, -w.im])
        .collect();
    let (params, final_cost) = levenberg_marquardt(start, &taus, y)?;

    let mut terms: Vec<ExpTerm> = params
        .chunks_exact(4)
        .map(|p| ExpTerm {
            amplitude: Complex64::new(p[0], p[1]),
            frequency: p[2],
            rate: mev_to_uev(p[3]),
        })
        .collect();
    if terms.iter().any(|t| !t.rate.is_finite() || !t.frequency.is_finite()) {
        return Err(Error::Fit {
            iterations: MAX_ITERATIONS,
            residual: f64::NAN,
            best: params,
        });
    }
    terms.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    Ok(RateFit {
        terms,
        window,
        residual: (final_cost / samples as f64).sqrt(),
    })
}

/// `P(t) − P_fit(t)` over the whole grid of `trace`.
pub fn residual_trace(trace: &PolarizationTrace, fit: &RateFit) -> Result<PolarizationTrace> {
    let (lo, hi) = window_indices(trace, fit.window);
    if hi <= lo || trace.is_empty() || fit.window.1 > trace.end_time() + 1e-9 * trace.meta.dt {
        return Err(Error::Input(format!(
            "fit window [{}, {}] does not lie on the trace grid",
            fit.window.0, fit.window.1
        )));
    }
    let values = trace
        .times
        .iter()
        .zip(&trace.values)
        .map(|(&t, &p)| p - fit.evaluate(t))
        .collect();
    PolarizationTrace::new(trace.times.clone(), values, trace.meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(dt: f64) -> TraceMeta {
        TraceMeta {
            neighbors: 4,
            threshold: 0.0,
            dt,
            excitation: 1,
            measure: 1,
        }
    }

    fn synthetic(terms: &[ExpTerm], t_ref: f64, dt: f64, n: usize) -> PolarizationTrace {
        let fit = RateFit {
            terms: terms.to_vec(),
            window: (t_ref, t_ref),
            residual: 0.0,
        };
        let times: Vec<f64> = (1..=n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| fit.evaluate(t)).collect();
        PolarizationTrace::new(times, values, meta(dt)).unwrap()
    }

    fn two_terms() -> Vec<ExpTerm> {
        vec![
            ExpTerm {
                amplitude: Complex64::new(0.31, -0.12),
                frequency: -0.6,
                rate: 4.0,
            },
            ExpTerm {
                amplitude: Complex64::new(0.45, 0.2),
                frequency: 0.55,
                rate: 9.0,
            },
        ]
    }

    #[test]
    fn recovers_exact_two_term_signal() {
        let truth = two_terms();
        let trace = synthetic(&truth, 20.0, 0.05, 1200);
        let fit = fit_exponentials(&trace, 2, Some((20.0, 60.0))).unwrap();
        for (got, want) in fit.terms.iter().zip(&truth) {
            assert!((got.amplitude - want.amplitude).norm() < 1e-9 * want.amplitude.norm());
            assert!((got.frequency - want.frequency).abs() < 1e-9 * want.frequency.abs());
            assert!((got.rate - want.rate).abs() < 1e-9 * want.rate);
        }
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn undamped_beat_has_zero_rates() {
        let g = 0.1;
        let times: Vec<f64> = (1..=800).map(|k| k as f64 * 0.1).collect();
        let values = times
            .iter()
            .map(|&t| Complex64::new((g * t / HBAR).cos(), 0.0))
            .collect();
        let trace = PolarizationTrace::new(times, values, meta(0.1)).unwrap();
        let fit = fit_exponentials(&trace, 2, None).unwrap();
        assert!((fit.terms[0].frequency + g).abs() < 1e-10);
        assert!((fit.terms[1].frequency - g).abs() < 1e-10);
        for t in &fit.terms {
            assert!(t.rate.abs() < 1e-10);
        }
    }

    #[test]
    fn global_phase_rotates_amplitudes_only() {
        let truth = two_terms();
        let trace = synthetic(&truth, 20.0, 0.05, 1200);
        let phase = Complex64::from_polar(1.0, 0.7);
        let mut rotated = trace.clone();
        rotated.values.iter_mut().for_each(|v| *v *= phase);
        let a = fit_exponentials(&trace, 2, Some((20.0, 60.0))).unwrap();
        let b = fit_exponentials(&rotated, 2, Some((20.0, 60.0))).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert!((x.amplitude * phase - y.amplitude).norm() < 1e-8);
            assert!((x.frequency - y.frequency).abs() < 1e-8);
            assert!((x.rate - y.rate).abs() < 1e-8);
        }
    }

    #[test]
    fn window_shift_advances_phases() {
        let truth = two_terms();
        let trace = synthetic(&truth, 20.0, 0.05, 1200);
        let delta = 2.5;
        let a = fit_exponentials(&trace, 2, Some((20.0, 55.0))).unwrap();
        let b = fit_exponentials(&trace, 2, Some((20.0 + delta, 55.0 + delta))).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            let shift = (-Complex64::i() * x.complex_energy() * delta / HBAR).exp();
            assert!((x.amplitude * shift - y.amplitude).norm() < 1e-8);
            assert!((x.frequency - y.frequency).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_of_exact_model_vanishes() {
        let trace = synthetic(&two_terms(), 20.0, 0.05, 1200);
        let fit = fit_exponentials(&trace, 2, Some((20.0, 60.0))).unwrap();
        let res = residual_trace(&trace, &fit).unwrap();
        assert!(res.values.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn residual_rms_matches_fit_residual() {
        let mut trace = synthetic(&two_terms(), 20.0, 0.05, 1200);
        for (k, v) in trace.values.iter_mut().enumerate() {
            *v += Complex64::new(1e-3 * ((k as f64) * 0.37).sin(), 5e-4 * ((k as f64) * 1.3).cos());
        }
        let fit = fit_exponentials(&trace, 2, Some((20.0, 60.0))).unwrap();
        let res = residual_trace(&trace, &fit).unwrap();
        let (lo, hi) = window_indices(&trace, fit.window);
        let rms = (res.values[lo..hi].iter().map(|v| v.norm_sqr()).sum::<f64>() / (hi - lo) as f64).sqrt();
        assert!((rms - fit.residual).abs() < 1e-12 * fit.residual.max(1e-300) + 1e-15);
    }

    #[test]
    fn rejects_bad_windows() {
        let trace = synthetic(&two_terms(), 20.0, 0.05, 1200);
        assert!(fit_exponentials(&trace, 2, Some((0.1, 60.0))).is_err());
        assert!(fit_exponentials(&trace, 2, Some((20.0, 20.5))).is_err());
        assert!(fit_exponentials(&trace, 0, None).is_err());
    }

    #[test]
    fn rejects_irregular_grid() {
        let m = meta(0.1);
        assert!(PolarizationTrace::new(vec![0.1, 0.2, 0.35], vec![Complex64::new(0.0, 0.0); 3], m).is_err());
        assert!(PolarizationTrace::new(vec![0.1, 0.2], vec![Complex64::new(0.0, 0.0); 3], m).is_err());
    }
}
