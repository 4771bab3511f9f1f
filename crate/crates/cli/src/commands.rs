//! The four driver commands. Each returns structured results plus a CSV
//! [`Document`]; rendering is separate so tests can inspect both.

use num_complex::Complex64;
use rayon::prelude::*;

use pathint::bath::build_cumulant_table;
use pathint::compressed::run_with_table;
use pathint::extrapolate::{power_law_fit, Exponent, Extrapolation, ParameterFamily};
use pathint::fgr::{rates_with_virtual, splitting, DotCase};
use pathint::fit::{fit_exponentials, RateFit};
use pathint::oracle::full_polarization;
use pathint::system::step_matrix;

use crate::config::{Case, RunConfig};
use crate::csv::{f, u, Document, Section};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Compressed,
    /// Full-tensor reference engine.
    Oracle,
}

fn header(command: &str, cfg: &RunConfig) -> Vec<(String, String)> {
    let mut meta = vec![
        ("pathint".to_string(), VERSION.to_string()),
        ("command".to_string(), command.to_string()),
    ];
    meta.extend(cfg.raw.entries().map(|(k, v)| (format!("config.{k}"), v.to_string())));
    meta
}

fn dot_case(case: Case) -> DotCase {
    match case {
        Case::DotCavity => DotCase::Single,
        Case::DotPairCavity => DotCase::Pair,
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub neighbors: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub ranks: Vec<usize>,
    pub stored: Vec<usize>,
}

impl Propagation {
    pub fn peak_stored(&self) -> usize {
        self.stored.iter().copied().max().unwrap_or(0)
    }
}

/// One propagation with memory length `neighbors` and couplings `g` (μeV).
pub fn propagate_with(
    cfg: &RunConfig,
    g: &[f64],
    neighbors: usize,
    engine: Engine,
) -> Result<Propagation, CliError> {
    let dt = cfg.time_step(neighbors)?;
    let steps = cfg.num_steps(dt)?;
    let spec = cfg.system_with(g);
    let bath = cfg.bath()?;
    let table = build_cumulant_table(&bath, dt, neighbors)?;
    let step = step_matrix(&spec, dt)?;
    let times: Vec<f64> = (1..=steps).map(|n| n as f64 * dt).collect();
    match engine {
        Engine::Compressed => {
            let run = run_with_table(&spec, &table, &step, steps, cfg.eps, cfg.excitation, cfg.measure)?;
            Ok(Propagation {
                neighbors,
                dt,
                times,
                values: run.trace.values,
                ranks: run.ranks,
                stored: run.stored,
            })
        }
        Engine::Oracle => {
            let values = full_polarization(&spec, &table, &step, cfg.excitation, cfg.measure, steps)?;
            let full = cfg.dim().pow(neighbors as u32);
            Ok(Propagation {
                neighbors,
                dt,
                times,
                values,
                ranks: vec![0; steps],
                stored: vec![full; steps],
            })
        }
    }
}

pub fn propagate(cfg: &RunConfig, engine: Engine) -> Result<(Propagation, Document), CliError> {
    let g = cfg.coupling()?.to_vec();
    let run = propagate_with(cfg, &g, cfg.memory_length()?, engine)?;
    let mut meta = header("propagate", cfg);
    meta.push((
        "engine".into(),
        match engine {
            Engine::Compressed => "compressed".into(),
            Engine::Oracle => "oracle".into(),
        },
    ));
    meta.push(("dt_ps".into(), f(run.dt)));
    meta.push(("peak_stored_elements".into(), u(run.peak_stored())));
    let mut s = Section::new(
        "trace",
        &["t_ps", "re_P", "im_P", "abs_P", "rank_after_truncation", "stored_elements"],
    );
    for k in 0..run.times.len() {
        let p = run.values[k];
        s.push(vec![f(run.times[k]), f(p.re), f(p.im), f(p.norm()), u(run.ranks[k]), u(run.stored[k])]);
    }
    Ok((
        run,
        Document {
            meta,
            sections: vec![s],
        },
    ))
}

/// Fit and extrapolation of one exponential term across the sweep.
#[derive(Debug, Clone)]
pub struct TermExtrapolation {
    pub term: usize,
    pub parameter: &'static str,
    pub fixed: Extrapolation,
    pub free: Option<Extrapolation>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    /// `(L, fit)` for every memory length that produced a fit.
    pub fits: Vec<(usize, RateFit)>,
    /// Memory lengths dropped together with the reason.
    pub skipped: Vec<(usize, String)>,
    pub extrapolations: Vec<TermExtrapolation>,
}

impl Sweep {
    pub fn rate(&self, term: usize) -> Option<&TermExtrapolation> {
        self.extrapolations
            .iter()
            .find(|e| e.term == term && e.parameter == "gamma_ueV")
    }
}

fn synthetic_fits(cfg: &RunConfig, inf: &[f64], alpha: &[f64]) -> Vec<(usize, Result<RateFit, CliError>)> {
    cfg.memory_lengths
        .iter()
        .map(|&l| {
            let terms = inf
                .iter()
                .zip(alpha)
                .map(|(&g, &a)| pathint::fit::ExpTerm {
                    amplitude: Complex64::new(1.0, 0.0),
                    frequency: 0.0,
                    rate: g + a * (l as f64).powf(-cfg.beta),
                })
                .collect();
            (
                l,
                Ok(RateFit {
                    terms,
                    window: (0.0, 0.0),
                    residual: 0.0,
                }),
            )
        })
        .collect()
}

fn family_fits(points: Vec<(usize, f64)>, name: String, beta: f64) -> Result<(Extrapolation, Option<Extrapolation>), CliError> {
    let family = ParameterFamily::new(name, points)?;
    let fixed = power_law_fit(&family, Exponent::Fixed(beta))?;
    let free = if family.points.len() >= 4 {
        Some(power_law_fit(&family, Exponent::Free)?)
    } else {
        None
    };
    Ok((fixed, free))
}

type TermField = fn(&pathint::fit::ExpTerm) -> f64;

pub fn sweep(cfg: &RunConfig) -> Result<(Sweep, Document), CliError> {
    let mut ls = cfg.memory_lengths.clone();
    ls.sort_unstable();
    ls.dedup();
    if let Some(l_min) = cfg.l_min {
        ls.retain(|&l| l >= l_min);
    }
    if ls.len() < 3 {
        return Err(CliError::Usage(format!("sweep needs at least 3 distinct L values, got {ls:?}")));
    }
    let results: Vec<(usize, Result<RateFit, CliError>)> = match &cfg.synthetic {
        Some((inf, alpha)) => synthetic_fits(&RunConfig { memory_lengths: ls.clone(), ..cfg.clone() }, inf, alpha),
        None => {
            let g = cfg.coupling()?.to_vec();
            ls.par_iter()
                .map(|&l| {
                    let fit = propagate_with(cfg, &g, l, Engine::Compressed).and_then(|run| {
                        let trace = pathint::fit::PolarizationTrace::new(
                            run.times,
                            run.values,
                            pathint::fit::TraceMeta {
                                neighbors: l,
                                threshold: cfg.eps,
                                dt: run.dt,
                                excitation: cfg.excitation,
                                measure: cfg.measure,
                            },
                        )?;
                        Ok(fit_exponentials(&trace, cfg.terms, cfg.fit_window)?)
                    });
                    (l, fit)
                })
                .collect()
        }
    };
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (l, r) in results {
        match r {
            Ok(fit) => fits.push((l, fit)),
            Err(e @ CliError::Usage(_)) => return Err(e),
            Err(e) => skipped.push((l, e.to_string())),
        }
    }
    if fits.len() < 3 {
        return Err(CliError::Compute(pathint::Error::Input(format!(
            "only {} usable L values, need 3",
            fits.len()
        ))));
    }
    let n_terms = fits[0].1.terms.len();
    let mut extrapolations = Vec::new();
    for j in 0..n_terms {
        let params: [(&'static str, TermField); 2] = [("gamma_ueV", |t| t.rate), ("frequency_meV", |t| t.frequency)];
        for (name, get) in params {
            let points = fits.iter().map(|(l, fit)| (*l, get(&fit.terms[j]))).collect();
            let (fixed, free) = family_fits(points, format!("{name}[{j}]"), cfg.beta)?;
            extrapolations.push(TermExtrapolation {
                term: j,
                parameter: name,
                fixed,
                free,
            });
        }
    }

    let mut meta = header("sweep-l", cfg);
    if !skipped.is_empty() {
        let list: Vec<String> = skipped.iter().map(|(l, e)| format!("{l}: {e}")).collect();
        meta.push(("skipped".into(), list.join("; ")));
    }
    let mut rows = Section::new(
        "fits",
        &[
            "L", "term", "gamma_ueV", "re_omega_meV", "abs_C", "arg_C", "residual", "window_start_ps", "window_end_ps",
        ],
    );
    for (l, fit) in &fits {
        for (j, t) in fit.terms.iter().enumerate() {
            rows.push(vec![
                u(*l),
                u(j),
                f(t.rate),
                f(t.frequency),
                f(t.amplitude.norm()),
                f(t.amplitude.arg()),
                f(fit.residual),
                f(fit.window.0),
                f(fit.window.1),
            ]);
        }
    }
    let mut footer = Section::new(
        "extrapolation",
        &["term", "parameter", "exponent", "value_inf", "alpha", "beta", "error", "rms"],
    );
    for e in &extrapolations {
        let fits = std::iter::once(("fixed", &e.fixed)).chain(e.free.as_ref().map(|x| ("free", x)));
        for (kind, x) in fits {
            footer.push(vec![
                u(e.term),
                e.parameter.to_string(),
                kind.to_string(),
                f(x.value_inf),
                f(x.alpha),
                f(x.beta),
                x.error_estimate.map(f).unwrap_or_default(),
                f(x.rms),
            ]);
        }
    }
    Ok((
        Sweep {
            fits,
            skipped,
            extrapolations,
        },
        Document {
            meta,
            sections: vec![rows, footer],
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgrRow {
    pub g: f64,
    pub separation: f64,
    /// Splitting in meV.
    pub r: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub total_plus: f64,
    pub total_minus: f64,
}

pub fn fgr(cfg: &RunConfig) -> Result<(Vec<FgrRow>, Document), CliError> {
    let mut rows = Vec::new();
    for &d in &cfg.separations {
        let bath = cfg.bath_with(d)?;
        for g in cfg.coupling_grid()? {
            let spec = cfg.system_with(&vec![g; cfg.dots()]);
            let r = splitting(&spec)?;
            let p = rates_with_virtual(&bath, r, dot_case(cfg.case))?;
            rows.push(FgrRow {
                g,
                separation: d,
                r,
                gamma_plus: p.gamma_plus,
                gamma_minus: p.gamma_minus,
                total_plus: p.total_plus(),
                total_minus: p.total_minus(),
            });
        }
    }
    let mut s = Section::new(
        "rates",
        &[
            "g_ueV",
            "d_nm",
            "R_meV",
            "gamma_plus_fgr_ueV",
            "gamma_minus_fgr_ueV",
            "gamma_plus_total_ueV",
            "gamma_minus_total_ueV",
        ],
    );
    for r in &rows {
        s.push(vec![
            f(r.g),
            f(r.separation),
            f(r.r),
            f(r.gamma_plus),
            f(r.gamma_minus),
            f(r.total_plus),
            f(r.total_minus),
        ]);
    }
    Ok((
        rows,
        Document {
            meta: header("fgr", cfg),
            sections: vec![s],
        },
    ))
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub compressed: Propagation,
    pub full: Propagation,
    pub max_diff: f64,
}

/// Runs both engines on the same configuration and compares the readouts.
/// The document is produced even when the tolerance is exceeded.
pub fn verify(cfg: &RunConfig) -> Result<(Verification, Document), CliError> {
    let g = cfg.coupling()?.to_vec();
    let l = cfg.memory_length()?;
    let compressed = propagate_with(cfg, &g, l, Engine::Compressed)?;
    let full = propagate_with(cfg, &g, l, Engine::Oracle)?;
    let diffs: Vec<f64> = compressed
        .values
        .iter()
        .zip(&full.values)
        .map(|(a, b)| (a - b).norm())
        .collect();
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let mut meta = header("verify", cfg);
    meta.push(("max_abs_diff".into(), f(max_diff)));
    meta.push(("tolerance".into(), f(cfg.tolerance)));
    let mut s = Section::new("comparison", &["t_ps", "re_P", "im_P", "re_P_full", "im_P_full", "abs_diff"]);
    for k in 0..diffs.len() {
        let (a, b) = (compressed.values[k], full.values[k]);
        s.push(vec![f(compressed.times[k]), f(a.re), f(a.im), f(b.re), f(b.im), f(diffs[k])]);
    }
    Ok((
        Verification {
            compressed,
            full,
            max_diff,
        },
        Document {
            meta,
            sections: vec![s],
        },
    ))
}
