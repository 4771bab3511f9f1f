//! Flat `key = value` run configuration.
//!
//! Energies are given in μeV, lengths in nm, times in ps, temperatures in K.
//! Lines starting with `#` are comments. Later assignments override earlier
//! ones, so command-line overrides can simply be appended.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pathint::bath::BathSpec;
use pathint::system::{build_h0_case1, build_h0_case2, SystemSpec};
use pathint::units::uev_to_mev;

use crate::error::CliError;

/// Every key the driver understands.
pub const KNOWN_KEYS: &[&str] = &[
    "case",
    "g",
    "g1",
    "g2",
    "detuning",
    "detuning1",
    "detuning2",
    "temperature",
    "deformation_diff",
    "sound_velocity",
    "mass_density",
    "confinement_length",
    "separation",
    "L",
    "memory_time",
    "dt",
    "steps",
    "t_end",
    "eps",
    "excitation",
    "measure",
    "fit_window",
    "terms",
    "beta",
    "l_min",
    "synthetic_gamma_inf",
    "synthetic_alpha",
    "tolerance",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            cfg.set_assignment(line)
                .map_err(|e| CliError::Usage(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key=value` assignment; an empty value removes the key.
    pub fn set_assignment(&mut self, text: &str) -> Result<(), CliError> {
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got {text:?}")))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        let value = value.trim();
        if value.is_empty() {
            self.entries.remove(key);
        } else {
            self.entries.insert(key.to_string(), value.to_string());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `# key = value` lines for CSV headers, in key order.
    pub fn header_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }

    fn parse_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Usage(format!("{key}: not a finite number: {v:?}")))
            })
            .transpose()
    }

    fn parse_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("{key}: not a non-negative integer: {v:?}")))
            })
            .transpose()
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|_| CliError::Usage(format!("{key}: bad list entry {s:?}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn require_f64(&self, key: &str) -> Result<f64, CliError> {
        self.parse_f64(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required key {key}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// One dot in a cavity; channels 0 = cavity, 1 = exciton.
    DotCavity,
    /// Two dots in a cavity; channels 0 = cavity, 1 and 2 = excitons.
    DotPairCavity,
}

/// How the time step follows from the memory length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Fixed memory time `L·dt` in ps; `dt` shrinks as `L` grows.
    MemoryTime(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Duration {
    Steps(usize),
    Until(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub case: Case,
    /// Couplings in μeV (one per dot).
    pub couplings: Vec<f64>,
    /// Exciton detunings from the cavity in μeV (one per dot).
    pub detunings: Vec<f64>,
    pub temperature: f64,
    pub deformation_diff: f64,
    pub sound_velocity: f64,
    pub mass_density: f64,
    pub confinement_length: f64,
    pub separations: Vec<f64>,
    pub memory_lengths: Vec<usize>,
    pub step: Option<Step>,
    pub duration: Option<Duration>,
    pub eps: f64,
    pub excitation: usize,
    pub measure: usize,
    pub fit_window: Option<(f64, f64)>,
    pub terms: usize,
    pub beta: f64,
    pub l_min: Option<usize>,
    pub synthetic: Option<(Vec<f64>, Vec<f64>)>,
    pub tolerance: f64,
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let case = match raw.parse_usize("case")?.unwrap_or(1) {
            1 => Case::DotCavity,
            2 => Case::DotPairCavity,
            other => return Err(CliError::Usage(format!("case: expected 1 or 2, got {other}"))),
        };
        let (couplings, detunings) = match case {
            Case::DotCavity => (
                raw.parse_list::<f64>("g")?.unwrap_or_default(),
                vec![raw.parse_f64("detuning")?.unwrap_or(0.0)],
            ),
            Case::DotPairCavity => {
                let g = raw.parse_f64("g")?;
                let g1 = raw.parse_f64("g1")?.or(g);
                let g2 = raw.parse_f64("g2")?.or(g);
                let couplings = match (g1, g2) {
                    (Some(a), Some(b)) => vec![a, b],
                    _ => vec![],
                };
                let d = raw.parse_f64("detuning")?.unwrap_or(0.0);
                (
                    couplings,
                    vec![
                        raw.parse_f64("detuning1")?.unwrap_or(d),
                        raw.parse_f64("detuning2")?.unwrap_or(d),
                    ],
                )
            }
        };

        let memory_time = raw.parse_f64("memory_time")?;
        let dt = raw.parse_f64("dt")?;
        let step = match (memory_time, dt) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("give exactly one of memory_time and dt".into()))
            }
            (Some(m), None) if m > 0.0 => Some(Step::MemoryTime(m)),
            (None, Some(d)) if d > 0.0 => Some(Step::Fixed(d)),
            (None, None) => None,
            _ => return Err(CliError::Usage("memory_time / dt must be > 0".into())),
        };
        let steps = raw.parse_usize("steps")?;
        let t_end = raw.parse_f64("t_end")?;
        let duration = match (steps, t_end) {
            (Some(_), Some(_)) => return Err(CliError::Usage("give exactly one of steps and t_end".into())),
            (Some(n), None) if n > 0 => Some(Duration::Steps(n)),
            (None, Some(t)) if t > 0.0 => Some(Duration::Until(t)),
            (None, None) => None,
            _ => return Err(CliError::Usage("steps / t_end must be > 0".into())),
        };

        let eps = raw.parse_f64("eps")?.unwrap_or(pathint::DEFAULT_SVD_THRESHOLD);
        if !(0.0..1.0).contains(&eps) {
            return Err(CliError::Usage(format!("eps: {eps} outside [0, 1)")));
        }
        let fit_window = match raw.parse_list::<f64>("fit_window")? {
            None => None,
            Some(w) if w.len() == 2 && w[0] < w[1] => Some((w[0], w[1])),
            Some(_) => return Err(CliError::Usage("fit_window: expected start,end with start < end".into())),
        };
        let default_terms = match case {
            Case::DotCavity => 2,
            Case::DotPairCavity => 3,
        };
        let synthetic = match (
            raw.parse_list::<f64>("synthetic_gamma_inf")?,
            raw.parse_list::<f64>("synthetic_alpha")?,
        ) {
            (None, None) => None,
            (Some(a), Some(b)) if a.len() == b.len() && !a.is_empty() => Some((a, b)),
            _ => {
                return Err(CliError::Usage(
                    "synthetic_gamma_inf and synthetic_alpha need equally long lists".into(),
                ))
            }
        };
        let cfg = Self {
            case,
            couplings,
            detunings,
            temperature: raw.parse_f64("temperature")?.unwrap_or(50.0),
            deformation_diff: raw.parse_f64("deformation_diff")?.unwrap_or(-6.5),
            sound_velocity: raw.parse_f64("sound_velocity")?.unwrap_or(4.6e3),
            mass_density: raw.parse_f64("mass_density")?.unwrap_or(5.65),
            confinement_length: raw.parse_f64("confinement_length")?.unwrap_or(3.3),
            separations: raw.parse_list::<f64>("separation")?.unwrap_or_else(|| vec![0.0]),
            memory_lengths: raw.parse_list::<usize>("L")?.unwrap_or_default(),
            step,
            duration,
            eps,
            excitation: raw.parse_usize("excitation")?.unwrap_or(1),
            measure: raw.parse_usize("measure")?.unwrap_or(1),
            fit_window,
            terms: raw.parse_usize("terms")?.unwrap_or(default_terms),
            beta: raw.parse_f64("beta")?.unwrap_or(2.0),
            l_min: raw.parse_usize("l_min")?,
            synthetic,
            tolerance: raw.parse_f64("tolerance")?.unwrap_or(1e-6),
            raw,
        };
        let dim = cfg.dim();
        if cfg.excitation >= dim || cfg.measure >= dim {
            return Err(CliError::Usage(format!("excitation/measure must be < {dim}")));
        }
        if cfg.beta <= 0.0 {
            return Err(CliError::Usage("beta must be > 0".into()));
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        match self.case {
            Case::DotCavity => 2,
            Case::DotPairCavity => 3,
        }
    }

    pub fn dots(&self) -> usize {
        self.dim() - 1
    }

    /// Single coupling in μeV for propagation commands.
    pub fn coupling(&self) -> Result<&[f64], CliError> {
        let need = self.dots();
        match self.case {
            Case::DotCavity if self.couplings.len() == 1 => Ok(&self.couplings),
            Case::DotCavity => Err(CliError::Usage(format!(
                "g: expected one coupling, got {}",
                self.couplings.len()
            ))),
            Case::DotPairCavity if self.couplings.len() == need => Ok(&self.couplings),
            Case::DotPairCavity => Err(CliError::Usage("g1 and g2 (or g) are required".into())),
        }
    }

    /// `H₀` in meV in the frame of the cavity energy.
    pub fn system_with(&self, couplings: &[f64]) -> SystemSpec {
        match self.case {
            Case::DotCavity => build_h0_case1(uev_to_mev(self.detunings[0]), 0.0, uev_to_mev(couplings[0])),
            Case::DotPairCavity => build_h0_case2(
                uev_to_mev(self.detunings[0]),
                uev_to_mev(self.detunings[1]),
                0.0,
                uev_to_mev(couplings[0]),
                uev_to_mev(couplings[1]),
            ),
        }
    }

    pub fn system(&self) -> Result<SystemSpec, CliError> {
        Ok(self.system_with(self.coupling()?))
    }

    pub fn bath_with(&self, separation: f64) -> Result<BathSpec, CliError> {
        BathSpec::new(
            self.deformation_diff,
            self.sound_velocity,
            self.mass_density,
            self.temperature,
            vec![self.confinement_length; self.dots()],
            separation,
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn bath(&self) -> Result<BathSpec, CliError> {
        match self.separations.as_slice() {
            [d] => self.bath_with(*d),
            _ => Err(CliError::Usage("separation: expected a single value here".into())),
        }
    }

    /// Memory length for single-run commands.
    pub fn memory_length(&self) -> Result<usize, CliError> {
        match self.memory_lengths.as_slice() {
            [l] => Ok(*l),
            [] => Err(CliError::Usage("missing required key L".into())),
            _ => Err(CliError::Usage("L: expected a single value for this command".into())),
        }
    }

    pub fn time_step(&self, neighbors: usize) -> Result<f64, CliError> {
        match self.step {
            Some(Step::MemoryTime(m)) => Ok(m / neighbors as f64),
            Some(Step::Fixed(d)) => Ok(d),
            None => Err(CliError::Usage("give exactly one of memory_time and dt".into())),
        }
    }

    pub fn num_steps(&self, dt: f64) -> Result<usize, CliError> {
        match self.duration {
            Some(Duration::Steps(n)) => Ok(n),
            Some(Duration::Until(t)) => Ok(((t / dt) + 1e-9).floor().max(1.0) as usize),
            None => Err(CliError::Usage("give exactly one of steps and t_end".into())),
        }
    }

    /// Coupling grid in μeV for the golden-rule table.
    pub fn coupling_grid(&self) -> Result<Vec<f64>, CliError> {
        match self.case {
            Case::DotCavity if !self.couplings.is_empty() => Ok(self.couplings.clone()),
            Case::DotPairCavity => {
                let g = self.coupling()?;
                if g[0] != g[1] {
                    return Err(CliError::Usage("golden-rule rates need g1 = g2".into()));
                }
                Ok(vec![g[0]])
            }
            _ => Err(CliError::Usage("missing required key g".into())),
        }
    }

    pub fn required(&self, key: &str) -> Result<f64, CliError> {
        self.raw.require_f64(key)
    }
}
