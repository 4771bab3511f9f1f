//! Pair-correlation factors of the propagator and the uncompressed
//! full-tensor propagation, kept as the reference for small memory lengths.
//!
//! The full influence functional `F_{i_L…i_1}` is stored flat with
//! `index = Σ_n i_n · J^(n−1)`, so `i_1` is the fastest digit and the
//! contraction over it is a contiguous stride-`J` reduction.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::CumulantTable;
use crate::error::{Error, Result};
use crate::system::{StepMatrix, SystemSpec};

/// Largest `J^L` the full-tensor engine accepts.
pub const FULL_TENSOR_CAP: usize = 1 << 24;

/// System cumulant between channels `a` and `b` at lag `s`:
/// `Σ_{β,β'} w[a][β] w[b][β'] K_ββ'(s)`.
pub fn pair_cumulant(table: &CumulantTable, spec: &SystemSpec, s: usize, a: usize, b: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for b1 in 0..spec.num_baths() {
        let wa = spec.weight(a, b1);
        if wa == 0.0 {
            continue;
        }
        for b2 in 0..spec.num_baths() {
            let wb = spec.weight(b, b2);
            if wb != 0.0 {
                acc += table.get(b1, b2, s) * (wa * wb);
            }
        }
    }
    acc
}

/// The `L` matrices `Q^(r)`, `r = 1..=L`, linking a memory slot at lag `r`
/// to the index being summed out.
///
/// `Q^(1)_{a i} = M_{a i} exp(𝒦_ii(0) + 2𝒦_ai(1))`, `Q^(r)_{a i} = exp(2𝒦_ai(r))`.
#[derive(Debug, Clone)]
pub struct QFactors {
    dim: usize,
    neighbors: usize,
    data: Vec<Complex64>,
    self_terms: Vec<Complex64>,
}

impl QFactors {
    pub fn new(table: &CumulantTable, spec: &SystemSpec, step: &StepMatrix) -> Result<Self> {
        let dim = spec.dim();
        if table.num_baths() != spec.num_baths() {
            return Err(Error::Input(format!(
                "cumulant table has {} baths but the system couples to {}",
                table.num_baths(),
                spec.num_baths()
            )));
        }
        if step.m.nrows() != dim {
            return Err(Error::Input("step matrix does not match the system dimension".into()));
        }
        if (step.dt - table.step()).abs() > 1e-12 * table.step() {
            return Err(Error::Input(format!(
                "step matrix dt = {} differs from cumulant table dt = {}",
                step.dt,
                table.step()
            )));
        }
        let neighbors = table.neighbors();
        let mut data = Vec::with_capacity(neighbors * dim * dim);
        for r in 1..=neighbors {
            for a in 0..dim {
                for i in 0..dim {
                    let mut exponent = pair_cumulant(table, spec, r, a, i) * 2.0;
                    let mut pre = Complex64::new(1.0, 0.0);
                    if r == 1 {
                        exponent += pair_cumulant(table, spec, 0, i, i);
                        pre = step.get(a, i);
                    }
                    data.push(pre * exponent.exp());
                }
            }
        }
        let self_terms = (0..dim).map(|j| pair_cumulant(table, spec, 0, j, j).exp()).collect();
        Ok(Self {
            dim,
            neighbors,
            data,
            self_terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    /// `Q^(r)_{a, i}` for `1 ≤ r ≤ L`.
    #[inline]
    pub fn get(&self, r: usize, a: usize, i: usize) -> Complex64 {
        self.data[((r - 1) * self.dim + a) * self.dim + i]
    }

    /// `exp(𝒦_jj(0))`, the readout prefactor.
    pub fn self_term(&self, j: usize) -> Complex64 {
        self.self_terms[j]
    }

    /// Products `Π_d Q^(lags[d])_{digit_d, i}` over every configuration of
    /// the digits, digit `d` carrying weight `J^d`.
    pub(crate) fn digit_products(&self, lags: &[usize], i: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.dim.pow(lags.len() as u32));
        out.push(Complex64::new(1.0, 0.0));
        for &lag in lags {
            let len = out.len();
            for d in 1..self.dim {
                let q = self.get(lag, d, i);
                for k in 0..len {
                    let v = out[k] * q;
                    out.push(v);
                }
            }
            let q0 = self.get(lag, 0, i);
            if q0 != Complex64::new(1.0, 0.0) {
                out[..len].iter_mut().for_each(|v| *v *= q0);
            }
        }
        out
    }
}

/// One element of `Q^(r)` computed from scratch.
pub fn propagator_factor(
    table: &CumulantTable,
    spec: &SystemSpec,
    step: &StepMatrix,
    r: usize,
    i_a: usize,
    i_1: usize,
) -> Result<Complex64> {
    if r == 0 || r > table.neighbors() {
        return Err(Error::Domain(format!("lag {r} outside 1..={}", table.neighbors())));
    }
    if i_a >= spec.dim() || i_1 >= spec.dim() {
        return Err(Error::Domain(format!("channel out of range for J = {}", spec.dim())));
    }
    let mut exponent = pair_cumulant(table, spec, r, i_a, i_1) * 2.0;
    if r == 1 {
        exponent += pair_cumulant(table, spec, 0, i_1, i_1);
        Ok(step.get(i_a, i_1) * exponent.exp())
    } else {
        Ok(exponent.exp())
    }
}

/// Dense influence functional over `L` memory indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FullIF {
    pub values: Vec<Complex64>,
    pub neighbors: usize,
    pub dim: usize,
}

impl FullIF {
    fn check_capacity(dim: usize, neighbors: usize) -> Result<usize> {
        let elements = (dim as u128).pow(neighbors as u32);
        if elements > FULL_TENSOR_CAP as u128 {
            return Err(Error::Capacity {
                dim,
                neighbors,
                elements,
                cap: FULL_TENSOR_CAP,
            });
        }
        Ok(elements as usize)
    }

    /// `F^(1)_{i_L…i_1} = M_{i_1 k}`.
    pub fn initial(step: &StepMatrix, excitation: usize, neighbors: usize) -> Result<Self> {
        let dim = step.m.nrows();
        if excitation >= dim {
            return Err(Error::Domain(format!("excitation channel {excitation} out of range")));
        }
        if neighbors < 1 {
            return Err(Error::Domain("memory length must be >= 1".into()));
        }
        let len = Self::check_capacity(dim, neighbors)?;
        let values = (0..len).map(|idx| step.get(idx % dim, excitation)).collect();
        Ok(Self { values, neighbors, dim })
    }

    /// Flat index of the configuration with `indices[n−1] = i_n`.
    pub fn flat_index(&self, indices: &[usize]) -> usize {
        assert_eq!(indices.len(), self.neighbors);
        indices.iter().rev().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, indices: &[usize]) -> Complex64 {
        self.values[self.flat_index(indices)]
    }

    /// One application of the propagator followed by the relabelling
    /// `p, i_L, …, i_2 → i_L, …, i_1`.
    pub fn propagate(&self, factors: &QFactors) -> Result<Self> {
        if factors.dim() != self.dim || factors.neighbors() != self.neighbors {
            return Err(Error::Input("propagator factors do not match the tensor shape".into()));
        }
        let dim = self.dim;
        let lmem = self.neighbors;
        let tail = self.values.len() / dim;
        // lags of positions 2..=L relative to i_1
        let lags: Vec<usize> = (1..lmem).collect();
        let weights: Vec<Vec<Complex64>> = (0..dim).map(|i| factors.digit_products(&lags, i)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        out.par_chunks_mut(tail).enumerate().for_each(|(p, chunk)| {
            let newest: Vec<Complex64> = (0..dim).map(|i| factors.get(lmem, p, i)).collect();
            for (q, slot) in chunk.iter_mut().enumerate() {
                let src = &self.values[q * dim..(q + 1) * dim];
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..dim {
                    acc += newest[i] * weights[i][q] * src[i];
                }
                *slot = acc;
            }
        });
        Ok(Self {
            values: out,
            neighbors: lmem,
            dim,
        })
    }

    /// `P_jk = exp(𝒦_jj(0)) F_{0…0 j}`.
    pub fn readout(&self, factors: &QFactors, measure: usize) -> Complex64 {
        factors.self_term(measure) * self.values[measure]
    }
}

/// Runs `steps − 1` propagations from `F^(1)`, returning every `F^(n)`.
pub fn propagate_full(
    spec: &SystemSpec,
    table: &CumulantTable,
    step: &StepMatrix,
    excitation: usize,
    steps: usize,
) -> Result<Vec<FullIF>> {
    let factors = QFactors::new(table, spec, step)?;
    let mut out = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(out);
    }
    out.push(FullIF::initial(step, excitation, table.neighbors())?);
    for _ in 1..steps {
        let next = out.last().expect("non-empty").propagate(&factors)?;
        out.push(next);
    }
    Ok(out)
}

pub fn readout_full(f: &FullIF, table: &CumulantTable, spec: &SystemSpec, measure: usize) -> Complex64 {
    pair_cumulant(table, spec, 0, measure, measure).exp() * f.values[measure]
}

/// Readouts `P(t_n)`, `n = 1..=steps`, without keeping the intermediate tensors.
pub fn full_polarization(
    spec: &SystemSpec,
    table: &CumulantTable,
    step: &StepMatrix,
    excitation: usize,
    measure: usize,
    steps: usize,
) -> Result<Vec<Complex64>> {
    if measure >= spec.dim() {
        return Err(Error::Domain(format!("measurement channel {measure} out of range")));
    }
    let factors = QFactors::new(table, spec, step)?;
    let mut values = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(values);
    }
    let mut f = FullIF::initial(step, excitation, table.neighbors())?;
    values.push(f.readout(&factors, measure));
    for _ in 1..steps {
        f = f.propagate(&factors)?;
        values.push(f.readout(&factors, measure));
    }
    Ok(values)
}
