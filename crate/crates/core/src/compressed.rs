//! Influence functional held as a two-sided factorization `U · V` with half
//! of the memory slots on each side.
//!
//! Rows of `U` enumerate configurations of the slots listed in `u_slots`,
//! columns of `V` those in `v_slots`; configuration digit `d` carries weight
//! `J^d` and sits at memory position `slots[d]` (position 1 is `i_1`). The
//! singular values of the last truncation are absorbed into `V`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{build_cumulant_table, BathSpec, CumulantTable};
use crate::error::{Error, Result};
use crate::fit::{PolarizationTrace, TraceMeta};
use crate::linalg::thin_svd;
use crate::oracle::{FullIF, QFactors, FULL_TENSOR_CAP};
use crate::system::{step_matrix, StepMatrix, SystemSpec};

/// The overall scale is pulled into `log_scale` once the largest singular
/// value leaves `[1/SCALE_LIMIT, SCALE_LIMIT]`.
const SCALE_LIMIT: f64 = 1e100;

#[derive(Debug, Clone)]
pub struct CompressedIF {
    pub u: DMatrix<Complex64>,
    pub v: DMatrix<Complex64>,
    pub u_slots: Vec<usize>,
    pub v_slots: Vec<usize>,
    /// Natural log of a scalar prefactor multiplying `U · V`.
    pub log_scale: f64,
    pub step_count: usize,
    pub threshold: f64,
    dim: usize,
    neighbors: usize,
}

fn digit(config: usize, d: usize, dim: usize) -> usize {
    (config / dim.pow(d as u32)) % dim
}

impl CompressedIF {
    /// `U` an all-ones column, `V` a single row holding `M_{i_1 k}`.
    pub fn initial(step: &StepMatrix, excitation: usize, neighbors: usize, threshold: f64) -> Result<Self> {
        let dim = step.m.nrows();
        if neighbors < 2 || !neighbors.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "memory length must be even and >= 2, got {neighbors}"
            )));
        }
        if !(0.0..1.0).contains(&threshold) {
            return Err(Error::Domain(format!("SVD threshold {threshold} outside [0, 1)")));
        }
        if excitation >= dim {
            return Err(Error::Domain(format!("excitation channel {excitation} out of range")));
        }
        let half = neighbors / 2;
        let side = dim
            .checked_pow(half as u32)
            .filter(|&n| n <= 1 << 40)
            .ok_or_else(|| Error::Capacity {
                dim,
                neighbors,
                elements: (dim as u128).pow(half as u32),
                cap: 1 << 40,
            })?;
        let u = DMatrix::from_element(side, 1, Complex64::new(1.0, 0.0));
        let v = DMatrix::from_fn(1, side, |_, col| step.get(col % dim, excitation));
        Ok(Self {
            u,
            v,
            u_slots: (half + 1..=neighbors).collect(),
            v_slots: (1..=half).collect(),
            log_scale: 0.0,
            step_count: 0,
            threshold,
            dim,
            neighbors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    /// Elements held by `U`, `V` and the inner singular-value vector.
    pub fn stored_elements(&self) -> usize {
        self.u.len() + self.v.len() + self.rank()
    }

    fn check(&self) -> Result<()> {
        let mut all: Vec<usize> = self.u_slots.iter().chain(&self.v_slots).copied().collect();
        all.sort_unstable();
        if all != (1..=self.neighbors).collect::<Vec<_>>() {
            return Err(Error::Invariant(format!(
                "slots {:?} | {:?} are not a permutation of 1..={}",
                self.u_slots, self.v_slots, self.neighbors
            )));
        }
        let side = self.dim.pow((self.neighbors / 2) as u32);
        if self.u.nrows() != side || self.v.ncols() != side || self.u.ncols() != self.v.nrows() {
            return Err(Error::Invariant(format!(
                "factor shapes {:?} and {:?} inconsistent with side {side}",
                self.u.shape(),
                self.v.shape()
            )));
        }
        Ok(())
    }

    fn first_digit(&self) -> Result<usize> {
        self.v_slots
            .iter()
            .position(|&p| p == 1)
            .ok_or_else(|| Error::Invariant("position 1 is not held by V".into()))
    }

    /// Applies the propagator without truncating: `U` becomes `J` blocks
    /// side by side and `V` `J` stacked row blocks, one per value of `i_1`,
    /// with the new index taking over `i_1`'s digit. Swaps the two sides once
    /// position 1 has moved to `U`.
    pub fn apply_propagator(&self, factors: &QFactors) -> Result<Self> {
        self.check()?;
        if factors.dim() != self.dim || factors.neighbors() != self.neighbors {
            return Err(Error::Input("propagator factors do not match the tensor shape".into()));
        }
        let dim = self.dim;
        let lmem = self.neighbors;
        let d1 = self.first_digit()?;
        let stride = dim.pow(d1 as u32);
        let rank = self.rank();
        let side = self.u.nrows();

        let u_lags: Vec<usize> = self.u_slots.iter().map(|&p| p - 1).collect();
        let v_lags: Vec<usize> = self
            .v_slots
            .iter()
            .enumerate()
            .map(|(d, &p)| if d == d1 { lmem } else { p - 1 })
            .collect();

        let mut u = DMatrix::zeros(side, dim * rank);
        let mut v = DMatrix::zeros(dim * rank, side);
        for a in 0..dim {
            let um = factors.digit_products(&u_lags, a);
            for k in 0..rank {
                let col = self.u.column(k);
                let mut dst = u.column_mut(a * rank + k);
                for row in 0..side {
                    dst[row] = um[row] * col[row];
                }
            }
            let vm = factors.digit_products(&v_lags, a);
            for col in 0..side {
                let p = digit(col, d1, dim);
                let src = col + a * stride - p * stride;
                for k in 0..rank {
                    v[(a * rank + k, col)] = vm[col] * self.v[(k, src)];
                }
            }
        }

        let mut v_slots = self.v_slots.clone();
        v_slots[d1] = lmem + 1;
        v_slots.iter_mut().for_each(|p| *p -= 1);
        let u_slots: Vec<usize> = self.u_slots.iter().map(|p| p - 1).collect();

        let mut next = Self {
            u,
            v,
            u_slots,
            v_slots,
            log_scale: self.log_scale,
            step_count: self.step_count + 1,
            threshold: self.threshold,
            dim,
            neighbors: lmem,
        };
        if next.u_slots.contains(&1) {
            next = next.swapped();
        }
        Ok(next)
    }

    /// `U ← Vᵀ`, `V ← Uᵀ`, slot lists exchanged.
    fn swapped(self) -> Self {
        Self {
            u: self.v.transpose(),
            v: self.u.transpose(),
            u_slots: self.v_slots,
            v_slots: self.u_slots,
            step_count: 0,
            ..self
        }
    }

    /// SVD of `V` dropping `σ < ε σ_max`, left factors absorbed into `U`,
    /// then the same on `U` with the singular values absorbed into `V`.
    pub fn truncate(&self) -> Result<Self> {
        self.check()?;
        let eps = self.threshold;
        let right = thin_svd(&self.v)?;
        let r1 = right.kept_rank(eps);
        let mut a_sigma = right.u.columns(0, r1).into_owned();
        for (k, mut col) in a_sigma.column_iter_mut().enumerate() {
            col *= Complex64::new(right.sigma[k], 0.0);
        }
        let u1 = &self.u * a_sigma;
        let left = thin_svd(&u1)?;
        let r2 = left.kept_rank(eps);
        let u = left.u.columns(0, r2).into_owned();
        let mut inner = left.vh.rows(0, r2).into_owned();
        for (k, mut row) in inner.row_iter_mut().enumerate() {
            row *= Complex64::new(left.sigma[k], 0.0);
        }
        let mut v = inner * right.vh.rows(0, r1);
        let mut log_scale = self.log_scale;
        let top = left.sigma[0];
        if top > 0.0 && !(1.0 / SCALE_LIMIT..=SCALE_LIMIT).contains(&top) {
            v /= Complex64::new(top, 0.0);
            log_scale += top.ln();
        }
        Ok(Self {
            u,
            v,
            log_scale,
            u_slots: self.u_slots.clone(),
            v_slots: self.v_slots.clone(),
            ..*self
        })
    }

    /// Reassembles the dense tensor in the full-tensor layout.
    pub fn to_full(&self) -> Result<FullIF> {
        self.check()?;
        let elements = (self.dim as u128).pow(self.neighbors as u32);
        if elements > FULL_TENSOR_CAP as u128 {
            return Err(Error::Capacity {
                dim: self.dim,
                neighbors: self.neighbors,
                elements,
                cap: FULL_TENSOR_CAP,
            });
        }
        let product = &self.u * &self.v;
        let scale = self.log_scale.exp();
        let half = self.neighbors / 2;
        let mut values = vec![Complex64::new(0.0, 0.0); elements as usize];
        for col in 0..product.ncols() {
            let mut col_part = 0;
            for d in 0..half {
                col_part += digit(col, d, self.dim) * self.dim.pow((self.v_slots[d] - 1) as u32);
            }
            for row in 0..product.nrows() {
                let mut idx = col_part;
                for d in 0..half {
                    idx += digit(row, d, self.dim) * self.dim.pow((self.u_slots[d] - 1) as u32);
                }
                values[idx] = product[(row, col)] * scale;
            }
        }
        Ok(FullIF {
            values,
            neighbors: self.neighbors,
            dim: self.dim,
        })
    }

    /// `exp(𝒦_jj(0)) F_{0…0 j}`.
    pub fn readout(&self, factors: &QFactors, measure: usize) -> Result<Complex64> {
        if measure >= self.dim {
            return Err(Error::Domain(format!("measurement channel {measure} out of range")));
        }
        let d1 = self.first_digit()?;
        let col = measure * self.dim.pow(d1 as u32);
        let value = self.u.row(0).transpose().dot(&self.v.column(col));
        Ok(factors.self_term(measure) * value * self.log_scale.exp())
    }
}

/// Propagation followed by truncation.
pub fn step_compressed(state: &CompressedIF, factors: &QFactors) -> Result<CompressedIF> {
    state.apply_propagator(factors)?.truncate()
}

/// Readouts and memory diagnostics of one compressed run.
#[derive(Debug, Clone)]
pub struct CompressedRun {
    pub trace: PolarizationTrace,
    /// Inner rank after each step's truncation.
    pub ranks: Vec<usize>,
    /// Stored elements after each step's truncation.
    pub stored: Vec<usize>,
    /// Largest element count held between propagation and truncation.
    pub peak_working: usize,
}

impl CompressedRun {
    pub fn peak_stored(&self) -> usize {
        self.stored.iter().copied().max().unwrap_or(0)
    }
}

/// Runs `steps` readouts `P(t_n)`, `t_n = n·dt`, from a prepared cumulant table.
#[allow(clippy::too_many_arguments)]
pub fn run_with_table(
    spec: &SystemSpec,
    table: &CumulantTable,
    step: &StepMatrix,
    steps: usize,
    threshold: f64,
    excitation: usize,
    measure: usize,
) -> Result<CompressedRun> {
    let factors = QFactors::new(table, spec, step)?;
    let lmem = table.neighbors();
    let mut state = CompressedIF::initial(step, excitation, lmem, threshold)?;
    let mut values = Vec::with_capacity(steps);
    let mut ranks = Vec::with_capacity(steps);
    let mut stored = Vec::with_capacity(steps);
    let mut peak_working = state.stored_elements();
    for n in 0..steps {
        if n > 0 {
            let grown = state.apply_propagator(&factors)?;
            peak_working = peak_working.max(grown.stored_elements() + state.stored_elements());
            state = grown.truncate()?;
        }
        values.push(state.readout(&factors, measure)?);
        ranks.push(state.rank());
        stored.push(state.stored_elements());
    }
    let dt = step.dt;
    let trace = PolarizationTrace::new(
        (1..=steps).map(|n| n as f64 * dt).collect(),
        values,
        TraceMeta {
            neighbors: lmem,
            threshold,
            dt,
            excitation,
            measure,
        },
    )?;
    Ok(CompressedRun {
        trace,
        ranks,
        stored,
        peak_working,
    })
}

/// Builds the cumulant table and step matrix, then runs the compressed engine.
#[allow(clippy::too_many_arguments)]
pub fn run_polarization(
    spec: &SystemSpec,
    bath: &BathSpec,
    dt: f64,
    neighbors: usize,
    steps: usize,
    threshold: f64,
    excitation: usize,
    measure: usize,
) -> Result<CompressedRun> {
    if bath.num_baths() != spec.num_baths() {
        return Err(Error::Input(format!(
            "bath has {} dots but the system couples to {}",
            bath.num_baths(),
            spec.num_baths()
        )));
    }
    let table = build_cumulant_table(bath, dt, neighbors)?;
    let step = step_matrix(spec, dt)?;
    run_with_table(spec, &table, &step, steps, threshold, excitation, measure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_h0_case1, build_h0_case2};

    fn setup(lmem: usize, dt: f64) -> (SystemSpec, CumulantTable, StepMatrix, QFactors) {
        let spec = build_h0_case1(0.0, 0.0, 0.1);
        let bath = BathSpec::ingaas(50.0, 1, 0.0).unwrap();
        let table = build_cumulant_table(&bath, dt, lmem).unwrap();
        let step = step_matrix(&spec, dt).unwrap();
        let q = QFactors::new(&table, &spec, &step).unwrap();
        (spec, table, step, q)
    }

    #[test]
    fn initial_layout_l4() {
        let (_, _, step, _) = setup(4, 0.1);
        let s = CompressedIF::initial(&step, 1, 4, 0.0).unwrap();
        assert_eq!(s.u.shape(), (4, 1));
        assert!(s.u.iter().all(|&x| x == Complex64::new(1.0, 0.0)));
        let expect = [step.get(0, 1), step.get(1, 1), step.get(0, 1), step.get(1, 1)];
        for (c, e) in expect.iter().enumerate() {
            assert_eq!(s.v[(0, c)], *e);
        }
        assert_eq!(s.stored_elements(), 9);
    }

    #[test]
    fn odd_or_tiny_memory_rejected() {
        let (_, _, step, _) = setup(4, 0.1);
        assert!(CompressedIF::initial(&step, 1, 5, 0.0).is_err());
        assert!(CompressedIF::initial(&step, 1, 0, 0.0).is_err());
        assert!(CompressedIF::initial(&step, 1, 4, 1.0).is_err());
        assert!(CompressedIF::initial(&step, 1, 4, -1e-3).is_err());
    }

    #[test]
    fn three_channel_sides() {
        let spec = build_h0_case2(0.0, 0.0, 0.0, 0.5, 0.5);
        let step = step_matrix(&spec, 0.1).unwrap();
        let s = CompressedIF::initial(&step, 1, 6, 0.0).unwrap();
        assert_eq!(s.u.nrows(), 27);
        assert_eq!(s.v.ncols(), 27);
    }

    #[test]
    fn reconstruction_tracks_full_tensor() {
        let (_, _, step, q) = setup(4, 0.2);
        let mut s = CompressedIF::initial(&step, 1, 4, 0.0).unwrap();
        let mut f = FullIF::initial(&step, 1, 4).unwrap();
        for n in 0..9 {
            let rec = s.to_full().unwrap();
            for (a, b) in rec.values.iter().zip(&f.values) {
                assert!((a - b).norm() < 1e-14, "step {n}");
            }
            let g = s.apply_propagator(&q).unwrap();
            for mat in [&g.v, &g.u] {
                let r = crate::linalg::thin_svd(mat).unwrap();
                let k = r.sigma.len();
                let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(k, r.sigma.iter().map(|&x| Complex64::new(x,0.0))));
                let e = crate::linalg::max_abs_diff(&(r.u.clone()*d*r.vh.clone()), mat);
                let un = crate::linalg::max_abs_diff(&(r.u.adjoint()*r.u.clone()), &nalgebra::DMatrix::identity(k,k));
                if e > 1e-12 || un > 1e-12 { println!("shape {:?} err {e:e} unit {un:e} sig {:?}", mat.shape(), r.sigma); }
            }
            s = g.truncate().unwrap();
            f = f.propagate(&q).unwrap();
        }
    }

    #[test]
    fn untruncated_blocks_for_three_channels() {
        let spec = build_h0_case2(0.0, 0.0, 0.0, 0.5, 0.5);
        let bath = BathSpec::ingaas(20.0, 2, 5.0).unwrap();
        let table = build_cumulant_table(&bath, 0.15, 4).unwrap();
        let step = step_matrix(&spec, 0.15).unwrap();
        let q = QFactors::new(&table, &spec, &step).unwrap();
        let s = CompressedIF::initial(&step, 2, 4, 0.0).unwrap();
        let grown = s.apply_propagator(&q).unwrap();
        assert_eq!(grown.rank(), 3);
        let f = FullIF::initial(&step, 2, 4).unwrap().propagate(&q).unwrap();
        let rec = grown.to_full().unwrap();
        for (a, b) in rec.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn truncation_at_zero_threshold_preserves_tensor() {
        let (_, _, step, q) = setup(6, 0.15);
        let mut s = CompressedIF::initial(&step, 1, 6, 0.0).unwrap();
        for _ in 0..5 {
            s = s.apply_propagator(&q).unwrap();
            let before = s.to_full().unwrap();
            let after = s.truncate().unwrap().to_full().unwrap();
            for (a, b) in before.values.iter().zip(&after.values) {
                assert!((a - b).norm() < 1e-14);
            }
            s = s.truncate().unwrap();
        }
    }

    #[test]
    fn rank_one_stays_rank_one() {
        let (_, _, step, _) = setup(4, 0.1);
        let s = CompressedIF::initial(&step, 1, 4, 1e-8).unwrap();
        assert_eq!(s.truncate().unwrap().rank(), 1);
    }

    #[test]
    fn slots_cycle_and_swap() {
        let (_, _, step, q) = setup(8, 0.1);
        let mut s = CompressedIF::initial(&step, 1, 8, 1e-10).unwrap();
        for n in 1..=12 {
            s = step_compressed(&s, &q).unwrap();
            let mut all: Vec<usize> = s.u_slots.iter().chain(&s.v_slots).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (1..=8).collect::<Vec<_>>());
            assert!(s.v_slots.contains(&1));
            assert_eq!(s.step_count, n % 4);
        }
    }

    #[test]
    fn zero_coupling_rank_bounded_by_dim() {
        let spec = build_h0_case1(0.0, 0.0, 0.1);
        let bath = BathSpec::ingaas(50.0, 1, 0.0).unwrap().with_deformation_diff(0.0).unwrap();
        let run = run_polarization(&spec, &bath, 0.2, 8, 40, 1e-12, 1, 1).unwrap();
        assert!(run.ranks.iter().all(|&r| r <= 2));
    }

    #[test]
    fn log_scale_keeps_readout() {
        let (_, _, step, q) = setup(4, 0.2);
        let mut a = CompressedIF::initial(&step, 1, 4, 0.0).unwrap();
        for _ in 0..3 {
            a = step_compressed(&a, &q).unwrap();
        }
        let mut b = a.clone();
        b.v *= Complex64::new(1e-150, 0.0);
        b.log_scale += 1e150f64.ln();
        let b = step_compressed(&b, &q).unwrap();
        let a = step_compressed(&a, &q).unwrap();
        // the tiny scale was folded back into the prefactor
        assert!(b.log_scale.abs() < 10.0);
        assert!(b.v.camax() > 1e-10);
        let (ra, rb) = (a.readout(&q, 1).unwrap(), b.readout(&q, 1).unwrap());
        assert!((ra - rb).norm() < 1e-12 * ra.norm());
    }
}
