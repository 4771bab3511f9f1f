//! Phonon-free system Hamiltonian and its single-step propagator.
//!
//! Channel 0 is always the cavity photon, which does not couple to phonons.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::HBAR;

const HERMITIAN_TOL: f64 = 1e-12;

/// Hamiltonian `H0` (meV) and the weights `w[channel][bath]` selecting which
/// phonon bath each channel feels.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    h0: DMatrix<Complex64>,
    coupling_weights: DMatrix<f64>,
}

impl SystemSpec {
    pub fn new(h0: DMatrix<Complex64>, coupling_weights: DMatrix<f64>) -> Result<Self> {
        let dim = h0.nrows();
        if dim == 0 || h0.ncols() != dim {
            return Err(Error::Input(format!("H0 must be square and non-empty, got {}x{}", h0.nrows(), h0.ncols())));
        }
        if coupling_weights.nrows() != dim || coupling_weights.ncols() == 0 {
            return Err(Error::Input(format!(
                "coupling weights must have one row per channel ({dim}), got {}x{}",
                coupling_weights.nrows(),
                coupling_weights.ncols()
            )));
        }
        let scale = h0.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..dim {
            for j in 0..dim {
                if (h0[(i, j)] - h0[(j, i)].conj()).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::Input(format!("H0 is not Hermitian at ({i}, {j})")));
                }
            }
        }
        if coupling_weights.row(0).iter().any(|&w| w != 0.0) {
            return Err(Error::Input("channel 0 (cavity) must not couple to phonons".into()));
        }
        Ok(Self { h0, coupling_weights })
    }

    /// Basis size J.
    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn num_baths(&self) -> usize {
        self.coupling_weights.ncols()
    }

    pub fn h0(&self) -> &DMatrix<Complex64> {
        &self.h0
    }

    pub fn coupling_weights(&self) -> &DMatrix<f64> {
        &self.coupling_weights
    }

    pub fn weight(&self, channel: usize, bath: usize) -> f64 {
        self.coupling_weights[(channel, bath)]
    }

    /// The same system with `energy` subtracted from every diagonal entry.
    pub fn shifted(&self, energy: f64) -> Self {
        let mut h0 = self.h0.clone();
        for i in 0..self.dim() {
            h0[(i, i)] -= Complex64::new(energy, 0.0);
        }
        Self {
            h0,
            coupling_weights: self.coupling_weights.clone(),
        }
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let eig = SymmetricEigen::new(self.h0.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }
}

/// QD–cavity Hamiltonian in the |0⟩ (cavity), |1⟩ (exciton) basis.
pub fn build_h0_case1(omega_x: f64, omega_c: f64, g: f64) -> SystemSpec {
    let c = |x: f64| Complex64::new(x, 0.0);
    let h0 = DMatrix::from_row_slice(2, 2, &[c(omega_c), c(g), c(g), c(omega_x)]);
    let w = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    SystemSpec::new(h0, w).expect("case-1 Hamiltonian is Hermitian by construction")
}

/// Two dots sharing one cavity, basis |0⟩ (cavity), |1⟩, |2⟩ (excitons).
pub fn build_h0_case2(omega1: f64, omega2: f64, omega_c: f64, g1: f64, g2: f64) -> SystemSpec {
    let c = |x: f64| Complex64::new(x, 0.0);
    #[rustfmt::skip]
    let h0 = DMatrix::from_row_slice(3, 3, &[
        c(omega_c), c(g1),     c(g2),
        c(g1),      c(omega1), c(0.0),
        c(g2),      c(0.0),    c(omega2),
    ]);
    let w = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    SystemSpec::new(h0, w).expect("case-2 Hamiltonian is Hermitian by construction")
}

/// `M = exp(-i H0 Δt / ħ)` together with its step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMatrix {
    pub m: DMatrix<Complex64>,
    pub dt: f64,
}

impl StepMatrix {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }
}

pub fn step_matrix(spec: &SystemSpec, dt: f64) -> Result<StepMatrix> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("time step must be > 0, got {dt}")));
    }
    let eig = SymmetricEigen::new(spec.h0.clone());
    let phases = DVector::from_iterator(
        spec.dim(),
        eig.eigenvalues.iter().map(|&e| Complex64::new(0.0, -e * dt / HBAR).exp()),
    );
    let v = &eig.eigenvectors;
    let m = v * DMatrix::from_diagonal(&phases) * v.adjoint();
    Ok(StepMatrix { m, dt })
}
