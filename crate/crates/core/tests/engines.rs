//! Compressed engine against the full tensor, and invariants of the
//! factorized representation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use pathint::bath::{build_cumulant_table, BathSpec};
use pathint::compressed::{run_with_table, step_compressed, CompressedIF};
use pathint::oracle::{full_polarization, QFactors};
use pathint::system::{build_h0_case1, build_h0_case2, step_matrix, StepMatrix, SystemSpec};
use pathint::units::HBAR;

fn case1(g: f64) -> (SystemSpec, BathSpec) {
    (build_h0_case1(0.0, 0.0, g), BathSpec::ingaas(50.0, 1, 0.0).unwrap())
}

fn factors(spec: &SystemSpec, bath: &BathSpec, dt: f64, lmem: usize) -> (StepMatrix, QFactors) {
    let table = build_cumulant_table(bath, dt, lmem).unwrap();
    let step = step_matrix(spec, dt).unwrap();
    let q = QFactors::new(&table, spec, &step).unwrap();
    (step, q)
}

/// Unitary from the QR decomposition of an arbitrary square matrix.
fn unitary(entries: &[(f64, f64)], n: usize) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |i, j| {
        let (re, im) = entries[(i * n + j) % entries.len()];
        Complex64::new(re, im) + if i == j { Complex64::new(2.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    a.qr().q()
}

#[test]
fn dot_pair_matches_full_tensor() {
    let spec = build_h0_case2(0.3, -0.2, 0.0, 0.5, 0.4);
    let bath = BathSpec::ingaas(20.0, 2, 5.0).unwrap();
    for lmem in [2, 4, 6] {
        let dt = 2.4 / lmem as f64;
        let table = build_cumulant_table(&bath, dt, lmem).unwrap();
        let step = step_matrix(&spec, dt).unwrap();
        for (excitation, measure) in [(1, 1), (1, 2), (0, 2)] {
            let run = run_with_table(&spec, &table, &step, 40, 0.0, excitation, measure).unwrap();
            let full = full_polarization(&spec, &table, &step, excitation, measure, 40).unwrap();
            for (a, b) in run.trace.values.iter().zip(&full) {
                assert!((a - b).norm() < 1e-12, "L={lmem} ({excitation},{measure}): {a} vs {b}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    /// `U W · W†V` is the same tensor, so every later readout agrees.
    #[test]
    fn inner_gauge_does_not_change_readouts(
        half in 1usize..4,
        before in 1usize..12,
        entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64),
        eps in prop_oneof![Just(0.0), Just(1e-8)],
    ) {
        let lmem = 2 * half;
        let (spec, bath) = case1(0.1);
        let (step, q) = factors(&spec, &bath, 3.6 / lmem as f64, lmem);
        let mut a = CompressedIF::initial(&step, 1, lmem, eps).unwrap();
        for _ in 0..before {
            a = step_compressed(&a, &q).unwrap();
        }
        let w = unitary(&entries, a.rank());
        let mut b = a.clone();
        b.u = &a.u * &w;
        b.v = w.adjoint() * &a.v;
        for _ in 0..10 {
            let pa = a.readout(&q, 1).unwrap();
            let pb = b.readout(&q, 1).unwrap();
            prop_assert!((pa - pb).norm() < 1e-12, "{} vs {}", pa, pb);
            a = step_compressed(&a, &q).unwrap();
            b = step_compressed(&b, &q).unwrap();
        }
    }

    #[test]
    fn slots_and_storage_stay_consistent(
        half in 1usize..5,
        steps in 1usize..30,
        eps in prop_oneof![Just(0.0), Just(1e-8), Just(1e-3)],
        g in 0.05f64..2.0,
    ) {
        let lmem = 2 * half;
        let (spec, bath) = case1(g);
        let (step, q) = factors(&spec, &bath, 0.2, lmem);
        let mut s = CompressedIF::initial(&step, 1, lmem, eps).unwrap();
        let side = 2usize.pow(half as u32);
        for _ in 0..steps {
            s = step_compressed(&s, &q).unwrap();
            let mut all: Vec<usize> = s.u_slots.iter().chain(&s.v_slots).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (1..=lmem).collect::<Vec<_>>());
            prop_assert!(s.v_slots.contains(&1));
            prop_assert_eq!(s.u.nrows(), side);
            prop_assert_eq!(s.v.ncols(), side);
            prop_assert!(s.rank() >= 1 && s.rank() <= side);
            prop_assert_eq!(s.stored_elements(), 2 * side * s.rank() + s.rank());
        }
    }

    /// Shifting every level by `E` only multiplies `P(t)` by `e^{iEt/ħ}`.
    #[test]
    fn energy_shift_is_a_global_phase(
        shift in -2.0f64..2.0,
        g in 0.05f64..1.0,
        half in 1usize..4,
    ) {
        let lmem = 2 * half;
        let (spec, bath) = case1(g);
        let dt = 3.6 / lmem as f64;
        let table = build_cumulant_table(&bath, dt, lmem).unwrap();
        let base = run_with_table(&spec, &table, &step_matrix(&spec, dt).unwrap(), 30, 1e-8, 1, 1).unwrap();
        let moved_spec = spec.shifted(shift);
        let moved = run_with_table(&moved_spec, &table, &step_matrix(&moved_spec, dt).unwrap(), 30, 1e-8, 1, 1).unwrap();
        for ((t, p), m) in base.trace.times.iter().zip(&base.trace.values).zip(&moved.trace.values) {
            let expected = p * Complex64::from_polar(1.0, shift * t / HBAR);
            prop_assert!((m - expected).norm() < 1e-9, "t={}: {} vs {}", t, m, expected);
        }
    }

    #[test]
    fn zero_coupling_gives_rabi_cosine(
        g_uev in 50.0f64..3000.0,
        half in 1usize..6,
        eps in prop_oneof![Just(0.0), Just(1e-8), Just(1e-4)],
    ) {
        let lmem = 2 * half;
        let g = g_uev * 1e-3;
        let spec = build_h0_case1(0.0, 0.0, g);
        let bath = BathSpec::ingaas(50.0, 1, 0.0).unwrap().with_deformation_diff(0.0).unwrap();
        let dt = 0.05;
        let table = build_cumulant_table(&bath, dt, lmem).unwrap();
        let run = run_with_table(&spec, &table, &step_matrix(&spec, dt).unwrap(), 60, eps, 1, 1).unwrap();
        for (t, p) in run.trace.times.iter().zip(&run.trace.values) {
            prop_assert!((p.norm() - (g * t / HBAR).cos().abs()).abs() < 1e-12);
        }
        if eps > 0.0 {
            prop_assert!(run.ranks.iter().all(|&r| r <= 2));
        }
    }
}
