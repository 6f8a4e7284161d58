mod common;

use common::{int_matrix, random_spd_int, rational_cg_iterations, rng};
use gwsdp::arith::{ExtVector, PrecisionContext, EXPERIMENT_BITS};
use gwsdp::cg::{cg_solve, error_model, orthogonality_decay, sweet_spot, true_residual, CgConfig};
use gwsdp::linalg::SymMatrix;
use proptest::prelude::*;
use rand::Rng;

fn ctx(bits: u32) -> PrecisionContext {
    PrecisionContext::new(bits).unwrap()
}

fn cfg(tol: f64, max_iter: usize, bits: u32) -> CgConfig {
    CgConfig { tol, max_iter, ctx: ctx(bits), record_residuals: false }
}

fn hilbert(n: usize) -> SymMatrix<f64> {
    SymMatrix::from_fn_f64(n, |i, j| 1.0 / (i + j + 1) as f64)
}

fn off_diagonal_max(g: &[Vec<f64>]) -> f64 {
    let mut m = 0.0f64;
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j {
                m = m.max(v);
            }
        }
    }
    m
}

#[test]
fn diagonal_system_terminates_in_n_steps() {
    let m = SymMatrix::from_fn_f64(8, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
    let b = ExtVector::from_f64s(&[1.0; 8], ctx(256));
    let (y, rep) = cg_solve(&m, &b, &cfg(1e-30, 100, 256)).unwrap();
    assert!(rep.converged);
    assert!(rep.iterations <= 8);
    for (i, v) in y.to_f64s().iter().enumerate() {
        assert!((v - 1.0 / (i + 1) as f64).abs() < 1e-15);
    }
}

#[test]
fn hilbert_needs_precision() {
    let m = hilbert(12);
    let b = ExtVector::from_f64s(&[1.0; 12], ctx(512));
    let (_, hi) = cg_solve(&m, &b, &cfg(1e-10, 240, 512)).unwrap();
    assert!(hi.converged && hi.iterations <= 14, "512-bit: {} iterations", hi.iterations);
    let (_, lo) = cg_solve(&m, &b, &cfg(1e-10, 240, 64)).unwrap();
    assert!(!lo.converged || lo.iterations >= 3 * hi.iterations, "64-bit: {} iterations", lo.iterations);
}

#[test]
fn orthogonality_survives_at_1024_bits() {
    let m = SymMatrix::from_fn_f64(10, |i, j| if i == j { 4.0 } else if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
    let b = ExtVector::from_f64s(&(1..=10).map(|i| i as f64).collect::<Vec<_>>(), ctx(1024));
    let c = CgConfig { record_residuals: true, ..cfg(1e-6, 100, 1024) };
    let (_, rep) = cg_solve(&m, &b, &c).unwrap();
    let g = orthogonality_decay(&rep);
    assert_eq!(g.len(), rep.iterations);
    assert!(off_diagonal_max(&g) <= 1e-200);
}

#[test]
fn orthogonality_decays_on_ill_conditioned_systems() {
    let m = hilbert(12);
    let run = |bits| {
        let b = ExtVector::from_f64s(&[1.0; 12], ctx(bits));
        let c = CgConfig { record_residuals: true, ..cfg(1e-10, 60, bits) };
        off_diagonal_max(&orthogonality_decay(&cg_solve(&m, &b, &c).unwrap().1))
    };
    let lo = run(64);
    let hi = run(512);
    assert!(lo >= 1e-4, "64-bit loss {lo}");
    assert!(lo > hi, "64-bit {lo} vs 512-bit {hi}");
}

#[test]
fn zero_rhs_is_immediately_solved() {
    let b = ExtVector::zeros(3, ctx(64));
    let (y, rep) = cg_solve(&hilbert(3), &b, &cfg(1e-10, 10, 64)).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations, 0);
    assert!(y.iter().all(|v| v.is_zero()));
}

#[test]
fn indefinite_matrix_reports_breakdown() {
    let m = SymMatrix::from_rows_f64(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
    let b = ExtVector::from_f64s(&[0.0, 1.0], ctx(64));
    let (_, rep) = cg_solve(&m, &b, &cfg(1e-10, 10, 64)).unwrap();
    assert!(rep.breakdown && !rep.converged);
}

#[test]
fn error_model_and_sweet_spot() {
    let eps = ctx(64).unit_roundoff();
    let (e0, f0, t0) = error_model(0, 1e8, eps).unwrap();
    assert_eq!((e0, f0, t0), (1.0, 0.0, 1.0));
    let k = sweet_spot(1e8, eps, 100_000).unwrap();
    // Brute-force scan of the same objective.
    let mut best = (0u32, f64::INFINITY);
    for j in 0..=100_000u32 {
        let t = error_model(j, 1e8, eps).unwrap().2;
        if t < best.1 {
            best = (j, t);
        }
    }
    assert_eq!(k, best.0);
    assert!(k > 0);
    assert!(error_model(1, 0.5, eps).is_err());
    assert!(error_model(1, 10.0, 0.0).is_err());
}

#[test]
fn criterion_style_termination_sample() {
    let mut r = rng(42);
    for _ in 0..5 {
        let n = r.gen_range(2..=16);
        let a = random_spd_int(n, 1, &mut r);
        let b: Vec<i64> = (0..n).map(|_| r.gen_range(-5..=5)).collect();
        if b.iter().all(|&v| v == 0) {
            continue;
        }
        let oracle = rational_cg_iterations(&a, &b, 1e-10, 4 * n).unwrap();
        let bv = ExtVector::from_f64s(&b.iter().map(|&v| v as f64).collect::<Vec<_>>(), ctx(512));
        let (_, rep) = cg_solve(&int_matrix(&a), &bv, &cfg(1e-10, 4 * n, 512)).unwrap();
        assert!(rep.converged && rep.iterations <= n + 2);
        assert!(rep.iterations.abs_diff(oracle) <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn history_and_report_consistent(seed in any::<u64>(), n in 1usize..12, which in 0usize..5) {
        let bits = EXPERIMENT_BITS[which];
        let mut r = rng(seed);
        let a = random_spd_int(n, 2, &mut r);
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let bv = ExtVector::from_f64s(&b, ctx(bits));
        let m = int_matrix(&a);
        let (y, rep) = cg_solve(&m, &bv, &cfg(1e-8, 20 * n, bits)).unwrap();
        prop_assert_eq!(rep.residual_history.len(), rep.iterations);
        prop_assert!(rep.converged);
        prop_assert!(*rep.residual_history.last().unwrap() <= 1e-8);
        // The recursive residual tracks the true one.
        let truth = true_residual(&m, &bv, &y, ctx(bits)).unwrap();
        prop_assert!(truth <= 1e-6, "true residual {}", truth);
    }

    #[test]
    fn more_bits_never_hurts_much(seed in any::<u64>(), n in 4usize..14) {
        let mut r = rng(seed);
        let a = random_spd_int(n, 1, &mut r);
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let m = int_matrix(&a);
        let iters: Vec<usize> = [64, 256, 1024]
            .iter()
            .map(|&bits| cg_solve(&m, &ExtVector::from_f64s(&b, ctx(bits)), &cfg(1e-10, 40 * n, bits)).unwrap().1.iterations)
            .collect();
        prop_assert!(iters[1] <= iters[0] + 1 && iters[2] <= iters[1] + 1, "{:?}", iters);
    }

    #[test]
    fn error_model_total_is_sum(k in 0u32..1000, kappa in 1.0f64..1e12, e in 1e-300f64..1e-10) {
        let (a, b, t) = error_model(k, kappa, e).unwrap();
        prop_assert_eq!(t, a + b);
        let (a2, _, _) = error_model(k + 1, kappa, e).unwrap();
        prop_assert!(a2 <= a);
    }
}
