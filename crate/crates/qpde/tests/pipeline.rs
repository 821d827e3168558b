//! End-to-end Schrödingerised solves checked against the dense matrix exponential.

use qpde::pipeline::{run_bs1d, run_heston_surface, AugmentationMode, Bs1dSetup, HestonSetup};
use qpde::schrodingerizer::Contraction;

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn small_bs() -> Bs1dSetup {
    let mut s = Bs1dSetup::reference();
    s.n = 4;
    s.sigma = 0.2;
    s
}

fn with(f: impl FnOnce(&mut Bs1dSetup)) -> Bs1dSetup {
    let mut s = small_bs();
    f(&mut s);
    s
}

#[test]
fn small_black_scholes_matches_the_matrix_exponential() {
    let r = run_bs1d(&small_bs()).unwrap();
    assert!(max_gap(&r.v_quantum, &r.v_expm) <= 1e-8);
    assert_eq!(r.v_quantum.len(), 16);
    assert!(r.solution.p_post.iter().all(|&p| p > 0.0 && p <= 1.0));
}

#[test]
fn register_and_scalar_augmentations_agree() {
    let scalar = run_bs1d(&small_bs()).unwrap();
    let register = run_bs1d(&with(|s| s.augmentation = AugmentationMode::Register)).unwrap();
    assert!(max_gap(&register.v_quantum, &scalar.v_quantum) <= 1e-9);
    assert!(register.solution.direction.len() > scalar.solution.direction.len());
}

#[test]
fn segmented_restarts_agree_with_a_single_segment() {
    let single = run_bs1d(&with(|s| s.schrodinger.segments = Some(1))).unwrap();
    for m in [2usize, 5] {
        let seg = run_bs1d(&with(|s| s.schrodinger.segments = Some(m))).unwrap();
        assert_eq!(seg.solution.segments, m);
        assert_eq!(seg.solution.p_post.len(), m);
        assert!(max_gap(&seg.v_quantum, &single.v_quantum) <= 1e-8);
        assert!(max_gap(&seg.v_quantum, &seg.v_expm) <= 1e-8);
    }
    assert!(run_bs1d(&with(|s| s.schrodinger.segments = Some(0))).is_err());
}

#[test]
fn solver_variants_stay_accurate() {
    let base = run_bs1d(&small_bs()).unwrap();
    let exact = run_bs1d(&with(|s| s.schrodinger.exact_lambda = true)).unwrap();
    assert!(exact.solution.lambda <= base.solution.lambda);
    assert!(max_gap(&exact.v_quantum, &exact.v_expm) <= 1e-4);
    let slice = run_bs1d(&with(|s| s.schrodinger.contraction = Contraction::Slice)).unwrap();
    assert!(max_gap(&slice.v_quantum, &slice.v_expm) <= 1e-8);
    let krylov = run_bs1d(&with(|s| s.schrodinger.dense_limit = 0)).unwrap();
    assert!(max_gap(&krylov.v_quantum, &base.v_quantum) <= 1e-9);
}

#[test]
fn small_heston_surface_matches_the_matrix_exponential() {
    let mut h = HestonSetup::reference();
    h.n_s = 3;
    h.n_v = 2;
    let r = run_heston_surface(&h).unwrap();
    assert_eq!(r.v_quantum.len(), 8 * 4);
    assert!(max_gap(&r.v_quantum, &r.v_expm) <= 1e-5);
}
