//! Resource formulas against hand evaluations and structural identities.

use qpde::fdgrid::build_axis;
use qpde::pde_models::{assemble_bs1d, BsParams};
use qpde::resource_estimator::{
    advantage_ratio, classical_pde_cost, clifford_t, hamsim_cost, mc_cost, nxi_requirement, prep_costs, quantum_cost,
    readout_factor, CostModel, HamsimQuery, McStructure, McVariant, PrepKind, ResourceQuery, BANNER,
};

const LOG2_5: f64 = 2.321928094887362;

#[test]
fn multi_asset_black_scholes_hand_evaluation() {
    // d = 2, n = 5, n_ξ = 8, T = 1, Q_σ = 1.
    let prep = 8.0 * 5.0 + 4.0 * 5.0 * LOG2_5;
    let evolution = 2.0 * 1024.0 * (2.0 * 5.0 * LOG2_5 + 8.0 * 3.0 + 16.0 * 5.0);
    let total = (prep + evolution) * 32.0;
    let r = quantum_cost(&ResourceQuery::new(CostModel::BsMulti, 2, 5, 8, 1.0)).unwrap();
    assert!((r.state_prep / prep - 1.0).abs() < 1e-14);
    assert!((r.evolution / evolution - 1.0).abs() < 1e-14);
    assert_eq!(r.readout_factor, 32.0);
    assert!((r.end_to_end / total - 1.0).abs() < 1e-14);
    assert_eq!(r.banner, BANNER);
}

#[test]
fn heston_swaps_the_volatility_term_and_squares_the_readout() {
    let mut q = ResourceQuery::new(CostModel::HestonMulti, 2, 5, 8, 1.0);
    q.q_sigma = 7;
    let h = quantum_cost(&q).unwrap();
    let evolution = 2.0 * 1024.0 * (2.0 * 5.0 * LOG2_5 + 24.0 + 80.0);
    assert!((h.evolution / evolution - 1.0).abs() < 1e-14);
    let b = quantum_cost(&ResourceQuery::new(CostModel::BsMulti, 2, 5, 8, 1.0)).unwrap();
    assert_eq!(h.readout_factor / b.readout_factor, 2f64.powf(5.0));
    assert_eq!(readout_factor(CostModel::Bs1d, 1, 6), 8.0);
}

#[test]
fn one_asset_readout_and_ratio() {
    for n in 1..=12 {
        assert_eq!(readout_factor(CostModel::Bs1d, 1, n), 2f64.powf(n as f64 / 2.0));
        assert!((advantage_ratio(CostModel::Bs1d, 1, n) / 2f64.powf(n as f64 / 2.0) - 1.0).abs() < 1e-12);
        assert!((advantage_ratio(CostModel::Heston1d, 1, n) / 2f64.powi(n as i32) - 1.0).abs() < 1e-12);
    }
    assert_eq!(advantage_ratio(CostModel::HestonMulti, 4, 0), 1.0);
}

#[test]
fn classical_cost_examples() {
    for n in 1..10 {
        assert_eq!(classical_pde_cost(1, n, 1), 2f64.powi(3 * n as i32));
        assert_eq!(classical_pde_cost(4, n, 2), 4.0 * 2f64.powi(n as i32 * 6));
        // Doubling N multiplies by 2^{s+2}.
        for s in 1..5 {
            assert_eq!(classical_pde_cost(s, n + 1, 3) / classical_pde_cost(s, n, 3), 2f64.powi(s as i32 + 2));
        }
    }
}

#[test]
fn clifford_t_is_superlinear() {
    let c = clifford_t(1000.0, 1e-3).unwrap();
    assert!((c.leading - 79726.27427729669).abs() < 1e-6);
    for &cnt in &[10.0, 1e3, 1e6] {
        let a = clifford_t(cnt, 1e-6).unwrap().leading;
        let b = clifford_t(2.0 * cnt, 1e-6).unwrap().leading;
        assert!(b > 2.0 * a);
    }
}

#[test]
fn hamsim_matches_the_evolution_bracket() {
    for d in 1..=4u32 {
        for n in 2..=8u32 {
            let h = hamsim_cost(&HamsimQuery {
                d,
                n,
                n_xi: 6,
                t: 1.5,
                q_sigma: 3,
                eps: 1e-6,
                sigma_max: 1.0,
                h_max: None,
                log_correction: false,
            })
            .unwrap();
            let mut q = ResourceQuery::new(CostModel::BsMulti, d, n, 6, 1.5);
            q.q_sigma = 3;
            let e = quantum_cost(&q).unwrap().evolution;
            assert!((h / e - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn hamsim_log_correction_is_small() {
    for n in 6..=10 {
        for &t in &[1.0, 2.0] {
            for &eps in &[1e-3, 1e-8, 1e-12] {
                let q = HamsimQuery {
                    d: 1,
                    n,
                    n_xi: 4,
                    t,
                    q_sigma: 1,
                    eps,
                    sigma_max: 1.0,
                    h_max: None,
                    log_correction: true,
                };
                let with = hamsim_cost(&q).unwrap();
                let without = hamsim_cost(&HamsimQuery { log_correction: false, ..q }).unwrap();
                assert!((with - without) / with <= 0.05);
            }
        }
    }
}

#[test]
fn measured_generator_norm_follows_the_grid_scaling() {
    let sigma = 0.05;
    let p = BsParams::single(0.03, 1.0, sigma);
    let mut prev = 0.0;
    for n in 4..=7u32 {
        let axis = build_axis("S", 0.0, 120.0, n).unwrap();
        let sys = assemble_bs1d(&p, &axis, 60.0).unwrap();
        let measured = sys.a.max_abs();
        let model = sigma * sigma * 2f64.powi(2 * n as i32);
        let ratio = measured / model;
        assert!((0.25..=4.0).contains(&ratio), "n = {n}: ratio {ratio}");
        if prev > 0.0 {
            let growth = (measured / prev).log2();
            assert!((growth - 2.0).abs() < 0.2, "growth exponent {growth}");
        }
        prev = measured;
    }
}

#[test]
fn prep_table_rows() {
    let v = prep_costs(PrepKind::Vanilla, 1, 8).unwrap();
    assert_eq!((v.gates, v.filling_ratio, v.oaa_multiplier), (24.0, 1.0, 1.0));
    let w = prep_costs(PrepKind::WorstOf, 4, 8).unwrap();
    assert_eq!(w.gates, 16.0 * 8.0 + 4.0 * 24.0);
    assert_eq!(w.filling_ratio, 1.0 / 16.0);
    assert!((w.oaa_multiplier - 4.0).abs() < 1e-12);
    let s = prep_costs(PrepKind::Spread, 9, 8).unwrap();
    assert!((s.oaa_multiplier - 3.0).abs() < 1e-12);
    assert_eq!(prep_costs(PrepKind::BestOf, 3, 4).unwrap().oaa_multiplier, 1.0);
    assert_eq!(prep_costs(PrepKind::Cutoff, 1, 4).unwrap().gates, 8.0);
}

#[test]
fn monte_carlo_tables() {
    let mut q = ResourceQuery::new(CostModel::BsMulti, 3, 4, 4, 1.0);
    assert_eq!(mc_cost(&q).unwrap(), (9.0 * 2f64.powi(24), false));
    q.mc_structure = McStructure::Diagonal;
    q.mc_variant = McVariant::ExactBs;
    assert_eq!(mc_cost(&q).unwrap(), (3.0 * 2f64.powi(16), false));
    q.mc_structure = McStructure::Factor(2);
    q.mc_variant = McVariant::Mlmc;
    assert_eq!(mc_cost(&q).unwrap(), (6.0 * 2f64.powi(16), true));
}

#[test]
fn auxiliary_register_requirement() {
    assert_eq!(nxi_requirement(2f64.powi(-16)).unwrap(), 4);
    assert_eq!(nxi_requirement(0.25).unwrap(), 1);
    let mut last = u32::MAX;
    for i in 1..60 {
        let eps = 10f64.powf(-0.25 * i as f64);
        let q = nxi_requirement(eps).unwrap();
        assert!(q >= 1);
        assert!(last == u32::MAX || q >= last);
        last = q;
    }
}
