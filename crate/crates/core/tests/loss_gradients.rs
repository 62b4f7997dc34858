//! Analytic-derivative checks for every objective: central finite
//! differences, reductions, symmetries, and consistency with the ternary
//! rank masses.

use tierank_core::{
    dpo_loss, g_weight, gradient_disagreement, tobt_probs_from_rewards, todo_loss, todo_pref_loss,
    todo_tie_loss, LossGrad, Margin, TieIndicator, TieParam,
};

fn mu(v: f64) -> Margin {
    Margin::new(v).unwrap()
}

fn tp(a: f64) -> TieParam {
    TieParam::new(a).unwrap()
}

fn mu_grid() -> Vec<f64> {
    // -10.0 to 10.0 in steps of 0.25
    (0..=80).map(|i| -10.0 + i as f64 * 0.25).collect()
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn assert_derivative_matches(name: &str, f: impl Fn(f64) -> LossGrad) {
    const H: f64 = 1e-5;
    const REL_TOL: f64 = 1e-6;
    for v in mu_grid() {
        let lg = f(v);
        let numeric = central_diff(|x| f(x).loss, v, H);
        let err = gradient_disagreement(lg.dloss_dmu, numeric);
        assert!(
            err <= REL_TOL,
            "{name}: derivative mismatch at mu={v}: analytic={}, numeric={numeric}, rel={err}",
            lg.dloss_dmu
        );
    }
}

#[test]
fn dpo_derivative_matches_finite_differences() {
    assert_derivative_matches("dpo", |v| dpo_loss(mu(v)));
}

#[test]
fn pref_derivative_matches_finite_differences() {
    for a in [0.1, 0.5, 0.8] {
        let t = tp(a);
        assert_derivative_matches("pref", move |v| todo_pref_loss(mu(v), &t));
    }
}

#[test]
fn tie_derivative_matches_finite_differences() {
    for a in [0.1, 0.5, 0.8] {
        let t = tp(a);
        assert_derivative_matches("tie", move |v| todo_tie_loss(mu(v), &t).unwrap());
    }
}

#[test]
fn dpo_reduction_on_dense_grid() {
    let t = tp(0.0);
    for i in 0..1000 {
        let v = -10.0 + i as f64 * 20.0 / 999.0;
        let a = todo_pref_loss(mu(v), &t);
        let b = dpo_loss(mu(v));
        assert!((a.loss - b.loss).abs() <= 1e-12);
        assert!((a.dloss_dmu - b.dloss_dmu).abs() <= 1e-12);
    }
}

#[test]
fn frozen_loss_values() {
    let lg = dpo_loss(mu(0.0));
    assert!((lg.loss - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(lg.dloss_dmu, -0.5);

    assert!((dpo_loss(mu(10.0)).loss - 4.539889921686465e-5).abs() < 1e-18);
    let deep = dpo_loss(mu(-700.0));
    assert!(deep.loss.is_finite() && (deep.loss - 700.0).abs() < 1e-9);

    let pref = todo_pref_loss(mu(0.0), &tp(0.5));
    assert!((pref.loss - 0.9740769841801067).abs() < 1e-15);

    let tie_lg = todo_tie_loss(mu(0.0), &tp(0.5)).unwrap();
    assert!((tie_lg.loss - 1.4068291137472952).abs() < 1e-12);
    assert_eq!(tie_lg.dloss_dmu, 0.0);

    let tie_at_one = todo_tie_loss(mu(1.0), &tp(0.5)).unwrap();
    assert!((tie_at_one.dloss_dmu - 0.4400338073954982).abs() < 1e-12);

    assert!((g_weight(mu(1.0), &tp(0.5)) + 0.4400338073954982).abs() < 1e-12);
}

#[test]
fn tie_loss_evenness_on_grid() {
    let t = tp(0.5);
    for v in mu_grid() {
        let a = todo_tie_loss(mu(v), &t).unwrap().loss;
        let b = todo_tie_loss(mu(-v), &t).unwrap().loss;
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn g_weight_properties() {
    for a in [0.1, 0.5, 0.8] {
        let t = tp(a);
        assert!(g_weight(mu(0.0), &t).abs() <= 1e-15);
        // oddness and strict monotone decrease on a 0.05 grid over [-10, 10]
        let mut last = f64::INFINITY;
        for i in 0..=400 {
            let v = -10.0 + i as f64 * 0.05;
            let g = g_weight(mu(v), &t);
            assert!((g + g_weight(mu(-v), &t)).abs() <= 1e-12);
            assert!(g < last, "g_weight not strictly decreasing at mu={v}");
            last = g;
        }
    }
}

#[test]
fn g_weight_negates_tie_derivative() {
    for a in [0.1, 0.5, 0.8] {
        let t = tp(a);
        for v in mu_grid() {
            let g = g_weight(mu(v), &t);
            let d = todo_tie_loss(mu(v), &t).unwrap().dloss_dmu;
            assert_eq!(g, -d);
        }
    }
}

#[test]
fn pref_gradient_dominates_dpo_for_positive_alpha() {
    for a in [0.1, 0.5, 0.8] {
        let t = tp(a);
        for v in mu_grid() {
            let pref_w = todo_pref_loss(mu(v), &t).dloss_dmu.abs();
            let dpo_w = dpo_loss(mu(v)).dloss_dmu.abs();
            assert!(
                pref_w > dpo_w,
                "expected strictly larger preference weight at mu={v}, alpha={a}"
            );
        }
    }
}

#[test]
fn losses_are_negative_log_rank_masses() {
    for a in [0.1, 0.5, 0.8, 2.0] {
        let t = tp(a);
        for v in [-6.0, -1.3, 0.0, 0.4, 3.2, 7.5] {
            let probs = tobt_probs_from_rewards(v, 0.0, &t);
            let pref = todo_pref_loss(mu(v), &t).loss;
            assert!((((-pref).exp()) - probs.prefer()).abs() <= 1e-10);
            let tie = todo_tie_loss(mu(v), &t).unwrap().loss;
            assert!((((-tie).exp()) - probs.tie()).abs() <= 1e-10);
        }
    }
}

#[test]
fn todo_loss_batch_mean_is_indicator_weighted() {
    let t = tp(0.5);
    let margins = [-1.2, -0.3, 0.0, 0.8, 2.5];
    let flags = [true, false, false, true, false];
    let mut mixed = 0.0;
    let mut by_parts = 0.0;
    for (&v, &f) in margins.iter().zip(&flags) {
        mixed += todo_loss(mu(v), TieIndicator::new(f), &t).unwrap().loss;
        by_parts += if f {
            todo_tie_loss(mu(v), &t).unwrap().loss
        } else {
            todo_pref_loss(mu(v), &t).loss
        };
    }
    assert_eq!(mixed, by_parts);
}
