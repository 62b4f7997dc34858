//! Benchmarks for the hot kernels: closed-form rank probabilities, the
//! quadrature oracle, the loss family, per-pair gradients, and a full
//! desk-scale training run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tierank_core::{
    dpo_loss, generate_synthetic, pair_param_grad, quadrature_oracle, todo_pref_loss,
    todo_tie_loss, train, Beta, LogStrengthDiff, Margin, Method, PolicyTable, PreferencePair,
    TieParam, TrainConfig,
};

fn bench_rank_probabilities(c: &mut Criterion) {
    let tp = TieParam::new(0.5).unwrap();
    c.bench_function("tobt_probs_from_rewards", |b| {
        b.iter(|| {
            tierank_core::tobt_probs_from_rewards(black_box(1.3), black_box(-0.4), black_box(&tp))
        })
    });
    c.bench_function("quadrature_oracle", |b| {
        b.iter(|| {
            quadrature_oracle(
                black_box(LogStrengthDiff::new(0.7).unwrap()),
                black_box(&tp),
            )
            .unwrap()
        })
    });
}

fn bench_losses(c: &mut Criterion) {
    let tp = TieParam::new(0.5).unwrap();
    let m = Margin::new(0.3).unwrap();
    c.bench_function("dpo_loss", |b| b.iter(|| dpo_loss(black_box(m))));
    c.bench_function("todo_pref_loss", |b| {
        b.iter(|| todo_pref_loss(black_box(m), black_box(&tp)))
    });
    c.bench_function("todo_tie_loss", |b| {
        b.iter(|| todo_tie_loss(black_box(m), black_box(&tp)).unwrap())
    });
}

fn bench_pair_gradient(c: &mut Criterion) {
    let responses: Vec<String> = (0..4).map(|i| format!("r{i}")).collect();
    let registry = [("p".to_string(), responses)].into_iter().collect();
    let policy = PolicyTable::zeroed(&registry).unwrap();
    let pair = PreferencePair {
        prompt_id: "p".into(),
        y1_id: "r0".into(),
        y2_id: "r2".into(),
        score_1: None,
        score_2: None,
        is_tie: false,
    };
    let beta = Beta::new(0.01).unwrap();
    c.bench_function("pair_param_grad", |b| {
        b.iter(|| {
            pair_param_grad(
                black_box(&policy),
                black_box(&pair),
                -beta.value() * 0.62,
                beta.value() * 0.62,
            )
            .unwrap()
        })
    });
}

fn bench_training_run(c: &mut Criterion) {
    let tp = TieParam::new(0.5).unwrap();
    let (_, corpus) = generate_synthetic(50, 4, 1.0, &tp, 0.5, 7).unwrap();
    let reference = PolicyTable::zeroed(corpus.registry()).unwrap();
    let cfg = TrainConfig {
        method: Method::Todo,
        epochs: 1,
        seed: 3,
        ..TrainConfig::default()
    };
    c.bench_function("train_one_epoch_300_pairs", |b| {
        b.iter(|| train(black_box(&corpus), &reference, &reference, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_rank_probabilities,
    bench_losses,
    bench_pair_gradient,
    bench_training_run
);
criterion_main!(benches);
