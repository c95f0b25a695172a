//! Same workloads under both builds. Run once with default features and once
//! with `--no-default-features`; the group name carries the mode so criterion
//! keeps the two baselines apart.
//!
//!     cargo bench -p dkcolor
//!     cargo bench -p dkcolor --no-default-features

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dkcolor::decomposition::GenParams;
use dkcolor::lll::{evaluate_events, finalize_events, BadEvent, EventKind, EventModel, View};
use dkcolor::runner::{load, run_instance, RunConfig};
use dkcolor::stats::{lemma32_statistic, random_family, MarkingSpec};
use dkcolor::{par, NodeRng};
use rand::Rng;

struct Zeros {
    rng: NodeRng,
}

impl EventModel for Zeros {
    type Value = u32;

    fn sample(&self, var: usize, attempt: u32) -> u32 {
        self.rng.stream(var, 1, attempt as u64).gen_range(0..4)
    }

    fn holds(&self, ev: &BadEvent, view: &View<'_, u32>) -> bool {
        ev.vbl.iter().all(|&x| view.get(x) == Some(&0))
    }
}

fn mode() -> &'static str {
    if par::is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn events(c: &mut Criterion) {
    let n = 200_000;
    let model = Zeros { rng: NodeRng::new(3) };
    let evs = finalize_events((0..n - 4).map(|i| BadEvent::new(EventKind::Custom(0), i, (i..i + 4).collect())).collect());
    let values: Vec<Option<u32>> = (0..n).map(|v| Some(model.sample(v, 0))).collect();
    let mut g = c.benchmark_group(format!("events/{}", mode()));
    g.bench_function("evaluate_200k", |b| b.iter(|| evaluate_events(&model, black_box(&evs), &values).unwrap()));
    g.finish();
}

fn marking(c: &mut Criterion) {
    let spec = MarkingSpec::at_bound(64);
    let fam = random_family(&spec, 64 * spec.q, 1).unwrap();
    let mut g = c.benchmark_group(format!("marking/{}", mode()));
    g.bench_function("lemma32_10k", |b| b.iter(|| lemma32_statistic(black_box(&fam), &spec, 10_000, 2).unwrap()));
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let cfg = RunConfig::generated(GenParams::mixed(5000, 64, 7), 7);
    let inst = load(&cfg).unwrap();
    let mut g = c.benchmark_group(format!("pipeline/{}", mode()));
    g.sample_size(10);
    g.bench_function("mixed_5000_d64", |b| b.iter(|| run_instance(black_box(&inst), &cfg)));
    g.finish();
}

criterion_group!(benches, events, marking, pipeline);
criterion_main!(benches);
