//! Sequential vs data-parallel execution of the main workloads.

use std::hint::black_box;

use bayes_ergm::adjust::{simulated_hessian, AplSettings};
use bayes_ergm::pseudo::DyadDesign;
use bayes_ergm::rng::{stream, Domain};
use bayes_ergm::sampler::TieSampler;
use bayes_ergm::{
    bgof, exchange_fit, parse_formula, validate, Attribute, Execution, ExchangeSettings, GaussianPrior, GofSettings,
    Graph, Model, PosteriorSample,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn network(n: usize, seed: u64) -> (Model, Graph) {
    let mut rng = stream(seed, Domain::Simulate, 0);
    let age = (0..n).map(|_| f64::from(rng.gen_range(20..70u32))).collect();
    let office = (0..n).map(|_| ["a", "b", "c"][rng.gen_range(0..3)].to_string()).collect();
    let g = Graph::empty(n, false)
        .with_attribute("age", Attribute::Numeric(age))
        .unwrap()
        .with_attribute("office", Attribute::Categorical(office))
        .unwrap();
    let spec = parse_formula(r#"edges + nodematch("office") + absdiff("age") + gwesp(0.5, fixed = TRUE)"#).unwrap();
    let model = validate(&spec, &g, &[]).unwrap();
    let mut y = g.clone();
    TieSampler::new(&model, &[-3.0, 0.8, -0.02, 0.4]).unwrap().run(&mut y, 50 * n * n, &mut rng);
    (model, y)
}

fn exchange(c: &mut Criterion) {
    let (model, g) = network(36, 1);
    let prior = GaussianPrior::isotropic(vec![0.0; 4], 100.0).unwrap();
    let mut group = c.benchmark_group("exchange_fit");
    group.sample_size(10);
    for (name, execution) in MODES {
        let s = ExchangeSettings { burn_in: 0, main_iters: 100, aux_iters: 2500, nchains: Some(8), execution, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exchange_fit(&model, &g, &prior, black_box(&s)).unwrap())
        });
    }
    group.finish();
}

fn pseudo_likelihood(c: &mut Criterion) {
    let (model, g) = network(400, 2);
    let theta = [-3.0, 0.8, -0.02, 0.4];
    let mut group = c.benchmark_group("log_pl");
    for (name, execution) in MODES {
        let design = DyadDesign::new(&model, &g).with_execution(execution);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| design.log_pl(black_box(&theta))));
    }
    group.finish();
}

fn curvature(c: &mut Criterion) {
    let (model, g) = network(60, 3);
    let theta = [-3.0, 0.8, -0.02, 0.4];
    let mut group = c.benchmark_group("simulated_hessian");
    group.sample_size(10);
    for (name, execution) in MODES {
        let s = AplSettings { curvature_draws: 320, aux_iters: 2500, execution, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulated_hessian(&model, &g, black_box(&theta), &s).unwrap())
        });
    }
    group.finish();
}

fn goodness_of_fit(c: &mut Criterion) {
    let (model, g) = network(60, 4);
    let sample = PosteriorSample {
        names: model.free_names(),
        nchains: 1,
        iterations: 1,
        draws: vec![vec![-3.0, 0.8, -0.02, 0.4]],
        acceptance_rate: 0.0,
        imputed_networks: vec![],
    };
    let mut group = c.benchmark_group("bgof");
    group.sample_size(10);
    for (name, execution) in MODES {
        let s = GofSettings { sample_size: 100, aux_iters: 5000, execution, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bgof(&sample, &model, &g, black_box(&s)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, exchange, pseudo_likelihood, curvature, goodness_of_fit);
criterion_main!(benches);
