use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use mfmes_core::acquisition::{select_next, AcquisitionOptions, CostVector};
use mfmes_core::entropy::{lemma1_entropy, EntropyInputs};
use mfmes_core::gp::{fit, kernel_eval, JointMoments};
use mfmes_core::rfm::{build_feature_map, sample_max_value, sample_posterior_weights};
use mfmes_core::{Dataset, Observation, QuadratureSpec, SlfmHyperparams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn theta() -> SlfmHyperparams {
    SlfmHyperparams::new(
        vec![vec![0.3, 0.4, 0.5], vec![0.8, 0.6, 0.7]],
        vec![vec![0.9, 0.95], vec![0.3, -0.2]],
        vec![vec![0.05, 0.02], vec![0.02, 0.05]],
        1e-6,
    )
    .unwrap()
}

fn data(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    Dataset::from_observations(
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                let y = (4.0 * x[0]).sin() + x[1] * x[2];
                Observation::new(x, usize::from(i % 3 == 0), y)
            })
            .collect(),
    )
    .unwrap()
}

fn points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect()
}

fn kernel(c: &mut Criterion) {
    let t = theta();
    let (a, b) = (vec![0.1, 0.2, 0.3], vec![0.4, 0.1, 0.9]);
    c.bench_function("kernel_eval", |bch| bch.iter(|| kernel_eval(&a, 0, &b, 1, &t).unwrap()));
}

fn gp_fit(c: &mut Criterion) {
    let t = theta();
    for n in [50, 200] {
        let d = data(n);
        c.bench_function(&format!("fit n={n}"), |bch| bch.iter(|| fit(&d, &t).unwrap()));
    }
}

fn rfm(c: &mut Criterion) {
    let t = theta();
    let model = fit(&data(100), &t).unwrap();
    let fm = build_feature_map(&t, 1000, 3).unwrap();
    let cands = points(2000, 4);
    c.bench_function("build_feature_map D=1000", |bch| bch.iter(|| build_feature_map(&t, 1000, 3).unwrap()));
    c.bench_function("posterior weights + max over 2000", |bch| {
        bch.iter_batched(
            || 7u64,
            |s| {
                let ws = sample_posterior_weights(&model, &fm, s).unwrap();
                sample_max_value(&ws, &fm, &cands).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

fn acquisition(c: &mut Criterion) {
    let model = fit(&data(100), &theta()).unwrap();
    let cands = points(2000, 5);
    let f_stars: Vec<f64> = (0..10).map(|i| 1.5 + 0.05 * i as f64).collect();
    let costs = CostVector::new(vec![1.0, 5.0]).unwrap();
    let opts = AcquisitionOptions::default();
    c.bench_function("select_next 2000 candidates x 2 fidelities", |bch| {
        bch.iter(|| select_next(&model, &cands, &f_stars, &costs, &opts).unwrap())
    });
}

fn entropy(c: &mut Criterion) {
    let q = QuadratureSpec::default();
    let inp = EntropyInputs::new(
        JointMoments { mu_m: 0.1, mu_target: 0.2, var_m: 0.8, var_target: 1.0, cov: 0.7 },
        0.9,
    );
    c.bench_function("two-variable truncated entropy", |bch| bch.iter(|| lemma1_entropy(&inp, &q).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernel, gp_fit, rfm, acquisition, entropy
}
criterion_main!(benches);
