use super::*;
use crate::gp::{fit, Dataset, Observation, SlfmHyperparams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn theta() -> SlfmHyperparams {
    SlfmHyperparams::new(
        vec![vec![0.25, 0.3], vec![0.5, 0.2]],
        vec![vec![0.9, 0.95], vec![0.4, -0.2]],
        vec![vec![0.05, 0.02], vec![0.02, 0.05]],
        1e-6,
    )
    .unwrap()
}

fn data(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dataset::from_observations(
        (0..n)
            .map(|_| {
                let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                let m = rng.random_range(0..2);
                let y = (4.0 * x[0]).sin() * (3.0 * x[1]).cos() - 0.2 * (1 - m) as f64;
                Observation::new(x, m, y)
            })
            .collect(),
    )
    .unwrap()
}

fn grid(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![((i * 7) % n) as f64 / n as f64, (i as f64 + 0.5) / n as f64]).collect()
}

// normal CDF straight from libm, not through crate::normal
fn phi_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn cost_vector_validation() {
    assert!(CostVector::new(vec![1.0, 5.0]).is_ok());
    assert!(CostVector::new(vec![5.0, 1.0]).is_err());
    assert!(CostVector::new(vec![0.0, 1.0]).is_err());
    assert!(CostVector::new(vec![]).is_err());
}

#[test]
fn unbinding_truncation_gives_no_information() {
    let model = fit(&data(1, 12), &theta()).unwrap();
    let x = [0.4, 0.6];
    let (mu, var) = model.predict(&x, 1).unwrap();
    let q = QuadratureSpec::default();
    for m in 0..2 {
        let g = info_gain(&model, &x, m, &[mu + 100.0 * var.sqrt(), 1e6], &q).unwrap();
        assert!(g.abs() <= 1e-6, "m={m}: {g}");
    }
}

#[test]
fn target_fidelity_at_the_mean_is_ln2() {
    let model = fit(&data(2, 12), &theta()).unwrap();
    let x = [0.3, 0.3];
    let (mu, _) = model.predict(&x, 1).unwrap();
    let g = info_gain(&model, &x, 1, &[mu], &QuadratureSpec::default()).unwrap();
    assert!((g - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn lower_fidelity_matches_rejection_oracle() {
    // moments with correlation 0.9 and f* at the target mean
    let (vm, vt, rho) = (0.7f64, 1.2f64, 0.9f64);
    let cov = rho * (vm * vt).sqrt();
    let j = JointMoments { mu_m: 0.3, mu_target: -0.1, var_m: vm, var_target: vt, cov };
    let f_star = -0.1;
    let g = info_gain_from_moments(&j, false, 1.0, &[f_star], &QuadratureSpec::default(), None).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (sm, st) = (vm.sqrt(), vt.sqrt());
    let s_cond = (vt - cov * cov / vm).sqrt();
    let z_norm = phi_cdf((f_star - j.mu_target) / st);
    let mut vals = Vec::new();
    while vals.len() < 200_000 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let fm = j.mu_m + sm * a;
        let ft = j.mu_target + st * (rho * a + (1.0 - rho * rho).sqrt() * b);
        if ft > f_star {
            continue;
        }
        let u = j.mu_target + cov / vm * (fm - j.mu_m);
        let dens = (-0.5 * a * a).exp() / (sm * (2.0 * std::f64::consts::PI).sqrt())
            * phi_cdf((f_star - u) / s_cond)
            / z_norm;
        vals.push(-dens.ln());
    }
    let n = vals.len() as f64;
    let h1 = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - h1).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let oracle = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * vm).ln() - h1;
    assert!((g - oracle).abs() <= 3.0 * se, "{g} vs {oracle} ± {se}");
}

#[test]
fn straight_line_rescoring() {
    let model = fit(&data(3, 15), &theta()).unwrap();
    let cands = grid(50);
    let costs = CostVector::new(vec![1.0, 5.0]).unwrap();
    let f_stars = [1.1, 1.4, 0.9];
    let opts = AcquisitionOptions { keep_scores: true, ..Default::default() };
    let res = select_next(&model, &cands, &f_stars, &costs, &opts).unwrap();
    let table = res.scores.as_ref().unwrap();
    let q = QuadratureSpec::default();
    let mut best = f64::NEG_INFINITY;
    for m in 0..2 {
        for (i, x) in cands.iter().enumerate() {
            let j = model.predict_joint(x, m).unwrap();
            let h0 = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * j.var_m).ln();
            let mut h1 = 0.0;
            for &f in &f_stars {
                h1 += if m == 1 {
                    truncnorm_entropy(j.mu_target, j.var_target.sqrt(), f).unwrap()
                } else {
                    lemma1_entropy(&EntropyInputs::new(j, f), &q).unwrap()
                };
            }
            let s = (h0 - h1 / 3.0) / costs.get(m);
            assert!((s - table[m][i]).abs() < 1e-9, "m={m} i={i}");
            best = best.max(s);
        }
    }
    assert_eq!(res.value, best);
    assert_eq!(table[res.m][res.index], res.value);
}

#[test]
fn cost_scaling_and_permutation_invariance() {
    let model = fit(&data(4, 14), &theta()).unwrap();
    let cands = grid(30);
    let costs = CostVector::new(vec![1.0, 5.0]).unwrap();
    let f_stars = [1.2, 0.8];
    let opts = AcquisitionOptions::default();
    let a = select_next(&model, &cands, &f_stars, &costs, &opts).unwrap();
    let b = select_next(&model, &cands, &f_stars, &costs.scaled(7.5).unwrap(), &opts).unwrap();
    assert_eq!((a.index, a.m), (b.index, b.m));
    let mut rev = cands.clone();
    rev.reverse();
    let c = select_next(&model, &rev, &f_stars, &costs, &opts).unwrap();
    assert_eq!((c.x.clone(), c.m), (a.x.clone(), a.m));
    assert_eq!(c.value, a.value);
}

#[test]
fn ties_prefer_lower_fidelity_then_lower_index() {
    assert_eq!(argmax_table(&[vec![0.5, 0.5], vec![0.5, 0.2]]), (0, 0, 0.5));
    assert_eq!(argmax_table(&[vec![0.1, 0.2], vec![0.2, 0.2]]), (0, 1, 0.2));
    // duplicated candidate: the first copy wins
    let model = fit(&data(5, 10), &theta()).unwrap();
    let c = vec![vec![0.2, 0.8], vec![0.2, 0.8]];
    let r = select_next(&model, &c, &[1.0], &CostVector::new(vec![1.0, 5.0]).unwrap(), &Default::default()).unwrap();
    assert_eq!(r.index, 0);
}

#[test]
fn single_fidelity_is_mes() {
    let t = SlfmHyperparams::new(vec![vec![0.3, 0.3]], vec![vec![1.0]], vec![vec![0.01]], 1e-6).unwrap();
    let d = Dataset::from_observations(
        data(6, 12).observations().iter().map(|o| Observation::new(o.x.clone(), 0, o.y)).collect(),
    )
    .unwrap();
    let model = fit(&d, &t).unwrap();
    let cands = grid(40);
    let f_stars = [1.3, 1.0, 1.6];
    let costs = CostVector::new(vec![2.0]).unwrap();
    let opts = AcquisitionOptions { keep_scores: true, ..Default::default() };
    let res = select_next(&model, &cands, &f_stars, &costs, &opts).unwrap();
    for (i, x) in cands.iter().enumerate() {
        let (mu, var) = model.predict(x, 0).unwrap();
        let s = var.sqrt();
        let mes: f64 = f_stars
            .iter()
            .map(|f| {
                let g = (f - mu) / s;
                let pdf = (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let cdf = phi_cdf(g);
                g * pdf / (2.0 * cdf) - cdf.ln()
            })
            .sum::<f64>()
            / 3.0
            / 2.0;
        assert!((res.scores.as_ref().unwrap()[0][i] - mes).abs() < 1e-9);
    }
}

#[test]
fn observed_point_and_nonnegativity() {
    let d = data(7, 16);
    let model = fit(&d, &theta()).unwrap();
    let q = QuadratureSpec::default();
    for o in d.observations().iter().take(4) {
        let g = info_gain(&model, &o.x, o.m, &[0.5, 1.0], &q).unwrap();
        assert!(g <= 1e-4, "{g}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let f: f64 = rng.random_range(-1.0..2.0);
        for m in 0..2 {
            assert!(info_gain(&model, &x, m, &[f], &q).unwrap() >= -1e-6);
        }
    }
}

#[test]
fn noisy_variant_is_below_noiseless() {
    let mut noisy_theta = theta();
    noisy_theta.noise_variance = 0.05;
    let noisy_model = fit(&data(8, 10), &noisy_theta).unwrap();
    let x = [0.55, 0.45];
    let j = noisy_model.predict_joint(&x, 0).unwrap();
    let q = QuadratureSpec::default();
    let clean = info_gain_from_moments(&j, false, 1.0, &[0.9], &q, None).unwrap();
    let noisy = info_gain_from_moments(&j, false, 1.0, &[0.9], &q, Some(0.05)).unwrap();
    assert!(noisy <= clean + 1e-9 && noisy >= -1e-6);
}
