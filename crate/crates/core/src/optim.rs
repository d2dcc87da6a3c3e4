//! Derivative-free maximization on the unit cube.

const INITIAL_STEP: f64 = 0.15;

/// Bounded Nelder–Mead maximization of `f` on [0,1]^p starting at `x0`.
/// Proposals are clamped into the cube. Stops after `budget` evaluations
/// or when the simplex values agree to 1e-10 relative.
pub fn nelder_mead_max(f: &impl Fn(&[f64]) -> f64, x0: &[f64], budget: usize) -> (f64, Vec<f64>) {
    nelder_mead_max_step(f, x0, budget, INITIAL_STEP)
}

pub fn nelder_mead_max_step(f: &impl Fn(&[f64]) -> f64, x0: &[f64], budget: usize, step: f64) -> (f64, Vec<f64>) {
    let p = x0.len();
    let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(p + 1);
    simplex.push((eval(x0, &mut evals), x0.to_vec()));
    for i in 0..p {
        let mut x = x0.to_vec();
        x[i] = if x[i] + step <= 1.0 { x[i] + step } else { x[i] - step };
        simplex.push((eval(&x, &mut evals), x));
    }
    while evals + 2 <= budget {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        if (simplex[p].0 - simplex[0].0).abs() <= 1e-10 * (1.0 + simplex[0].0.abs()) {
            break;
        }
        let mut centroid = vec![0.0; p];
        for (_, x) in &simplex[..p] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / p as f64;
            }
        }
        let worst = simplex[p].clone();
        let along = |t: f64| clamp(centroid.iter().zip(&worst.1).map(|(c, w)| c + t * (c - w)).collect());
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].0 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[p] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[p - 1].0 {
            simplex[p] = (fr, xr);
        } else {
            let t = if fr < worst.0 { 0.5 } else { -0.5 };
            let xc = along(t);
            let fc = eval(&xc, &mut evals);
            if fc < worst.0.min(fr) {
                simplex[p] = (fc, xc);
            } else {
                let best = simplex[0].1.clone();
                for (fv, x) in simplex.iter_mut().skip(1) {
                    if evals >= budget {
                        break;
                    }
                    *x = best.iter().zip(x.iter()).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    *fv = eval(x, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (v, x) = simplex.swap_remove(0);
    (-v, x)
}
