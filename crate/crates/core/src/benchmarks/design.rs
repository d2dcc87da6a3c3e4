//! Space-filling designs: Latin hypercube initial data and Halton candidate sets.

use rand::seq::index::sample;
use rand::Rng;

use super::MultiFidelityObjective;
use crate::error::{Error, Result};
use crate::gp::{Dataset, Observation};
use crate::rng::SeedTree;

const PRIMES: [u64; 20] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut r) = (inv, 0.0);
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `n` Halton points in [0, 1)^dim, starting at index `skip`.
pub fn halton(n: usize, dim: usize, skip: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dimensions", PRIMES.len());
    (0..n as u64)
        .map(|i| (0..dim).map(|k| radical_inverse(i + skip, PRIMES[k])).collect())
        .collect()
}

/// One point per stratum in every coordinate, strata permuted independently.
pub fn latin_hypercube<R: Rng + ?Sized>(n: usize, bounds: &[(f64, f64)], rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; bounds.len()]; n];
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for (i, p) in pts.iter_mut().enumerate() {
            let u = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
            p[k] = lo + u * (hi - lo);
        }
    }
    pts
}

pub fn nearest_in_pool(pool: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, p) in pool.iter().enumerate() {
        let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Initial observations: a Latin hypercube per fidelity, drawn from the
/// `"lhs-init"` stream and evaluated without noise. Pooled problems snap
/// each point to its nearest pool member.
pub fn latin_hypercube_init(objective: &dyn MultiFidelityObjective, seed: u64) -> Result<Dataset> {
    let counts = objective.init_counts();
    if counts.len() != objective.n_fidelities() {
        return Err(Error::InvalidInput(format!(
            "{} init counts for {} fidelities",
            counts.len(),
            objective.n_fidelities()
        )));
    }
    let mut rng = SeedTree::new(seed).stream("lhs-init");
    let mut data = Dataset::new();
    for (m, &n) in counts.iter().enumerate() {
        for x in latin_hypercube(n, objective.bounds(), &mut rng) {
            let x = match objective.pool() {
                Some(pool) => pool[nearest_in_pool(pool, &x)].clone(),
                None => x,
            };
            let y = objective.evaluate(&x, m)?;
            data.push(Observation::new(x, m, y))?;
        }
    }
    Ok(data)
}

/// Candidates for the acquisition argmax. Continuous problems get `n`
/// Halton points under a random shift drawn from the `"candidates"` stream;
/// pooled problems use the pool, subsampled to `n` when larger.
pub fn candidate_set(objective: &dyn MultiFidelityObjective, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("candidate count must be positive".into()));
    }
    let mut rng = SeedTree::new(seed).stream("candidates");
    if let Some(pool) = objective.pool() {
        if pool.len() <= n {
            return Ok(pool.to_vec());
        }
        let mut idx = sample(&mut rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        return Ok(idx.into_iter().map(|i| pool[i].clone()).collect());
    }
    let bounds = objective.bounds();
    let shift: Vec<f64> = (0..bounds.len()).map(|_| rng.random::<f64>()).collect();
    Ok(halton(n, bounds.len(), 1)
        .into_iter()
        .map(|u| {
            u.iter()
                .zip(&shift)
                .zip(bounds)
                .map(|((v, s), (lo, hi))| lo + (v + s).fract() * (hi - lo))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::StyblinskiTang;
    use crate::rng::stream_from_seed;

    #[test]
    fn halton_first_points() {
        let h = halton(4, 2, 1);
        assert_eq!(h[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(h[1], vec![0.25, 2.0 / 3.0]);
        assert_eq!(h[2], vec![0.75, 1.0 / 9.0]);
    }

    #[test]
    fn lhs_one_point_per_stratum() {
        let b = [(-5.0, 5.0), (0.0, 1.0), (2.0, 3.0)];
        let pts = latin_hypercube(17, &b, &mut stream_from_seed(3));
        for (k, &(lo, hi)) in b.iter().enumerate() {
            let mut seen = vec![false; 17];
            for p in &pts {
                let s = (((p[k] - lo) / (hi - lo)) * 17.0).floor() as usize;
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
    }

    #[test]
    fn init_counts_and_determinism() {
        let st = StyblinskiTang::new(true);
        let a = latin_hypercube_init(&st, 11).unwrap();
        let b = latin_hypercube_init(&st, 11).unwrap();
        assert_eq!(a.len(), 18);
        assert_eq!(a.observations().iter().filter(|o| o.m == 0).count(), 10);
        for (o, p) in a.observations().iter().zip(b.observations()) {
            assert_eq!(o.x, p.x);
        }
        let c = latin_hypercube_init(&st, 12).unwrap();
        assert_ne!(a.observations()[0].x, c.observations()[0].x);
    }

    #[test]
    fn candidates_in_bounds() {
        let st = StyblinskiTang::new(true);
        let c = candidate_set(&st, 500, 4).unwrap();
        assert_eq!(c.len(), 500);
        assert!(c.iter().flatten().all(|v| (-5.0..=5.0).contains(v)));
        assert_eq!(c, candidate_set(&st, 500, 4).unwrap());
    }
}
