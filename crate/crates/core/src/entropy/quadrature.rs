//! Deterministic fixed-rule quadrature on finite intervals.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureScheme {
    GaussLegendre,
    Simpson,
}

impl QuadratureScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuadratureScheme::GaussLegendre => "gauss-legendre",
            QuadratureScheme::Simpson => "simpson",
        }
    }
}

impl std::str::FromStr for QuadratureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-legendre" => Ok(Self::GaussLegendre),
            "simpson" => Ok(Self::Simpson),
            other => Err(Error::InvalidInput(format!("unknown quadrature scheme `{other}`"))),
        }
    }
}

/// Node count, integration half-width (in posterior standard deviations) and rule.
///
/// The node count applies per panel: integrands with interior features are
/// split at breakpoints and every panel receives the full rule.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    nodes: usize,
    half_width: f64,
    scheme: QuadratureScheme,
    // (abscissa on [-1, 1], weight)
    rule: Arc<[(f64, f64)]>,
}

impl PartialEq for QuadratureSpec {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.half_width == other.half_width && self.scheme == other.scheme
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::new(64, 8.0, QuadratureScheme::GaussLegendre).expect("default quadrature is valid")
    }
}

pub const MIN_NODES: usize = 16;
pub const MIN_HALF_WIDTH: f64 = 4.0;

impl QuadratureSpec {
    pub fn new(nodes: usize, half_width: f64, scheme: QuadratureScheme) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "quadrature needs at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        if !(half_width >= MIN_HALF_WIDTH) || !half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "quadrature half-width must be at least {MIN_HALF_WIDTH}, got {half_width}"
            )));
        }
        let rule: Vec<(f64, f64)> = match scheme {
            QuadratureScheme::GaussLegendre => gauss_legendre(nodes),
            QuadratureScheme::Simpson => simpson(nodes),
        };
        Ok(Self { nodes, half_width, scheme, rule: rule.into() })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn scheme(&self) -> QuadratureScheme {
        self.scheme
    }

    pub(crate) fn rule(&self) -> &[(f64, f64)] {
        &self.rule
    }
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let prev = z;
            z = prev - p1 / dp;
            if (z - prev).abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule[i] = (-z, w);
        rule[n - 1 - i] = (z, w);
    }
    rule
}

fn simpson(n: usize) -> Vec<(f64, f64)> {
    // Simpson needs an even number of intervals.
    let n = if n % 2 == 0 { n + 1 } else { n };
    let h = 2.0 / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (-1.0 + i as f64 * h, c * h / 3.0)
        })
        .collect()
}

fn panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, q: &QuadratureSpec) -> Result<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for &(z, w) in q.rule() {
        let node = mid + half * z;
        let v = f(node);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { node });
        }
        acc += w * v;
    }
    Ok(acc * half)
}

/// ∫ f over [center − halfwidth, center + halfwidth].
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    halfwidth: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    panel(&f, center - halfwidth, center + halfwidth, q)
}

/// ∫ f over [breaks[0], breaks[last]] with one panel per consecutive pair.
/// `breaks` must be sorted ascending.
pub fn integrate_panels<F: Fn(f64) -> f64>(f: F, breaks: &[f64], q: &QuadratureSpec) -> Result<f64> {
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        if pair[1] > pair[0] {
            total += panel(&f, pair[0], pair[1], q)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;

    #[test]
    fn rejects_invalid_specs() {
        assert!(QuadratureSpec::new(8, 8.0, QuadratureScheme::GaussLegendre).is_err());
        assert!(QuadratureSpec::new(64, 2.0, QuadratureScheme::GaussLegendre).is_err());
        assert!(QuadratureSpec::new(64, f64::NAN, QuadratureScheme::Simpson).is_err());
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [16, 33, 64, 128] {
            let q = QuadratureSpec::new(n, 8.0, QuadratureScheme::GaussLegendre).unwrap();
            let s: f64 = q.rule().iter().map(|r| r.1).sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn normal_pdf_integrates_to_one() {
        let q = QuadratureSpec::default();
        let v = integrate_1d(normal::pdf, 0.0, 8.0, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn odd_integrand_vanishes() {
        let q = QuadratureSpec::default();
        let v = integrate_1d(|x| x * normal::pdf(x), 0.0, 8.0, &q).unwrap();
        assert!(v.abs() < 1e-10, "{v}");
    }

    #[test]
    fn pdf_times_cdf_matches_antiderivative() {
        // d/dx ½Φ(x)² = φ(x)Φ(x), so the integral over [-8, 8] is ½(Φ(8)² − Φ(-8)²) ≈ ½.
        let q = QuadratureSpec::default();
        let v = integrate_1d(|x| normal::pdf(x) * normal::cdf(x), 0.0, 8.0, &q).unwrap();
        assert!((v - 0.5).abs() < 1e-8, "{v}");
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let q = QuadratureSpec::default();
        let err = integrate_1d(|x| if x > 0.0 { f64::NAN } else { 0.0 }, 0.0, 1.0, &q).unwrap_err();
        match err {
            Error::NonFiniteIntegrand { node } => assert!(node > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let q = QuadratureSpec::new(17, 4.0, QuadratureScheme::Simpson).unwrap();
        let v = integrate_1d(|x| x * x * x + x * x, 1.0, 1.0, &q).unwrap();
        // ∫_0^2 x³ + x² = 4 + 8/3
        assert!((v - (4.0 + 8.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn panels_add_up() {
        let q = QuadratureSpec::default();
        let whole = integrate_1d(normal::pdf, 0.0, 8.0, &q).unwrap();
        let split = integrate_panels(normal::pdf, &[-8.0, -1.0, 0.5, 8.0], &q).unwrap();
        assert!((whole - split).abs() < 1e-12);
    }
}
