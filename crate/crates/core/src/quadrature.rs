//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and probability weights of an `m`-point Gauss–Legendre rule for the
/// uniform distribution on `[lo, hi]`. Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn uniform(lo: f64, hi: f64, m: usize) -> Self {
        let (x, w) = legendre_rule(m);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let nodes = x.iter().map(|t| mid + half * t).collect();
        // reference weights sum to 2 on [-1, 1]; divide to get probability mass
        let weights = w.iter().map(|wi| 0.5 * wi).collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes (ascending) and weights on `[-1, 1]`, by Newton iteration on `P_m`.
fn legendre_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi's initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[m - 1 - i] = x;
        nodes[i] = -x;
        weights[m - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for m in [1, 2, 5, 64, 512] {
            let q = Quadrature::uniform(-1.0, 1.0, m);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "m={m} sum={s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let q = Quadrature::uniform(-1.0, 1.0, 8);
        // E[x^2] = 1/3, E[x^14] = 1/15 under uniform[-1,1]
        assert!((q.integrate(|x| x * x) - 1.0 / 3.0).abs() < 1e-14);
        assert!((q.integrate(|x| x.powi(14)) - 1.0 / 15.0).abs() < 1e-14);
        let q = Quadrature::uniform(0.0, 2.0, 4);
        assert!((q.integrate(|x| x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_ascending_inside_interval() {
        let q = Quadrature::uniform(-1.0, 1.0, 33);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(q.nodes[16].abs() < 1e-15);
    }
}
