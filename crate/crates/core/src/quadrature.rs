//! Gauss-Legendre rules on the unit interval.

use std::f64::consts::PI;

/// An `order`-point Gauss-Legendre rule mapped to `(0, 1)`. All nodes are
/// interior.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be >= 1");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // on (0, 1): t = (1 - x) / 2 gives ascending nodes
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.5;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + len * t))
            .sum::<f64>()
            * len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_one_and_nodes_interior() {
        for n in 1..=40 {
            let rule = GaussLegendre::new(n);
            assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert!(rule.nodes.iter().all(|&t| t > 0.0 && t < 1.0));
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..=20 {
            let rule = GaussLegendre::new(n);
            for d in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |t| t.powi(d as i32));
                assert_relative_eq!(got, 1.0 / (d as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn known_two_point_rule() {
        let rule = GaussLegendre::new(2);
        let off = 0.5 / 3f64.sqrt();
        assert_relative_eq!(rule.nodes[0], 0.5 - off, epsilon = 1e-15);
        assert_relative_eq!(rule.nodes[1], 0.5 + off, epsilon = 1e-15);
        assert_relative_eq!(rule.weights[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn sub_interval() {
        let rule = GaussLegendre::new(8);
        assert_relative_eq!(rule.integrate(1.0, 3.0, |t| t * t), 26.0 / 3.0, epsilon = 1e-13);
    }
}
