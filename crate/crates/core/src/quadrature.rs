//! Gauss-Hermite rules rescaled to integrate against the standard Gaussian.

use gauss_quad::GaussHermite;

use crate::error::{Error, Result};

/// Nodes and weights with `sum_i w_i f(z_i) ~ E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(n: usize) -> Result<Self> {
        let rule = GaussHermite::new(n).map_err(|e| Error::Argument(format!("Gauss-Hermite rule with {n} nodes: {e}")))?;
        let scale = std::f64::consts::PI.sqrt();
        let (nodes, weights) = rule
            .into_node_weight_pairs()
            .into_iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, w / scale))
            .unzip();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).sum()
    }

    /// `zeta^{-1} log E[exp(zeta f(Z))]`, computed with a max shift.
    /// `zeta = 0` is read as the plain expectation `E[f(Z)]`.
    pub fn log_moment(&self, zeta: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if zeta == 0.0 {
            return self.expect(f);
        }
        let vals: Vec<f64> = self.nodes.iter().map(|&z| zeta * f(z)).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vals.iter().zip(&self.weights).map(|(v, w)| w * (v - top).exp()).sum();
        (top + s.ln()) / zeta
    }
}

/// `log(sum_i exp(x_i))`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + v.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}
