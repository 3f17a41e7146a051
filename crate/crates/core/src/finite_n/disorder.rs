use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MeanEstimate;
use crate::error::{arg, Result};
use crate::mixture::MixtureSpec;

/// Exhaustive enumeration is limited to `2^22` configurations.
pub const MAX_SPINS: usize = 22;
const MAX_TENSOR_ENTRIES: usize = 1 << 26;

/// Gaussian coupling tensors `J^{(p)}` of shape `N^p`, one per degree with
/// `beta_p > 0`, drawn from ChaCha8 stream `stream` of `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSample {
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    /// `(p, beta_p, J)` with `J` in row-major order.
    pub tensors: Vec<(u32, f64, Vec<f64>)>,
}

impl DisorderSample {
    pub fn generate(m: &MixtureSpec, n: usize, seed: u64) -> Result<Self> {
        Self::generate_stream(m, n, seed, 0)
    }

    pub fn generate_stream(m: &MixtureSpec, n: usize, seed: u64, stream: u64) -> Result<Self> {
        if n == 0 {
            return arg("N must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut tensors = Vec::new();
        for (&p, &beta) in m.coeffs() {
            let len = (n as u128).pow(p);
            if len > MAX_TENSOR_ENTRIES as u128 {
                return arg(format!("coupling tensor N^p = {n}^{p} is too large"));
            }
            let j: Vec<f64> = (0..len as usize).map(|_| StandardNormal.sample(&mut rng)).collect();
            tensors.push((p, beta, j));
        }
        Ok(Self { n, seed, stream, tensors })
    }

    /// Coefficients `c_S` of `H(sigma) = sum_S c_S prod_{i in S} sigma_i` over
    /// subsets `S` encoded as bit masks (using `sigma_i^2 = 1`).
    pub fn monomials(&self) -> Vec<(u32, f64)> {
        let n = self.n;
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (p, beta, j) in &self.tensors {
            let scale = beta.sqrt() * (n as f64).powf(-((*p as f64) - 1.0) / 2.0);
            for (idx, &v) in j.iter().enumerate() {
                let mut rest = idx;
                let mut mask = 0u32;
                for _ in 0..*p {
                    mask ^= 1 << (rest % n);
                    rest /= n;
                }
                *acc.entry(mask).or_insert(0.0) += scale * v;
            }
        }
        acc.into_iter().collect()
    }
}

/// `H_N(sigma) = sum_p sqrt(beta_p) N^{-(p-1)/2} sum J_{i_1..i_p} sigma_{i_1}..sigma_{i_p}`.
pub fn hamiltonian(d: &DisorderSample, sigma: &[i8]) -> Result<f64> {
    let n = d.n;
    if sigma.len() != n {
        return arg(format!("spin vector has length {}, expected {n}", sigma.len()));
    }
    if sigma.iter().any(|&s| s != 1 && s != -1) {
        return arg("spins must be +1 or -1");
    }
    let mut h = 0.0;
    for (p, beta, j) in &d.tensors {
        let scale = beta.sqrt() * (n as f64).powf(-((*p as f64) - 1.0) / 2.0);
        let mut s = 0.0;
        for (idx, &v) in j.iter().enumerate() {
            let mut rest = idx;
            let mut sign = 1i8;
            for _ in 0..*p {
                sign *= sigma[rest % n];
                rest /= n;
            }
            s += v * sign as f64;
        }
        h += scale * s;
    }
    Ok(h)
}

/// `-(1/N) [log sum_sigma exp(sqrt(2t) H_N(sigma)) - N t xi(1) - N log 2]` for
/// one disorder sample, by Gray-code enumeration of `{-1, 1}^N`.
pub fn sample_free_energy(d: &DisorderSample, m: &MixtureSpec, t: f64) -> Result<f64> {
    let n = d.n;
    if !(1..=MAX_SPINS).contains(&n) {
        return arg(format!("N must be in 1..={MAX_SPINS}, got {n}"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return arg(format!("t must be finite and >= 0, got {t}"));
    }
    let beta = (2.0 * t).sqrt();
    let monos = d.monomials();
    let mut terms: Vec<f64> = monos.iter().map(|m| m.1).collect();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, (mask, _)) in monos.iter().enumerate() {
        for (i, list) in touching.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                list.push(idx);
            }
        }
    }
    // start from sigma = (1, ..., 1)
    let mut h: f64 = terms.iter().sum();
    let mut top = beta * h;
    let mut sum = 1.0;
    for g in 1u64..(1u64 << n) {
        let k = g.trailing_zeros() as usize;
        for &idx in &touching[k] {
            h -= 2.0 * terms[idx];
            terms[idx] = -terms[idx];
        }
        let x = beta * h;
        if x > top {
            sum = sum * (top - x).exp() + 1.0;
            top = x;
        } else {
            sum += (x - top).exp();
        }
    }
    let lse = top + sum.ln();
    let norm = ((1u64 << n) as f64).ln();
    Ok(-(lse - n as f64 * t * m.xi(1.0) - norm) / n as f64)
}

/// Per-sample free energies for disorder streams `0..n_samples` of `seed`.
pub fn free_energy_samples(m: &MixtureSpec, n: usize, t: f64, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if !(1..=MAX_SPINS).contains(&n) {
        return arg(format!("N must be in 1..={MAX_SPINS}, got {n}"));
    }
    if n_samples == 0 {
        return arg("need at least one disorder sample");
    }
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let d = DisorderSample::generate_stream(m, n, seed, i)?;
            sample_free_energy(&d, m, t)
        })
        .collect()
}

/// Disorder-averaged free energy with its standard error.
pub fn free_energy_plain(m: &MixtureSpec, n: usize, t: f64, n_samples: usize, seed: u64) -> Result<MeanEstimate> {
    Ok(MeanEstimate::from_samples(&free_energy_samples(m, n, t, n_samples, seed)?))
}
