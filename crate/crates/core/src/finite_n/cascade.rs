use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MeanEstimate;
use crate::error::{arg, Error, Result};
use crate::quadrature::log_sum_exp;

pub const DEFAULT_TRUNCATION: usize = 2048;
const MAX_LEAVES: usize = 1 << 24;

/// How the mass of the Poisson points beyond the `M` largest is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMass {
    /// Drop the tail; retained leaf weights sum to one.
    Drop,
    /// Replace the tail of each vertex by its conditional expectation given the
    /// `M`-th arrival. The tail enters the normalization but carries no
    /// individual leaves, so it contributes nothing to overlap probabilities.
    #[default]
    Expected,
}

/// One truncated Poisson-Dirichlet cascade of depth `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSample {
    pub levels: Vec<f64>,
    pub m: usize,
    /// `masses[l - 1][u]`: normalized total weight below vertex `u` at depth `l`,
    /// vertices in lexicographic order. The last entry holds the leaf weights.
    pub masses: Vec<Vec<f64>>,
    /// Normalized weight assigned to truncated tails.
    pub tail: f64,
    /// Largest ratio of the `M`-th to the first decoration over all vertices.
    pub truncation: f64,
}

impl CascadeSample {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Leaf weights `v_alpha`.
    pub fn weights(&self) -> Vec<f64> {
        self.masses.last().cloned().unwrap_or_else(|| vec![1.0])
    }

    /// Probability that two leaves drawn from `v` share the ancestor at depth
    /// `level` (`1` at the root).
    pub fn agree_at_least(&self, level: usize) -> f64 {
        match level {
            0 => 1.0,
            l if l > self.depth() => 0.0,
            l => self.masses[l - 1].iter().map(|v| v * v).sum(),
        }
    }

    /// Probability that two independent leaves agree to depth exactly `level`.
    pub fn overlap(&self, level: usize) -> f64 {
        self.agree_at_least(level) - self.agree_at_least(level + 1)
    }
}

fn check_levels(levels: &[f64], m: usize) -> Result<()> {
    if levels.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
        return arg("cascade levels must lie in (0, 1)");
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return arg("cascade levels must be strictly increasing");
    }
    if m < 2 {
        return arg("truncation M must be at least 2");
    }
    if (m as u128).pow(levels.len() as u32) > MAX_LEAVES as u128 {
        return Err(Error::Unsupported(format!("M^k = {m}^{} leaves is too many", levels.len())));
    }
    Ok(())
}

/// Samples a cascade with the default tail handling.
pub fn sample_cascade(levels: &[f64], m: usize, seed: u64) -> Result<CascadeSample> {
    sample_cascade_with(levels, m, seed, 0, TailMass::default())
}

/// Samples a cascade from ChaCha8 stream `stream` of `seed`. Each vertex keeps
/// the `M` largest points `a_i^{-1/zeta}` of its Poisson process, with `a_i`
/// unit-rate arrival times.
pub fn sample_cascade_with(levels: &[f64], m: usize, seed: u64, stream: u64, tail: TailMass) -> Result<CascadeSample> {
    check_levels(levels, m)?;
    let k = levels.len();
    if k == 0 {
        return Ok(CascadeSample { levels: vec![], m, masses: vec![], tail: 0.0, truncation: 0.0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    // log decorations per depth, and the log of the expected tail mass of each parent
    let mut logd: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut log_tail: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut truncation = 0.0f64;
    let mut parents = 1usize;
    for &zeta in levels {
        let mut d = Vec::with_capacity(parents * m);
        let mut lt = Vec::with_capacity(parents);
        for _ in 0..parents {
            let mut a = 0.0;
            let mut first = 0.0;
            for i in 0..m {
                let e: f64 = Exp1.sample(&mut rng);
                a += e;
                if i == 0 {
                    first = a;
                }
                d.push(-a.ln() / zeta);
            }
            truncation = truncation.max((first / a).powf(1.0 / zeta));
            // E[sum_{i > M} a_i^{-1/zeta} | a_M] = zeta / (1 - zeta) a_M^{1 - 1/zeta}
            lt.push((zeta / (1.0 - zeta)).ln() + (1.0 - 1.0 / zeta) * a.ln());
        }
        logd.push(d);
        log_tail.push(lt);
        parents *= m;
    }

    // log subtree mass below each vertex, bottom-up; leaves have mass 1
    let mut log_sub: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
    log_sub[k] = vec![0.0; parents];
    for l in (0..k).rev() {
        let count = logd[l].len() / m;
        let mut s = Vec::with_capacity(count);
        for p in 0..count {
            let kids = p * m..(p + 1) * m;
            let retained = log_sum_exp(kids.clone().map(|c| logd[l][c] + log_sub[l + 1][c]));
            let v = match tail {
                TailMass::Drop => retained,
                TailMass::Expected => {
                    // a truncated child is credited with the mean subtree mass of its siblings
                    let mean_sub = log_sum_exp(kids.map(|c| log_sub[l + 1][c])) - (m as f64).ln();
                    log_sum_exp([retained, log_tail[l][p] + mean_sub])
                }
            };
            s.push(v);
        }
        log_sub[l] = s;
    }
    let log_z = log_sum_exp(log_sub[0].iter().copied());

    // top-down path products give normalized vertex masses
    let mut masses = Vec::with_capacity(k);
    let mut prefix = vec![0.0];
    for l in 0..k {
        let next: Vec<f64> = logd[l].iter().enumerate().map(|(c, d)| prefix[c / m] + d).collect();
        masses.push(next.iter().zip(&log_sub[l + 1]).map(|(p, s)| (p + s - log_z).exp()).collect::<Vec<f64>>());
        prefix = next;
    }
    let leaf_total: f64 = masses[k - 1].iter().sum();
    Ok(CascadeSample { levels: levels.to_vec(), m, masses, tail: (1.0 - leaf_total).max(0.0), truncation })
}

/// Mean and standard error of [`CascadeSample::overlap`] over a sample set.
pub fn overlap_statistic(samples: &[CascadeSample], level: usize) -> Result<MeanEstimate> {
    let first = samples.first().ok_or_else(|| Error::Argument("need at least one cascade sample".into()))?;
    if samples.iter().any(|s| s.levels != first.levels) {
        return arg("cascade samples have inconsistent levels");
    }
    if level > first.depth() {
        return arg(format!("level {level} exceeds cascade depth {}", first.depth()));
    }
    let v: Vec<f64> = samples.iter().map(|s| s.overlap(level)).collect();
    Ok(MeanEstimate::from_samples(&v))
}

/// Overlap estimates at every level `0..=k` from `replicas` independent
/// cascades (streams `0..replicas` of `seed`), without keeping the samples.
pub fn cascade_overlaps(levels: &[f64], m: usize, replicas: usize, seed: u64, tail: TailMass) -> Result<Vec<MeanEstimate>> {
    check_levels(levels, m)?;
    if replicas == 0 {
        return arg("need at least one replica");
    }
    let k = levels.len();
    let per: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| sample_cascade_with(levels, m, seed, r, tail).map(|s| (0..=k).map(|l| s.overlap(l)).collect()))
        .collect::<Result<_>>()?;
    Ok((0..=k)
        .map(|l| MeanEstimate::from_samples(&per.iter().map(|v| v[l]).collect::<Vec<_>>()))
        .collect())
}

/// Targets `zeta_{l+1} - zeta_l` with `zeta_0 = 0`, `zeta_{k+1} = 1`.
pub fn overlap_targets(levels: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0];
    z.extend_from_slice(levels);
    z.push(1.0);
    z.windows(2).map(|w| w[1] - w[0]).collect()
}
