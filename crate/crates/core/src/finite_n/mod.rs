//! Finite-N ground truth: exhaustive enumeration for Ising mixed p-spin
//! models, the exact `N = 1` enriched free energy, and Poisson-Dirichlet
//! cascade sampling.

mod cascade;
mod disorder;
mod enriched;

use serde::{Deserialize, Serialize};

pub use cascade::{
    cascade_overlaps, overlap_statistic, overlap_targets, sample_cascade, sample_cascade_with, CascadeSample, TailMass,
    DEFAULT_TRUNCATION,
};
pub use disorder::{free_energy_plain, free_energy_samples, hamiltonian, sample_free_energy, DisorderSample, MAX_SPINS};
pub use enriched::{enriched_free_energy_n1, enriched_free_energy_n1_levels, DEFAULT_QUAD_NODES};

/// Sample mean with standard error `sd / sqrt(n)` (zero when `n = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error, n }
    }
}
