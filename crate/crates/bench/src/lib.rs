//! Shared inputs for the benchmarks.

use parisi_hj::{DiscreteMeasure, MixtureSpec};

pub fn mixed_2_4() -> MixtureSpec {
    MixtureSpec::new([(2, 0.5), (4, 0.5)]).unwrap()
}

/// Measures with 1, 2 and 4 atoms below `q_max = 0.8`.
pub fn measures() -> Vec<(usize, DiscreteMeasure)> {
    vec![
        (1, DiscreteMeasure::dirac(0.5).unwrap()),
        (2, DiscreteMeasure::new(&[0.2, 0.8], &[0.4, 0.6]).unwrap()),
        (4, DiscreteMeasure::new(&[0.1, 0.3, 0.55, 0.8], &[0.2, 0.3, 0.3, 0.2]).unwrap()),
    ]
}
