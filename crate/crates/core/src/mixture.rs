//! The mixture function `xi(r) = sum_p beta_p r^p` of a mixed p-spin model
//! and its convex dual `xi*(s) = sup_{r >= 0} (r s - xi(r))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

const DUAL_MAX_ITER: usize = 200;
const DUAL_RTOL: f64 = 1e-12;

/// Sparse polynomial with nonnegative coefficients and no constant or linear term.
///
/// Serialized as a JSON object mapping decimal degrees to coefficients,
/// e.g. `{"2": 0.5, "4": 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u32, f64>", into = "BTreeMap<u32, f64>")]
pub struct MixtureSpec {
    coeffs: BTreeMap<u32, f64>,
    // dense[p] = beta_p, used for Horner evaluation
    dense: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(coeffs: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, beta) in coeffs {
            if p < 2 {
                return arg(format!("mixture degree {p} must be at least 2"));
            }
            if !beta.is_finite() || beta < 0.0 {
                return arg(format!("mixture coefficient for degree {p} must be finite and >= 0, got {beta}"));
            }
            if beta > 0.0 {
                *map.entry(p).or_insert(0.0) += beta;
            }
        }
        if map.is_empty() {
            return arg("mixture must have at least one positive coefficient");
        }
        let max_deg = *map.keys().next_back().unwrap() as usize;
        let mut dense = vec![0.0; max_deg + 1];
        for (&p, &beta) in &map {
            dense[p as usize] = beta;
        }
        Ok(Self { coeffs: map, dense })
    }

    /// The Sherrington-Kirkpatrick mixture `xi(r) = r^2`.
    pub fn sk() -> Self {
        Self::new([(2, 1.0)]).expect("valid mixture")
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, f64> {
        &self.coeffs
    }

    pub fn max_degree(&self) -> u32 {
        *self.coeffs.keys().next_back().unwrap()
    }

    /// True when every degree with a nonzero coefficient is even.
    pub fn is_even(&self) -> bool {
        self.coeffs.keys().all(|p| p % 2 == 0)
    }

    pub fn is_normalized(&self) -> bool {
        (self.xi(1.0) - 1.0).abs() <= 1e-12
    }

    /// `xi`, `xi'` or `xi''` at `r`, selected by `order`.
    pub fn evaluate(&self, r: f64, order: u32) -> Result<f64> {
        match order {
            0 => Ok(self.xi(r)),
            1 => Ok(self.xi_prime(r)),
            2 => Ok(self.xi_second(r)),
            _ => arg(format!("derivative order must be 0, 1 or 2, got {order}")),
        }
    }

    pub fn xi(&self, r: f64) -> f64 {
        self.dense.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    pub fn xi_prime(&self, r: f64) -> f64 {
        self.dense
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (p, &c)| acc * r + p as f64 * c)
    }

    pub fn xi_second(&self, r: f64) -> f64 {
        self.dense
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (p, &c)| acc * r + (p * (p - 1)) as f64 * c)
    }

    /// Rescale so that `xi(1) = 1`. Idempotent.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.xi(1.0);
        if !(total > 0.0) {
            return arg("cannot normalize an all-zero mixture");
        }
        if (total - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(self.clone());
        }
        Self::new(self.coeffs.iter().map(|(&p, &b)| (p, b / total)))
    }

    /// The maximizer `r* >= 0` of `r s - xi(r)`, i.e. the root of `xi'(r) = s`
    /// for `s > 0` and `0` otherwise.
    pub fn dual_argmax(&self, s: f64) -> Result<f64> {
        if s.is_nan() {
            return arg("dual evaluated at NaN");
        }
        if s <= 0.0 {
            return Ok(0.0);
        }
        if s.is_infinite() {
            return Err(Error::Numerical("dual evaluated at +inf".into()));
        }
        // xi' is increasing on [0, inf) with xi'(0) = 0, so doubling brackets the root.
        let mut hi = 1.0;
        let mut lo = 0.0;
        let mut doublings = 0;
        while self.xi_prime(hi) < s {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > DUAL_MAX_ITER {
                return Err(Error::Numerical(format!("could not bracket xi'(r) = {s}")));
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..DUAL_MAX_ITER {
            let f = self.xi_prime(r) - s;
            if f == 0.0 {
                return Ok(r);
            }
            if f > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let d = self.xi_second(r);
            let newton = if d > 0.0 { r - f / d } else { f64::NAN };
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let step = (next - r).abs();
            r = next;
            if step <= DUAL_RTOL * r.max(f64::MIN_POSITIVE) || hi - lo <= DUAL_RTOL * hi {
                return Ok(r);
            }
        }
        Err(Error::Numerical(format!("dual root search did not converge at s = {s}")))
    }

    /// Convex dual `xi*(s)`.
    pub fn dual(&self, s: f64) -> Result<f64> {
        let r = self.dual_argmax(s)?;
        Ok((r * s - self.xi(r)).max(0.0))
    }
}

impl TryFrom<BTreeMap<u32, f64>> for MixtureSpec {
    type Error = Error;

    fn try_from(map: BTreeMap<u32, f64>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<MixtureSpec> for BTreeMap<u32, f64> {
    fn from(m: MixtureSpec) -> Self {
        m.coeffs
    }
}
