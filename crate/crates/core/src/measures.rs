//! Finitely supported probability measures on `[0, inf)` and the
//! quantile coupling between them.
//!
//! On the half-line the monotone (quantile) coupling `(F_mu^{-1}(U), F_nu^{-1}(U))`
//! with `U` uniform is optimal for every convex cost of `y - x`, so every transport
//! quantity here is a finite sum over the intervals of a [`CommonRefinement`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::mixture::MixtureSpec;

/// Tolerance under which two cumulative levels are treated as the same breakpoint.
const LEVEL_TOL: f64 = 1e-13;

/// Finitely supported probability measure with strictly ascending atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        canonicalize(&raw.atoms, &raw.weights)
    }
}

/// Sort atoms, merge repeated atoms, drop zero weights and renormalize.
pub fn canonicalize(atoms: &[f64], weights: &[f64]) -> Result<DiscreteMeasure> {
    if atoms.is_empty() {
        return arg("measure needs at least one atom");
    }
    if atoms.len() != weights.len() {
        return arg(format!("{} atoms but {} weights", atoms.len(), weights.len()));
    }
    if let Some(a) = atoms.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return arg(format!("atoms must be finite and nonnegative, got {a}"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return arg(format!("weights must be finite and nonnegative, got {w}"));
    }
    let mut pairs: Vec<(f64, f64)> = atoms.iter().copied().zip(weights.iter().copied()).filter(|p| p.1 > 0.0).collect();
    if pairs.is_empty() {
        return arg("total weight must be positive");
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out_atoms: Vec<f64> = Vec::with_capacity(pairs.len());
    let mut out_weights: Vec<f64> = Vec::with_capacity(pairs.len());
    for (a, w) in pairs {
        match out_atoms.last() {
            Some(&last) if last == a => *out_weights.last_mut().unwrap() += w,
            _ => {
                out_atoms.push(a);
                out_weights.push(w);
            }
        }
    }
    let total: f64 = out_weights.iter().sum();
    if (total - 1.0).abs() > f64::EPSILON {
        out_weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(DiscreteMeasure { atoms: out_atoms, weights: out_weights })
}

impl DiscreteMeasure {
    pub fn new(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        canonicalize(atoms, weights)
    }

    pub fn dirac(q: f64) -> Result<Self> {
        canonicalize(&[q], &[1.0])
    }

    /// Empirical measure `k^{-1} sum_l delta_{x_l}`.
    pub fn empirical(points: &[f64]) -> Result<Self> {
        let w = vec![1.0; points.len()];
        canonicalize(points, &w)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }

    /// Cumulative weights `mu([0, q_l])`; the last entry is exactly 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut cum: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cum.last_mut().unwrap() = 1.0;
        cum
    }

    /// Levels `zeta_0 = 0 < zeta_1 < ... < zeta_{k+1} = 1` with atom `q_l`
    /// carrying weight `zeta_{l+1} - zeta_l`.
    pub fn zeta_levels(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.len() + 1);
        z.push(0.0);
        z.extend(self.cumulative());
        z
    }

    /// `mu([0, s])`.
    pub fn cdf(&self, s: f64) -> f64 {
        let n = self.atoms.partition_point(|&a| a <= s);
        if n == 0 {
            0.0
        } else {
            self.cumulative()[n - 1]
        }
    }

    /// `F^{-1}(r) = inf { s >= 0 : mu([0, s]) > r }` for `r` in `[0, 1)`.
    pub fn quantile(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return arg(format!("quantile level must lie in [0, 1), got {r}"));
        }
        let cum = self.cumulative();
        let idx = cum.iter().position(|&c| c > r).unwrap_or(cum.len() - 1);
        Ok(self.atoms[idx])
    }

    /// `int s dmu(s)`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Image of the measure under `r -> min(r, c)`.
    pub fn truncate(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return arg(format!("truncation level must be nonnegative, got {c}"));
        }
        let atoms: Vec<f64> = self.atoms.iter().map(|&a| a.min(c)).collect();
        canonicalize(&atoms, &self.weights)
    }

    /// Right-continuous step CDF with a jump of `w_l` at each atom `q_l`.
    pub fn to_cdf(&self) -> MeasureCDF {
        MeasureCDF { breakpoints: self.atoms.clone(), values: self.cumulative(), interpolation: Interpolation::Step }
    }
}

/// Joint quantile representation of two measures on a shared partition of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonRefinement {
    /// `0 = r_0 < r_1 < ... < r_m = 1`.
    pub levels: Vec<f64>,
    /// Value of `F_mu^{-1}` on each open interval `(r_i, r_{i+1})`.
    pub left: Vec<f64>,
    /// Value of `F_nu^{-1}` on each open interval.
    pub right: Vec<f64>,
}

impl CommonRefinement {
    /// `(length, x, y)` for each interval of the refinement.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels
            .windows(2)
            .zip(self.left.iter().zip(&self.right))
            .map(|(w, (&x, &y))| (w[1] - w[0], x, y))
    }

    /// Rebuild both marginals from the refinement.
    pub fn marginals(&self) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let lens: Vec<f64> = self.levels.windows(2).map(|w| w[1] - w[0]).collect();
        Ok((canonicalize(&self.left, &lens)?, canonicalize(&self.right, &lens)?))
    }
}

/// Merge the cumulative breakpoints of both measures and pair up their quantiles.
pub fn refine(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> CommonRefinement {
    let mut raw: Vec<f64> = mu.cumulative().into_iter().chain(nu.cumulative()).collect();
    raw.sort_by(f64::total_cmp);
    let mut levels = vec![0.0];
    for r in raw {
        if r - *levels.last().unwrap() > LEVEL_TOL {
            levels.push(r);
        }
    }
    // the final level is 1 for both measures; snap any near-duplicate onto it
    *levels.last_mut().unwrap() = 1.0;
    let (cum_mu, cum_nu) = (mu.cumulative(), nu.cumulative());
    let pick = |cum: &[f64], atoms: &[f64], r: f64| {
        let idx = cum.iter().position(|&c| c > r).unwrap_or(cum.len() - 1);
        atoms[idx]
    };
    let mut left = Vec::with_capacity(levels.len() - 1);
    let mut right = Vec::with_capacity(levels.len() - 1);
    for w in levels.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        left.push(pick(&cum_mu, &mu.atoms, mid));
        right.push(pick(&cum_nu, &nu.atoms, mid));
    }
    CommonRefinement { levels, left, right }
}

/// L1-Wasserstein distance `E|X_mu - X_nu|`.
pub fn w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    refine(mu, nu).intervals().map(|(len, x, y)| len * (y - x).abs()).sum()
}

/// `E[xi*((X_nu - X_mu) / t)]` under the quantile coupling (without the factor `t`).
pub fn transport_cost(m: &MixtureSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return arg(format!("transport cost needs t > 0, got {t}"));
    }
    let mut total = 0.0;
    for (len, x, y) in refine(mu, nu).intervals() {
        total += len * m.dual((y - x) / t)?;
    }
    Ok(total)
}

/// Image of `nu` (supported in `[0, 1]`) under `r -> t xi'(r)`.
pub fn pushforward_txiprime(m: &MixtureSpec, nu: &DiscreteMeasure, t: f64) -> Result<DiscreteMeasure> {
    if !(t > 0.0) {
        return arg(format!("pushforward needs t > 0, got {t}"));
    }
    if nu.max_atom() > 1.0 {
        return arg(format!("measure must be supported in [0, 1], found atom {}", nu.max_atom()));
    }
    let atoms: Vec<f64> = nu.atoms.iter().map(|&r| t * m.xi_prime(r)).collect();
    canonicalize(&atoms, &nu.weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Right-continuous steps: the value at `b_i` holds on `[b_i, b_{i+1})`.
    #[default]
    Step,
    /// Linear between breakpoints.
    Linear,
}

/// General CDF `s -> mu([0, s])` given by breakpoints; `0` below the first
/// breakpoint and `1` from the last one on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCdf")]
pub struct MeasureCDF {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    interpolation: Interpolation,
}

#[derive(Deserialize)]
struct RawCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    interpolation: Interpolation,
}

impl TryFrom<RawCdf> for MeasureCDF {
    type Error = Error;

    fn try_from(raw: RawCdf) -> Result<Self> {
        MeasureCDF::new(raw.breakpoints, raw.values, raw.interpolation)
    }
}

impl MeasureCDF {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return arg("CDF needs matching, nonempty breakpoints and values");
        }
        if breakpoints[0] < 0.0 || breakpoints.iter().any(|b| !b.is_finite()) {
            return arg("CDF breakpoints must be finite and nonnegative");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return arg("CDF breakpoints must be strictly ascending");
        }
        if values.iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) || values.windows(2).any(|w| w[1] < w[0]) {
            return arg("CDF values must be nondecreasing in [0, 1]");
        }
        let last = *values.last().unwrap();
        if (last - 1.0).abs() > 1e-12 {
            return arg(format!("CDF must reach 1 at its last breakpoint, got {last}"));
        }
        let mut values = values;
        *values.last_mut().unwrap() = 1.0;
        Ok(Self { breakpoints, values, interpolation })
    }

    /// Uniform law on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![0.0, 1.0], Interpolation::Linear)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    /// Smallest `s` with `mu([0, s]) = 1`.
    pub fn support_end(&self) -> f64 {
        let first_one = self.values.iter().position(|&v| v >= 1.0).unwrap();
        self.breakpoints[first_one]
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.breakpoints.partition_point(|&b| b <= s);
        if n == 0 {
            return 0.0;
        }
        if n == self.breakpoints.len() {
            return 1.0;
        }
        match self.interpolation {
            Interpolation::Step => self.values[n - 1],
            Interpolation::Linear => {
                let (b0, b1) = (self.breakpoints[n - 1], self.breakpoints[n]);
                let (v0, v1) = (self.values[n - 1], self.values[n]);
                v0 + (v1 - v0) * (s - b0) / (b1 - b0)
            }
        }
    }

    /// Plot-ready CSV with header `s,cdf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,cdf\n");
        for (b, v) in self.breakpoints.iter().zip(&self.values) {
            let _ = writeln!(out, "{b},{v}");
        }
        out
    }
}
