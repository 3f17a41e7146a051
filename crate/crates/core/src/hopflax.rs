//! Finite-dimensional Hopf-Lax formula
//! `f^(k)(t, x) = sup_y [psi^(k)(y) - (t/k) sum_l xi*((y_l - x_l) / t)]`,
//! the Parisi value `f(t, delta_0)`, the classical Parisi functional and the
//! Hamilton-Jacobi residual diagnostic.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::initial_condition::{PsiEvaluator, PsiKind};
use crate::measures::{pushforward_txiprime, transport_cost, DiscreteMeasure};
use crate::mixture::MixtureSpec;

/// Field-grid nodes used for `psi` inside the optimizer.
pub const SOLVE_NODES: usize = 513;
pub const DEFAULT_SEED: u64 = 0x5eed_2d1f_a3c4_0b17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfLaxProblem {
    pub mixture: MixtureSpec,
    pub t: f64,
    pub base: Vec<f64>,
    pub psi: PsiEvaluator,
}

impl HopfLaxProblem {
    pub fn new(mixture: MixtureSpec, t: f64, base: Vec<f64>, kind: PsiKind) -> Result<Self> {
        let p = Self { mixture, t, base, psi: PsiEvaluator::new(kind).with_nodes(SOLVE_NODES) };
        p.validate()?;
        Ok(p)
    }

    /// Problem at `x = 0` in dimension `k`.
    pub fn at_origin(mixture: MixtureSpec, t: f64, k: usize, kind: PsiKind) -> Result<Self> {
        Self::new(mixture, t, vec![0.0; k], kind)
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.psi.nodes = nodes;
        self
    }

    pub fn k(&self) -> usize {
        self.base.len()
    }

    fn validate(&self) -> Result<()> {
        if self.base.is_empty() {
            return arg("base must have at least one coordinate");
        }
        if self.base.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return arg("base coordinates must be finite and >= 0");
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return arg(format!("t must be finite and >= 0, got {}", self.t));
        }
        if !self.mixture.is_normalized() {
            return arg("mixture must be normalized, xi(1) = 1");
        }
        Ok(())
    }

    /// Upper end of the search box, `max(base) + t xi'(1)`.
    pub fn box_upper(&self) -> f64 {
        self.base.iter().copied().fold(0.0, f64::max) + self.t * self.mixture.xi_prime(1.0)
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.k() {
            return arg(format!("expected {} coordinates, got {}", self.k(), y.len()));
        }
        if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return arg("coordinates must be finite and >= 0");
        }
        Ok(())
    }

    /// `(t/k) sum_l xi*((y_l - x_l) / t)` with `y` and `base` paired as given.
    pub fn pairing_cost(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        pair_cost(&self.mixture, self.t, &self.base, y)
    }

    /// The Hopf-Lax objective at `y`: both `y` and `base` are sorted before pairing.
    pub fn objective(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        let ys = sorted(y);
        let xs = sorted(&self.base);
        let psi = self.psi.eval(&DiscreteMeasure::empirical(&ys)?)?;
        Ok(psi - pair_cost(&self.mixture, self.t, &xs, &ys)?)
    }
}

fn pair_cost(m: &MixtureSpec, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let k = x.len() as f64;
    if t == 0.0 {
        let same = x.iter().zip(y).all(|(a, b)| a >= b);
        return Ok(if same { 0.0 } else { f64::INFINITY });
    }
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        s += m.dual((b - a) / t)?;
    }
    Ok(t * s / k)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Free-function form of [`HopfLaxProblem::objective`].
pub fn objective(prob: &HopfLaxProblem, y: &[f64]) -> Result<f64> {
    prob.objective(y)
}

/// `psi(mu) - t E[xi*((X_mu - X_base) / t)]` for general discrete measures.
pub fn measure_objective(m: &MixtureSpec, t: f64, base: &DiscreteMeasure, mu: &DiscreteMeasure, psi: &PsiEvaluator) -> Result<f64> {
    Ok(psi.eval(mu)? - t * transport_cost(m, base, mu, t)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Grid points per coordinate in the exhaustive stage (used when `k <= 3`).
    pub grid_points: usize,
    /// Number of best grid points kept as ascent seeds.
    pub grid_seeds: usize,
    pub random_starts: usize,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    /// Stop a restart when a full sweep improves the value by less than this.
    pub sweep_tol: f64,
    /// Line-search tolerance relative to the box size.
    pub line_tol: f64,
    pub seed: u64,
    /// Multiplier on the box upper end.
    pub box_scale: f64,
    /// Additional starting points (warm starts).
    pub extra_seeds: Vec<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_points: 201,
            grid_seeds: 3,
            random_starts: 6,
            max_evals: 40_000,
            sweep_tol: 1e-9,
            line_tol: 1e-9,
            seed: DEFAULT_SEED,
            box_scale: 1.0,
            extra_seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfLaxResult {
    pub value: f64,
    /// Ascending maximizer.
    pub maximizer: Vec<f64>,
    pub restarts: usize,
    pub evals: usize,
    /// True when every restart met `sweep_tol` within its evaluation budget.
    pub converged: bool,
    pub seed: u64,
    /// Final value of each restart, in seed order.
    pub restart_values: Vec<f64>,
    /// Restarts that ended within `1e-6` of the best value.
    pub agreeing_restarts: usize,
}

/// Maximizes the Hopf-Lax objective over `[0, max(base) + t xi'(1)]^k`
/// intersected with the ascending cone.
pub fn solve(prob: &HopfLaxProblem, opts: &SolveOptions) -> Result<HopfLaxResult> {
    prob.validate()?;
    let k = prob.k();
    let base = sorted(&prob.base);
    if prob.t == 0.0 {
        let value = prob.objective(&base)?;
        return Ok(HopfLaxResult {
            value,
            maximizer: base,
            restarts: 0,
            evals: 1,
            converged: true,
            seed: opts.seed,
            restart_values: vec![value],
            agreeing_restarts: 1,
        });
    }
    if !(opts.box_scale >= 1.0) {
        return arg("box_scale must be >= 1");
    }
    let upper = prob.box_upper() * opts.box_scale;
    let evals = AtomicUsize::new(0);
    let eval = |y: &[f64]| -> Result<f64> {
        evals.fetch_add(1, Ordering::Relaxed);
        prob.objective(y)
    };

    let mut seeds: Vec<Vec<f64>> = vec![base.clone()];
    for s in &opts.extra_seeds {
        prob.check_point(s)?;
        seeds.push(sorted(s).into_iter().map(|v| v.min(upper)).collect());
    }
    if k <= 3 && opts.grid_points >= 2 {
        seeds.extend(grid_stage(k, upper, opts, &eval)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let zeros = rng.random_range(0..k);
        let mut y: Vec<f64> = (0..k).map(|i| if i < zeros { 0.0 } else { rng.random::<f64>() * upper }).collect();
        y.sort_by(f64::total_cmp);
        seeds.push(y);
    }

    let runs: Vec<Result<Ascent>> = seeds.par_iter().map(|s| ascend(s.clone(), upper, opts, &eval)).collect();
    let runs: Vec<Ascent> = runs.into_iter().collect::<Result<_>>()?;
    let best = runs
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.value.total_cmp(&b.value).then(j.cmp(i)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let value = runs[best].value;
    if !value.is_finite() {
        return Err(Error::Numerical("Hopf-Lax objective is not finite at the optimum".into()));
    }
    Ok(HopfLaxResult {
        value,
        maximizer: runs[best].y.clone(),
        restarts: runs.len(),
        evals: evals.load(Ordering::Relaxed),
        converged: runs.iter().all(|r| r.converged),
        seed: opts.seed,
        restart_values: runs.iter().map(|r| r.value).collect(),
        agreeing_restarts: runs.iter().filter(|r| r.value >= value - 1e-6).count(),
    })
}

/// Best `opts.grid_seeds` nondecreasing grid tuples.
fn grid_stage(k: usize, upper: f64, opts: &SolveOptions, eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<Vec<Vec<f64>>> {
    let g = opts.grid_points;
    let node = |i: usize| upper * i as f64 / (g - 1) as f64;
    let mut tuples: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..k {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                let start = t.last().copied().unwrap_or(0);
                (start..g).map(move |i| {
                    let mut n = t.clone();
                    n.push(i);
                    n
                })
            })
            .collect();
    }
    let scored: Vec<(f64, usize)> = tuples
        .par_iter()
        .enumerate()
        .map(|(idx, t)| {
            let y: Vec<f64> = t.iter().map(|&i| node(i)).collect();
            eval(&y).map(|v| (v, idx))
        })
        .collect::<Result<_>>()?;
    let mut scored = scored;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.iter().take(opts.grid_seeds).map(|&(_, idx)| tuples[idx].iter().map(|&i| node(i)).collect()).collect())
}

struct Ascent {
    y: Vec<f64>,
    value: f64,
    converged: bool,
}

/// Coordinate-wise golden-section ascent inside the ascending cone, with
/// block moves for tied coordinates, suffix shifts and a pattern step.
fn ascend(mut y: Vec<f64>, upper: f64, opts: &SolveOptions, eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync)) -> Result<Ascent> {
    let k = y.len();
    let tol = opts.line_tol * upper.max(1.0);
    let mut used = 0usize;
    let mut f = eval(&y)?;
    used += 1;
    loop {
        let start = f;
        let before = y.clone();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..k {
            dirs.push(unit(k, i..i + 1));
        }
        // runs of (nearly) tied coordinates move together
        let mut i = 0;
        while i < k {
            let mut j = i + 1;
            while j < k && y[j] - y[i] <= 1e-6 * upper.max(1.0) {
                j += 1;
            }
            if j - i > 1 {
                dirs.push(unit(k, i..j));
            }
            i = j;
        }
        for i in 1..k {
            dirs.push(unit(k, i..k));
        }
        for d in &dirs {
            let (ny, nf, n) = line_search(&y, f, d, upper, tol, eval)?;
            used += n;
            y = ny;
            f = nf;
        }
        let pattern: Vec<f64> = y.iter().zip(&before).map(|(a, b)| a - b).collect();
        if pattern.iter().any(|v| *v != 0.0) {
            let (ny, nf, n) = line_search(&y, f, &pattern, upper, tol, eval)?;
            used += n;
            y = ny;
            f = nf;
        }
        if f - start < opts.sweep_tol {
            return Ok(Ascent { y, value: f, converged: true });
        }
        if used >= opts.max_evals {
            return Ok(Ascent { y, value: f, converged: false });
        }
    }
}

fn unit(k: usize, r: std::ops::Range<usize>) -> Vec<f64> {
    (0..k).map(|i| if r.contains(&i) { 1.0 } else { 0.0 }).collect()
}

/// Golden-section search of `s -> objective(y + s d)` over the step range that
/// keeps the point ascending and inside `[0, upper]`. Only improvements are kept.
fn line_search(
    y: &[f64],
    f0: f64,
    d: &[f64],
    upper: f64,
    tol: f64,
    eval: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
) -> Result<(Vec<f64>, f64, usize)> {
    let k = y.len();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut bound = |num: f64, den: f64| {
        // constraint: num + s den >= 0
        if den > 0.0 {
            lo = lo.max(-num / den);
        } else if den < 0.0 {
            hi = hi.min(-num / den);
        }
    };
    bound(y[0], d[0]);
    bound(upper - y[k - 1], -d[k - 1]);
    for i in 1..k {
        bound(y[i] - y[i - 1], d[i] - d[i - 1]);
    }
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(hi > lo) || (hi - lo) * scale <= tol {
        return Ok((y.to_vec(), f0, 0));
    }
    let point = |s: f64| -> Vec<f64> {
        let mut p: Vec<f64> = y.iter().zip(d).map(|(a, b)| (a + s * b).clamp(0.0, upper)).collect();
        for i in 1..k {
            if p[i] < p[i - 1] {
                p[i] = p[i - 1];
            }
        }
        p
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(&point(x1))?;
    let mut f2 = eval(&point(x2))?;
    let mut n = 2;
    let mut best = (0.0, f0);
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    while (b - a) * scale > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(&point(x1))?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(&point(x2))?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
        n += 1;
    }
    // the end points are never probed by golden section; they matter when the
    // optimum sits on a constraint such as y_0 = 0
    for s in [lo, hi] {
        let fs = eval(&point(s))?;
        n += 1;
        if fs > best.1 {
            best = (s, fs);
        }
    }
    if best.1 > f0 {
        Ok((point(best.0), best.1, n))
    } else {
        Ok((y.to_vec(), f0, n))
    }
}

/// `f^(k)(t, delta_0)` with default solver settings.
pub fn parisi_value(m: &MixtureSpec, t: f64, k: usize, kind: PsiKind) -> Result<f64> {
    Ok(parisi_solve(m, t, k, kind, &SolveOptions::default())?.value)
}

pub fn parisi_solve(m: &MixtureSpec, t: f64, k: usize, kind: PsiKind, opts: &SolveOptions) -> Result<HopfLaxResult> {
    if k == 0 {
        return arg("k must be at least 1");
    }
    solve(&HopfLaxProblem::at_origin(m.clone(), t, k, kind)?, opts)
}

/// The classical Parisi functional at `nu` on `[0, 1]`,
/// `t + psi((t xi')(nu)) - t xi'(1) + t int_0^1 s xi''(s) nu([0, s]) ds`,
/// with the integral written as `xi'(1) - 1 - int (r xi'(r) - xi(r)) dnu`.
pub fn classical_functional(m: &MixtureSpec, t: f64, nu: &DiscreteMeasure, kind: PsiKind) -> Result<f64> {
    classical_functional_with(m, t, nu, &PsiEvaluator::new(kind))
}

pub fn classical_functional_with(m: &MixtureSpec, t: f64, nu: &DiscreteMeasure, psi: &PsiEvaluator) -> Result<f64> {
    if !m.is_normalized() {
        return arg("mixture must be normalized, xi(1) = 1");
    }
    if !(t > 0.0) {
        return arg(format!("t must be positive, got {t}"));
    }
    let mu = pushforward_txiprime(m, nu, t)?;
    let moment: f64 = nu
        .atoms()
        .iter()
        .zip(nu.weights())
        .map(|(&r, &w)| w * (r * m.xi_prime(r) - m.xi(r)))
        .sum();
    let d1 = m.xi_prime(1.0);
    Ok(t + psi.eval(&mu)? - t * d1 + t * (d1 - 1.0 - moment))
}

/// Central-difference residual of `d_t f - (1/k) sum_l xi(k d_{x_l} f)` at the
/// problem's `(t, base)`, with momenta clipped at zero.
pub fn hj_residual(prob: &HopfLaxProblem, h: f64, opts: &SolveOptions) -> Result<f64> {
    prob.validate()?;
    if !(h > 0.0) {
        return arg(format!("step h must be positive, got {h}"));
    }
    if prob.base.iter().any(|&x| x <= h) {
        return arg("every base coordinate must exceed h");
    }
    if prob.t <= h {
        return arg("t must exceed h");
    }
    let k = prob.k();
    let center = solve(prob, opts)?;
    // neighbouring problems start from the center maximizer; the grid stage is skipped
    let warm = SolveOptions {
        extra_seeds: vec![center.maximizer.clone()],
        grid_points: 0,
        random_starts: opts.random_starts.min(2),
        ..opts.clone()
    };
    let at = |t: f64, base: Vec<f64>| -> Result<f64> {
        let p = HopfLaxProblem { t, base, ..prob.clone() };
        Ok(solve(&p, &warm)?.value)
    };
    let dt = (at(prob.t + h, prob.base.clone())? - at(prob.t - h, prob.base.clone())?) / (2.0 * h);
    let mut ham = 0.0;
    for l in 0..k {
        let mut up = prob.base.clone();
        let mut down = prob.base.clone();
        up[l] += h;
        down[l] -= h;
        let g = ((at(prob.t, up)? - at(prob.t, down)?) / (2.0 * h)).max(0.0);
        ham += prob.mixture.xi(k as f64 * g);
    }
    Ok(dt - ham / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_condition::{psi_product, FieldGrid, SingleSiteLaw};
    use approx::assert_abs_diff_eq;

    fn quick() -> SolveOptions {
        SolveOptions { grid_points: 41, random_starts: 2, ..Default::default() }
    }

    #[test]
    fn objective_at_base_is_psi() {
        let p = HopfLaxProblem::new(MixtureSpec::sk(), 0.7, vec![0.4, 0.1], PsiKind::Ising).unwrap();
        let psi = p.psi.eval(&DiscreteMeasure::empirical(&[0.1, 0.4]).unwrap()).unwrap();
        assert_eq!(p.objective(&[0.1, 0.4]).unwrap(), psi);
    }

    #[test]
    fn objective_one_atom_example() {
        let p = HopfLaxProblem::new(MixtureSpec::sk(), 1.0, vec![0.0], PsiKind::Ising).unwrap();
        let psi2 = psi_product(&SingleSiteLaw::ising(), &DiscreteMeasure::dirac(2.0).unwrap(), &FieldGrid::with_nodes(2.0, SOLVE_NODES)).unwrap();
        assert_abs_diff_eq!(p.objective(&[2.0]).unwrap(), psi2 - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn objective_rejects_bad_points() {
        let p = HopfLaxProblem::new(MixtureSpec::sk(), 1.0, vec![0.0, 0.0], PsiKind::Ising).unwrap();
        assert!(p.objective(&[0.1]).is_err());
        assert!(p.objective(&[0.1, -0.2]).is_err());
        assert!(HopfLaxProblem::new(MixtureSpec::new([(2, 2.0)]).unwrap(), 1.0, vec![0.0], PsiKind::Ising).is_err());
    }

    #[test]
    fn zero_time_returns_psi_of_base() {
        let p = HopfLaxProblem::new(MixtureSpec::sk(), 0.0, vec![0.3], PsiKind::Spherical).unwrap();
        let r = solve(&p, &quick()).unwrap();
        assert_eq!(r.value, p.objective(&[0.3]).unwrap());
    }

    #[test]
    fn spherical_origin_certificate() {
        let p = HopfLaxProblem::at_origin(MixtureSpec::sk(), 0.3, 1, PsiKind::Spherical).unwrap();
        let r = solve(&p, &quick()).unwrap();
        assert!(r.value >= 0.0);
        assert!(r.maximizer[0] >= 0.0);
    }

    #[test]
    fn classical_at_dirac_zero() {
        for &t in &[0.1, 0.5, 1.3] {
            let v = classical_functional(&MixtureSpec::sk(), t, &DiscreteMeasure::dirac(0.0).unwrap(), PsiKind::Ising).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn classical_at_dirac_one() {
        let v = classical_functional(&MixtureSpec::sk(), 1.0, &DiscreteMeasure::dirac(1.0).unwrap(), PsiKind::Ising).unwrap();
        let psi2 = PsiEvaluator::new(PsiKind::Ising).eval(&DiscreteMeasure::dirac(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(v, psi2 - 1.0, epsilon = 1e-13);
        assert!(classical_functional(&MixtureSpec::sk(), 1.0, &DiscreteMeasure::dirac(1.5).unwrap(), PsiKind::Ising).is_err());
    }

    #[test]
    fn residual_rejects_boundary_points() {
        let p = HopfLaxProblem::new(MixtureSpec::sk(), 0.6, vec![0.0005], PsiKind::Ising).unwrap();
        assert!(hj_residual(&p, 1e-3, &quick()).is_err());
    }
}
