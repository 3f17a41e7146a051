use crate::error::{arg, Error, Result};
use crate::measures::DiscreteMeasure;
use crate::mixture::MixtureSpec;
use crate::quadrature::NormalRule;

pub const DEFAULT_QUAD_NODES: usize = 80;

/// `F_1(t, mu)` averaged over disorder and cascade, for Ising spins at `N = 1`.
///
/// With `H(1)`, `H(-1)` the two disorder values, only the half difference
/// `d = sqrt(2t) (H(1) - H(-1)) / 2`, of variance `t (xi(1) - xi(-1))`, survives
/// the average; the cascade recursion is then run from the field `d` by tensor
/// Gauss-Hermite quadrature.
pub fn enriched_free_energy_n1(m: &MixtureSpec, t: f64, mu: &DiscreteMeasure, nodes: usize) -> Result<f64> {
    enriched_free_energy_n1_levels(m, t, mu.atoms(), &mu.zeta_levels(), nodes)
}

/// Same as [`enriched_free_energy_n1`] for raw parameters `q_0 <= .. <= q_k` and
/// `0 = zeta_0 <= zeta_1 <= .. <= zeta_{k+1} = 1`, where repetitions are allowed.
pub fn enriched_free_energy_n1_levels(m: &MixtureSpec, t: f64, q: &[f64], zeta: &[f64], nodes: usize) -> Result<f64> {
    if q.is_empty() || zeta.len() != q.len() + 1 {
        return arg("need k + 1 atoms and k + 2 zeta levels");
    }
    let k = q.len() - 1;
    if k > 2 {
        return Err(Error::Unsupported(format!(
            "quadrature supports at most 3 atoms, got {}; use the Monte Carlo estimators for larger k",
            k + 1
        )));
    }
    if q[0] < 0.0 || q.windows(2).any(|w| w[1] < w[0]) {
        return arg("atoms must be nonnegative and nondecreasing");
    }
    if zeta[0] != 0.0 || zeta[k + 1] != 1.0 || zeta.windows(2).any(|w| w[1] < w[0]) {
        return arg("zeta levels must increase from 0 to 1");
    }
    if !(t >= 0.0 && t.is_finite()) {
        return arg(format!("t must be finite and >= 0, got {t}"));
    }
    if nodes < 2 {
        return arg("need at least 2 quadrature nodes");
    }
    let rule = NormalRule::new(nodes)?;
    let sd: Vec<f64> = (0..=k)
        .map(|l| if l == 0 { (2.0 * q[0]).sqrt() } else { (2.0 * (q[l] - q[l - 1])).sqrt() })
        .collect();
    let v = |x: f64| -> f64 { level(0, x, &sd, zeta, q[k], &rule) };
    let var_d = t * (m.xi(1.0) - m.xi(-1.0));
    let avg = if var_d > 0.0 { rule.expect(|z| v(var_d.sqrt() * z)) } else { v(0.0) };
    let out = t * m.xi(1.0) - avg;
    if !out.is_finite() {
        return Err(Error::Numerical("enriched free energy is not finite".into()));
    }
    Ok(out)
}

fn level(l: usize, x: f64, sd: &[f64], zeta: &[f64], qk: f64, rule: &NormalRule) -> f64 {
    if l == sd.len() {
        return log_cosh(x) - qk;
    }
    let s = sd[l];
    if s == 0.0 {
        return level(l + 1, x, sd, zeta, qk, rule);
    }
    let z = if l == 0 { 0.0 } else { zeta[l] };
    rule.log_moment(z, |y| level(l + 1, x + s * y, sd, zeta, qk, rule))
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}
