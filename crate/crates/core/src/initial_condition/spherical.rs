use crate::error::{arg, Error, Result};
use crate::measures::DiscreteMeasure;

const MAX_DOUBLINGS: usize = 60;
const B_TOL: f64 = 1e-10;

/// `psi` for the uniform measure on the sphere of radius `sqrt(N)`, with the
/// horizon `q` taken as the largest atom.
///
/// This is minus the infimum over `b` of [`spherical_objective`]. The sign
/// matches the nonnegative free energy convention: at `delta_q` the large-N
/// sphere integral gives `q - inf_b [q / b + (b - 1 - log b) / 2] >= 0`.
pub fn psi_spherical(mu: &DiscreteMeasure) -> Result<f64> {
    psi_spherical_at(mu, mu.max_atom())
}

/// Same as [`psi_spherical`] with an explicit horizon `q >= max atom`. The value
/// does not depend on `q`.
pub fn psi_spherical_at(mu: &DiscreteMeasure, q: f64) -> Result<f64> {
    let c0 = Pieces::new(mu, q)?.c_at_zero();
    let f = |b: f64| spherical_objective(mu, q, b);
    let lo = c0 + 1e-9;
    let (mut a, mut m, mut c) = (lo, lo + 1.0, lo + 2.0);
    let (mut fm, mut fc) = (f(m)?, f(c)?);
    let mut doublings = 0;
    while fc < fm {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Numerical("could not bracket the spherical minimizer".into()));
        }
        a = m;
        m = c;
        fm = fc;
        c = lo + 2.0 * (c - lo);
        fc = f(c)?;
    }
    let (b, v) = golden_min(&|b| f(b), a, c, B_TOL)?;
    debug_assert!(b > c0);
    Ok(-v)
}

/// The bracketed objective of the spherical variational formula at `(q, b)`:
/// `int_0^q ds / (b - c(s)) + (b - 1 - log b) / 2 - q`, `c(s) = 2 int_s^q mu([0, r]) dr`.
pub fn spherical_objective(mu: &DiscreteMeasure, q: f64, b: f64) -> Result<f64> {
    let pieces = Pieces::new(mu, q)?;
    let c0 = pieces.c_at_zero();
    if !(b > c0) || !b.is_finite() {
        return arg(format!("b = {b} must exceed c(0) = {c0}"));
    }
    Ok(pieces.integral(b) + 0.5 * (b - 1.0 - b.ln()) - q)
}

/// Intervals of `[0, q]` on which `mu([0, s])` is constant, ordered from `q` down.
struct Pieces {
    // (left end, right end, cdf value, c at right end)
    items: Vec<(f64, f64, f64, f64)>,
}

impl Pieces {
    fn new(mu: &DiscreteMeasure, q: f64) -> Result<Self> {
        if !(q >= mu.max_atom()) || !q.is_finite() {
            return arg(format!("horizon q = {q} must be at least the largest atom {}", mu.max_atom()));
        }
        let cum = mu.cumulative();
        let atoms = mu.atoms();
        let mut ends: Vec<(f64, f64)> = Vec::new(); // (right end, cdf on the interval)
        ends.push((q, 1.0));
        for i in (0..atoms.len()).rev() {
            let cdf_below = if i == 0 { 0.0 } else { cum[i - 1] };
            ends.push((atoms[i], cdf_below));
        }
        let mut items = Vec::new();
        let mut c = 0.0;
        for w in ends.windows(2) {
            let (right, phi) = w[0];
            let left = w[1].0;
            if right > left {
                items.push((left, right, phi, c));
                c += 2.0 * phi * (right - left);
            }
        }
        let (right, phi) = *ends.last().unwrap();
        if right > 0.0 {
            items.push((0.0, right, phi, c));
        }
        Ok(Self { items })
    }

    fn c_at_zero(&self) -> f64 {
        self.items.last().map_or(0.0, |&(l, r, phi, c)| c + 2.0 * phi * (r - l))
    }

    fn integral(&self, b: f64) -> f64 {
        self.items
            .iter()
            .map(|&(l, r, phi, c)| {
                let len = r - l;
                if phi == 0.0 {
                    len / (b - c)
                } else {
                    let top = b - c;
                    let bottom = b - c - 2.0 * phi * len;
                    (top / bottom).ln() / (2.0 * phi)
                }
            })
            .sum()
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub(crate) fn golden_min(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol * (1.0 + a.abs().max(b.abs())) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dirac_zero() {
        assert_abs_diff_eq!(psi_spherical(&DiscreteMeasure::dirac(0.0).unwrap()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dirac_matches_grid_search() {
        let q = 0.5;
        let mu = DiscreteMeasure::dirac(q).unwrap();
        let obj = |b: f64| q / b + 0.5 * (b - 1.0 - b.ln()) - q;
        let grid = (1..=4_000_000).map(|i| i as f64 * 1e-6).map(obj).fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(psi_spherical(&mu).unwrap(), -grid, epsilon = 1e-10);
        // closed form of the minimizer b = (1 + sqrt(1 + 8q)) / 2
        let r = (1.0 + 8.0 * q).sqrt();
        let b = (1.0 + r) / 2.0;
        let large_n = q - 0.5 * (r - 1.0 - b.ln());
        assert_abs_diff_eq!(psi_spherical(&mu).unwrap(), large_n, epsilon = 1e-10);
    }

    #[test]
    fn objective_examples() {
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert_abs_diff_eq!(spherical_objective(&d0, 0.0, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(spherical_objective(&d0, 0.0, e).unwrap(), 0.5 * (e - 2.0), epsilon = 1e-15);
        // c(s) = 2 (1 - s); midpoint quadrature of 1 / (3 - c(s)) over [0, 1]
        let n = 200_000;
        let quad: f64 = (0..n).map(|i| (i as f64 + 0.5) / n as f64).map(|s| 1.0 / (3.0 - 2.0 * (1.0 - s))).sum::<f64>() / n as f64;
        let closed = 0.5 * 3f64.ln();
        assert_abs_diff_eq!(quad, closed, epsilon = 1e-10);
        let expect = closed + 0.5 * (3.0 - 1.0 - 3f64.ln()) - 1.0;
        assert_abs_diff_eq!(spherical_objective(&d0, 1.0, 3.0).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn objective_domain() {
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert!(spherical_objective(&d0, 1.0, 2.0).is_err());
        let mu = DiscreteMeasure::dirac(0.5).unwrap();
        assert!(spherical_objective(&mu, 0.4, 2.0).is_err());
    }

    #[test]
    fn horizon_invariance() {
        let mu = DiscreteMeasure::new(&[0.1, 0.35, 0.8], &[0.2, 0.5, 0.3]).unwrap();
        let a = psi_spherical(&mu).unwrap();
        let b = psi_spherical_at(&mu, 1.8).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
}
