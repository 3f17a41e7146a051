use super::{FieldGrid, SingleSiteLaw};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::quadrature::log_sum_exp;

// Kernels narrower than this many grid spacings use the local Taylor stencil;
// wider ones are sampled on the grid, where the trapezoid rule is spectrally
// accurate for Gaussians.
const TRAPEZOID_MIN_SIGMAS: f64 = 1.0;
const KERNEL_TRUNCATION: f64 = 8.0;
const BOUNDARY_TOL: f64 = 1e-6;
// The terminal profile bends on the length scale 1 / max|x|; coarser grids
// give silently wrong values rather than a detectable failure.
const MAX_SPACING: f64 = 0.75;

/// `psi` for the product reference measure `P_1^{(x) N}`, by the cascade
/// recursion evaluated on a field grid.
pub fn psi_product(p1: &SingleSiteLaw, mu: &DiscreteMeasure, grid: &FieldGrid) -> Result<f64> {
    grid.validate()?;
    let q = mu.atoms();
    let zeta = mu.zeta_levels();
    let k = q.len() - 1;
    let dx = grid.dx();
    let h = grid.center() as isize;

    check_boundary(p1, q[k], grid)?;
    if q[k] > 0.0 && dx * p1.max_abs() > MAX_SPACING {
        return Err(Error::Accuracy(format!(
            "field grid spacing {dx:.3} is too coarse for the single-site law; use more nodes"
        )));
    }

    // variance and zeta of each Gaussian step, applied from the top level down
    let mut steps: Vec<Step> = (1..=k)
        .rev()
        .map(|l| Step::new(2.0 * (q[l] - q[l - 1]), zeta[l], dx))
        .collect();
    steps.push(Step::new(2.0 * q[0], 0.0, dx));

    // index window [-reach, reach] needed before each step
    let total_reach: isize = steps.iter().map(|s| s.reach).sum();
    let lo = (-total_reach).max(-h);
    let hi = total_reach.min(h);
    let qk = q[k];
    let terminal: Vec<f64> = (lo..=hi)
        .map(|i| {
            let x = i as f64 * dx;
            log_sum_exp(p1.atoms().iter().zip(p1.probs()).map(|(&a, &p)| p.ln() + x * a - qk * a * a))
        })
        .collect();
    let mut win = Window { lo, vals: terminal, h };
    let mut reach = total_reach;
    for step in &steps {
        reach -= step.reach;
        win = step.apply(&win, reach)?;
    }
    debug_assert_eq!(win.lo, 0);
    let v = win.vals[0];
    if !v.is_finite() {
        return Err(Error::Numerical("cascade recursion produced a non-finite value".into()));
    }
    Ok(-v)
}

/// Estimates the error caused by replacing the profile outside `[-L, L]` with
/// its linear extrapolation, and rejects grids where it exceeds `BOUNDARY_TOL`.
fn check_boundary(p1: &SingleSiteLaw, q_max: f64, grid: &FieldGrid) -> Result<()> {
    if q_max == 0.0 {
        return Ok(());
    }
    let l = grid.half_width;
    let slope = |x: f64| {
        let lw: Vec<f64> = p1.atoms().iter().zip(p1.probs()).map(|(&a, &p)| p.ln() + x * a - q_max * a * a).collect();
        let z = log_sum_exp(lw.iter().copied());
        lw.iter().zip(p1.atoms()).map(|(w, a)| a * (w - z).exp()).sum::<f64>()
    };
    let dev = (p1.max_atom() - slope(l)).max(slope(-l) - p1.min_atom()).max(0.0);
    // The tilted recursion moves the effective field by at most 2 q_max max|x_j|.
    let sigma = (2.0 * q_max).sqrt();
    let z = (l - 2.0 * q_max * p1.max_abs()) / sigma;
    let excess = if z <= 1.0 {
        sigma
    } else {
        // E[(Z - z)_+] <= phi(z) / z^2
        sigma * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() / (z * z)
    };
    let err = 2.0 * dev * excess;
    if err > BOUNDARY_TOL {
        return Err(Error::Accuracy(format!(
            "field grid half-width {l} is too small for support up to {q_max} \
             (boundary error estimate {err:.2e}); increase L"
        )));
    }
    Ok(())
}

/// Profile values on grid indices `lo..lo + vals.len()`, with `x_i = i dx`.
struct Window {
    lo: isize,
    vals: Vec<f64>,
    h: isize,
}

impl Window {
    fn hi(&self) -> isize {
        self.lo + self.vals.len() as isize - 1
    }

    /// Value at index `i`, linearly extrapolated past the grid edges.
    fn read(&self, i: isize) -> f64 {
        let n = self.vals.len();
        if i < self.lo {
            debug_assert!(self.lo == -self.h);
            let s = if n > 1 { self.vals[1] - self.vals[0] } else { 0.0 };
            self.vals[0] - (self.lo - i) as f64 * s
        } else if i > self.hi() {
            debug_assert!(self.hi() == self.h);
            let s = if n > 1 { self.vals[n - 1] - self.vals[n - 2] } else { 0.0 };
            self.vals[n - 1] + (i - self.hi()) as f64 * s
        } else {
            self.vals[(i - self.lo) as usize]
        }
    }
}

enum Kernel {
    Identity,
    Sampled(Vec<f64>),
    // E f(x + sigma Z) ~ f + var/2 f'' + var^2/8 f''''
    Taylor { c2: f64, c4: f64 },
}

struct Step {
    zeta: f64,
    kernel: Kernel,
    reach: isize,
}

impl Step {
    fn new(var: f64, zeta: f64, dx: f64) -> Self {
        let sigma = var.max(0.0).sqrt();
        if sigma == 0.0 {
            return Self { zeta, kernel: Kernel::Identity, reach: 0 };
        }
        if sigma < TRAPEZOID_MIN_SIGMAS * dx {
            let c2 = 0.5 * var / (dx * dx);
            let c4 = var * var / 8.0 / dx.powi(4);
            return Self { zeta, kernel: Kernel::Taylor { c2, c4 }, reach: 2 };
        }
        let m = (KERNEL_TRUNCATION * sigma / dx).ceil() as isize;
        let mut w: Vec<f64> = (-m..=m).map(|j| (-0.5 * (j as f64 * dx / sigma).powi(2)).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Self { zeta, kernel: Kernel::Sampled(w), reach: m }
    }

    /// Produces the next profile on `[-out_reach, out_reach]` (clipped to the grid).
    fn apply(&self, input: &Window, out_reach: isize) -> Result<Window> {
        let lo = (-out_reach).max(-input.h);
        let hi = out_reach.min(input.h);
        let r = self.reach;
        let padded: Vec<f64> = (lo - r..=hi + r).map(|i| input.read(i)).collect();
        let n_out = (hi - lo + 1) as usize;
        let r = r as usize;
        let vals = match &self.kernel {
            Kernel::Identity => padded,
            Kernel::Sampled(w) => {
                if self.zeta == 0.0 {
                    (0..n_out).map(|i| dot(w, &padded[i..i + 2 * r + 1])).collect()
                } else {
                    let top = padded.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let e: Vec<f64> = padded.iter().map(|v| (self.zeta * (v - top)).exp()).collect();
                    (0..n_out).map(|i| top + dot(w, &e[i..i + 2 * r + 1]).ln() / self.zeta).collect()
                }
            }
            Kernel::Taylor { c2, c4 } => (0..n_out)
                .map(|i| {
                    let f = &padded[i..i + 5];
                    let c = f[2];
                    if self.zeta == 0.0 {
                        c + c2 * d2(f) + c4 * d4(f)
                    } else {
                        let u: Vec<f64> = f.iter().map(|v| (self.zeta * (v - c)).exp()).collect();
                        c + (1.0 + c2 * d2(&u) + c4 * d4(&u)).ln() / self.zeta
                    }
                })
                .collect(),
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite value in Gaussian smoothing step".into()));
        }
        Ok(Window { lo, vals, h: input.h })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Fourth-order second difference and the five-point fourth difference, both
// in units of the grid spacing.
fn d2(f: &[f64]) -> f64 {
    (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / 12.0
}

fn d4(f: &[f64]) -> f64 {
    f[0] - 4.0 * f[1] + 6.0 * f[2] - 4.0 * f[3] + f[4]
}
