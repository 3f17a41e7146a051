use super::{FieldGrid, PdeScheme};
use crate::error::{arg, Error, Result};
use crate::measures::MeasureCDF;

/// `u(0, 0)` for the Ising Parisi PDE
/// `d_s u + d_xx u - mu([0, s]) (d_x u)^2 + 1 = 0`, `u(q_max, x) = -log cosh x`,
/// solved backward in `s` with Neumann data `d_x u(+-L) = -+1`.
pub fn psi_ising_pde(cdf: &MeasureCDF, q_max: f64, grid: &FieldGrid) -> Result<f64> {
    grid.validate()?;
    if !(q_max >= 0.0 && q_max.is_finite()) {
        return arg(format!("q_max must be finite and >= 0, got {q_max}"));
    }
    if cdf.eval(q_max) < 1.0 - 1e-12 {
        return arg(format!("cdf({q_max}) = {} < 1", cdf.eval(q_max)));
    }
    let n = grid.nodes;
    let dx = grid.dx();
    let l = grid.half_width;
    let mut u: Vec<f64> = (0..n).map(|i| -log_cosh(-l + i as f64 * dx)).collect();
    if q_max == 0.0 {
        return Ok(u[grid.center()]);
    }

    // Split [0, q_max] at the CDF breakpoints so a step never straddles a jump.
    let mut cuts: Vec<f64> = cdf.breakpoints().iter().copied().filter(|&b| b > 0.0 && b < q_max).collect();
    cuts.insert(0, 0.0);
    cuts.push(q_max);
    cuts.dedup();

    let mut solver = Stepper::new(n, dx, grid.scheme);
    for seg in cuts.windows(2).rev() {
        let (a, b) = (seg[0], seg[1]);
        let steps = ((b - a) / grid.ds).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        if grid.scheme == PdeScheme::Explicit && h > 0.5 * dx * dx * (1.0 + 1e-12) {
            return Err(Error::Numerical(format!("explicit step {h:e} violates ds <= dx^2/2")));
        }
        solver.set_step(h);
        for j in 0..steps {
            // midpoint of the step, in forward s
            let s = b - (j as f64 + 0.5) * h;
            solver.advance(&mut u, cdf.eval(s));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("PDE solution became non-finite".into()));
        }
    }
    Ok(u[grid.center()])
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// One backward step in `tau = q_max - s`: `u_tau = u_xx - m u_x^2 + 1`.
struct Stepper {
    n: usize,
    dx: f64,
    scheme: PdeScheme,
    h: f64,
    // Thomas-algorithm factors of (I - h D2) with reflected Neumann rows
    cp: Vec<f64>,
    denom: Vec<f64>,
    rhs: Vec<f64>,
}

impl Stepper {
    fn new(n: usize, dx: f64, scheme: PdeScheme) -> Self {
        Self { n, dx, scheme, h: 0.0, cp: vec![0.0; n], denom: vec![0.0; n], rhs: vec![0.0; n] }
    }

    fn set_step(&mut self, h: f64) {
        if h == self.h {
            return;
        }
        self.h = h;
        if self.scheme == PdeScheme::Explicit {
            return;
        }
        let n = self.n;
        let r = h / (self.dx * self.dx);
        // row i: -r u_{i-1} + (1 + 2r) u_i - r u_{i+1}; boundary rows use the ghost
        // node, which doubles the inward off-diagonal.
        let diag = 1.0 + 2.0 * r;
        let upper = |i: usize| if i == 0 { -2.0 * r } else { -r };
        let lower = |i: usize| if i == n - 1 { -2.0 * r } else { -r };
        self.denom[0] = diag;
        self.cp[0] = upper(0) / diag;
        for i in 1..n {
            self.denom[i] = diag - lower(i) * self.cp[i - 1];
            self.cp[i] = if i + 1 < n { upper(i) / self.denom[i] } else { 0.0 };
        }
    }

    fn advance(&mut self, u: &mut [f64], m: f64) {
        let n = self.n;
        let dx = self.dx;
        let h = self.h;
        // Neumann data: u_x(-L) = 1, u_x(L) = -1
        let grad = |u: &[f64], i: usize| {
            if i == 0 {
                1.0
            } else if i == n - 1 {
                -1.0
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * dx)
            }
        };
        match self.scheme {
            PdeScheme::Explicit => {
                let r = h / (dx * dx);
                for i in 0..n {
                    let g = grad(u, i);
                    let lap = if i == 0 {
                        2.0 * (u[1] - u[0] - dx)
                    } else if i == n - 1 {
                        2.0 * (u[n - 2] - u[n - 1] - dx)
                    } else {
                        u[i + 1] - 2.0 * u[i] + u[i - 1]
                    };
                    self.rhs[i] = u[i] + r * lap + h * (1.0 - m * g * g);
                }
                u.copy_from_slice(&self.rhs);
            }
            PdeScheme::SemiImplicit => {
                let r = h / (dx * dx);
                for i in 0..n {
                    let g = grad(u, i);
                    self.rhs[i] = u[i] + h * (1.0 - m * g * g);
                }
                // ghost nodes u_{-1} = u_1 - 2 dx, u_n = u_{n-2} - 2 dx
                self.rhs[0] -= 2.0 * r * dx;
                self.rhs[n - 1] -= 2.0 * r * dx;
                let lower = |i: usize| if i == n - 1 { -2.0 * r } else { -r };
                self.rhs[0] /= self.denom[0];
                for i in 1..n {
                    self.rhs[i] = (self.rhs[i] - lower(i) * self.rhs[i - 1]) / self.denom[i];
                }
                u[n - 1] = self.rhs[n - 1];
                for i in (0..n - 1).rev() {
                    u[i] = self.rhs[i] - self.cp[i] * u[i + 1];
                }
            }
        }
    }
}
