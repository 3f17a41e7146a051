#![allow(dead_code)]

use parisi_hj::quadrature::NormalRule;
use parisi_hj::{DiscreteMeasure, MixtureSpec};
use rand::Rng;

/// Random measure with `1..=max_atoms` atoms in `[0, hi]`.
pub fn random_measure(rng: &mut impl Rng, max_atoms: usize, hi: f64) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * hi).collect();
    let weights: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    DiscreteMeasure::new(&atoms, &weights).unwrap()
}

pub fn random_measure_exact(rng: &mut impl Rng, atoms: usize, hi: f64) -> DiscreteMeasure {
    loop {
        let a: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() * hi).collect();
        let w: Vec<f64> = (0..atoms).map(|_| 0.05 + rng.random::<f64>()).collect();
        let mu = DiscreteMeasure::new(&a, &w).unwrap();
        if mu.len() == atoms {
            return mu;
        }
    }
}

pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Ising `psi(mu)` by direct tensor Gauss-Hermite evaluation of the nested
/// recursion over `(y_0, .., y_k)`, with no field grid.
pub fn nested_quadrature_psi(mu: &DiscreteMeasure, nodes: usize) -> f64 {
    let rule = NormalRule::new(nodes).unwrap();
    let q = mu.atoms();
    let zeta = mu.zeta_levels();
    fn rec(l: usize, x: f64, q: &[f64], zeta: &[f64], rule: &NormalRule) -> f64 {
        if l == q.len() {
            return log_cosh(x) - q[q.len() - 1];
        }
        let sd = if l == 0 { (2.0 * q[0]).sqrt() } else { (2.0 * (q[l] - q[l - 1])).sqrt() };
        let vals: Vec<f64> = rule.nodes.iter().map(|&y| rec(l + 1, x + sd * y, q, zeta, rule)).collect();
        if l == 0 {
            return vals.iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
        }
        let z = zeta[l];
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vals.iter().zip(&rule.weights).map(|(v, w)| w * (z * (v - top)).exp()).sum();
        top + s.ln() / z
    }
    -rec(0, 0.0, q, &zeta, &rule)
}

/// Minimum transport cost between two small discrete measures by enumerating
/// every basic solution of the transportation polytope.
pub fn brute_force_transport(a: &[f64], p: &[f64], b: &[f64], q: &[f64], cost: impl Fn(f64, f64) -> f64) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let basis = m + n - 1;
    let mut best = f64::INFINITY;
    for subset in combinations(cells.len(), basis) {
        // equations: row sums (all rows) and column sums (all but the last)
        let mut mat = vec![vec![0.0; basis + 1]; basis];
        for (c, &cell) in subset.iter().enumerate() {
            let (i, j) = cells[cell];
            mat[i][c] = 1.0;
            if j < n - 1 {
                mat[m + j][c] = 1.0;
            }
        }
        for i in 0..m {
            mat[i][basis] = p[i];
        }
        for j in 0..n - 1 {
            mat[m + j][basis] = q[j];
        }
        let Some(x) = solve_square(mat) else { continue };
        if x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        let mut plan = vec![vec![0.0; n]; m];
        for (c, &cell) in subset.iter().enumerate() {
            let (i, j) = cells[cell];
            plan[i][j] = x[c].max(0.0);
        }
        let col_ok = (0..n).all(|j| ((0..m).map(|i| plan[i][j]).sum::<f64>() - q[j]).abs() < 1e-9);
        if !col_ok {
            continue;
        }
        let c: f64 = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| plan[i][j] * cost(a[i], b[j])).sum();
        best = best.min(c);
    }
    best
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    go(0, n, r, &mut cur, &mut out);
    out
}

/// Gaussian elimination with partial pivoting on an augmented square system.
fn solve_square(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=n {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

pub fn mixtures() -> Vec<MixtureSpec> {
    vec![
        MixtureSpec::sk(),
        MixtureSpec::new([(2, 0.5), (4, 0.5)]).unwrap(),
        MixtureSpec::new([(3, 1.0)]).unwrap(),
        MixtureSpec::new([(2, 0.3), (3, 0.3), (5, 0.4)]).unwrap(),
    ]
}
