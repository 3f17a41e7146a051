//! The initial condition `psi(mu)`: the `N -> inf` limit of the enriched free
//! energy at `t = 0`, for product reference measures (Ising included) and for
//! the uniform measure on the sphere.

mod pde;
mod product;
mod spherical;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::measures::DiscreteMeasure;

pub use pde::psi_ising_pde;
pub use product::psi_product;
pub use spherical::{psi_spherical, psi_spherical_at, spherical_objective};

/// Default node count of the field grid.
pub const DEFAULT_NODES: usize = 2049;
/// Default backward time step of the PDE solver.
pub const DEFAULT_DS: f64 = 1e-4;

/// Single-site reference law `P_1` with finite support in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw")]
pub struct SingleSiteLaw {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawLaw {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawLaw> for SingleSiteLaw {
    type Error = Error;

    fn try_from(raw: RawLaw) -> Result<Self> {
        SingleSiteLaw::new(raw.atoms, raw.probs)
    }
}

impl SingleSiteLaw {
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return arg("single-site law needs matching, nonempty atoms and probs");
        }
        if atoms.iter().any(|a| !(a.abs() <= 1.0)) {
            return arg("single-site atoms must lie in [-1, 1]");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return arg("single-site probabilities must be positive");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return arg(format!("single-site probabilities must sum to 1, got {total}"));
        }
        Ok(Self { atoms, probs })
    }

    /// Uniform law on `{-1, 1}`.
    pub fn ising() -> Self {
        Self { atoms: vec![-1.0, 1.0], probs: vec![0.5, 0.5] }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn min_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn max_atom(&self) -> f64 {
        self.atoms.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn max_abs(&self) -> f64 {
        self.atoms.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PdeScheme {
    /// Implicit Laplacian, explicit gradient term.
    #[default]
    SemiImplicit,
    /// Forward Euler; requires `ds <= dx^2 / 2`.
    Explicit,
}

/// Uniform grid on `[-L, L]` for the external-field variable, plus the time
/// step of the PDE solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub half_width: f64,
    pub nodes: usize,
    pub ds: f64,
    #[serde(default)]
    pub scheme: PdeScheme,
}

impl FieldGrid {
    pub fn new(half_width: f64, nodes: usize, ds: f64) -> Result<Self> {
        let g = Self { half_width, nodes, ds, scheme: PdeScheme::SemiImplicit };
        g.validate()?;
        Ok(g)
    }

    /// Default grid for measures supported in `[0, q_max]`:
    /// `L = 4 + q_max + 6 sqrt(2 q_max)`, 2049 nodes.
    pub fn for_support(q_max: f64) -> Self {
        Self::with_nodes(q_max, DEFAULT_NODES)
    }

    /// Same half-width rule as [`FieldGrid::for_support`] with a custom node count.
    pub fn with_nodes(q_max: f64, nodes: usize) -> Self {
        let q = q_max.max(0.0);
        Self { half_width: 4.0 + q + 6.0 * (2.0 * q).sqrt(), nodes, ds: DEFAULT_DS, scheme: PdeScheme::SemiImplicit }
    }

    pub fn with_scheme(mut self, scheme: PdeScheme) -> Result<Self> {
        self.scheme = scheme;
        self.validate()?;
        Ok(self)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    /// Index offset of `x = 0`.
    pub(crate) fn center(&self) -> usize {
        (self.nodes - 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return arg(format!("grid half-width must be positive, got {}", self.half_width));
        }
        if self.nodes < 3 || self.nodes.is_multiple_of(2) {
            return arg(format!("grid node count must be odd and >= 3, got {}", self.nodes));
        }
        if !(self.ds > 0.0) {
            return arg(format!("time step must be positive, got {}", self.ds));
        }
        if self.scheme == PdeScheme::Explicit && self.ds > 0.5 * self.dx() * self.dx() {
            return arg(format!(
                "explicit scheme needs ds <= dx^2/2 = {:e}, got {:e}",
                0.5 * self.dx() * self.dx(),
                self.ds
            ));
        }
        Ok(())
    }
}

/// Which reference measure the initial condition belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "p1")]
pub enum PsiKind {
    Ising,
    Spherical,
    Product(SingleSiteLaw),
}

impl PsiKind {
    pub fn name(&self) -> &'static str {
        match self {
            PsiKind::Ising => "ising",
            PsiKind::Spherical => "spherical",
            PsiKind::Product(_) => "product",
        }
    }
}

/// Evaluates `psi` for a fixed [`PsiKind`] and grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEvaluator {
    pub kind: PsiKind,
    /// Field-grid nodes for the product/Ising cascade recursion.
    pub nodes: usize,
}

impl PsiEvaluator {
    pub fn new(kind: PsiKind) -> Self {
        Self { kind, nodes: DEFAULT_NODES }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn eval(&self, mu: &DiscreteMeasure) -> Result<f64> {
        match &self.kind {
            PsiKind::Spherical => psi_spherical(mu),
            PsiKind::Ising => psi_product(&SingleSiteLaw::ising(), mu, &FieldGrid::with_nodes(mu.max_atom(), self.nodes)),
            PsiKind::Product(p1) => psi_product(p1, mu, &FieldGrid::with_nodes(mu.max_atom(), self.nodes)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(FieldGrid::new(4.0, 4, 1e-3).is_err());
        assert!(FieldGrid::new(4.0, 1, 1e-3).is_err());
        assert!(FieldGrid::new(0.0, 5, 1e-3).is_err());
        let g = FieldGrid::new(4.0, 81, 1e-3).unwrap();
        assert_eq!(g.dx(), 0.1);
        assert_eq!(g.center(), 40);
        // explicit stepping needs ds <= dx^2/2 = 5e-3
        assert!(g.with_scheme(PdeScheme::Explicit).is_ok());
        let g = FieldGrid::new(4.0, 81, 1e-2).unwrap();
        assert!(g.with_scheme(PdeScheme::Explicit).is_err());
    }

    #[test]
    fn default_grid_rule() {
        let g = FieldGrid::for_support(0.5);
        assert_eq!(g.nodes, 2049);
        assert!((g.half_width - (4.5 + 6.0)).abs() < 1e-12);
    }

    #[test]
    fn law_validation_and_json() {
        assert!(SingleSiteLaw::new(vec![-1.5, 1.0], vec![0.5, 0.5]).is_err());
        assert!(SingleSiteLaw::new(vec![-1.0, 1.0], vec![0.5, 0.6]).is_err());
        let l: SingleSiteLaw = serde_json::from_str(r#"{"atoms":[-1,1],"probs":[0.5,0.5]}"#).unwrap();
        assert_eq!(l, SingleSiteLaw::ising());
    }
}
