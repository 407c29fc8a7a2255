use serde::{Deserialize, Serialize};

use crate::domain::field::{Field, Snapshot};
use crate::error::{Error, Result};

/// Constants `rho1 > 0` and `rho2 != 0` of the time operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationCoefficients {
    rho1: f64,
    rho2: f64,
}

impl EquationCoefficients {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        if !(rho1.is_finite() && rho1 > 0.0) {
            return Err(Error::InvalidCoefficients(format!("rho1 > 0 is required, got rho1 = {rho1}")));
        }
        if !rho2.is_finite() || rho2 == 0.0 {
            return Err(Error::InvalidCoefficients(format!("rho2 != 0 is required, got rho2 = {rho2}")));
        }
        Ok(Self { rho1, rho2 })
    }

    /// The classical heat equation `rho1 d_t u - L u = g` (`rho2 = 0`). Only
    /// meant for comparisons with parabolic reference solvers.
    pub fn classical(rho1: f64) -> Result<Self> {
        if !(rho1.is_finite() && rho1 > 0.0) {
            return Err(Error::InvalidCoefficients(format!("rho1 > 0 is required, got rho1 = {rho1}")));
        }
        Ok(Self { rho1, rho2: 0.0 })
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn rho2(&self) -> f64 {
        self.rho2
    }
}

/// Right-hand side `g` of the forward problem, either separated as
/// `f(x) R(x, t)` or a general space-time field.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Separated { f: Snapshot, r: Field },
    General { g: Field },
}

impl SourceSpec {
    pub fn separated(f: Snapshot, r: Field) -> Result<Self> {
        if !f.grid().same_shape(r.grid()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} nodes", r.n_nodes()),
                got: format!("{} nodes", f.grid().n_nodes()),
            });
        }
        Ok(SourceSpec::Separated { f, r })
    }

    pub fn general(g: Field) -> Self {
        SourceSpec::General { g }
    }

    pub fn is_separated(&self) -> bool {
        matches!(self, SourceSpec::Separated { .. })
    }

    pub fn times(&self) -> &crate::domain::grid::TimeGrid {
        match self {
            SourceSpec::Separated { r, .. } => r.times(),
            SourceSpec::General { g } => g.times(),
        }
    }

    pub fn grid(&self) -> &crate::domain::grid::SpatialGrid {
        match self {
            SourceSpec::Separated { r, .. } => r.grid(),
            SourceSpec::General { g } => g.grid(),
        }
    }

    /// Nodal values of `g` at one time level.
    pub fn level(&self, n: usize) -> Vec<f64> {
        match self {
            SourceSpec::Separated { f, r } => f.values().iter().zip(r.level(n)).map(|(a, b)| a * b).collect(),
            SourceSpec::General { g } => g.level(n).to_vec(),
        }
    }

    pub fn to_field(&self) -> Result<Field> {
        match self {
            SourceSpec::Separated { f, r } => Field::separated(f, r),
            SourceSpec::General { g } => Ok(g.clone()),
        }
    }

    /// `min |R(x, t0)|` over the given nodes (all nodes if `None`); `None`
    /// for a non-separated source.
    pub fn r_min_at_t0(&self, nodes: Option<&crate::domain::grid::NodeMask>) -> Option<f64> {
        match self {
            SourceSpec::Separated { r, .. } => {
                let lv = r.level(r.times().t0_index());
                let it: Box<dyn Iterator<Item = usize>> = match nodes {
                    Some(m) => Box::new(m.nodes()),
                    None => Box::new(0..lv.len()),
                };
                Some(it.map(|i| lv[i].abs()).fold(f64::INFINITY, f64::min))
            }
            SourceSpec::General { .. } => None,
        }
    }
}
