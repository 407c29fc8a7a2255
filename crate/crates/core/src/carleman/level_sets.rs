//! Super-level sets of `psi` on the space-time grid.

use crate::domain::grid::NodeMask;
use crate::error::{Error, Result};

use super::geometry::{CarlemanGeometry, InvariantCheck};

/// Space-time mask stored level-major, like [`crate::domain::field::Field`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeMask {
    n_nodes: usize,
    values: Vec<bool>,
}

impl SpaceTimeMask {
    pub fn get(&self, level: usize, node: usize) -> bool {
        self.values[level * self.n_nodes + node]
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }

    pub fn level(&self, level: usize) -> &[bool] {
        &self.values[level * self.n_nodes..(level + 1) * self.n_nodes]
    }

    pub fn n_levels(&self) -> usize {
        self.values.len() / self.n_nodes.max(1)
    }

    pub fn is_subset_of(&self, other: &SpaceTimeMask) -> bool {
        self.values.len() == other.values.len() && self.values.iter().zip(&other.values).all(|(&a, &b)| !a || b)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.values
    }
}

/// `Q_k = {psi > mu_k}`, `Q_k^- = Q_k ∩ {t < t0}` and `Omega_k = {d > mu_k}`
/// for `k = 1, 2, 3` (index 0..3).
#[derive(Clone, Debug)]
pub struct LevelSetDomains {
    pub q: [SpaceTimeMask; 3],
    pub q_minus: [SpaceTimeMask; 3],
    pub omega: [NodeMask; 3],
}

impl LevelSetDomains {
    pub fn counts(&self) -> [[usize; 3]; 3] {
        [
            self.q.each_ref().map(|m| m.count()),
            self.q_minus.each_ref().map(|m| m.count()),
            self.omega.each_ref().map(|m| m.count()),
        ]
    }

    /// Nesting and inclusion checks, one entry each.
    pub fn invariants(&self, geom: &CarlemanGeometry) -> Vec<InvariantCheck> {
        let mut out = Vec::new();
        let nest = |name: &'static str, ok: bool| InvariantCheck {
            name,
            ok,
            detail: String::new(),
        };
        out.push(nest("Q_3 ⊂ Q_2", self.q[2].is_subset_of(&self.q[1])));
        out.push(nest("Q_2 ⊂ Q_1", self.q[1].is_subset_of(&self.q[0])));
        out.push(nest("Omega_3 ⊂ Omega_2", self.omega[2].is_subset_of(&self.omega[1])));
        out.push(nest("Omega_2 ⊂ Omega_1", self.omega[1].is_subset_of(&self.omega[0])));

        let tg = geom.times();
        let (t0, delta) = (geom.t0(), geom.delta());
        let half = geom.epsilon().sqrt() * delta;
        let mut missing = None;
        'outer: for n in 0..tg.n_levels() {
            if (tg.t(n) - t0).abs() >= half {
                continue;
            }
            for i in geom.omega().nodes() {
                if !self.q[2].get(n, i) {
                    missing = Some((n, i));
                    break 'outer;
                }
            }
        }
        out.push(InvariantCheck {
            name: "omega x (t0 - sqrt(eps) delta, t0 + sqrt(eps) delta) ⊂ Q_3",
            ok: missing.is_none(),
            detail: missing
                .map(|(n, i)| format!("(x, t) = ({:?}, {}) is outside Q_3", geom.grid().coords(i), tg.t(n)))
                .unwrap_or_default(),
        });
        let mut escape = None;
        for n in 0..tg.n_levels() {
            if (tg.t(n) - t0).abs() < 2.0 * delta {
                continue;
            }
            if self.q[0].level(n).iter().any(|&b| b) {
                escape = Some(n);
                break;
            }
        }
        out.push(InvariantCheck {
            name: "Q_1 ⊂ closure(Omega) x (t0 - 2 delta, t0 + 2 delta)",
            ok: escape.is_none(),
            detail: escape.map(|n| format!("Q_1 is nonempty at t = {}", tg.t(n))).unwrap_or_default(),
        });
        out
    }
}

/// Evaluates every mask from `psi` and rejects the geometry if an inclusion
/// fails.
pub fn build_level_sets(geom: &CarlemanGeometry) -> Result<LevelSetDomains> {
    let grid = geom.grid();
    let tg = geom.times();
    let nn = grid.n_nodes();
    let mu = geom.mu();
    let t0 = geom.t0();
    let psi: Vec<f64> = (0..tg.n_levels())
        .flat_map(|n| {
            let s = tg.t(n) - t0;
            let shift = geom.beta() * s * s;
            geom.d().values().iter().map(move |d| d - shift)
        })
        .collect();
    let q = mu.map(|m| SpaceTimeMask {
        n_nodes: nn,
        values: psi.iter().map(|&p| p > m).collect(),
    });
    let q_minus = q.each_ref().map(|m| SpaceTimeMask {
        n_nodes: nn,
        values: m
            .values
            .iter()
            .enumerate()
            .map(|(k, &b)| b && tg.t(k / nn) < t0)
            .collect(),
    });
    let omega = mu.map(|m| NodeMask(geom.d().values().iter().map(|&d| d > m).collect()));
    let sets = LevelSetDomains { q, q_minus, omega };
    if let Some(bad) = sets.invariants(geom).into_iter().find(|c| !c.ok) {
        return Err(Error::Inclusion(format!("{}: {}", bad.name, bad.detail)));
    }
    Ok(sets)
}
