//! Cutoffs `chi = S((psi - mu_1) / (mu_2 - mu_1))` and
//! `chi_tilde = S((d - mu_1) / (mu_2 - mu_1))` with the C⁴ smoothstep `S`.
//!
//! Derivatives use Faà di Bruno over set partitions of the differentiation
//! variables, so every value is exact up to rounding.

use std::collections::BTreeMap;

use crate::domain::field::{Field, Snapshot};
use crate::error::{Error, Result};

use super::geometry::CarlemanGeometry;

const SMOOTHSTEP: [f64; 5] = [126.0, -420.0, 540.0, -315.0, 70.0];

/// Highest spatial derivative order kept for `chi`.
pub const CHI_SPACE_ORDER: usize = 4;
/// Highest spatial derivative order kept for `chi_tilde`.
pub const CHI_TILDE_SPACE_ORDER: usize = 2;

/// `m`-th derivative of `S(z) = z^5 (126 - 420 z + 540 z^2 - 315 z^3 + 70 z^4)`,
/// extended by 0 below 0 and by 1 above 1.
pub fn smoothstep(z: f64, m: usize) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    let mut acc = 0.0;
    for (j, c) in SMOOTHSTEP.iter().enumerate() {
        let p = 5 + j;
        if m > p {
            continue;
        }
        let falling: f64 = (0..m).map(|i| (p - i) as f64).product();
        acc += c * falling * z.powi((p - m) as i32);
    }
    acc
}

/// All set partitions of `0..k`, each as a list of blocks.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, k, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, k, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Differentiation variable: spatial axis 0, 1 or time (2).
const TIME: usize = 2;

fn variables(alpha: [usize; 2], kt: usize) -> Vec<usize> {
    let mut v = vec![0; alpha[0]];
    v.extend(std::iter::repeat_n(1, alpha[1]));
    v.extend(std::iter::repeat_n(TIME, kt));
    v
}

/// Level-set coordinate `z = (d(x) - beta (t - t0)^2 - mu_1) / (mu_2 - mu_1)`
/// (without the time term for `chi_tilde`).
struct Coordinate<'a> {
    geom: &'a CarlemanGeometry,
    with_time: bool,
}

impl Coordinate<'_> {
    fn scale(&self) -> f64 {
        let mu = self.geom.mu();
        1.0 / (mu[1] - mu[0])
    }

    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let psi = if self.with_time {
            self.geom.psi(x, t)
        } else {
            self.geom.distance().value(x)
        };
        (psi - self.geom.mu()[0]) * self.scale()
    }

    /// Derivative of `z` along the variables of one block.
    fn block(&self, vars: &[usize], x: [f64; 2], t: f64) -> f64 {
        let nt = vars.iter().filter(|&&v| v == TIME).count();
        if nt > 0 {
            if nt < vars.len() || !self.with_time {
                return 0.0;
            }
            let beta = self.geom.beta();
            return self.scale()
                * match nt {
                    1 => -2.0 * beta * (t - self.geom.t0()),
                    2 => -2.0 * beta,
                    _ => 0.0,
                };
        }
        let mut alpha = [0, 0];
        for &v in vars {
            alpha[v] += 1;
        }
        self.geom.distance().derivative(x, alpha) * self.scale()
    }

    fn derivative(&self, vars: &[usize], partitions: &[Vec<Vec<usize>>], x: [f64; 2], t: f64) -> f64 {
        let z = self.value(x, t);
        if vars.is_empty() {
            return smoothstep(z, 0);
        }
        if z <= 0.0 || z >= 1.0 {
            return 0.0;
        }
        partitions
            .iter()
            .map(|p| {
                let prod: f64 = p
                    .iter()
                    .map(|b| {
                        let bv: Vec<usize> = b.iter().map(|&i| vars[i]).collect();
                        self.block(&bv, x, t)
                    })
                    .product();
                smoothstep(z, p.len()) * prod
            })
            .sum()
    }
}

/// Derivative key `(alpha, time order)`.
pub type DerivativeKey = ([usize; 2], usize);

#[derive(Clone, Debug)]
pub struct Cutoff {
    pub chi: Field,
    pub chi_tilde: Snapshot,
    /// `d_x^alpha chi` for `1 <= |alpha| <= 4` and `d_t chi`.
    pub chi_derivatives: BTreeMap<DerivativeKey, Field>,
    /// `d_x^alpha chi_tilde` for `1 <= |alpha| <= 2`.
    pub chi_tilde_derivatives: BTreeMap<[usize; 2], Snapshot>,
}

/// `d_x^alpha d_t^kt chi` on the space-time grid of the geometry.
pub fn chi_derivative(geom: &CarlemanGeometry, alpha: [usize; 2], kt: usize) -> Result<Field> {
    check_alpha(geom, alpha)?;
    let vars = variables(alpha, kt);
    let parts = set_partitions(vars.len());
    let c = Coordinate { geom, with_time: true };
    Ok(Field::from_fn(geom.grid(), geom.times(), |x, t| c.derivative(&vars, &parts, x, t)))
}

/// `d_x^alpha d_t^kt chi` at a single point.
pub fn chi_derivative_at(geom: &CarlemanGeometry, alpha: [usize; 2], kt: usize, x: [f64; 2], t: f64) -> f64 {
    let vars = variables(alpha, kt);
    let c = Coordinate { geom, with_time: true };
    c.derivative(&vars, &set_partitions(vars.len()), x, t)
}

/// `d_x^alpha chi_tilde` on the spatial grid.
pub fn chi_tilde_derivative(geom: &CarlemanGeometry, alpha: [usize; 2]) -> Result<Snapshot> {
    check_alpha(geom, alpha)?;
    let vars = variables(alpha, 0);
    let parts = set_partitions(vars.len());
    let c = Coordinate { geom, with_time: false };
    Ok(Snapshot::from_fn(geom.grid(), |x| c.derivative(&vars, &parts, x, 0.0)))
}

fn check_alpha(geom: &CarlemanGeometry, alpha: [usize; 2]) -> Result<()> {
    if geom.grid().dim() == 1 && alpha[1] != 0 {
        return Err(Error::InvalidArgument(format!("alpha {alpha:?} on a 1D grid")));
    }
    Ok(())
}

impl Cutoff {
    pub fn build(geom: &CarlemanGeometry) -> Result<Self> {
        let dim = geom.grid().dim();
        let mut chi_derivatives = BTreeMap::new();
        for alpha in crate::domain::stencil::multi_indices(dim, CHI_SPACE_ORDER).into_iter().skip(1) {
            chi_derivatives.insert((alpha, 0), chi_derivative(geom, alpha, 0)?);
        }
        chi_derivatives.insert(([0, 0], 1), chi_derivative(geom, [0, 0], 1)?);
        let mut chi_tilde_derivatives = BTreeMap::new();
        for alpha in crate::domain::stencil::multi_indices(dim, CHI_TILDE_SPACE_ORDER).into_iter().skip(1) {
            chi_tilde_derivatives.insert(alpha, chi_tilde_derivative(geom, alpha)?);
        }
        Ok(Self {
            chi: chi_derivative(geom, [0, 0], 0)?,
            chi_tilde: chi_tilde_derivative(geom, [0, 0])?,
            chi_derivatives,
            chi_tilde_derivatives,
        })
    }
}
