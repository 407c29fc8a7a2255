//! Seeded random test fields supported strictly inside `Q_1` (or `Omega_1`)
//! and away from the boundary of `Omega`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::field::{Field, Snapshot};
use crate::error::{Error, Result};

use super::geometry::CarlemanGeometry;

const BUMP_POWER: i32 = 6;
const MAX_DRAWS: usize = 200;

/// `(4 z (1 - z))^6` on `(0, 1)`, zero outside: C⁵ with peak 1.
pub fn bump(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        (4.0 * z * (1.0 - z)).powi(BUMP_POWER)
    }
}

struct Support {
    lo: [f64; 2],
    hi: [f64; 2],
    /// Half-width of the time support around `t0`.
    tau: f64,
    c: [f64; 4],
}

/// Draws a spatial box on which `d > mu_1` holds with margin, and a time
/// half-width `tau` with `beta tau^2 < min_box d - mu_1`.
fn draw_support(geom: &CarlemanGeometry, rng: &mut ChaCha8Rng) -> Result<Support> {
    let grid = geom.grid();
    let gamma = geom.gamma();
    let mu1 = geom.mu()[0];
    for _ in 0..MAX_DRAWS {
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for a in 0..grid.dim() {
            let (l, len) = (grid.lo(a), grid.hi(a) - grid.lo(a));
            let (a0, a1) = if a == gamma.axis() {
                // fractions measured from the face opposite gamma
                let f0 = rng.random_range(0.35..0.55);
                let f1 = rng.random_range(0.7..0.9);
                if gamma.is_hi() {
                    (f0, f1)
                } else {
                    (1.0 - f1, 1.0 - f0)
                }
            } else {
                (rng.random_range(0.2..0.35), rng.random_range(0.65..0.8))
            };
            lo[a] = l + a0 * len;
            hi[a] = l + a1 * len;
        }
        let corners: Vec<[f64; 2]> = if grid.dim() == 1 {
            vec![[lo[0], 0.0], [hi[0], 0.0]]
        } else {
            vec![[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]]
        };
        // d is a product of concave positive factors, so its minimum over
        // a box is attained at a corner
        let dmin = corners
            .iter()
            .map(|&x| geom.distance().value(x))
            .fold(f64::INFINITY, f64::min);
        if dmin <= mu1 {
            continue;
        }
        let tau = ((dmin - mu1) / geom.beta()).sqrt() * rng.random_range(0.5..0.9);
        let c = [(); 4].map(|_| rng.random_range(-1.0..1.0));
        return Ok(Support { lo, hi, tau, c });
    }
    Err(Error::Geometry("no admissible support box inside {d > mu_1}".into()))
}

fn spatial_factor(sup: &Support, dim: usize, x: [f64; 2]) -> f64 {
    let mut v = 1.0;
    for a in 0..dim {
        v *= bump((x[a] - sup.lo[a]) / (sup.hi[a] - sup.lo[a]));
    }
    if v == 0.0 {
        return 0.0;
    }
    let c = sup.c;
    v * (1.0 + 0.3 * c[0] * (std::f64::consts::PI * (1.0 + c[1] * c[1]) * x[0]).sin() + 0.2 * c[3] * x[1])
}

/// Random smooth field compactly supported in the interior of `Q_1`.
pub fn random_space_time_field(geom: &CarlemanGeometry, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sup = draw_support(geom, &mut rng)?;
    let t0 = geom.t0();
    let dim = geom.grid().dim();
    Ok(Field::from_fn(geom.grid(), geom.times(), |x, t| {
        let bt = bump((t - t0 + sup.tau) / (2.0 * sup.tau));
        if bt == 0.0 {
            return 0.0;
        }
        bt * spatial_factor(&sup, dim, x) * (1.0 + 0.2 * sup.c[2] * (3.0 * t).cos())
    }))
}

/// Random smooth field compactly supported in the interior of `Omega_1`.
pub fn random_spatial_field(geom: &CarlemanGeometry, seed: u64) -> Result<Snapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sup = draw_support(geom, &mut rng)?;
    let dim = geom.grid().dim();
    Ok(Snapshot::from_fn(geom.grid(), |x| spatial_factor(&sup, dim, x)))
}
