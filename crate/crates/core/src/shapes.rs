//! Test bodies inside the unit box `C_0 = [-1/2, 1/2]^2`.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};

/// Containment slack for "inside the unit box" checks.
pub const BOX_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeSpec {
    Square,
    /// Regular m-gon with the given circumradius and a vertex at the top.
    RegularPolygon { m: usize, scale: f64 },
    /// Random convex polygon, rescaled to fill most of the box.
    RandomPolygon { vertices: usize, seed: u64 },
    EllipsePolygon { a: f64, b: f64, segments: usize },
}

impl ShapeSpec {
    /// Builds the body with centroid at the origin and checks it lies in `C_0`.
    pub fn build(&self) -> Result<Polygon> {
        let body = match *self {
            ShapeSpec::Square => Polygon::unit_square(),
            ShapeSpec::RegularPolygon { m, scale } => {
                if m < 3 || !(scale > 0.0) {
                    return Err(Error::config("regular polygon needs m >= 3 and scale > 0"));
                }
                regular_polygon(m, scale)
            }
            ShapeSpec::RandomPolygon { vertices, seed } => random_polygon(vertices, seed)?,
            ShapeSpec::EllipsePolygon { a, b, segments } => {
                if segments < 3 || !(a > 0.0 && b > 0.0) {
                    return Err(Error::config("ellipse needs a, b > 0 and >= 3 segments"));
                }
                let v = (0..segments)
                    .map(|i| {
                        let t = TAU * i as f64 / segments as f64;
                        Vec2::new(a * t.cos(), b * t.sin())
                    })
                    .collect();
                Polygon::new(v)?
            }
        };
        let body = body.centered()?;
        check_in_unit_box(&body)?;
        Ok(body)
    }
}

pub fn regular_polygon(m: usize, circumradius: f64) -> Polygon {
    let v = (0..m)
        .map(|i| Vec2::from_angle(FRAC_PI_2 + TAU * i as f64 / m as f64) * circumradius)
        .collect();
    Polygon::new(v).expect("regular polygon is convex")
}

/// Random convex polygon with `n` vertices on a randomly stretched circle,
/// centred and scaled so that its largest coordinate is 0.48.
pub fn random_polygon(n: usize, seed: u64) -> Result<Polygon> {
    if n < 3 {
        return Err(Error::config("random polygon needs at least 3 vertices"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let stretch = 0.5 + rng.random::<f64>();
        let shear = rng.random::<f64>() - 0.5;
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|&t| {
                let (x, y) = (t.cos(), t.sin());
                Vec2::new(stretch * x + shear * y, y)
            })
            .collect();
        let Ok(p) = Polygon::new(pts) else { continue };
        // near-collinear draws lose vertices; insist on the requested count
        if p.len() != n {
            continue;
        }
        let p = p.centered()?;
        let s = 0.48 / p.max_abs_coordinate();
        return Ok(p.scale(s));
    }
}

/// Fails with [`Error::BodyOutOfBox`] if a vertex leaves `C_0` by more than
/// [`BOX_TOL`].
pub fn check_in_unit_box(p: &Polygon) -> Result<()> {
    let excess = p.max_abs_coordinate() - 0.5;
    if excess > BOX_TOL {
        return Err(Error::BodyOutOfBox { excess });
    }
    Ok(())
}
