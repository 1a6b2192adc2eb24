//! Covariogram `g_P(x) = area(P ∩ (P + x))` and the measurement lattice
//! `2C_0 ∩ (1/k)Z^2`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersect_convex, Polygon, Vec2};
use crate::shapes::check_in_unit_box;

/// Covariogram of `p` at `x`.
///
/// `x` is first mapped to a canonical representative of `{x, -x}` so that
/// evenness holds exactly in floating point.
pub fn covariogram_at(p: &Polygon, x: Vec2) -> f64 {
    let x = canonical(x);
    intersect_convex(p, &p.translate(x)).area()
}

fn canonical(x: Vec2) -> Vec2 {
    if x.y > 0.0 || (x.y == 0.0 && x.x >= 0.0) {
        x
    } else {
        -x
    }
}

/// Covariogram of `p` at each point of `xs`; the routine used inside
/// optimisation loops. Agrees with [`covariogram_at`] up to rounding.
pub fn covariogram_many(p: &Polygon, xs: &[Vec2]) -> Vec<f64> {
    if p.is_degenerate() {
        return vec![0.0; xs.len()];
    }
    let v = p.vertices();
    let n = v.len();
    let mut planes: Vec<(Vec2, f64)> = (0..n)
        .map(|i| {
            let d = v[(i + 1) % n] - v[i];
            let u = Vec2::new(d.y, -d.x) / d.norm();
            (u, u.dot(v[i]))
        })
        .collect();
    planes.sort_by(|a, b| a.0.angle().rem_euclid(TAU).total_cmp(&b.0.angle().rem_euclid(TAU)));
    let (normals, support): (Vec<Vec2>, Vec<f64>) = planes.into_iter().unzip();
    halfplane_covariogram(&normals, &support, xs, None)
}

/// Covariogram of `K = {y : n_j . y <= h_j}` at each of `xs`, optionally
/// with `∂g(x_s)/∂h_j` written row-major into `grad`.
///
/// `K ∩ (K + x)` has the same normals with support numbers
/// `h_j + min(0, n_j . x)`, so each site is one sorted half-plane
/// intersection, and the derivative in `h_j` is the length of facet `j` of
/// that intersection. Normals must be unit, sorted by angle, pairwise
/// distinct and without gaps of `pi` or more; redundant planes are allowed.
pub fn halfplane_covariogram(normals: &[Vec2], support: &[f64], xs: &[Vec2], mut grad: Option<&mut [f64]>) -> Vec<f64> {
    let m = normals.len();
    assert_eq!(support.len(), m);
    if let Some(g) = grad.as_deref_mut() {
        assert_eq!(g.len(), m * xs.len());
        g.fill(0.0);
    }
    let mut hp = HalfPlaneScratch::default();
    // widths of K along each normal decide whether x lies in int DK
    let Some(corners) = hp.intersect(normals, support).map(|_| hp.vertices.clone()) else {
        return vec![0.0; xs.len()];
    };
    let width: Vec<f64> = normals
        .iter()
        .map(|u| {
            let (lo, hi) = corners
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(u.dot(*c)), hi.max(u.dot(*c))));
            hi - lo
        })
        .collect();
    let mut c = vec![0.0; m];
    xs.iter()
        .enumerate()
        .map(|(s, &x)| {
            let x = canonical(x);
            let mut inside = true;
            for j in 0..m {
                let t = normals[j].dot(x);
                if t.abs() >= width[j] {
                    inside = false;
                    break;
                }
                c[j] = support[j] + t.min(0.0);
            }
            if !inside {
                return 0.0;
            }
            match hp.intersect(normals, &c) {
                Some(area) => {
                    if let Some(g) = grad.as_deref_mut() {
                        let row = &mut g[s * m..(s + 1) * m];
                        let r = hp.lines.len();
                        for k in 0..r {
                            let prev = hp.vertices[(k + r - 1) % r];
                            row[hp.lines[k]] = (hp.vertices[k] - prev).norm();
                        }
                    }
                    area
                }
                // degenerate sweep
                None => clip_area(&corners, x),
            }
        })
        .collect()
}


#[derive(Default)]
struct HalfPlaneScratch {
    /// Indices of the planes bounding the intersection, in order.
    lines: Vec<usize>,
    /// `vertices[k]` joins `lines[k]` and `lines[k + 1]`.
    vertices: Vec<Vec2>,
    deque: std::collections::VecDeque<usize>,
}

fn meet(n1: Vec2, c1: f64, n2: Vec2, c2: f64) -> Option<Vec2> {
    let det = n1.cross(n2);
    (det > 1e-14).then(|| Vec2::new((c1 * n2.y - c2 * n1.y) / det, (n1.x * c2 - n2.x * c1) / det))
}

impl HalfPlaneScratch {
    /// Area of `{y : n_j . y <= c_j}`; `None` when the sweep hits a
    /// configuration it cannot resolve.
    fn intersect(&mut self, n: &[Vec2], c: &[f64]) -> Option<f64> {
        let dq = &mut self.deque;
        dq.clear();
        let out = |p: Vec2, l: usize| n[l].dot(p) > c[l];
        for l in 0..n.len() {
            while dq.len() >= 2 {
                let (a, b) = (dq[dq.len() - 2], dq[dq.len() - 1]);
                if out(meet(n[a], c[a], n[b], c[b])?, l) {
                    dq.pop_back();
                } else {
                    break;
                }
            }
            while dq.len() >= 2 {
                if out(meet(n[dq[0]], c[dq[0]], n[dq[1]], c[dq[1]])?, l) {
                    dq.pop_front();
                } else {
                    break;
                }
            }
            dq.push_back(l);
        }
        while dq.len() >= 3 {
            let (a, b) = (dq[dq.len() - 2], dq[dq.len() - 1]);
            if out(meet(n[a], c[a], n[b], c[b])?, dq[0]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        while dq.len() >= 3 {
            if out(meet(n[dq[0]], c[dq[0]], n[dq[1]], c[dq[1]])?, dq[dq.len() - 1]) {
                dq.pop_front();
            } else {
                break;
            }
        }
        if dq.len() < 3 {
            return None;
        }
        self.lines.clear();
        self.lines.extend(dq.iter().copied());
        self.vertices.clear();
        let r = self.lines.len();
        for k in 0..r {
            let (a, b) = (self.lines[k], self.lines[(k + 1) % r]);
            self.vertices.push(meet(n[a], c[a], n[b], c[b])?);
        }
        let twice: f64 = (0..r).map(|k| self.vertices[k].cross(self.vertices[(k + 1) % r])).sum();
        (twice >= 0.0).then_some(0.5 * twice)
    }
}

/// Area of `K ∩ (K + x)` by polygon clipping, for configurations the
/// half-plane sweep rejects.
fn clip_area(v: &[Vec2], x: Vec2) -> f64 {
    let n = v.len();
    let mut cur: Vec<Vec2> = v.iter().map(|&q| q + x).collect();
    let mut next = Vec::with_capacity(2 * n);
    for i in 0..n {
        let a = v[i];
        let d = v[(i + 1) % n] - a;
        next.clear();
        let m = cur.len();
        for j in 0..m {
            let (p0, p1) = (cur[j], cur[(j + 1) % m]);
            let (s0, s1) = (d.cross(p0 - a), d.cross(p1 - a));
            if s0 >= 0.0 {
                next.push(p0);
            }
            if (s0 >= 0.0) != (s1 >= 0.0) && s0 != s1 {
                next.push(p0 + (p1 - p0) * (s0 / (s0 - s1)));
            }
        }
        std::mem::swap(&mut cur, &mut next);
        if cur.len() < 3 {
            return 0.0;
        }
    }
    let o = cur[0];
    let twice: f64 = (1..cur.len() - 1).map(|j| (cur[j] - o).cross(cur[j + 1] - o)).sum();
    (0.5 * twice).max(0.0)
}

/// Values on the lattice `{(a/k, b/k) : -k <= a, b <= k}` in row-major order
/// over `(x2, x1)`: index `(b + k) * (2k + 1) + (a + k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub k: usize,
    pub values: Vec<f64>,
}

impl SampleGrid {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("grid refinement k must be positive"));
        }
        let n = grid_len(k);
        if values.len() != n {
            return Err(Error::Shape(format!(
                "grid with k = {k} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(SampleGrid { k, values })
    }

    pub fn zeros(k: usize) -> Self {
        SampleGrid {
            k,
            values: vec![0.0; grid_len(k)],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn side(&self) -> usize {
        2 * self.k + 1
    }

    /// Integer lattice coordinates `(a, b)` of site `i`.
    pub fn lattice(&self, i: usize) -> (i64, i64) {
        lattice_coords(self.k, i)
    }

    pub fn index_of(&self, a: i64, b: i64) -> usize {
        let k = self.k as i64;
        ((b + k) * (2 * k + 1) + (a + k)) as usize
    }

    pub fn site(&self, i: usize) -> Vec2 {
        let (a, b) = self.lattice(i);
        let k = self.k as f64;
        Vec2::new(a as f64 / k, b as f64 / k)
    }

    pub fn sites(&self) -> Vec<Vec2> {
        (0..self.len()).map(|i| self.site(i)).collect()
    }

    /// Index of the site `-x_i`; an involution.
    pub fn neg_index(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    pub fn origin_index(&self) -> usize {
        self.len() / 2
    }

    /// Value at the origin site.
    pub fn at_origin(&self) -> f64 {
        self.values[self.origin_index()]
    }
}

pub fn grid_len(k: usize) -> usize {
    (2 * k + 1) * (2 * k + 1)
}

pub fn lattice_coords(k: usize, i: usize) -> (i64, i64) {
    let side = 2 * k + 1;
    let k = k as i64;
    ((i % side) as i64 - k, (i / side) as i64 - k)
}

/// Exact covariogram values at every lattice site; `p` must lie in `C_0`.
pub fn covariogram_grid(p: &Polygon, k: usize) -> Result<SampleGrid> {
    check_in_unit_box(p)?;
    if k == 0 {
        return Err(Error::config("grid refinement k must be positive"));
    }
    let mut grid = SampleGrid::zeros(k);
    let sites = grid.sites();
    grid.values = sites.par_iter().map(|&x| covariogram_at(p, x)).collect();
    Ok(grid)
}
