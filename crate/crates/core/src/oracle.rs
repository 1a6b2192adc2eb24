//! Brute-force references.
//!
//! These routines share no numerical code with the exact kernels beyond the
//! vertex lists of the inputs: Monte Carlo covariograms use their own
//! crossing-number test and Fourier transforms are computed by Gauss-Legendre
//! quadrature over slabs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariogram::covariogram_many;
use crate::geometry::{Polygon, Vec2};
use crate::quadrature::gauss_legendre_on;

/// Crossing-number point-in-polygon test.
pub fn point_in_polygon(v: &[Vec2], p: Vec2) -> bool {
    let n = v.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn bbox(v: &[Vec2]) -> (Vec2, Vec2) {
    v.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), q| (Vec2::new(lo.x.min(q.x), lo.y.min(q.y)), Vec2::new(hi.x.max(q.x), hi.y.max(q.y))),
    )
}

/// Monte Carlo estimate of `area(P ∩ (P + x))` with its standard error.
pub fn covariogram_bruteforce(p: &Polygon, x: Vec2, samples: usize, seed: u64) -> (f64, f64) {
    let v = p.vertices();
    if v.len() < 3 || samples == 0 {
        return (0.0, 0.0);
    }
    let (lo, hi) = bbox(v);
    let area = (hi.x - lo.x) * (hi.y - lo.y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let q = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if point_in_polygon(v, q) && point_in_polygon(v, q - x) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    (area * f, area * (f * (1.0 - f) / samples as f64).sqrt())
}

/// `max_u |h_P(u) - h_Q(u)|` over `m` equally spaced directions.
pub fn hausdorff_bruteforce(p: &Polygon, q: &Polygon, m: usize) -> f64 {
    let h = |v: &[Vec2], u: Vec2| v.iter().map(|w| w.x * u.x + w.y * u.y).fold(f64::NEG_INFINITY, f64::max);
    (0..m)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / m as f64;
            let u = Vec2::new(t.cos(), t.sin());
            (h(p.vertices(), u) - h(q.vertices(), u)).abs()
        })
        .fold(0.0, f64::max)
}

/// Horizontal extent `[left, right]` of a convex polygon at height `y`.
fn slice_at(v: &[Vec2], y: f64) -> Option<(f64, f64)> {
    let n = v.len();
    let mut xs = Vec::with_capacity(2);
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
        if y < ylo || y > yhi || a.y == b.y {
            continue;
        }
        xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    let l = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let r = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (l <= r).then_some((l, r))
}

fn ft_with(p: &Polygon, xi: Vec2, n: usize) -> Complex64 {
    let v = p.vertices();
    let mut ys: Vec<f64> = v.iter().map(|q| q.y).collect();
    ys.sort_by(|a, b| a.total_cmp(b));
    ys.dedup();
    let mut acc = Complex64::new(0.0, 0.0);
    for w in ys.windows(2) {
        for (y, wy) in gauss_legendre_on(n, w[0], w[1]) {
            let Some((l, r)) = slice_at(v, y) else { continue };
            for (x, wx) in gauss_legendre_on(n, l, r) {
                acc += Complex64::from_polar(wx * wy, -(xi.x * x + xi.y * y));
            }
        }
    }
    acc
}

/// `∫_P exp(-i xi . x) dx` by slab-wise tensor Gauss-Legendre quadrature
/// with `n` and `2n` nodes; the flag is set when the two disagree by more
/// than `1e-12`.
pub fn ft_quadrature(p: &Polygon, xi: Vec2, n: usize) -> (Complex64, bool) {
    if p.is_degenerate() {
        return (Complex64::new(0.0, 0.0), false);
    }
    let coarse = ft_with(p, xi, n);
    let fine = ft_with(p, xi, 2 * n);
    (fine, (fine - coarse).norm() > 1e-12)
}

/// Precomputed quadrature of `x ↦ g_P(x)` over `DP`, split along the lines
/// where `g_P` changes its polynomial form.
pub struct CovariogramQuadrature {
    nodes: Vec<Vec2>,
    /// Quadrature weight times `g_P` at the node.
    weighted: Vec<f64>,
}

impl CovariogramQuadrature {
    /// `g_P` is a quadratic polynomial on each cell cut out by the segments
    /// `e - v` and `v - e` (edges `e`, vertices `v`). Strips between the
    /// x-coordinates of all segment endpoints and crossings contain no
    /// crossing, so inside a strip the cells are ordered vertically.
    pub fn new(p: &Polygon, n: usize) -> Self {
        let v = p.vertices();
        let m = v.len();
        let mut segs: Vec<(Vec2, Vec2)> = Vec::new();
        for i in 0..m {
            let (a, b) = (v[i], v[(i + 1) % m]);
            for &w in v {
                for s in [(a - w, b - w), (w - a, w - b)] {
                    let dup = segs.iter().any(|t| {
                        ((t.0 - s.0).norm() < 1e-14 && (t.1 - s.1).norm() < 1e-14)
                            || ((t.0 - s.1).norm() < 1e-14 && (t.1 - s.0).norm() < 1e-14)
                    });
                    if !dup {
                        segs.push(s);
                    }
                }
            }
        }
        let mut xs: Vec<f64> = segs.iter().flat_map(|s| [s.0.x, s.1.x]).collect();
        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                if let Some(q) = crossing(segs[i], segs[j]) {
                    xs.push(q.x);
                }
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in xs.windows(2) {
            if w[1] - w[0] < 1e-13 {
                continue;
            }
            for (x1, wx) in gauss_legendre_on(n, w[0], w[1]) {
                let mut ys: Vec<f64> = segs
                    .iter()
                    .filter_map(|&(a, b)| {
                        let (lo, hi) = (a.x.min(b.x), a.x.max(b.x));
                        (x1 > lo && x1 < hi).then(|| a.y + (x1 - a.x) * (b.y - a.y) / (b.x - a.x))
                    })
                    .collect();
                ys.sort_by(|a, b| a.total_cmp(b));
                ys.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
                for yw in ys.windows(2) {
                    for (x2, wy) in gauss_legendre_on(n, yw[0], yw[1]) {
                        nodes.push(Vec2::new(x1, x2));
                        weights.push(wx * wy);
                    }
                }
            }
        }
        let g = covariogram_many(p, &nodes);
        let weighted = g.iter().zip(&weights).map(|(g, w)| g * w).collect();
        CovariogramQuadrature { nodes, weighted }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫ g_P(x) exp(-i xi . x) dx`.
    pub fn transform(&self, xi: Vec2) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weighted)
            .map(|(x, &w)| Complex64::from_polar(w, -xi.dot(*x)))
            .sum()
    }
}

/// Proper crossing point of two segments.
fn crossing(s: (Vec2, Vec2), t: (Vec2, Vec2)) -> Option<Vec2> {
    let (a, b) = s;
    let (c, d) = t;
    let r = b - a;
    let q = d - c;
    let den = r.cross(q);
    if den.abs() < 1e-15 {
        return None;
    }
    let u = (c - a).cross(q) / den;
    let w = (c - a).cross(r) / den;
    ((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&w)).then(|| a + r * u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariogram::covariogram_at;
    use crate::geometry::hausdorff_distance;
    use crate::shapes::{random_polygon, regular_polygon};
    use crate::spectral::{indicator_ft, squared_modulus};

    #[test]
    fn monte_carlo_square() {
        let c0 = Polygon::unit_square();
        let x = Vec2::new(0.3, -0.2);
        let (est, se) = covariogram_bruteforce(&c0, x, 200_000, 1);
        assert!((est - covariogram_at(&c0, x)).abs() <= 4.0 * se);
    }

    #[test]
    fn crossing_number_test() {
        let v = Polygon::unit_square().vertices().to_vec();
        assert!(point_in_polygon(&v, Vec2::new(0.1, 0.2)));
        assert!(!point_in_polygon(&v, Vec2::new(0.6, 0.2)));
    }

    #[test]
    fn quadrature_ft_matches_closed_form() {
        let p = random_polygon(6, 2).unwrap();
        for xi in [Vec2::new(0.0, 0.0), Vec2::new(3.0, -1.0), Vec2::new(-7.5, 12.0)] {
            let (q, warn) = ft_quadrature(&p, xi, 16);
            assert!(!warn);
            assert!((q - indicator_ft(&p, xi)).norm() < 1e-12);
        }
    }

    #[test]
    fn brute_hausdorff_is_a_lower_bound() {
        let p = regular_polygon(5, 0.4);
        let q = random_polygon(7, 1).unwrap();
        let exact = hausdorff_distance(&p, &q).unwrap();
        // the maximum may sit at a kink, so sampling converges only linearly
        let brute = hausdorff_bruteforce(&p, &q, 36_000);
        assert!(brute <= exact + 1e-15 && exact - brute < 1e-4, "{brute} vs {exact}");
    }

    #[test]
    fn covariogram_transform_at_zero_is_area_squared() {
        let p = regular_polygon(5, 0.45);
        let q = CovariogramQuadrature::new(&p, 5);
        let a = p.area();
        assert!((q.transform(Vec2::ZERO).re - a * a).abs() < 1e-12);
        let xi = Vec2::new(4.0, -2.5);
        assert!((q.transform(xi).re - squared_modulus(&p, xi)).abs() < 1e-9);
    }
}
