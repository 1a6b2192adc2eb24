//! Exact kernels on planar convex polygons.
//!
//! Polygons are stored as counterclockwise vertex chains with collinear and
//! duplicate vertices merged. Intersections may produce degenerate results
//! (a segment or a point) with zero area; every other constructor yields a
//! body with positive area.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Duplicate-vertex tolerance (absolute, working coordinates are O(1)).
const DUP_EPS: f64 = 1e-13;
/// Relative tolerance on |sin| of the turn angle below which a vertex is
/// considered collinear with its neighbours.
const COLLINEAR_EPS: f64 = 1e-12;
/// Intersections with smaller area are reported as degenerate.
const DEGENERATE_AREA: f64 = 1e-15;
/// Antipodal-normal merging tolerance (radians).
pub const NORMAL_MERGE_TOL: f64 = 1e-9;
/// Largest closure defect accepted by [`minkowski_reconstruct`].
pub const BALANCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counterclockwise rotation by 90 degrees.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A unit vector in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Direction(Vec2);

impl Direction {
    /// Normalizes `v`; fails for the zero vector or non-finite input.
    pub fn new(v: Vec2) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "cannot normalize ({}, {})",
                v.x, v.y
            )));
        }
        Ok(Direction(v / n))
    }

    pub fn from_angle(theta: f64) -> Self {
        Direction(Vec2::from_angle(theta))
    }

    /// `count` directions equally spaced over the half circle `[0, pi)`,
    /// so that no two of them are parallel.
    pub fn equally_spaced(count: usize) -> Vec<Direction> {
        (0..count)
            .map(|i| Direction::from_angle(PI * i as f64 / count as f64))
            .collect()
    }

    #[inline]
    pub fn vec(self) -> Vec2 {
        self.0
    }

    pub fn angle(self) -> f64 {
        self.0.angle()
    }
}

impl Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction(-self.0)
    }
}

impl TryFrom<[f64; 2]> for Direction {
    type Error = Error;
    /// Vectors already of unit length up to rounding are kept bit for bit.
    fn try_from(a: [f64; 2]) -> Result<Self> {
        let v: Vec2 = a.into();
        if (v.norm() - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Direction(v));
        }
        Direction::new(v)
    }
}

impl From<Direction> for [f64; 2] {
    fn from(d: Direction) -> Self {
        d.0.into()
    }
}

/// Angle of `v` in `[0, 2pi)`.
fn angle_2pi(v: Vec2) -> f64 {
    let a = v.angle();
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Discrete surface area measure: one atom per facet normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceAreaMeasure {
    atoms: Vec<(Direction, f64)>,
}

impl SurfaceAreaMeasure {
    pub fn new(atoms: Vec<(Direction, f64)>) -> Result<Self> {
        if let Some((_, m)) = atoms.iter().find(|(_, m)| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InfeasibleMeasure(format!("invalid mass {m}")));
        }
        Ok(SurfaceAreaMeasure { atoms })
    }

    pub fn atoms(&self) -> &[(Direction, f64)] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, m)| m).sum()
    }

    /// `sum mass * normal`, which vanishes for the measure of a convex body.
    pub fn imbalance(&self) -> Vec2 {
        self.atoms
            .iter()
            .fold(Vec2::ZERO, |acc, (u, m)| acc + u.vec() * *m)
    }

    pub fn is_balanced(&self, tol: f64) -> bool {
        self.imbalance().norm() <= tol
    }

    /// Measure of the reflected body `-K`.
    pub fn reflected(&self) -> SurfaceAreaMeasure {
        SurfaceAreaMeasure {
            atoms: self.atoms.iter().map(|&(u, m)| (-u, m)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> SurfaceAreaMeasure {
        SurfaceAreaMeasure {
            atoms: self.atoms.iter().map(|&(u, m)| (u, m * s)).collect(),
        }
    }

    /// Sum of two measures; atoms are concatenated, not merged.
    pub fn plus(&self, other: &SurfaceAreaMeasure) -> SurfaceAreaMeasure {
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        SurfaceAreaMeasure { atoms }
    }

    /// Drops zero atoms, sorts by normal angle and merges atoms whose normals
    /// are within `tol` radians of each other.
    pub fn merged(&self, tol: f64) -> SurfaceAreaMeasure {
        let mut atoms: Vec<(f64, Vec2, f64)> = self
            .atoms
            .iter()
            .filter(|(_, m)| *m > 0.0)
            .map(|&(u, m)| (angle_2pi(u.vec()), u.vec(), m))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut groups: Vec<(f64, Vec2, f64)> = Vec::with_capacity(atoms.len());
        for (theta, u, m) in atoms {
            match groups.last_mut() {
                Some(g) if theta - g.0 <= tol => {
                    g.1 += u * m;
                    g.2 += m;
                }
                _ => groups.push((theta, u * m, m)),
            }
        }
        // wrap-around between the last group and the first
        if groups.len() > 1 {
            let first = groups[0];
            let last = groups[groups.len() - 1];
            if first.0 + TAU - last.0 <= tol {
                groups.pop();
                groups[0].1 += last.1;
                groups[0].2 += last.2;
            }
        }
        let atoms = groups
            .into_iter()
            .map(|(_, weighted, m)| (Direction(weighted / weighted.norm()), m))
            .collect();
        SurfaceAreaMeasure { atoms }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn empty() -> Self {
        Polygon {
            vertices: Vec::new(),
        }
    }

    /// Builds a convex polygon from its vertices in either orientation.
    /// Duplicate and collinear vertices are merged; non-convex chains and
    /// chains without positive area are rejected.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(Error::DegenerateInput("non-finite vertex".into()));
        }
        let mut vertices = vertices;
        if signed_area2(&vertices) < 0.0 {
            vertices.reverse();
        }
        let chain = clean_chain(vertices);
        if chain.len() < 3 {
            return Err(Error::DegenerateInput(
                "polygon needs three non-collinear vertices".into(),
            ));
        }
        let n = chain.len();
        for i in 0..n {
            let e1 = chain[(i + 1) % n] - chain[i];
            let e2 = chain[(i + 2) % n] - chain[(i + 1) % n];
            if e1.cross(e2) <= 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "vertex chain is not convex at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        // a convex turn sequence can still wind more than once
        let turning: f64 = (0..n)
            .map(|i| {
                let e1 = chain[(i + 1) % n] - chain[i];
                let e2 = chain[(i + 2) % n] - chain[(i + 1) % n];
                e1.cross(e2).atan2(e1.dot(e2))
            })
            .sum();
        if (turning - TAU).abs() > 1e-6 {
            return Err(Error::DegenerateInput("vertex chain winds more than once".into()));
        }
        Ok(Polygon { vertices: chain })
    }

    /// Convex hull of a point set (Andrew's monotone chain). Collinear
    /// points are dropped; fewer than three hull points give a degenerate
    /// polygon.
    pub fn convex_hull(points: &[Vec2]) -> Self {
        let mut pts: Vec<Vec2> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| (*a - *b).norm() <= DUP_EPS);
        if pts.len() < 3 {
            return Polygon { vertices: pts };
        }
        let turn = |o: Vec2, a: Vec2, b: Vec2| {
            let (ea, eb) = (a - o, b - o);
            let c = ea.cross(eb);
            if c.abs() <= COLLINEAR_EPS * ea.norm() * eb.norm() {
                0.0
            } else {
                c
            }
        };
        let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
        for &p in &pts {
            while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        let lower = hull.len() + 1;
        for &p in pts.iter().rev().skip(1) {
            while hull.len() >= lower && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
        Polygon::from_chain(hull)
    }

    /// Axis-aligned box `[lo.x, hi.x] x [lo.y, hi.y]`.
    pub fn rectangle(lo: Vec2, hi: Vec2) -> Result<Self> {
        Polygon::new(vec![
            lo,
            Vec2::new(hi.x, lo.y),
            hi,
            Vec2::new(lo.x, hi.y),
        ])
    }

    /// The unit cube `C_0 = [-1/2, 1/2]^2`.
    pub fn unit_square() -> Self {
        Polygon::rectangle(Vec2::new(-0.5, -0.5), Vec2::new(0.5, 0.5))
            .expect("unit square is valid")
    }

    /// Counterclockwise chain that is already convex; only cleaned.
    fn from_chain(chain: Vec<Vec2>) -> Self {
        if chain.len() >= 3 && signed_area2(&chain).abs() * 0.5 <= DEGENERATE_AREA {
            return Polygon {
                vertices: extreme_pair(&chain),
            };
        }
        let chain = clean_chain(chain);
        if chain.len() < 3 {
            let v = extreme_pair(&chain);
            return Polygon { vertices: v };
        }
        Polygon { vertices: chain }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Segment, point or empty polygon.
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        0.5 * signed_area2(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        if self.vertices.len() < 2 {
            return 0.0;
        }
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Shoelace area and area-weighted centroid. Degenerate polygons report
    /// zero area and the mean of their vertices.
    pub fn metrics(&self) -> Result<(f64, Vec2)> {
        if self.is_empty() {
            return Err(Error::DegenerateInput("centroid of the empty polygon".into()));
        }
        if self.is_degenerate() {
            let sum = self.vertices.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
            return Ok((0.0, sum / self.vertices.len() as f64));
        }
        // shift to the first vertex for accuracy
        let o = self.vertices[0];
        let mut a2 = 0.0;
        let mut c = Vec2::ZERO;
        for (p, q) in self.edges() {
            let (p, q) = (p - o, q - o);
            let w = p.cross(q);
            a2 += w;
            c += (p + q) * w;
        }
        Ok((0.5 * a2, o + c / (3.0 * a2)))
    }

    pub fn centroid(&self) -> Result<Vec2> {
        self.metrics().map(|(_, c)| c)
    }

    pub fn translate(&self, t: Vec2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + t).collect(),
        }
    }

    /// Dilation about the origin; `s` must be positive.
    pub fn scale(&self, s: f64) -> Polygon {
        assert!(s > 0.0, "scale factor must be positive");
        Polygon {
            vertices: self.vertices.iter().map(|&v| v * s).collect(),
        }
    }

    /// The reflection `-P`.
    pub fn reflect(&self) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| -v).collect(),
        }
    }

    /// Translate with centroid at the origin.
    pub fn centered(&self) -> Result<Polygon> {
        let c = self.centroid()?;
        Ok(self.translate(-c))
    }

    /// Point membership with absolute slack `tol` (boundary counts as inside).
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        match self.vertices.len() {
            0 => false,
            1 => (p - self.vertices[0]).norm() <= tol,
            2 => {
                let (a, b) = (self.vertices[0], self.vertices[1]);
                let ab = b - a;
                let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
                (a + ab * t - p).norm() <= tol
            }
            _ => self
                .edges()
                .all(|(a, b)| (b - a).cross(p - a) / (b - a).norm() >= -tol),
        }
    }

    /// Largest coordinate magnitude of any vertex.
    pub fn max_abs_coordinate(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()))
            .fold(0.0, f64::max)
    }

    pub fn support_vertex(&self, u: Vec2) -> Result<Vec2> {
        self.vertices
            .iter()
            .copied()
            .max_by(|a, b| a.dot(u).total_cmp(&b.dot(u)))
            .ok_or_else(|| Error::DegenerateInput("support of the empty polygon".into()))
    }

    /// `h_P(u) = max_{v in P} u . v`.
    pub fn support(&self, u: Direction) -> Result<f64> {
        self.support_vertex(u.vec()).map(|v| v.dot(u.vec()))
    }

    /// Brightness (projection width) via Cauchy's formula
    /// `b_P(u) = 1/2 sum |u . n| * mass` over the surface area measure.
    pub fn brightness(&self, u: Direction) -> Result<f64> {
        let sam = self.surface_area_measure()?;
        Ok(cauchy_brightness(&sam, u))
    }

    /// One atom per edge: outward unit normal and edge length.
    pub fn surface_area_measure(&self) -> Result<SurfaceAreaMeasure> {
        if self.is_degenerate() {
            return Err(Error::DegenerateInput(
                "surface area measure needs positive area".into(),
            ));
        }
        let atoms = self
            .edges()
            .map(|(a, b)| {
                let e = b - a;
                let len = e.norm();
                (Direction(Vec2::new(e.y, -e.x) / len), len)
            })
            .collect();
        Ok(SurfaceAreaMeasure { atoms })
    }

    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }
}

/// `1/2 sum |u . n| * mass`.
pub fn cauchy_brightness(sam: &SurfaceAreaMeasure, u: Direction) -> f64 {
    0.5 * sam
        .atoms()
        .iter()
        .map(|(n, m)| u.vec().dot(n.vec()).abs() * m)
        .sum::<f64>()
}

fn signed_area2(v: &[Vec2]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let o = v[0];
    (1..v.len() - 1)
        .map(|i| (v[i] - o).cross(v[i + 1] - o))
        .sum()
}

/// Removes duplicates and collinear (or reversing) vertices from a closed
/// counterclockwise chain.
fn clean_chain(mut chain: Vec<Vec2>) -> Vec<Vec2> {
    loop {
        let n = chain.len();
        if n < 3 {
            // collapse duplicate pair
            if n == 2 && (chain[0] - chain[1]).norm() <= DUP_EPS {
                chain.pop();
            }
            return chain;
        }
        let mut removed = None;
        for i in 0..n {
            let prev = chain[(i + n - 1) % n];
            let cur = chain[i];
            let next = chain[(i + 1) % n];
            let (e1, e2) = (cur - prev, next - cur);
            if e1.norm() <= DUP_EPS {
                removed = Some(i);
                break;
            }
            if e1.cross(e2).abs() <= COLLINEAR_EPS * e1.norm() * e2.norm() {
                removed = Some(i);
                break;
            }
        }
        match removed {
            Some(i) => {
                chain.remove(i);
            }
            None => return chain,
        }
    }
}

/// Farthest-apart pair of a (nearly) collinear point set, or a single point.
fn extreme_pair(points: &[Vec2]) -> Vec<Vec2> {
    match points.len() {
        0 => Vec::new(),
        1 => points.to_vec(),
        _ => {
            let (mut best, mut bi, mut bj) = (-1.0, 0, 0);
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    let d = (points[i] - points[j]).norm();
                    if d > best {
                        best = d;
                        bi = i;
                        bj = j;
                    }
                }
            }
            if best <= DUP_EPS {
                vec![points[0]]
            } else {
                vec![points[bi], points[bj]]
            }
        }
    }
}

/// Sutherland-Hodgman clip of a closed chain against the left side of the
/// directed line `a -> b`. Boundary points count as inside.
fn clip_halfplane(subject: &[Vec2], a: Vec2, b: Vec2) -> Vec<Vec2> {
    let dir = b - a;
    let inv = 1.0 / dir.norm();
    let dist = |p: Vec2| dir.cross(p - a) * inv;
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = subject[i];
        let q = subject[(i + 1) % n];
        let (dp, dq) = (dist(p), dist(q));
        let p_in = dp >= 0.0;
        let q_in = dq >= 0.0;
        if p_in {
            out.push(p);
        }
        if p_in != q_in && dp != dq {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// The convex polygon `P ∩ Q`; empty when the interiors are disjoint and
/// degenerate (segment or point) when they only touch.
pub fn intersect_convex(p: &Polygon, q: &Polygon) -> Polygon {
    if p.is_empty() || q.is_empty() {
        return Polygon::empty();
    }
    // bounding-box rejection
    let bb = |poly: &Polygon| {
        poly.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), v| (x0.min(v.x), y0.min(v.y), x1.max(v.x), y1.max(v.y)),
        )
    };
    let (px0, py0, px1, py1) = bb(p);
    let (qx0, qy0, qx1, qy1) = bb(q);
    if px0 > qx1 || qx0 > px1 || py0 > qy1 || qy0 > py1 {
        return Polygon::empty();
    }
    let (subject, clipper) = if q.is_degenerate() && !p.is_degenerate() {
        (q, p)
    } else {
        (p, q)
    };
    if clipper.is_degenerate() {
        return intersect_degenerate(subject, clipper);
    }
    let mut chain = subject.vertices.clone();
    for (a, b) in clipper.edges() {
        chain = clip_halfplane(&chain, a, b);
        if chain.is_empty() {
            return Polygon::empty();
        }
    }
    if subject.is_degenerate() {
        return Polygon {
            vertices: extreme_pair(&chain),
        };
    }
    Polygon::from_chain(chain)
}

/// Both operands degenerate (points or segments).
fn intersect_degenerate(p: &Polygon, q: &Polygon) -> Polygon {
    let tol = DUP_EPS;
    // points of p lying in q and vice versa, plus proper crossings
    let mut pts: Vec<Vec2> = Vec::new();
    for &v in p.vertices() {
        if q.contains(v, tol) {
            pts.push(v);
        }
    }
    for &v in q.vertices() {
        if p.contains(v, tol) {
            pts.push(v);
        }
    }
    if p.len() == 2 && q.len() == 2 {
        let (a, b) = (p.vertices[0], p.vertices[1]);
        let (c, d) = (q.vertices[0], q.vertices[1]);
        let denom = (b - a).cross(d - c);
        if denom.abs() > 0.0 {
            let t = (c - a).cross(d - c) / denom;
            let s = (c - a).cross(b - a) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
                pts.push(a + (b - a) * t);
            }
        }
    }
    Polygon {
        vertices: extreme_pair(&pts),
    }
}

/// Reconstructs the convex polygon with surface area measure `m`, centroid
/// at the origin: atoms sorted by normal angle are chained as edge vectors
/// `mass * rot90(normal)`.
pub fn minkowski_reconstruct(m: &SurfaceAreaMeasure) -> Result<Polygon> {
    let imbalance = m.imbalance().norm();
    if imbalance > BALANCE_TOL {
        return Err(Error::InfeasibleMeasure(format!(
            "measure is unbalanced by {imbalance:e}"
        )));
    }
    let merged = m.merged(NORMAL_MERGE_TOL);
    if merged.atoms.len() < 3 {
        return Err(Error::InfeasibleMeasure(format!(
            "{} effective atoms do not span the plane",
            merged.atoms.len()
        )));
    }
    // merged atoms come sorted by angle in [0, 2pi)
    let total = merged.total_mass();
    let gap = merged.imbalance().perp();
    let mut p = Vec2::ZERO;
    let mut chain = Vec::with_capacity(merged.atoms.len());
    for &(u, mass) in &merged.atoms {
        chain.push(p);
        p += u.vec().perp() * mass - gap * (mass / total);
    }
    // consecutive normals more than pi apart mean the atoms sit in a half
    // plane, which balance rules out only up to the tolerance
    let n = merged.atoms.len();
    for i in 0..n {
        let a = angle_2pi(merged.atoms[i].0.vec());
        let b = angle_2pi(merged.atoms[(i + 1) % n].0.vec());
        let step = if i + 1 == n { b + TAU - a } else { b - a };
        if step >= PI - 1e-12 {
            return Err(Error::InfeasibleMeasure(
                "normals lie in a closed half plane".into(),
            ));
        }
    }
    let poly = Polygon::from_chain(chain);
    if poly.is_degenerate() {
        return Err(Error::InfeasibleMeasure("reconstruction has zero area".into()));
    }
    poly.centered()
}

/// `DP = P + (-P)`, the hull of all vertex differences.
pub fn difference_body(p: &Polygon) -> Polygon {
    let v = p.vertices();
    let mut diffs = Vec::with_capacity(v.len() * v.len());
    for &a in v {
        for &b in v {
            diffs.push(a - b);
        }
    }
    Polygon::convex_hull(&diffs)
}

/// Minkowski sum of two convex polygons.
pub fn minkowski_sum(p: &Polygon, q: &Polygon) -> Polygon {
    let mut pts = Vec::with_capacity(p.len() * q.len());
    for &a in p.vertices() {
        for &b in q.vertices() {
            pts.push(a + b);
        }
    }
    Polygon::convex_hull(&pts)
}

/// The o-symmetric body whose surface area measure is
/// `(S(P, .) + S(-P, .)) / 2`.
pub fn blaschke_body(p: &Polygon) -> Result<Polygon> {
    let sam = p.surface_area_measure()?;
    let sym = sam.scaled(0.5).plus(&sam.reflected().scaled(0.5));
    minkowski_reconstruct(&sym)
}

/// Hausdorff distance `sup_u |h_P(u) - h_Q(u)|`.
///
/// Between consecutive edge-normal angles of either polygon both support
/// vertices are fixed, so the difference is `R cos(theta - phi)` on each arc
/// and its maximum is taken in closed form.
pub fn hausdorff_distance(p: &Polygon, q: &Polygon) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::DegenerateInput("Hausdorff distance to the empty set".into()));
    }
    let mut breaks: Vec<f64> = p
        .edges()
        .chain(q.edges())
        .filter(|(a, b)| (*b - *a).norm() > 0.0)
        .map(|(a, b)| {
            let e = b - a;
            angle_2pi(Vec2::new(e.y, -e.x))
        })
        .collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    if breaks.is_empty() {
        breaks.push(0.0);
    }
    let n = breaks.len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        let a = breaks[i];
        let b = if i + 1 == n { breaks[0] + TAU } else { breaks[i + 1] };
        let mid = Vec2::from_angle(0.5 * (a + b));
        let d = p.support_vertex(mid)? - q.support_vertex(mid)?;
        let f = |t: f64| d.dot(Vec2::from_angle(t)).abs();
        best = best.max(f(a)).max(f(b));
        let phi = angle_2pi(d);
        for cand in [phi, phi + PI, phi - PI, phi + TAU] {
            if cand > a && cand < b {
                best = best.max(d.norm());
            }
        }
    }
    Ok(best)
}

/// Centre and radius of the largest disk inscribed in `p`.
pub fn chebyshev_center(p: &Polygon) -> Result<(Vec2, f64)> {
    if p.is_degenerate() {
        return Err(Error::DegenerateInput("inradius of a degenerate polygon".into()));
    }
    // halfplanes n . x <= h
    let halfplanes: Vec<(Vec2, f64)> = p
        .edges()
        .map(|(a, b)| {
            let e = b - a;
            let n = Vec2::new(e.y, -e.x) / e.norm();
            (n, n.dot(a))
        })
        .collect();
    let m = halfplanes.len();
    let mut best: Option<(Vec2, f64)> = None;
    // optimum of the 3-variable LP sits on three tight constraints
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let rows = [halfplanes[i], halfplanes[j], halfplanes[k]];
                let mat = nalgebra::Matrix3::new(
                    rows[0].0.x, rows[0].0.y, 1.0,
                    rows[1].0.x, rows[1].0.y, 1.0,
                    rows[2].0.x, rows[2].0.y, 1.0,
                );
                let rhs = nalgebra::Vector3::new(rows[0].1, rows[1].1, rows[2].1);
                let Some(sol) = mat.lu().solve(&rhs) else {
                    continue;
                };
                let (c, r) = (Vec2::new(sol[0], sol[1]), sol[2]);
                if !(r.is_finite() && r > 0.0) {
                    continue;
                }
                let feasible = halfplanes.iter().all(|(n, h)| n.dot(c) + r <= h + 1e-12);
                if feasible && best.is_none_or(|(_, br)| r > br) {
                    best = Some((c, r));
                }
            }
        }
    }
    best.ok_or_else(|| Error::DegenerateInput("no inscribed disk found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn same_vertex_set(a: &Polygon, b: &Polygon, tol: f64) -> bool {
        a.len() == b.len()
            && a.vertices()
                .iter()
                .all(|v| b.vertices().iter().any(|w| (*v - *w).norm() <= tol))
    }

    #[test]
    fn construction_merges_collinear_and_reorients() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.5),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.area() > 0.0);
    }

    #[test]
    fn construction_rejects_nonconvex() {
        let r = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.2),
            Vec2::new(1.0, 2.0),
        ]);
        assert!(matches!(r, Err(Error::DegenerateInput(_))));
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 1.0)]).is_err());
    }

    #[test]
    fn intersection_cases() {
        let c0 = Polygon::unit_square();
        let same = intersect_convex(&c0, &c0);
        assert!(same_vertex_set(&same, &c0, 1e-15));

        let shifted = intersect_convex(&c0, &c0.translate(Vec2::new(0.5, 0.0)));
        assert!((shifted.area() - 0.5).abs() < 1e-15);
        let expect = Polygon::rectangle(Vec2::new(0.0, -0.5), Vec2::new(0.5, 0.5)).unwrap();
        assert!(same_vertex_set(&shifted, &expect, 1e-15));

        assert!(intersect_convex(&c0, &c0.translate(Vec2::new(2.0, 0.0))).is_empty());

        let touching = intersect_convex(&c0, &c0.translate(Vec2::new(1.0, 0.0)));
        assert!(touching.is_degenerate() && !touching.is_empty());
        assert_eq!(touching.area(), 0.0);

        let corner = intersect_convex(&c0, &c0.translate(Vec2::new(1.0, 1.0)));
        assert_eq!(corner.len(), 1);
    }

    #[test]
    fn metrics_examples() {
        let (a, c) = tri().metrics().unwrap();
        assert!((a - 0.5).abs() < 1e-15);
        assert!((c - Vec2::new(1.0 / 3.0, 1.0 / 3.0)).norm() < 1e-15);
        let (a, c) = Polygon::unit_square().metrics().unwrap();
        assert_eq!(a, 1.0);
        assert!(c.norm() < 1e-15);
        assert!((difference_body(&tri()).area() - 3.0).abs() < 1e-14);
        assert!(Polygon::empty().metrics().is_err());
    }

    #[test]
    fn support_examples() {
        let c0 = Polygon::unit_square();
        assert_eq!(c0.support(Direction::from_angle(0.0)).unwrap(), 0.5);
        let d = Direction::new(Vec2::new(1.0, 1.0)).unwrap();
        assert!((c0.support(d).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let t = Vec2::new(0.3, -0.7);
        for i in 0..16 {
            let u = Direction::from_angle(i as f64 * 0.4);
            let moved = c0.translate(t).support(u).unwrap();
            assert!((moved - c0.support(u).unwrap() - u.vec().dot(t)).abs() < 1e-15);
        }
        assert!(Polygon::empty().support(d).is_err());
    }

    #[test]
    fn brightness_examples() {
        let c0 = Polygon::unit_square();
        assert!((c0.brightness(Direction::from_angle(0.0)).unwrap() - 1.0).abs() < 1e-15);
        let d = Direction::new(Vec2::new(1.0, 1.0)).unwrap();
        assert!((c0.brightness(d).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let seg = Polygon::convex_hull(&[Vec2::ZERO, Vec2::new(1.0, 0.0)]);
        assert!(seg.brightness(d).is_err());
    }

    #[test]
    fn surface_area_measure_examples() {
        let sam = Polygon::unit_square().surface_area_measure().unwrap();
        assert_eq!(sam.atoms().len(), 4);
        for (u, m) in sam.atoms() {
            assert!((m - 1.0).abs() < 1e-15);
            assert!((u.vec().x.abs() - 1.0).abs() < 1e-15 || (u.vec().y.abs() - 1.0).abs() < 1e-15);
        }
        let sam = tri().surface_area_measure().unwrap();
        let expect = [
            (Vec2::new(0.0, -1.0), 1.0),
            (Vec2::new(1.0, 1.0) / 2f64.sqrt(), 2f64.sqrt()),
            (Vec2::new(-1.0, 0.0), 1.0),
        ];
        for (u, m) in expect {
            assert!(sam
                .atoms()
                .iter()
                .any(|(v, w)| (v.vec() - u).norm() < 1e-15 && (w - m).abs() < 1e-15));
        }
        assert!(sam.imbalance().norm() < 1e-15);
    }

    #[test]
    fn minkowski_reconstruct_examples() {
        let atoms = vec![
            (Direction::from_angle(0.0), 1.0),
            (Direction::from_angle(PI / 2.0), 1.0),
            (Direction::from_angle(PI), 1.0),
            (Direction::from_angle(1.5 * PI), 1.0),
        ];
        let p = minkowski_reconstruct(&SurfaceAreaMeasure::new(atoms).unwrap()).unwrap();
        assert!(hausdorff_distance(&p, &Polygon::unit_square()).unwrap() < 1e-15);

        let unbalanced = SurfaceAreaMeasure::new(vec![
            (Direction::from_angle(0.0), 1.0),
            (Direction::from_angle(2.0), 1.0),
            (Direction::from_angle(4.0), 1.3),
        ])
        .unwrap();
        assert!(matches!(
            minkowski_reconstruct(&unbalanced),
            Err(Error::InfeasibleMeasure(_))
        ));

        let two = SurfaceAreaMeasure::new(vec![
            (Direction::from_angle(0.0), 1.0),
            (Direction::from_angle(PI), 1.0),
        ])
        .unwrap();
        assert!(matches!(minkowski_reconstruct(&two), Err(Error::InfeasibleMeasure(_))));
    }

    #[test]
    fn difference_body_examples() {
        let d = difference_body(&Polygon::unit_square());
        assert!(hausdorff_distance(&d, &Polygon::unit_square().scale(2.0)).unwrap() < 1e-15);
        let hex = difference_body(&tri());
        let expect = Polygon::new(vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(0.0, -1.0),
            Vec2::new(-1.0, 0.0),
            Vec2::new(-1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(same_vertex_set(&hex, &expect, 1e-15));
        assert!((hex.area() - 3.0).abs() < 1e-15);
        let moved = difference_body(&tri().translate(Vec2::new(0.2, 0.1)));
        assert!(hausdorff_distance(&moved, &hex).unwrap() < 1e-15);
    }

    #[test]
    fn blaschke_body_examples() {
        let c0 = Polygon::unit_square();
        assert!(hausdorff_distance(&blaschke_body(&c0).unwrap(), &c0).unwrap() < 1e-15);

        let nabla = blaschke_body(&tri()).unwrap();
        let sam = nabla.surface_area_measure().unwrap();
        assert_eq!(sam.atoms().len(), 6);
        let s2 = 2f64.sqrt();
        let expect = [
            (Vec2::new(0.0, 1.0), 0.5),
            (Vec2::new(0.0, -1.0), 0.5),
            (Vec2::new(1.0, 0.0), 0.5),
            (Vec2::new(-1.0, 0.0), 0.5),
            (Vec2::new(1.0, 1.0) / s2, s2 / 2.0),
            (Vec2::new(-1.0, -1.0) / s2, s2 / 2.0),
        ];
        for (u, m) in expect {
            assert!(sam
                .atoms()
                .iter()
                .any(|(v, w)| (v.vec() - u).norm() < 1e-12 && (w - m).abs() < 1e-12));
        }
        // o-symmetric
        assert!(hausdorff_distance(&nabla, &nabla.reflect()).unwrap() < 1e-14);
    }

    #[test]
    fn hausdorff_examples() {
        let c0 = Polygon::unit_square();
        assert_eq!(hausdorff_distance(&tri(), &tri()).unwrap(), 0.0);
        let d = hausdorff_distance(&c0, &c0.scale(1.2)).unwrap();
        assert!((d - 0.1 * 2f64.sqrt()).abs() < 1e-15);
        // translation by t moves every support value by at most |t|
        let t = Vec2::new(0.3, 0.4);
        assert!((hausdorff_distance(&c0, &c0.translate(t)).unwrap() - 0.5).abs() < 1e-15);
        assert!(hausdorff_distance(&c0, &Polygon::empty()).is_err());
    }

    #[test]
    fn chebyshev_center_of_triangle() {
        let (c, r) = chebyshev_center(&tri()).unwrap();
        let expect = 1.0 / (2.0 + 2f64.sqrt());
        assert!((r - expect).abs() < 1e-12);
        assert!((c - Vec2::new(expect, expect)).norm() < 1e-12);
    }

    #[test]
    fn merged_wraps_around() {
        let m = SurfaceAreaMeasure::new(vec![
            (Direction::from_angle(-1e-12), 1.0),
            (Direction::from_angle(1e-12), 2.0),
            (Direction::from_angle(1.0), 0.0),
        ])
        .unwrap()
        .merged(1e-9);
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.atoms()[0].1, 3.0);
    }
}
