//! Least squares fits: the brightness NNLS fit and the nonlinear covariogram
//! fit over facet masses.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariogram::{halfplane_covariogram, SampleGrid};
use crate::error::{Error, Result};
use crate::geometry::{intersect_convex, minkowski_reconstruct, Direction, Polygon, SurfaceAreaMeasure, Vec2};

/// Facet masses `a_j^+` for `u_j` and `a_j^-` for `-u_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetVariables {
    pub normals: Vec<Direction>,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
}

impl FacetVariables {
    pub fn new(normals: Vec<Direction>, a_plus: Vec<f64>, a_minus: Vec<f64>) -> Result<Self> {
        if a_plus.len() != normals.len() || a_minus.len() != normals.len() {
            return Err(Error::Shape(format!(
                "{} normals need as many masses, got {} and {}",
                normals.len(),
                a_plus.len(),
                a_minus.len()
            )));
        }
        Ok(FacetVariables {
            normals,
            a_plus,
            a_minus,
        })
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// `Σ_j (a_j^+ - a_j^-) u_j`.
    pub fn balance_residual(&self) -> Vec2 {
        self.normals
            .iter()
            .zip(self.a_plus.iter().zip(&self.a_minus))
            .fold(Vec2::ZERO, |acc, (u, (p, m))| acc + u.vec() * (p - m))
    }

    /// `a_j^+ <-> a_j^-`; the resulting body is the reflection.
    pub fn swapped(&self) -> Self {
        FacetVariables {
            normals: self.normals.clone(),
            a_plus: self.a_minus.clone(),
            a_minus: self.a_plus.clone(),
        }
    }

    /// Interleaved `(a_1^+, a_1^-, ..., a_s^+, a_s^-)`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.a_plus
            .iter()
            .zip(&self.a_minus)
            .flat_map(|(&p, &m)| [p, m])
            .collect()
    }

    fn with_vector(&self, x: &[f64]) -> Self {
        FacetVariables {
            normals: self.normals.clone(),
            a_plus: x.iter().step_by(2).copied().collect(),
            a_minus: x.iter().skip(1).step_by(2).copied().collect(),
        }
    }

    /// The measure with atoms `(u_j, a_j^+)` and `(-u_j, a_j^-)`, zero masses
    /// dropped.
    pub fn measure(&self) -> SurfaceAreaMeasure {
        let atoms = self
            .normals
            .iter()
            .zip(self.a_plus.iter().zip(&self.a_minus))
            .flat_map(|(&u, (&p, &m))| [(u, p), (-u, m)])
            .filter(|&(_, m)| m > 0.0)
            .collect();
        SurfaceAreaMeasure::new(atoms).expect("masses are nonnegative")
    }

    /// 2 x 2s constraint matrix `B` with `B a = Σ_j (a_j^+ - a_j^-) u_j`.
    fn constraint_matrix(&self) -> DMatrix<f64> {
        let s = self.len();
        DMatrix::from_fn(2, 2 * s, |r, c| {
            let u = self.normals[c / 2].vec();
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * if r == 0 { u.x } else { u.y }
        })
    }

    fn check_spanning(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::config(format!(
                "need at least 2 normal pairs, got {}",
                self.len()
            )));
        }
        let spans = self
            .normals
            .iter()
            .any(|u| u.vec().cross(self.normals[0].vec()).abs() > 1e-12);
        if !spans {
            return Err(Error::config("facet normals do not span the plane"));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{a >= 0, Σ_j (a_j^+ - a_j^-) u_j = o}`.
///
/// The projection is `max(0, a - B^T λ)` for the multiplier `λ` solving the
/// two-dimensional dual, found by damped semismooth Newton iteration.
pub fn project_to_balanced_cone(a: &FacetVariables) -> Result<FacetVariables> {
    a.check_spanning()?;
    let b = a.constraint_matrix();
    let a0 = DVector::from_vec(a.to_vector());
    Ok(a.with_vector(project_with(&b, &a0).as_slice()))
}

fn project_with(b: &DMatrix<f64>, a0: &DVector<f64>) -> DVector<f64> {
    let n = a0.len();
    let (bx, by): (Vec<f64>, Vec<f64>) = (0..n).map(|c| (b[(0, c)], b[(1, c)])).unzip();
    let primal = |lam: [f64; 2], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (a0[i] - bx[i] * lam[0] - by[i] * lam[1]).max(0.0);
        }
    };
    let apply = |x: &[f64]| {
        let mut g = [0.0; 2];
        for i in 0..n {
            g[0] += bx[i] * x[i];
            g[1] += by[i] * x[i];
        }
        g
    };
    // dual objective, maximised
    let mut buf = vec![0.0; n];
    let mut dual = |lam: [f64; 2]| {
        primal(lam, &mut buf);
        let g = apply(&buf);
        let d2: f64 = buf.iter().zip(a0.iter()).map(|(x, a)| (x - a) * (x - a)).sum();
        0.5 * d2 + lam[0] * g[0] + lam[1] * g[1]
    };
    let bnorm2: f64 = bx.iter().chain(&by).map(|v| v * v).sum();
    let scale = a0.amax().max(1e-300);
    let mut x = vec![0.0; n];
    let mut lam = [0.0; 2];
    for _ in 0..200 {
        primal(lam, &mut x);
        let grad = apply(&x);
        if grad[0].hypot(grad[1]) <= 1e-15 * scale {
            return DVector::from_vec(x);
        }
        let mut h = [0.0; 3];
        for i in (0..n).filter(|&i| x[i] > 0.0) {
            h[0] += bx[i] * bx[i];
            h[1] += bx[i] * by[i];
            h[2] += by[i] * by[i];
        }
        let reg = 1e-12 * (1.0 + h[0] + h[2]);
        let (h00, h11) = (h[0] + reg, h[2] + reg);
        let det = h00 * h11 - h[1] * h[1];
        let step = if det > 0.0 && det.is_finite() {
            [(h11 * grad[0] - h[1] * grad[1]) / det, (h00 * grad[1] - h[1] * grad[0]) / det]
        } else {
            grad
        };
        let f0 = dual(lam);
        let slope = grad[0] * step[0] + grad[1] * step[1];
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = [lam[0] + step[0] * t, lam[1] + step[1] * t];
            if dual(cand) >= f0 + 1e-4 * t * slope {
                lam = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // gradient ascent fallback
            let s = 1.0 / (1.0 + bnorm2);
            let cand = [lam[0] + grad[0] * s, lam[1] + grad[1] * s];
            if dual(cand) <= f0 {
                return DVector::from_vec(x);
            }
            lam = cand;
        }
    }
    primal(lam, &mut x);
    DVector::from_vec(x)
}

/// `P(a)`: the polygon with the given facet masses, centroid at the origin.
pub fn polygon_from_facets(a: &FacetVariables) -> Result<Polygon> {
    minkowski_reconstruct(&a.measure())
}

/// Lawson-Hanson active-set solver for `min ||A x - b||, x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 10.0 * f64::EPSILON * a.abs().column_sum().amax().max(1.0) * m.max(n) as f64;
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let z = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        full
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = pick else { break };
        passive[j] = true;
        loop {
            let z = solve(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            let alpha = (0..n)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Relative mass below which fitted atoms are dropped.
pub const PRUNE_REL: f64 = 1e-8;

/// Nonnegative least squares fit of an o-symmetric polygon to brightness
/// samples, with candidate normals at the sample directions.
pub fn bright_lsq_fit(samples: &[(Direction, f64)]) -> Result<Polygon> {
    let dirs: Vec<Direction> = samples.iter().map(|s| s.0).collect();
    crate::measurement::check_nonparallel(&dirs)?;
    let a = DMatrix::from_fn(samples.len(), dirs.len(), |i, j| {
        0.5 * dirs[i].vec().dot(dirs[j].vec()).abs()
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let c = nnls(&a, &b);
    let total: f64 = c.iter().sum();
    if !(total > 0.0) {
        return Err(Error::failure("brightness fit", "all fitted masses are zero"));
    }
    let atoms: Vec<(Direction, f64)> = dirs
        .iter()
        .zip(c.iter())
        .filter(|&(_, &m)| m > PRUNE_REL * total)
        .flat_map(|(&u, &m)| [(u, 0.5 * m), (-u, 0.5 * m)])
        .collect();
    let sam = SurfaceAreaMeasure::new(atoms)?;
    minkowski_reconstruct(&sam)
        .map_err(|e| Error::failure("brightness fit", e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    /// Objective evaluations per restart.
    pub max_evals: usize,
    pub seed: u64,
    /// Overrides the starting point of restart 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<FacetVariables>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 8,
            max_evals: 2000,
            seed: 0,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub solution: FacetVariables,
    pub objective: f64,
    /// Objective evaluations over all restarts.
    pub iterations: usize,
    pub restarts: usize,
    /// Best restart.
    pub best_restart: usize,
    pub initial_objectives: Vec<f64>,
    pub final_objectives: Vec<f64>,
    pub converged: bool,
}

/// Pair normals `{±u_j}` of an o-symmetric polygon, one per pair, with
/// `u_j` at angle in `[0, π)`.
pub fn pair_normals(q: &Polygon) -> Result<Vec<Direction>> {
    let sam = q
        .surface_area_measure()
        .map_err(|e| Error::config(format!("first-stage polygon: {e}")))?;
    let mut angles: Vec<f64> = sam
        .atoms()
        .iter()
        .map(|(u, _)| u.angle().rem_euclid(PI))
        .map(|t| if PI - t < 1e-9 { 0.0 } else { t })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if angles.len() < 2 {
        return Err(Error::config(format!(
            "first-stage polygon has {} facet pairs, need at least 2",
            angles.len()
        )));
    }
    Ok(angles.into_iter().map(Direction::from_angle).collect())
}

/// Objective `Σ_i (M_i - g_{P(a) ∩ C_0}(x_i))^2` on a fixed grid.
///
/// `g` is even, so the sum is evaluated on half the sites against the
/// symmetrised data; the antisymmetric part of the data is a constant
/// offset.
pub struct CovObjective<'a> {
    grid: &'a SampleGrid,
    /// Objective values below this count as an exact fit.
    floor: f64,
    /// Sites `i <= origin`; `g` at `neg(i)` is the same value.
    half_sites: Vec<Vec2>,
    target: Vec<f64>,
    /// `√2` off the origin, where a half site stands for a pair.
    weight: Vec<f64>,
    offset: f64,
    box_: Polygon,
}

/// Half-plane description of `P(a) ∩ C_0` for fixed normals.
struct Layout {
    /// Normal of each variable (`+u_j`, `-u_j` interleaved).
    normals: Vec<Vec2>,
    /// Variables by angle of their normal.
    order: Vec<usize>,
    /// Planes by angle: normal, owning variable (`None` for the box) and
    /// cap on the support number from a coinciding box side.
    planes: Vec<(Vec2, Option<usize>, f64)>,
}

impl Layout {
    fn new(a: &FacetVariables) -> Layout {
        let normals: Vec<Vec2> = a.normals.iter().flat_map(|u| [u.vec(), -u.vec()]).collect();
        let key = |v: Vec2| v.angle().rem_euclid(2.0 * PI);
        let mut order: Vec<usize> = (0..normals.len()).collect();
        order.sort_by(|&i, &j| key(normals[i]).total_cmp(&key(normals[j])));
        let mut planes: Vec<(Vec2, Option<usize>, f64)> =
            order.iter().map(|&v| (normals[v], Some(v), f64::INFINITY)).collect();
        for b in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0)] {
            match planes.iter_mut().find(|(n, _, _)| (*n - b).norm() < 1e-12) {
                Some(p) => p.2 = 0.5,
                None => planes.push((b, None, 0.5)),
            }
        }
        planes.sort_by(|x, y| key(x.0).total_cmp(&key(y.0)));
        Layout { normals, order, planes }
    }

    /// Support numbers of `P(a)` about its centroid, in variable order;
    /// `None` when the facet chain encloses no area.
    fn supports(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut starts = vec![Vec2::ZERO; x.len()];
        let mut chain = Vec::with_capacity(x.len());
        let mut w = Vec2::ZERO;
        for &v in &self.order {
            starts[v] = w;
            chain.push(w);
            w += self.normals[v].perp() * x[v];
        }
        let n = chain.len();
        let (mut twice, mut c) = (0.0, Vec2::ZERO);
        for i in 0..n {
            let (p, q) = (chain[i], chain[(i + 1) % n]);
            let cr = p.cross(q);
            twice += cr;
            c += (p + q) * cr;
        }
        if !(twice > 1e-300) {
            return None;
        }
        let c = c / (3.0 * twice);
        Some(starts.iter().zip(&self.normals).map(|(s, u)| u.dot(*s - c)).collect())
    }

    /// Plane normals and support numbers of `P(a) ∩ C_0`.
    fn planes(&self, h: &[f64]) -> (Vec<Vec2>, Vec<f64>) {
        self.planes
            .iter()
            .map(|&(u, owner, cap)| (u, owner.map_or(cap, |v| h[v].min(cap))))
            .unzip()
    }
}

impl<'a> CovObjective<'a> {
    pub fn new(grid: &'a SampleGrid) -> Self {
        let o = grid.origin_index();
        let half_sites = (0..=o).map(|i| grid.site(i)).collect();
        let energy: f64 = grid.values.iter().map(|v| v * v).sum();
        let mut target = Vec::with_capacity(o + 1);
        let mut weight = Vec::with_capacity(o + 1);
        let mut offset = 0.0;
        for i in 0..=o {
            let (a, b) = (grid.values[i], grid.values[grid.neg_index(i)]);
            if i == o {
                target.push(a);
                weight.push(1.0);
            } else {
                target.push(0.5 * (a + b));
                weight.push(2f64.sqrt());
                offset += 0.5 * (a - b) * (a - b);
            }
        }
        CovObjective {
            grid,
            floor: 1e-24 * energy,
            half_sites,
            target,
            weight,
            offset,
            box_: Polygon::unit_square(),
        }
    }

    /// `P(a) ∩ C_0`, or `None` when the facets give no body.
    pub fn body(&self, a: &FacetVariables) -> Option<Polygon> {
        let p = polygon_from_facets(a).ok()?;
        let clipped = intersect_convex(&p, &self.box_);
        (!clipped.is_degenerate()).then_some(clipped)
    }

    fn model(&self, layout: &Layout, x: &[f64], grad: Option<&mut [f64]>) -> Vec<f64> {
        match layout.supports(x) {
            Some(h) => {
                let (n, c) = layout.planes(&h);
                halfplane_covariogram(&n, &c, &self.half_sites, grad)
            }
            None => {
                if let Some(g) = grad {
                    g.fill(0.0);
                }
                vec![0.0; self.half_sites.len()]
            }
        }
    }

    fn weighted(&self, g: &[f64]) -> Vec<f64> {
        g.iter()
            .zip(&self.target)
            .zip(&self.weight)
            .map(|((g, t), w)| w * (t - g))
            .collect()
    }

    /// Residuals `M_i - g(x_i)` over all sites.
    pub fn residuals(&self, a: &FacetVariables) -> Vec<f64> {
        let half = self.model(&Layout::new(a), &a.to_vector(), None);
        let n = self.grid.len();
        (0..n)
            .map(|i| {
                let j = if i < half.len() { i } else { n - 1 - i };
                self.grid.values[i] - half[j]
            })
            .collect()
    }

    pub fn value(&self, a: &FacetVariables) -> f64 {
        let g = self.model(&Layout::new(a), &a.to_vector(), None);
        self.weighted(&g).iter().map(|r| r * r).sum::<f64>() + self.offset
    }
}

/// Orthonormal basis of `ker B`, as columns.
fn null_space(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.ncols();
    let bbt = b * b.transpose();
    let inv = bbt.try_inverse().expect("normals span the plane");
    let proj = DMatrix::identity(n, n) - b.transpose() * inv * b;
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    eig.eigenvectors.select_columns(&cols)
}

struct Restart {
    x: Vec<f64>,
    f: f64,
    f0: f64,
    evals: usize,
    converged: bool,
}

/// Nonlinear least squares fit of `P(a) ∩ C_0` to covariogram samples with
/// the facet normals of `qk`. Returns the fitted body translated to have its
/// centroid at the origin.
pub fn cov_lsq_fit(grid: &SampleGrid, qk: &Polygon, opts: &FitOptions) -> Result<(Polygon, FitReport)> {
    let normals = pair_normals(qk)?;
    let s = normals.len();
    let template = FacetVariables::new(normals.clone(), vec![0.0; s], vec![0.0; s])?;
    template.check_spanning()?;
    if opts.restarts == 0 {
        return Err(Error::config("need at least one restart"));
    }
    let b = template.constraint_matrix();
    let z = null_space(&b);
    let objective = CovObjective::new(grid);

    // restart 0: Q_k's own facet masses rescaled to the area estimate
    let target = grid.at_origin().max(1e-3);
    let base: Vec<f64> = match &opts.initial {
        Some(init) => {
            if init.normals.len() != s {
                return Err(Error::Shape("initial point has the wrong number of normals".into()));
            }
            init.to_vector()
        }
        None => {
            let sam = qk.surface_area_measure()?;
            let mut a = template.clone();
            for (u, m) in sam.atoms() {
                let t = u.angle().rem_euclid(2.0 * PI);
                for (j, n) in normals.iter().enumerate() {
                    let d = (t - n.angle()).rem_euclid(2.0 * PI);
                    if d.min(2.0 * PI - d) < 1e-9 {
                        a.a_plus[j] += m;
                    } else if (d - PI).abs() < 1e-9 {
                        a.a_minus[j] += m;
                    }
                }
            }
            rescale_to_area(&template, &a.to_vector(), target)
        }
    };

    let runs: Vec<Restart> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                base.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                // each facet pair leans to a random side
                let pert: Vec<f64> = base
                    .chunks_exact(2)
                    .flat_map(|pair| {
                        let q = 0.5 * (pair[0] + pair[1]);
                        let rho: f64 = rng.random_range(0.3..1.0);
                        let wobble = 1.0 + 0.2 * (rng.random::<f64>() - 0.5);
                        let (hi, lo) = (q * (1.0 + rho) * wobble, q * (1.0 - rho) * wobble);
                        if rng.random::<bool>() { [hi, lo] } else { [lo, hi] }
                    })
                    .collect();
                let proj = project_with(&b, &DVector::from_vec(pert));
                rescale_to_area(&template, proj.as_slice(), target)
            };
            run_restart(&objective, &template, &b, &z, start, opts.max_evals)
        })
        .collect();

    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .expect("at least one restart");
    let solution = template.with_vector(&best.x);
    let report = FitReport {
        solution: solution.clone(),
        objective: best.f,
        iterations: runs.iter().map(|r| r.evals).sum(),
        restarts: runs.len(),
        best_restart,
        initial_objectives: runs.iter().map(|r| r.f0).collect(),
        final_objectives: runs.iter().map(|r| r.f).collect(),
        converged: best.converged,
    };
    let body = objective
        .body(&solution)
        .ok_or_else(|| Error::failure("covariogram fit", "fitted facets give no body"))?;
    Ok((body.centered()?, report))
}

fn rescale_to_area(template: &FacetVariables, x: &[f64], target: f64) -> Vec<f64> {
    let area = polygon_from_facets(&template.with_vector(x))
        .map(|p| p.area())
        .unwrap_or(0.0);
    if area > 0.0 {
        let s = (target / area).sqrt();
        x.iter().map(|v| v * s).collect()
    } else {
        // unusable start: fall back to equal masses, which balance for
        // symmetric pairs
        let s = x.len() / 2;
        let eq = vec![1.0; 2 * s];
        let area = polygon_from_facets(&template.with_vector(&eq)).map(|p| p.area()).unwrap_or(1.0);
        let f = (target / area).sqrt();
        eq.iter().map(|v| v * f).collect()
    }
}

struct Counted<'a, 'b> {
    obj: &'a CovObjective<'b>,
    layout: Layout,
    evals: usize,
}

impl Counted<'_, '_> {
    fn value(&mut self, x: &DVector<f64>) -> f64 {
        self.evals += 1;
        let g = self.obj.model(&self.layout, x.as_slice(), None);
        self.obj.weighted(&g).iter().map(|r| r * r).sum::<f64>() + self.obj.offset
    }

    /// Weighted half-site residuals and their Jacobian in the null-space
    /// coordinates `z`; counts as one evaluation.
    fn linearize(&mut self, x: &DVector<f64>, z: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        self.evals += 1;
        let planes = self.layout.planes.len();
        let sites = self.obj.half_sites.len();
        let mut grad = vec![0.0; sites * planes];
        let g = self.obj.model(&self.layout, x.as_slice(), Some(&mut grad));
        let r = DVector::from_vec(self.obj.weighted(&g));
        // support numbers are smooth in the masses: central differences
        let eps = 1e-6 * x.amax().max(1e-3);
        let mut dh = DMatrix::zeros(planes, z.ncols());
        for d in 0..z.ncols() {
            let col = z.column(d);
            let up = self.layout.supports((x + col * eps).as_slice());
            let dn = self.layout.supports((x - col * eps).as_slice());
            if let (Some(up), Some(dn)) = (up, dn) {
                for (p, &(_, owner, cap)) in self.layout.planes.iter().enumerate() {
                    if let Some(v) = owner {
                        dh[(p, d)] = (up[v].min(cap) - dn[v].min(cap)) / (2.0 * eps);
                    }
                }
            }
        }
        let gmat = DMatrix::from_row_slice(sites, planes, &grad);
        let mut jac = gmat * dh;
        for (mut row, w) in jac.row_iter_mut().zip(&self.obj.weight) {
            row *= -w;
        }
        (r, jac)
    }
}

fn run_restart(
    obj: &CovObjective,
    template: &FacetVariables,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    start: Vec<f64>,
    max_evals: usize,
) -> Restart {
    let mut ev = Counted {
        obj,
        layout: Layout::new(template),
        evals: 0,
    };
    let mut x = DVector::from_vec(start);
    let f0 = ev.value(&x);
    let mut f = f0;
    let scale = x.amax().max(1e-3);
    let mut converged = false;
    // Levenberg-Marquardt in null-space coordinates, alternating with a
    // short pattern search that steps over kinks of the clipped objective
    loop {
        let f_cycle = f;
        levenberg_marquardt(&mut ev, b, z, &mut x, &mut f, max_evals);
        if f <= obj.floor {
            converged = true;
            break;
        }
        let moved = pattern_search(&mut ev, b, z, &mut x, &mut f, scale, max_evals);
        if ev.evals >= max_evals {
            break;
        }
        if !moved || f_cycle - f <= 1e-10 * f_cycle {
            converged = true;
            break;
        }
    }
    Restart {
        x: x.as_slice().to_vec(),
        f,
        f0,
        evals: ev.evals,
        converged,
    }
}

fn levenberg_marquardt(
    ev: &mut Counted,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    x: &mut DVector<f64>,
    f: &mut f64,
    max_evals: usize,
) {
    let mut mu = 1e-3;
    let mut small = 0;
    while ev.evals + 2 <= max_evals && *f > ev.obj.floor {
        let (r0, jac) = ev.linearize(x, z);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r0;
        let diag = DMatrix::from_diagonal(&jtj.diagonal().map(|v| v.max(1e-12)));
        let mut accepted = false;
        while mu < 1e12 && ev.evals < max_evals {
            let Some(dy) = (&jtj + &diag * mu).lu().solve(&(-&jtr)) else {
                mu *= 4.0;
                continue;
            };
            let cand = project_with(b, &(&*x + z * dy));
            let fc = ev.value(&cand);
            if fc < *f {
                small = if *f - fc <= 1e-10 * *f { small + 1 } else { 0 };
                *x = cand;
                *f = fc;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if !accepted || small >= 2 {
            return;
        }
    }
}

/// Compass search along the null-space basis from a small step; returns
/// whether the point moved.
fn pattern_search(
    ev: &mut Counted,
    b: &DMatrix<f64>,
    z: &DMatrix<f64>,
    x: &mut DVector<f64>,
    f: &mut f64,
    scale: f64,
    max_evals: usize,
) -> bool {
    let mut step = 0.05 * scale;
    let mut moved = false;
    while step > 1e-6 * scale {
        let mut improved = false;
        for d in 0..z.ncols() {
            for sign in [1.0, -1.0] {
                if ev.evals >= max_evals {
                    return moved;
                }
                let cand = project_with(b, &(&*x + z.column(d) * (sign * step)));
                let fc = ev.value(&cand);
                if fc < *f {
                    *x = cand;
                    *f = fc;
                    improved = true;
                    moved = true;
                }
            }
        }
        if moved {
            return true;
        }
        if !improved {
            step *= 0.25;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariogram::covariogram_grid;
    use crate::geometry::{blaschke_body, hausdorff_distance};
    use crate::shapes::regular_polygon;

    fn axes() -> Vec<Direction> {
        vec![Direction::from_angle(0.0), Direction::from_angle(PI / 2.0)]
    }

    #[test]
    fn projection_examples() {
        let a = FacetVariables::new(axes(), vec![1.0, 1.0], vec![2.0, 1.0]).unwrap();
        let p = project_to_balanced_cone(&a).unwrap();
        for (got, want) in p.to_vector().iter().zip([1.5, 1.5, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let again = project_to_balanced_cone(&p).unwrap();
        assert_eq!(again, p);
        let one = FacetVariables::new(vec![Direction::from_angle(0.0)], vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(project_to_balanced_cone(&one), Err(Error::Configuration(_))));
    }

    #[test]
    fn projection_beats_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normals: Vec<Direction> = (0..5).map(|i| Direction::from_angle(0.3 + i as f64 * 0.6)).collect();
        for _ in 0..20 {
            let a = FacetVariables::new(
                normals.clone(),
                (0..5).map(|_| rng.random_range(-0.5..2.0)).collect(),
                (0..5).map(|_| rng.random_range(-0.5..2.0)).collect(),
            )
            .unwrap();
            let p = project_to_balanced_cone(&a).unwrap();
            assert!(p.balance_residual().norm() <= 1e-10);
            assert!(p.to_vector().iter().all(|&v| v >= 0.0));
            let x0 = DVector::from_vec(a.to_vector());
            let d = (DVector::from_vec(p.to_vector()) - &x0).norm();
            let b = a.constraint_matrix();
            for _ in 0..1000 {
                let r = DVector::from_fn(10, |_, _| rng.random_range(0.0..2.0));
                let feas = project_with(&b, &r);
                assert!((feas - &x0).norm() >= d - 1e-12);
            }
        }
    }

    #[test]
    fn facets_to_polygon_examples() {
        let a = FacetVariables::new(axes(), vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let p = polygon_from_facets(&a).unwrap();
        assert!(hausdorff_distance(&p, &Polygon::unit_square()).unwrap() < 1e-12);

        let flat = FacetVariables::new(axes(), vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(polygon_from_facets(&flat), Err(Error::InfeasibleMeasure(_))));

        let n: Vec<Direction> = (0..3).map(|i| Direction::from_angle(0.2 + i as f64 * 1.1)).collect();
        let a = project_to_balanced_cone(
            &FacetVariables::new(n, vec![1.0, 0.4, 0.7], vec![0.2, 0.9, 0.3]).unwrap(),
        )
        .unwrap();
        let p = polygon_from_facets(&a).unwrap();
        let q = polygon_from_facets(&a.swapped()).unwrap();
        assert!(hausdorff_distance(&q, &p.reflect()).unwrap() < 1e-12);
    }

    #[test]
    fn nnls_matches_small_oracle() {
        // least squares solution has a negative entry; NNLS clips it
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let x = nnls(&a, &b);
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.0);
    }

    #[test]
    fn bright_fit_recovers_square() {
        let c0 = Polygon::unit_square();
        let dirs = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0].map(Direction::from_angle);
        let samples: Vec<_> = dirs.iter().map(|&u| (u, c0.brightness(u).unwrap())).collect();
        let q = bright_lsq_fit(&samples).unwrap();
        assert!(hausdorff_distance(&q, &c0).unwrap() < 1e-8);
        let zeros: Vec<_> = dirs.iter().map(|&u| (u, 0.0)).collect();
        assert!(matches!(bright_lsq_fit(&zeros), Err(Error::ReconstructionFailure { .. })));
    }

    #[test]
    fn bright_fit_dense_directions() {
        let q = blaschke_body(&regular_polygon(5, 0.45)).unwrap();
        let mut dirs: Vec<Direction> = q
            .surface_area_measure()
            .unwrap()
            .atoms()
            .iter()
            .map(|a| a.0)
            .filter(|u| u.angle().rem_euclid(2.0 * PI) < PI)
            .collect();
        dirs.extend(Direction::equally_spaced(60).into_iter().map(|u| Direction::from_angle(u.angle() + 0.01)));
        let samples: Vec<_> = dirs.iter().map(|&u| (u, q.brightness(u).unwrap())).collect();
        let fit = bright_lsq_fit(&samples).unwrap();
        assert!(hausdorff_distance(&fit, &q).unwrap() <= 0.05);
    }

    #[test]
    fn objective_is_reflection_invariant() {
        let p = regular_polygon(5, 0.45);
        let grid = covariogram_grid(&p, 6).unwrap();
        let obj = CovObjective::new(&grid);
        let n: Vec<Direction> = (0..4).map(|i| Direction::from_angle(0.1 + i as f64 * 0.8)).collect();
        let a = project_to_balanced_cone(
            &FacetVariables::new(n, vec![0.3, 0.5, 0.2, 0.6], vec![0.4, 0.1, 0.5, 0.3]).unwrap(),
        )
        .unwrap();
        assert!((obj.value(&a) - obj.value(&a.swapped())).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_differences() {
        let p = regular_polygon(7, 0.3);
        let grid = covariogram_grid(&p, 5).unwrap();
        let obj = CovObjective::new(&grid);
        let n: Vec<Direction> = (0..5).map(|i| Direction::from_angle(0.2 + i as f64 * 0.6)).collect();
        let a = project_to_balanced_cone(
            &FacetVariables::new(n, vec![0.3, 0.5, 0.2, 0.6, 0.3], vec![0.4, 0.1, 0.5, 0.3, 0.2]).unwrap(),
        )
        .unwrap();
        let b = a.constraint_matrix();
        let z = null_space(&b);
        let mut ev = Counted {
            obj: &obj,
            layout: Layout::new(&a),
            evals: 0,
        };
        let x = DVector::from_vec(a.to_vector());
        let (r, jac) = ev.linearize(&x, &z);
        let full: f64 = obj.residuals(&a).iter().map(|v| v * v).sum();
        assert!((r.norm_squared() + obj.offset - full).abs() < 1e-12);
        let e = 1e-6;
        for d in 0..z.ncols() {
            let xs = |sign: f64| {
                let g = obj.model(&ev.layout, (&x + z.column(d) * (sign * e)).as_slice(), None);
                DVector::from_vec(obj.weighted(&g))
            };
            let fd = (xs(1.0) - xs(-1.0)) / (2.0 * e);
            assert!((fd - jac.column(d)).amax() < 1e-6, "column {d}");
        }
    }

    #[test]
    fn square_fit_is_exact() {
        let c0 = Polygon::unit_square();
        let grid = covariogram_grid(&c0, 8).unwrap();
        let (p, rep) = cov_lsq_fit(&grid, &c0, &FitOptions::default()).unwrap();
        assert!(hausdorff_distance(&p, &c0).unwrap() <= 1e-6);
        assert!(rep.objective <= 1e-12);
        for f0 in &rep.initial_objectives {
            assert!(rep.objective <= *f0);
        }
    }

    #[test]
    fn fit_started_at_truth_stays() {
        let p = regular_polygon(5, 0.45);
        let grid = covariogram_grid(&p, 6).unwrap();
        let qk = blaschke_body(&p).unwrap();
        let normals = pair_normals(&qk).unwrap();
        let sam = p.surface_area_measure().unwrap();
        let mut init = FacetVariables::new(normals.clone(), vec![0.0; 5], vec![0.0; 5]).unwrap();
        for (u, m) in sam.atoms() {
            let j = normals
                .iter()
                .position(|n| (n.vec() - u.vec()).norm() < 1e-9 || (n.vec() + u.vec()).norm() < 1e-9)
                .unwrap();
            if (normals[j].vec() - u.vec()).norm() < 1e-9 {
                init.a_plus[j] = *m;
            } else {
                init.a_minus[j] = *m;
            }
        }
        let opts = FitOptions {
            restarts: 1,
            initial: Some(init.clone()),
            ..FitOptions::default()
        };
        let (fit, rep) = cov_lsq_fit(&grid, &qk, &opts).unwrap();
        assert!(rep.initial_objectives[0] < 1e-24);
        assert!(hausdorff_distance(&fit, &p).unwrap() < 1e-9);
        for (a, b) in rep.solution.to_vector().iter().zip(init.to_vector()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pentagon_fit_from_blaschke_body() {
        let p = regular_polygon(5, 0.45);
        let grid = covariogram_grid(&p, 8).unwrap();
        let qk = blaschke_body(&p).unwrap();
        let (fit, rep) = cov_lsq_fit(&grid, &qk, &FitOptions::default()).unwrap();
        let err = hausdorff_distance(&fit, &p)
            .unwrap()
            .min(hausdorff_distance(&fit, &p.reflect()).unwrap());
        assert!(err <= 0.05, "err = {err}, objective = {}", rep.objective);
        assert!(rep.solution.balance_residual().norm() <= 1e-8);
        assert!(rep.solution.to_vector().iter().all(|&v| v >= -1e-12));
    }
}
