//! First-stage estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariogram::SampleGrid;
use crate::error::{Error, Result};
use crate::geometry::{Direction, Polygon, Vec2};
use crate::measurement::{Design, MeasurementSet};
use crate::quadrature::gauss_legendre_on;
use crate::spectral::{synthesize_on_lattice, synthesize_partial_sum};

/// Default exponent for the power-law schedules.
pub const DEFAULT_ALPHA: f64 = 0.06;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `φ = 1` on `C_0`.
    UniformBox,
    /// `φ(x) = e(x_1) e(x_2)` with `e(t) = 3/2 (1 - 4t^2)` on `[-1/2, 1/2]`.
    ProductEpanechnikov,
}

impl Kernel {
    fn profile(self, t: f64) -> f64 {
        if t.abs() > 0.5 {
            return 0.0;
        }
        match self {
            Kernel::UniformBox => 1.0,
            Kernel::ProductEpanechnikov => 1.5 * (1.0 - 4.0 * t * t),
        }
    }

    fn cdf(self, t: f64) -> f64 {
        let t = t.clamp(-0.5, 0.5);
        match self {
            Kernel::UniformBox => t + 0.5,
            Kernel::ProductEpanechnikov => 0.5 + 1.5 * t - 2.0 * t * t * t,
        }
    }

    pub fn value(self, x: Vec2) -> f64 {
        self.profile(x.x) * self.profile(x.y)
    }

    /// `‖φ‖_∞`.
    pub fn sup(self) -> f64 {
        match self {
            Kernel::UniformBox => 1.0,
            Kernel::ProductEpanechnikov => 2.25,
        }
    }

    /// `∫φ` over `C_0` by tensor Gauss-Legendre quadrature.
    pub fn integral(self) -> f64 {
        let rule = gauss_legendre_on(8, -0.5, 0.5);
        let mut s = 0.0;
        for &(x, wx) in &rule {
            for &(y, wy) in &rule {
                s += wx * wy * self.value(Vec2::new(x, y));
            }
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub delta: f64,
}

impl KernelSpec {
    pub fn new(kernel: Kernel, epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::config(format!("bandwidth must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::config(format!("threshold must be positive, got {delta}")));
        }
        let mass = kernel.integral();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::config(format!("kernel integrates to {mass}, not 1")));
        }
        Ok(KernelSpec {
            kernel,
            epsilon,
            delta,
        })
    }

    /// Integral of `φ_ε(x - z)` over `z ∈ [lo, hi]` along one axis.
    fn axis_weight(&self, x: f64, lo: f64, hi: f64) -> f64 {
        let e = self.epsilon;
        self.kernel.cdf((x - lo) / e) - self.kernel.cdf((x - hi) / e)
    }

    /// Cell indices `a` whose cell `[(a - 1/2)/k, (a + 1/2)/k]` meets the
    /// kernel window around `x`.
    fn cell_range(&self, k: usize, x: f64) -> (i64, i64) {
        let kf = k as f64;
        let r = 0.5 * self.epsilon;
        let ki = k as i64;
        let lo = (((x - r) * kf) - 0.5).floor() as i64;
        let hi = (((x + r) * kf) + 0.5).ceil() as i64;
        (lo.max(-ki), hi.min(ki))
    }

    /// Per-axis weight matrix: entry `[p][a]` for target site `p` and cell `a`,
    /// both in `0..2k+1`.
    fn axis_matrix(&self, k: usize) -> Vec<Vec<(usize, f64)>> {
        let kf = k as f64;
        let ki = k as i64;
        (-ki..=ki)
            .map(|p| {
                let x = p as f64 / kf;
                let (lo, hi) = self.cell_range(k, x);
                (lo..=hi)
                    .filter_map(|a| {
                        let c = a as f64 / kf;
                        let w = self.axis_weight(x, c - 0.5 / kf, c + 0.5 / kf);
                        (w != 0.0).then_some(((a + ki) as usize, w))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Power-law bandwidth and threshold schedules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffSchedule {
    /// `ε_k = k^{-α}`, `δ_k = k^{-(n - 3αn - 3/2)/4}` with `0 < α < 1/12`.
    Corollary { alpha: f64 },
    /// `ε_k = k^{-α}`, `δ_k = k^{-n(1-α)/2} log k` with `0 < α < 1`.
    Bernstein { alpha: f64 },
    /// Constant values, for desk-scale runs.
    Fixed { epsilon: f64, delta: f64 },
}

impl Default for DiffSchedule {
    fn default() -> Self {
        DiffSchedule::Corollary {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl DiffSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiffSchedule::Corollary { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0 / 12.0) {
                    return Err(Error::config(format!(
                        "window alpha: need 0 < alpha < 1/12, got {alpha}"
                    )));
                }
            }
            DiffSchedule::Bernstein { alpha } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::config(format!(
                        "window alpha: need 0 < alpha < 1, got {alpha}"
                    )));
                }
            }
            DiffSchedule::Fixed { epsilon, delta } => {
                if !(epsilon > 0.0 && delta > 0.0) {
                    return Err(Error::config("fixed schedule needs epsilon, delta > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn epsilon(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            DiffSchedule::Corollary { alpha } | DiffSchedule::Bernstein { alpha } => {
                kf.powf(-alpha)
            }
            DiffSchedule::Fixed { epsilon, .. } => epsilon,
        }
    }

    pub fn delta(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            DiffSchedule::Corollary { alpha } => kf.powf(-(2.0 - 6.0 * alpha - 1.5) / 4.0),
            DiffSchedule::Bernstein { alpha } => kf.powf(-(1.0 - alpha)) * kf.ln(),
            DiffSchedule::Fixed { delta, .. } => delta,
        }
    }

    pub fn kernel_spec(&self, kernel: Kernel, k: usize) -> Result<KernelSpec> {
        self.validate()?;
        KernelSpec::new(kernel, self.epsilon(k), self.delta(k))
    }
}

/// Sample means `y_i = (1/k^2) Σ_j k (M_ij^(1) - M_ij^(2))`.
pub fn brightness_from_cov_diffs(ms: &MeasurementSet) -> Result<Vec<(Direction, f64)>> {
    ms.require(Design::CovBlaschke)?;
    let k = ms.k;
    let reps = k * k;
    Ok(ms
        .directions
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let block = &ms.values[i * reps * 2..(i + 1) * reps * 2];
            let s: f64 = block.chunks_exact(2).map(|m| m[0] - m[1]).sum();
            (u, s * k as f64 / reps as f64)
        })
        .collect())
}

/// Gasser-Müller estimate `Σ_i M_i ∫_{cell_i} φ_ε(x - z) dz`.
pub fn kernel_estimate_at(grid: &SampleGrid, spec: &KernelSpec, x: Vec2) -> f64 {
    let k = grid.k;
    let kf = k as f64;
    let (a0, a1) = spec.cell_range(k, x.x);
    let (b0, b1) = spec.cell_range(k, x.y);
    let h = 0.5 / kf;
    let wx: Vec<f64> = (a0..=a1)
        .map(|a| spec.axis_weight(x.x, a as f64 / kf - h, a as f64 / kf + h))
        .collect();
    let mut sum = 0.0;
    for b in b0..=b1 {
        let wy = spec.axis_weight(x.y, b as f64 / kf - h, b as f64 / kf + h);
        if wy == 0.0 {
            continue;
        }
        let row: f64 = (a0..=a1)
            .zip(&wx)
            .map(|(a, w)| grid.values[grid.index_of(a, b)] * w)
            .sum();
        sum += wy * row;
    }
    sum
}

/// Kernel estimate at every lattice site, by two separable passes.
pub fn kernel_estimate_grid(grid: &SampleGrid, spec: &KernelSpec) -> SampleGrid {
    let side = grid.side();
    let w = spec.axis_matrix(grid.k);
    // pass over x1: rows[b][p] = Σ_a M[b][a] w[p][a]
    let rows: Vec<f64> = (0..side)
        .into_par_iter()
        .flat_map_iter(|b| {
            let row = &grid.values[b * side..(b + 1) * side];
            w.iter()
                .map(move |wp| wp.iter().map(|&(a, wa)| row[a] * wa).sum::<f64>())
        })
        .collect();
    let values: Vec<f64> = (0..side)
        .into_par_iter()
        .flat_map_iter(|q| {
            let wq = &w[q];
            let rows = &rows;
            (0..side).map(move |p| wq.iter().map(|&(b, wb)| rows[b * side + p] * wb).sum())
        })
        .collect();
    SampleGrid {
        k: grid.k,
        values,
    }
}

/// `Q_k = 1/2 (conv S_k - conv S_k)` with `S_k = {x_i : g_k(x_i) >= δ_k}`.
pub fn threshold_difference_hull(grid: &SampleGrid, spec: &KernelSpec) -> Polygon {
    let est = kernel_estimate_grid(grid, spec);
    let pts: Vec<Vec2> = (0..est.len())
        .filter(|&i| est.values[i] >= spec.delta)
        .map(|i| est.site(i))
        .collect();
    symmetral_of_hull(&pts)
}

/// `1/2 (conv S + (-conv S))` as the hull of the half differences.
fn symmetral_of_hull(points: &[Vec2]) -> Polygon {
    if points.is_empty() {
        return Polygon::empty();
    }
    let hull = Polygon::convex_hull(points);
    let v = hull.vertices();
    let mut diffs = Vec::with_capacity(v.len() * v.len());
    for &a in v {
        for &b in v {
            diffs.push((a - b) * 0.5);
        }
    }
    Polygon::convex_hull(&diffs)
}

/// Covariogram estimates `M_k(x_i)` on the grid from squared-modulus data.
pub fn phase_grid_estimates(ms: &MeasurementSet) -> Result<SampleGrid> {
    ms.require(Design::Mod2)?;
    let fg = ms.frequency_grid()?;
    synthesize_on_lattice(&fg, &ms.values)
}

/// Site-wise product of the two modulus copies, as a squared-modulus set.
pub fn combine_mod_pairs(ms: &MeasurementSet) -> Result<MeasurementSet> {
    ms.require(Design::ModPair)?;
    let values = ms.values.chunks_exact(2).map(|c| c[0] * c[1]).collect();
    Ok(MeasurementSet {
        design: Design::Mod2,
        values,
        ..ms.clone()
    })
}

/// Difference quotients `(M_k(o) - M_k(h u_i)) / h` of the synthesized
/// covariogram.
pub fn brightness_from_synthesis(
    ms: &MeasurementSet,
    h: f64,
    directions: &[Direction],
) -> Result<Vec<(Direction, f64)>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("step h must be positive, got {h}")));
    }
    ms.require(Design::Mod2)?;
    let fg = ms.frequency_grid()?;
    let m0 = synthesize_partial_sum(&fg, &ms.values, Vec2::ZERO)?;
    directions
        .par_iter()
        .map(|&u| {
            let m = synthesize_partial_sum(&fg, &ms.values, u.vec() * h)?;
            Ok((u, (m0 - m) / h))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariogram::{covariogram_at, covariogram_grid};
    use crate::geometry::{hausdorff_distance, Polygon};
    use crate::measurement::{gen_cov_blaschke, gen_mod2, gen_mod_pair, NoiseModel};
    use crate::shapes::regular_polygon;
    use crate::spectral::{squared_modulus, synthesis_residual, FrequencyGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_grid(k: usize) -> SampleGrid {
        covariogram_grid(&Polygon::unit_square(), k).unwrap()
    }

    #[test]
    fn kernels_have_unit_mass() {
        for kern in [Kernel::UniformBox, Kernel::ProductEpanechnikov] {
            assert!((kern.integral() - 1.0).abs() < 1e-12);
            assert!((kern.cdf(0.5) - 1.0).abs() < 1e-15 && kern.cdf(-0.5) == 0.0);
        }
        assert!(KernelSpec::new(Kernel::UniformBox, 0.0, 0.1).is_err());
        assert!(KernelSpec::new(Kernel::UniformBox, 0.1, -1.0).is_err());
    }

    #[test]
    fn cov_diffs_recover_square_brightness() {
        let c0 = Polygon::unit_square();
        let dirs = Direction::equally_spaced(10);
        let ms = gen_cov_blaschke(&c0, 10, &dirs, NoiseModel::None, 0).unwrap();
        let y = brightness_from_cov_diffs(&ms).unwrap();
        assert!((y[0].1 - 1.0).abs() < 1e-12);
        let zero = MeasurementSet {
            values: vec![0.0; ms.values.len()],
            ..ms
        };
        assert!(brightness_from_cov_diffs(&zero).unwrap().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn cov_diff_bias_is_within_sandwich_bound() {
        // 64-gon containing r B^2: b(u) - y <= (1 - (1 - 1/(2rk))) b(u)
        let p = regular_polygon(64, 0.45);
        let r = 0.45 * (std::f64::consts::PI / 64.0).cos();
        let k = 12;
        let dirs = Direction::equally_spaced(k);
        let ms = gen_cov_blaschke(&p, k, &dirs, NoiseModel::None, 0).unwrap();
        for (u, y) in brightness_from_cov_diffs(&ms).unwrap() {
            let b = p.brightness(u).unwrap();
            let slack = b / (2.0 * r * k as f64);
            assert!(b - y <= slack + 1e-12 && y <= b + 1e-12);
        }
    }

    #[test]
    fn box_kernel_bias_bound() {
        let c0 = Polygon::unit_square();
        let k = 16;
        let grid = square_grid(k);
        let spec = KernelSpec::new(Kernel::UniformBox, 0.1, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let err = (kernel_estimate_at(&grid, &spec, x) - covariogram_at(&c0, x)).abs();
            assert!(err <= 2.0 * (0.1 + 1.0 / 16.0) + 1e-9);
        }
        let spec = KernelSpec::new(Kernel::UniformBox, 1.0 / k as f64, 0.1).unwrap();
        let g0 = kernel_estimate_at(&grid, &spec, Vec2::ZERO);
        assert!((g0 - 1.0).abs() <= 2.0 * 2.0 / k as f64);
    }

    #[test]
    fn grid_estimate_matches_pointwise() {
        let p = regular_polygon(5, 0.45);
        let grid = covariogram_grid(&p, 8).unwrap();
        for kern in [Kernel::UniformBox, Kernel::ProductEpanechnikov] {
            let spec = KernelSpec::new(kern, 0.3, 0.1).unwrap();
            let est = kernel_estimate_grid(&grid, &spec);
            for i in 0..grid.len() {
                let direct = kernel_estimate_at(&grid, &spec, grid.site(i));
                assert!((est.values[i] - direct).abs() < 1e-13);
            }
        }
        let zero = SampleGrid::zeros(8);
        let spec = KernelSpec::new(Kernel::UniformBox, 0.3, 0.1).unwrap();
        assert!(kernel_estimate_grid(&zero, &spec).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn estimate_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = 6;
        let n = crate::covariogram::grid_len(k);
        let a = SampleGrid::new(k, (0..n).map(|_| rng.random()).collect()).unwrap();
        let b = SampleGrid::new(k, (0..n).map(|_| rng.random()).collect()).unwrap();
        let (s, t) = (0.7, -1.3);
        let c = SampleGrid::new(
            k,
            a.values.iter().zip(&b.values).map(|(x, y)| s * x + t * y).collect(),
        )
        .unwrap();
        let spec = KernelSpec::new(Kernel::ProductEpanechnikov, 0.4, 0.1).unwrap();
        for _ in 0..20 {
            let x = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let lhs = kernel_estimate_at(&c, &spec, x);
            let rhs = s * kernel_estimate_at(&a, &spec, x) + t * kernel_estimate_at(&b, &spec, x);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_hull_examples() {
        let grid = square_grid(16);
        let spec = KernelSpec::new(Kernel::UniformBox, 0.1, 0.1).unwrap();
        let q = threshold_difference_hull(&grid, &spec);
        let d = hausdorff_distance(&q, &Polygon::unit_square().scale(2.0)).unwrap();
        assert!(d <= 2.0 * 0.1f64.sqrt());
        assert!(hausdorff_distance(&q, &q.reflect()).unwrap() < 1e-12);

        let high = KernelSpec::new(Kernel::UniformBox, 0.1, 2.0).unwrap();
        assert!(threshold_difference_hull(&grid, &high).is_empty());
    }

    #[test]
    fn threshold_hull_is_monotone_in_delta() {
        let p = regular_polygon(5, 0.45);
        let grid = covariogram_grid(&p, 12).unwrap();
        let lo = KernelSpec::new(Kernel::UniformBox, 0.15, 0.05).unwrap();
        let hi = KernelSpec::new(Kernel::UniformBox, 0.15, 0.2).unwrap();
        let (qa, qb) = (threshold_difference_hull(&grid, &lo), threshold_difference_hull(&grid, &hi));
        for u in Direction::equally_spaced(90) {
            for u in [u, -u] {
                assert!(qb.support(u).unwrap() <= qa.support(u).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn phase_grid_matches_synthesis_residual() {
        let c0 = Polygon::unit_square();
        let mut last = f64::INFINITY;
        for k in [8, 16, 32] {
            let ms = gen_mod2(&c0, k, 0.75, NoiseModel::None, 0).unwrap();
            let est = phase_grid_estimates(&ms).unwrap();
            let exact = square_grid(k);
            let err = est
                .values
                .iter()
                .zip(&exact.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let res = synthesis_residual(&c0, k, 0.75).unwrap();
            if k == 8 {
                assert!((err - res).abs() < 1e-12);
            }
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn combine_pairs_multiplies_copies() {
        let p = regular_polygon(5, 0.45);
        let ms = gen_mod_pair(&p, 4, 0.75, NoiseModel::None, 0).unwrap();
        let m2 = combine_mod_pairs(&ms).unwrap();
        assert_eq!(m2.design, Design::Mod2);
        let fg = FrequencyGrid::new(4, 0.75).unwrap();
        for (v, xi) in m2.values.iter().zip(fg.half_frequencies()) {
            assert!((v - squared_modulus(&p, xi)).abs() < 1e-12);
        }
        let mut two = ms.clone();
        two.values[0] = 2.0;
        two.values[1] = 3.0;
        assert_eq!(combine_mod_pairs(&two).unwrap().values[0], 6.0);
        two.values.pop();
        assert!(combine_mod_pairs(&two).is_err());
    }

    #[test]
    fn synthesis_brightness_examples() {
        let c0 = Polygon::unit_square();
        let (k, gamma) = (16, 0.8);
        let ms = gen_mod2(&c0, k, gamma, NoiseModel::None, 0).unwrap();
        let h = (k as f64).powf(gamma - 1.0 + 0.1);
        let e1 = Direction::from_angle(0.0);
        let y = brightness_from_synthesis(&ms, h, &[e1]).unwrap()[0].1;
        // the exact section is linear; only the truncation error remains
        let res = synthesis_residual(&c0, k, gamma).unwrap();
        assert!((y - 1.0).abs() <= 2.0 * res / h + 1e-12);

        assert!(brightness_from_synthesis(&ms, 0.0, &[e1]).is_err());
        let zero = MeasurementSet {
            values: vec![0.0; ms.values.len()],
            ..ms
        };
        assert_eq!(brightness_from_synthesis(&zero, h, &[e1]).unwrap()[0].1, 0.0);
    }

    #[test]
    fn schedules() {
        let s = DiffSchedule::default();
        assert!((s.delta(32) - 32f64.powf(-0.035)).abs() < 1e-15);
        assert!((s.epsilon(32) - 32f64.powf(-0.06)).abs() < 1e-15);
        assert!(DiffSchedule::Corollary { alpha: 0.1 }.validate().is_err());
        let b = DiffSchedule::Bernstein { alpha: 0.06 };
        assert!((b.delta(64) - 64f64.powf(-0.94) * 64f64.ln()).abs() < 1e-15);
    }
}
