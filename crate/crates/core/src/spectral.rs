//! Fourier transform of polygon indicators and the square partial-sum
//! synthesis of covariogram estimates from frequency samples.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariogram::{covariogram_grid, SampleGrid};
use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};

/// Below this edge phase increment the edge integral uses its Taylor series.
const TAYLOR_PHASE: f64 = 1e-6;

/// Frequency sites `{o} ∪ (1/k^gamma) Z^2_k(+)`.
///
/// `Z^2_k(+)` is the lexicographically positive half of `{-k..k}^2`: points
/// with `z1 > 0`, or `z1 = 0` and `z2 > 0`. Half-site `j` has the frequency
/// `z_j`; the full index range `-I'..=I'` is recovered by `z_{-j} = -z_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub k: usize,
    pub gamma: f64,
}

impl FrequencyGrid {
    pub fn new(k: usize, gamma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("frequency grid needs k >= 1"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("gamma = {gamma} is outside (0, 1)")));
        }
        Ok(FrequencyGrid { k, gamma })
    }

    /// `I'_k = ((2k+1)^2 - 1) / 2`.
    pub fn i_prime(&self) -> usize {
        ((2 * self.k + 1) * (2 * self.k + 1) - 1) / 2
    }

    /// Number of half sites including the origin, `I'_k + 1`.
    pub fn half_len(&self) -> usize {
        self.i_prime() + 1
    }

    /// Integer lattice points of the half sites, origin first.
    pub fn half_lattice(&self) -> Vec<(i64, i64)> {
        let k = self.k as i64;
        let mut out = Vec::with_capacity(self.half_len());
        out.push((0, 0));
        for z1 in 0..=k {
            for z2 in -k..=k {
                if z1 == 0 && z2 <= 0 {
                    continue;
                }
                out.push((z1, z2));
            }
        }
        out
    }

    /// `1 / k^gamma`, the frequency spacing.
    pub fn step(&self) -> f64 {
        (self.k as f64).powf(-self.gamma)
    }

    pub fn half_frequencies(&self) -> Vec<Vec2> {
        let h = self.step();
        self.half_lattice()
            .into_iter()
            .map(|(a, b)| Vec2::new(a as f64 * h, b as f64 * h))
            .collect()
    }

    /// Frequency with signed index `j in -I'..=I'`.
    pub fn frequency(&self, j: i64) -> Vec2 {
        let lat = self.half_lattice();
        let z = lat[j.unsigned_abs() as usize];
        let v = Vec2::new(z.0 as f64, z.1 as f64) * self.step();
        if j < 0 {
            -v
        } else {
            v
        }
    }

    /// Normalisation `1 / (2 pi k^gamma)^2`.
    pub fn normalization(&self) -> f64 {
        let l = 2.0 * PI * (self.k as f64).powf(self.gamma);
        1.0 / (l * l)
    }
}

/// `∫_P exp(-i xi . x) dx` in closed form.
///
/// By the divergence theorem the integral is a sum over edges of
/// `i (xi . n_e L_e) / |xi|^2 * ∫_0^1 exp(-i xi . x_e(t)) dt`. The constant
/// part of each edge integral cancels over the closed chain and is
/// subtracted analytically, which keeps the sum accurate down to tiny |xi|.
pub fn indicator_ft(p: &Polygon, xi: Vec2) -> Complex64 {
    let xi2 = xi.norm_sq();
    if p.is_degenerate() {
        return Complex64::new(0.0, 0.0);
    }
    if xi2 == 0.0 {
        return Complex64::new(p.area(), 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in p.edges() {
        let e = b - a;
        // i * xi . (outward normal * length) / |xi|^2
        let coeff = xi.dot(Vec2::new(e.y, -e.x)) / xi2;
        let w = -xi.dot(a);
        let theta = -xi.dot(e);
        let (em1_re, em1_im) = edge_mean_minus_one(theta);
        // exp(i w) - 1
        let half = (0.5 * w).sin();
        let ew_re = -2.0 * half * half;
        let ew_im = w.sin();
        // exp(i w) E - 1 = (exp(i w) - 1) E + (E - 1)
        let e_re = 1.0 + em1_re;
        let e_im = em1_im;
        let b_re = ew_re * e_re - ew_im * e_im + em1_re;
        let b_im = ew_re * e_im + ew_im * e_re + em1_im;
        // multiply by i * coeff
        acc += Complex64::new(-coeff * b_im, coeff * b_re);
    }
    acc
}

/// `E(i theta) - 1` where `E(z) = (e^z - 1) / z` is the mean of
/// `exp(i theta t)` over `t in [0, 1]`.
fn edge_mean_minus_one(theta: f64) -> (f64, f64) {
    if theta.abs() < TAYLOR_PHASE {
        let t2 = theta * theta;
        // 1 + i t/2 - t^2/6 - i t^3/24
        (-t2 / 6.0, 0.5 * theta - t2 * theta / 24.0)
    } else {
        let s = (0.5 * theta).sin();
        (theta.sin() / theta - 1.0, 2.0 * s * s / theta)
    }
}

/// `|1̂_P(xi)|^2`, the Fourier transform of the covariogram.
pub fn squared_modulus(p: &Polygon, xi: Vec2) -> f64 {
    indicator_ft(p, xi).norm_sqr()
}

/// Exact squared-modulus values at the half sites of `grid`.
pub fn exact_half_values(p: &Polygon, grid: &FrequencyGrid) -> Vec<f64> {
    grid.half_frequencies()
        .par_iter()
        .map(|&xi| squared_modulus(p, xi))
        .collect()
}

/// Per-axis tables `cos(m t)`, `sin(m t)` for `m = -k..=k`.
fn axis_tables(k: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let k = k as i64;
    (-k..=k)
        .map(|m| {
            let a = m as f64 * t;
            (a.cos(), a.sin())
        })
        .unzip()
}

/// Square partial sum
/// `(1 / (2 pi k^gamma)^2) * sum_{j=-I'}^{I'} cos(z_j . x) * values_j`
/// with the even extension `values_{-j} = values_j` implied by the half
/// layout of `half_values`.
pub fn synthesize_partial_sum(grid: &FrequencyGrid, half_values: &[f64], x: Vec2) -> Result<f64> {
    if half_values.len() != grid.half_len() {
        return Err(Error::Shape(format!(
            "frequency grid with k = {} needs {} half-site values, got {}",
            grid.k,
            grid.half_len(),
            half_values.len()
        )));
    }
    Ok(synthesize_unchecked(grid, &grid.half_lattice(), half_values, x))
}

fn synthesize_unchecked(
    grid: &FrequencyGrid,
    lattice: &[(i64, i64)],
    half_values: &[f64],
    x: Vec2,
) -> f64 {
    let h = grid.step();
    let k = grid.k as i64;
    let (c1, s1) = axis_tables(grid.k, x.x * h);
    let (c2, s2) = axis_tables(grid.k, x.y * h);
    let mut sum = 0.0;
    for (&(a, b), &v) in lattice.iter().zip(half_values).skip(1) {
        let (ia, ib) = ((a + k) as usize, (b + k) as usize);
        sum += (c1[ia] * c2[ib] - s1[ia] * s2[ib]) * v;
    }
    (half_values[0] + 2.0 * sum) * grid.normalization()
}

/// Synthesis at every site of the covariogram lattice `(1/k) Z^2_k`, i.e.
/// at `x_i = k^(gamma - 1) z_i`.
pub fn synthesize_on_lattice(grid: &FrequencyGrid, half_values: &[f64]) -> Result<SampleGrid> {
    if half_values.len() != grid.half_len() {
        return Err(Error::Shape(format!(
            "frequency grid with k = {} needs {} half-site values, got {}",
            grid.k,
            grid.half_len(),
            half_values.len()
        )));
    }
    let lattice = grid.half_lattice();
    let mut out = SampleGrid::zeros(grid.k);
    let sites = out.sites();
    out.values = sites
        .par_iter()
        .map(|&x| synthesize_unchecked(grid, &lattice, half_values, x))
        .collect();
    Ok(out)
}

/// Largest deviation of the noiseless partial sum from the true covariogram
/// over the lattice sites: the deterministic truncation error at this `k`.
pub fn synthesis_residual(p: &Polygon, k: usize, gamma: f64) -> Result<f64> {
    let grid = FrequencyGrid::new(k, gamma)?;
    let truth = covariogram_grid(p, k)?;
    let est = synthesize_on_lattice(&grid, &exact_half_values(p, &grid))?;
    Ok(est
        .values
        .iter()
        .zip(&truth.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
