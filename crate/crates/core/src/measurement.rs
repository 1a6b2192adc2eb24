//! Simulated measurements with reproducible noise.
//!
//! Noise for a given `(design, site, repetition, copy)` comes from its own
//! ChaCha stream: the key holds the user seed and the design tag, the stream
//! id packs the indices. Values therefore do not depend on evaluation order
//! or on which other sites are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariogram::{covariogram_at, covariogram_grid, grid_len, SampleGrid};
use crate::error::{Error, Result};
use crate::geometry::{Direction, Polygon};
use crate::shapes::check_in_unit_box;
use crate::spectral::{indicator_ft, FrequencyGrid};

/// Counts per unit value used when a Poisson scale is not given.
pub const DEFAULT_POISSON_SCALE: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
    /// Recentered shot noise `Pois(s v) / s - v`.
    Poisson { scale: f64 },
    PoissonGaussian { scale: f64, sigma: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::None => true,
            NoiseModel::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseModel::Poisson { scale } => scale > 0.0 && scale.is_finite(),
            NoiseModel::PoissonGaussian { scale, sigma } => {
                scale > 0.0 && scale.is_finite() && sigma >= 0.0 && sigma.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid noise model {self:?}")))
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseModel::None)
    }

    /// Gaussian standard deviation, if any.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::PoissonGaussian { sigma, .. } => {
                Some(sigma)
            }
            _ => None,
        }
    }

    /// Upper bound on the noise variance for true values in `[0, max_value]`.
    pub fn variance_bound(&self, max_value: f64) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::Poisson { scale } => max_value.max(0.0) / scale,
            NoiseModel::PoissonGaussian { scale, sigma } => max_value.max(0.0) / scale + sigma * sigma,
        }
    }

    /// Zero-mean noise for a measurement whose true value is `value`.
    pub fn sample(&self, value: f64, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } => sigma * gaussian(rng),
            NoiseModel::Poisson { scale } => shot(value, scale, rng),
            NoiseModel::PoissonGaussian { scale, sigma } => {
                shot(value, scale, rng) + sigma * gaussian(rng)
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn shot(value: f64, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = value.max(0.0);
    let lambda = scale * v;
    if lambda <= 0.0 {
        return 0.0;
    }
    let counts: f64 = Poisson::new(lambda)
        .expect("positive finite rate")
        .sample(rng);
    counts / scale - v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    CovGrid,
    CovBlaschke,
    Mod2,
    ModPair,
}

impl Design {
    fn tag(self) -> u64 {
        match self {
            Design::CovGrid => 1,
            Design::CovBlaschke => 2,
            Design::Mod2 => 3,
            Design::ModPair => 4,
        }
    }
}

/// Independent generator for one `(seed, design, site, repetition, copy)`.
pub fn noise_stream(seed: u64, design: Design, site: u64, rep: u64, copy: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&design.tag().to_le_bytes());
    key[16..24].copy_from_slice(&site.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((rep << 8) | copy);
    rng
}

/// Noisy values of one measurement design together with the metadata
/// needed to interpret them.
///
/// Payload layout:
/// - `cov_grid`: one value per lattice site in [`SampleGrid`] order;
/// - `cov_blaschke`: index `(i * k^2 + j) * 2 + m` for direction `i`,
///   repetition `j` and probe `m` (0 at the origin, 1 at `u_i / k`);
/// - `mod2`: one value per half frequency site in [`FrequencyGrid`] order;
/// - `mod_pair`: index `2 * site + r` for the two independent copies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub design: Design,
    pub k: usize,
    pub gamma: Option<f64>,
    pub directions: Vec<Direction>,
    pub noise: NoiseModel,
    pub seed: u64,
    pub values: Vec<f64>,
}

impl MeasurementSet {
    pub fn expected_len(&self) -> Result<usize> {
        Ok(match self.design {
            Design::CovGrid => grid_len(self.k),
            Design::CovBlaschke => self.k * self.k * self.k * 2,
            Design::Mod2 => self.frequency_grid()?.half_len(),
            Design::ModPair => 2 * self.frequency_grid()?.half_len(),
        })
    }

    /// Checks payload length and design-specific metadata.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("measurement k must be positive"));
        }
        self.noise.validate()?;
        let n = self.expected_len()?;
        if self.values.len() != n {
            return Err(Error::Shape(format!(
                "{:?} payload with k = {} needs {n} values, got {}",
                self.design,
                self.k,
                self.values.len()
            )));
        }
        if self.design == Design::CovBlaschke {
            if self.directions.len() != self.k {
                return Err(Error::Shape(format!(
                    "cov_blaschke with k = {} needs {} directions, got {}",
                    self.k,
                    self.k,
                    self.directions.len()
                )));
            }
            check_nonparallel(&self.directions)?;
        }
        Ok(())
    }

    pub fn require(&self, design: Design) -> Result<()> {
        if self.design != design {
            return Err(Error::Shape(format!(
                "expected {design:?} measurements, got {:?}",
                self.design
            )));
        }
        self.validate()
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        let gamma = self
            .gamma
            .ok_or_else(|| Error::Shape(format!("{:?} payload lacks gamma", self.design)))?;
        FrequencyGrid::new(self.k, gamma)
    }

    /// Covariogram-grid payload viewed as a [`SampleGrid`].
    pub fn as_grid(&self) -> Result<SampleGrid> {
        self.require(Design::CovGrid)?;
        SampleGrid::new(self.k, self.values.clone())
    }
}

/// Mutually nonparallel directions spanning the plane.
pub fn check_nonparallel(dirs: &[Direction]) -> Result<()> {
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            if dirs[i].vec().cross(dirs[j].vec()).abs() <= 1e-12 {
                return Err(Error::ParallelDirections(i, j));
            }
        }
    }
    if dirs.len() < 2 {
        return Err(Error::config("at least two nonparallel directions are needed"));
    }
    Ok(())
}

/// `M_i = g_P(x_i) + N_i` on the lattice `2C_0 ∩ (1/k)Z^2`.
pub fn gen_cov_grid(p: &Polygon, k: usize, noise: NoiseModel, seed: u64) -> Result<MeasurementSet> {
    noise.validate()?;
    let grid = covariogram_grid(p, k)?;
    let values = grid
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut rng = noise_stream(seed, Design::CovGrid, i as u64, 0, 0);
            g + noise.sample(g, &mut rng)
        })
        .collect();
    Ok(MeasurementSet {
        design: Design::CovGrid,
        k,
        gamma: None,
        directions: Vec::new(),
        noise,
        seed,
        values,
    })
}

/// `k^2` repeated probes at the origin and at `u_i / k` for each of the
/// `k` directions.
pub fn gen_cov_blaschke(
    p: &Polygon,
    k: usize,
    directions: &[Direction],
    noise: NoiseModel,
    seed: u64,
) -> Result<MeasurementSet> {
    noise.validate()?;
    check_in_unit_box(p)?;
    if directions.len() != k {
        return Err(Error::Shape(format!(
            "cov_blaschke with k = {k} needs {k} directions, got {}",
            directions.len()
        )));
    }
    check_nonparallel(directions)?;
    let g0 = covariogram_at(p, crate::geometry::Vec2::ZERO);
    let reps = k * k;
    let values: Vec<f64> = directions
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, u)| {
            let g1 = covariogram_at(p, u.vec() / k as f64);
            (0..reps).flat_map(move |j| {
                [(0u64, g0), (1u64, g1)].into_iter().map(move |(m, g)| {
                    let mut rng = noise_stream(seed, Design::CovBlaschke, i as u64, j as u64, m);
                    g + noise.sample(g, &mut rng)
                })
            })
        })
        .collect();
    Ok(MeasurementSet {
        design: Design::CovBlaschke,
        k,
        gamma: None,
        directions: directions.to_vec(),
        noise,
        seed,
        values,
    })
}

/// Noisy `|1̂_P(z)|^2` at the half frequency sites.
pub fn gen_mod2(
    p: &Polygon,
    k: usize,
    gamma: f64,
    noise: NoiseModel,
    seed: u64,
) -> Result<MeasurementSet> {
    noise.validate()?;
    check_in_unit_box(p)?;
    let grid = FrequencyGrid::new(k, gamma)?;
    let values = grid
        .half_frequencies()
        .par_iter()
        .enumerate()
        .map(|(j, &xi)| {
            let v = indicator_ft(p, xi).norm_sqr();
            let mut rng = noise_stream(seed, Design::Mod2, j as u64, 0, 0);
            v + noise.sample(v, &mut rng)
        })
        .collect();
    Ok(MeasurementSet {
        design: Design::Mod2,
        k,
        gamma: Some(gamma),
        directions: Vec::new(),
        noise,
        seed,
        values,
    })
}

/// Two independent noisy copies of `|1̂_P(z)|` per half frequency site.
pub fn gen_mod_pair(
    p: &Polygon,
    k: usize,
    gamma: f64,
    noise: NoiseModel,
    seed: u64,
) -> Result<MeasurementSet> {
    noise.validate()?;
    check_in_unit_box(p)?;
    let grid = FrequencyGrid::new(k, gamma)?;
    let values = grid
        .half_frequencies()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, &xi)| {
            let v = indicator_ft(p, xi).norm();
            (0..2u64).map(move |r| {
                let mut rng = noise_stream(seed, Design::ModPair, j as u64, 0, r);
                v + noise.sample(v, &mut rng)
            })
        })
        .collect();
    Ok(MeasurementSet {
        design: Design::ModPair,
        k,
        gamma: Some(gamma),
        directions: Vec::new(),
        noise,
        seed,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::regular_polygon;
    use crate::spectral::squared_modulus;

    const GAUSS: NoiseModel = NoiseModel::Gaussian { sigma: 0.01 };

    #[test]
    fn noiseless_grid_is_exact() {
        let p = regular_polygon(5, 0.45);
        let ms = gen_cov_grid(&p, 6, NoiseModel::None, 1).unwrap();
        assert_eq!(ms.values, covariogram_grid(&p, 6).unwrap().values);
        ms.validate().unwrap();
    }

    #[test]
    fn reruns_are_bit_identical() {
        let p = regular_polygon(5, 0.45);
        let a = gen_cov_grid(&p, 8, GAUSS, 7).unwrap();
        let b = gen_cov_grid(&p, 8, GAUSS, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_cov_grid(&p, 8, GAUSS, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn blaschke_payload_layout() {
        let c0 = Polygon::unit_square();
        let dirs = Direction::equally_spaced(10);
        let ms = gen_cov_blaschke(&c0, 10, &dirs, NoiseModel::None, 3).unwrap();
        assert_eq!(ms.values.len(), 2000);
        // direction 0 is e1: g(e1 / 10) = 0.9
        for j in 0..100 {
            assert_eq!(ms.values[j * 2], 1.0);
            assert!((ms.values[j * 2 + 1] - 0.9).abs() < 1e-15);
        }
        ms.validate().unwrap();
    }

    #[test]
    fn parallel_directions_are_rejected() {
        let c0 = Polygon::unit_square();
        let mut dirs = Direction::equally_spaced(3);
        dirs[2] = -dirs[0];
        assert!(matches!(
            gen_cov_blaschke(&c0, 3, &dirs, NoiseModel::None, 0),
            Err(Error::ParallelDirections(0, 2))
        ));
    }

    #[test]
    fn mod2_noiseless_matches_squared_modulus() {
        let p = regular_polygon(5, 0.45);
        let ms = gen_mod2(&p, 8, 0.75, NoiseModel::None, 0).unwrap();
        assert_eq!(ms.values.len(), 145);
        assert!((ms.values[0] - p.area() * p.area()).abs() < 1e-15);
        let freqs = ms.frequency_grid().unwrap().half_frequencies();
        for (v, xi) in ms.values.iter().zip(freqs) {
            assert_eq!(*v, squared_modulus(&p, xi));
        }
    }

    #[test]
    fn mod_pair_copies_are_independent() {
        let p = regular_polygon(5, 0.45);
        let clean = gen_mod_pair(&p, 4, 0.75, NoiseModel::None, 0).unwrap();
        for j in 0..clean.values.len() / 2 {
            assert_eq!(clean.values[2 * j], clean.values[2 * j + 1]);
        }
        let a = gen_mod_pair(&p, 4, 0.75, GAUSS, 5).unwrap();
        let b = gen_mod_pair(&p, 4, 0.75, GAUSS, 5).unwrap();
        assert_eq!(a, b);
        assert!((0..a.values.len() / 2).all(|j| a.values[2 * j] != a.values[2 * j + 1]));
    }

    #[test]
    fn streams_do_not_depend_on_other_sites() {
        let mut r1 = noise_stream(11, Design::CovGrid, 40, 0, 0);
        let x1 = GAUSS.sample(0.5, &mut r1);
        // drawing other sites in between changes nothing
        let _ = noise_stream(11, Design::CovGrid, 41, 0, 0);
        let mut r2 = noise_stream(11, Design::CovGrid, 40, 0, 0);
        assert_eq!(x1, GAUSS.sample(0.5, &mut r2));
    }

    #[test]
    fn poisson_values_are_nonnegative() {
        let p = regular_polygon(5, 0.45);
        let ms = gen_mod2(&p, 6, 0.75, NoiseModel::Poisson { scale: 1e4 }, 2).unwrap();
        assert!(ms.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn invalid_payload_lengths() {
        let p = regular_polygon(5, 0.45);
        let mut ms = gen_mod2(&p, 4, 0.75, NoiseModel::None, 0).unwrap();
        ms.values.pop();
        assert!(matches!(ms.validate(), Err(Error::Shape(_))));
        assert!(matches!(
            NoiseModel::Gaussian { sigma: -1.0 }.validate(),
            Err(Error::Configuration(_))
        ));
    }
}
