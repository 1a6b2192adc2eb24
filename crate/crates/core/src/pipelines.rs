//! End-to-end reconstruction for the three problems and the convergence
//! experiment harness.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    brightness_from_cov_diffs, brightness_from_synthesis, combine_mod_pairs, phase_grid_estimates,
    threshold_difference_hull, DiffSchedule, Kernel,
};
use crate::geometry::{blaschke_body, difference_body, hausdorff_distance, Direction, Polygon};
use crate::lsq::{bright_lsq_fit, cov_lsq_fit, FitOptions, FitReport};
use crate::measurement::{
    gen_cov_blaschke, gen_cov_grid, gen_mod2, gen_mod_pair, Design, MeasurementSet, NoiseModel,
};
use crate::spectral::synthesis_residual;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Noisy covariogram samples.
    Cov,
    /// Noisy squared modulus of the Fourier transform.
    Mod2,
    /// Two independent noisy copies of the modulus.
    Mod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    /// Brightness estimates fitted to an o-symmetric polygon approximating
    /// the Blaschke body.
    Blaschke,
    /// Thresholded kernel estimate approximating the difference body.
    Diff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub problem: Problem,
    pub first_stage: FirstStage,
    /// Grid refinement of the covariogram fit.
    pub k: usize,
    /// Refinement of the first stage (direction count for the Blaschke
    /// stages); follows `k` when absent.
    pub first_k: Option<usize>,
    pub gamma_lsq: f64,
    pub gamma_blaschke: f64,
    /// Exponent offset in `h_k = k^(γ - 1 + ε)`.
    pub eps_blaschke: f64,
    pub gamma_diff: f64,
    pub schedule: DiffSchedule,
    pub kernel: Kernel,
    pub noise: NoiseModel,
    pub seed: u64,
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for PipelineConfig {
    /// 60 equally spaced directions, grid `k = 8`, Gaussian noise with
    /// `σ = 0.01`.
    fn default() -> Self {
        PipelineConfig {
            problem: Problem::Cov,
            first_stage: FirstStage::Blaschke,
            k: 8,
            first_k: Some(60),
            gamma_lsq: 0.75,
            gamma_blaschke: 0.8,
            eps_blaschke: 0.1,
            gamma_diff: 0.95,
            schedule: DiffSchedule::default(),
            kernel: Kernel::UniformBox,
            noise: NoiseModel::Gaussian { sigma: 0.01 },
            seed: 0,
            restarts: 8,
            max_evals: 2000,
        }
    }
}

fn nondecreasing(f: impl Fn(f64) -> f64, k: usize) -> bool {
    let (a, b) = (f(k as f64), f(2.0 * k as f64));
    b >= a * (1.0 - 1e-9)
}

impl PipelineConfig {
    pub fn first_k(&self) -> usize {
        self.first_k.unwrap_or(self.k)
    }

    /// `h_k = k^(γ - 1 + ε)` for the phase Blaschke stage.
    pub fn h_blaschke(&self) -> f64 {
        (self.first_k() as f64).powf(self.gamma_blaschke - 1.0 + self.eps_blaschke)
    }

    /// Checks every parameter window; the error names the violated one.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.first_k() == 0 {
            return Err(Error::config("k must be positive"));
        }
        if self.restarts == 0 || self.max_evals == 0 {
            return Err(Error::config("optimizer budget must be positive"));
        }
        self.noise.validate()?;
        let fk = self.first_k();
        match self.problem {
            Problem::Cov => match self.first_stage {
                FirstStage::Blaschke => {
                    if fk < 2 {
                        return Err(Error::config("blaschke stage needs at least 2 directions"));
                    }
                }
                FirstStage::Diff => self.check_essent(fk)?,
            },
            Problem::Mod2 | Problem::Mod => {
                let g = self.gamma_lsq;
                if !(g > 0.625 && g < 1.0) {
                    return Err(Error::config(format!(
                        "window gamma: need 1/2 + 1/(4n) = 0.625 < gamma_lsq < 1, got {g}"
                    )));
                }
                match self.first_stage {
                    FirstStage::Blaschke => {
                        let (g, e) = (self.gamma_blaschke, self.eps_blaschke);
                        if !(g > 0.0 && g < 1.0 && e > 0.0 && e < 1.0 - g && 9.0 - 12.0 * g - 4.0 * e < 0.0) {
                            return Err(Error::config(format!(
                                "window eeg: need 0 < eps < 1 - gamma and 9 - 12 gamma - 4 eps < 0, \
                                 got gamma = {g}, eps = {e}"
                            )));
                        }
                        if fk < 2 {
                            return Err(Error::config("blaschke stage needs at least 2 directions"));
                        }
                    }
                    FirstStage::Diff => {
                        let g = self.gamma_diff;
                        if !(g > 0.9375 && g < 1.0) {
                            return Err(Error::config(format!(
                                "window diff-gamma: need 3(1 + 1/(2n))/4 = 0.9375 < gamma_diff < 1, got {g}"
                            )));
                        }
                        self.schedule.validate()?;
                        let s = self.schedule;
                        let essent = |k: f64| s.delta(k as usize).powi(4) * k.powf(8.0 * g - 7.5);
                        if !nondecreasing(essent, fk) {
                            return Err(Error::config(format!(
                                "window essentphase: delta^4 k^(4 gamma n - 3n - 3/2) decreases \
                                 from k = {fk} to {}",
                                2 * fk
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_essent(&self, k: usize) -> Result<()> {
        self.schedule.validate()?;
        let s = self.schedule;
        match s {
            DiffSchedule::Bernstein { .. } => {
                let c = 12.0 * self.kernel.sup() * self.noise.variance_bound(1.0) * 4.0;
                let expr = |k: f64| {
                    let ku = k as usize;
                    let d = s.delta(ku);
                    let ke = k * s.epsilon(ku);
                    d * d * ke * ke / k.ln()
                };
                if k < 2 || expr(k as f64) <= c || !nondecreasing(expr, k) {
                    return Err(Error::config(format!(
                        "window essentBern: need delta^2 (k eps)^n / log k > 12 |phi| sigma^2 (n + 2) = {c}"
                    )));
                }
            }
            _ => {
                let essent = |k: f64| {
                    let ku = k as usize;
                    s.delta(ku).powi(4) * s.epsilon(ku).powi(6) * k.sqrt()
                };
                if !nondecreasing(essent, k) {
                    return Err(Error::config(format!(
                        "window essent: delta^4 eps^(3n) k^(n - 3/2) decreases from k = {k} to {}",
                        2 * k
                    )));
                }
            }
        }
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            restarts: self.restarts,
            max_evals: self.max_evals,
            seed: derive_seed(self.seed, 3),
            initial: None,
        }
    }
}

/// Independent substream seed for pipeline stage `stage`.
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Where the measurements come from.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    /// Simulate both stages from this body.
    Truth(&'a Polygon),
    /// First-stage and second-stage measurement sets.
    Measured {
        first: &'a MeasurementSet,
        second: &'a MeasurementSet,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub first_k: usize,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_first: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_second: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub first_stage_facets: usize,
    pub fit_objective: f64,
    pub fit_evaluations: usize,
    pub fit_converged: bool,
    pub best_restart: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub problem: Problem,
    pub first_stage: FirstStage,
    pub seed: u64,
    /// `P_k`, centroid at the origin.
    pub polygon: Polygon,
    /// `Q_k`.
    pub first_stage_polygon: Polygon,
    /// `min{δ(K_0, P_k), δ(-K_0, P_k)}`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_to_truth: Option<f64>,
    /// Distance of `Q_k` to the Blaschke or difference body of the truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_stage_error: Option<f64>,
    pub diagnostics: StageDiagnostics,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Error up to reflection, against the truth translated to its centroid.
pub fn error_to_truth(truth: &Polygon, p: &Polygon) -> Result<f64> {
    let t = truth.centered()?;
    Ok(hausdorff_distance(&t, p)?.min(hausdorff_distance(&t.reflect(), p)?))
}

pub fn first_stage_error(truth: &Polygon, stage: FirstStage, q: &Polygon) -> Result<f64> {
    let t = truth.centered()?;
    let target = match stage {
        FirstStage::Blaschke => blaschke_body(&t)?,
        FirstStage::Diff => difference_body(&t),
    };
    hausdorff_distance(&target, q)
}

fn check_stage(ms: &MeasurementSet, design: Design, k: usize, gamma: Option<f64>, stage: &str) -> Result<()> {
    ms.require(design)?;
    if ms.k != k {
        return Err(Error::config(format!(
            "stage k mismatch: {stage} measurements have k = {}, configuration expects {k}",
            ms.k
        )));
    }
    if let (Some(want), Some(got)) = (gamma, ms.gamma) {
        if (want - got).abs() > 1e-12 {
            return Err(Error::config(format!(
                "{stage} measurements have gamma = {got}, configuration expects {want}"
            )));
        }
    }
    Ok(())
}

fn check_independent(first: &MeasurementSet, second: &MeasurementSet) -> Result<()> {
    if first.seed == second.seed {
        return Err(Error::config(format!(
            "first- and second-stage measurements share seed {}; the stages must be independent",
            first.seed
        )));
    }
    Ok(())
}

fn usable_first_stage(q: Polygon) -> Result<Polygon> {
    if q.is_empty() {
        return Err(Error::failure("first stage", "threshold set is empty"));
    }
    if q.is_degenerate() {
        return Err(Error::failure("first stage", "first-stage polygon has no interior"));
    }
    Ok(q)
}

struct FirstOutcome {
    q: Polygon,
    epsilon: Option<f64>,
    delta: Option<f64>,
    h: Option<f64>,
    gamma: Option<f64>,
}

fn finish(
    cfg: &PipelineConfig,
    truth: Option<&Polygon>,
    first: FirstOutcome,
    grid: &crate::covariogram::SampleGrid,
    gamma_second: Option<f64>,
    started: Instant,
) -> Result<ReconstructionReport> {
    let q = usable_first_stage(first.q)?;
    let (polygon, fit): (Polygon, FitReport) = cov_lsq_fit(grid, &q, &cfg.fit_options()).map_err(|e| match e {
        Error::Configuration(msg) => Error::failure("covariogram fit", msg),
        other => other,
    })?;
    let facets = q.len();
    let (err, first_err, residual) = match truth {
        Some(t) => (
            Some(error_to_truth(t, &polygon)?),
            Some(first_stage_error(t, cfg.first_stage, &q)?),
            match gamma_second {
                Some(g) => Some(synthesis_residual(t, grid.k, g)?),
                None => None,
            },
        ),
        None => (None, None, None),
    };
    Ok(ReconstructionReport {
        problem: cfg.problem,
        first_stage: cfg.first_stage,
        seed: cfg.seed,
        polygon,
        first_stage_polygon: q,
        error_to_truth: err,
        first_stage_error: first_err,
        diagnostics: StageDiagnostics {
            first_k: cfg.first_k(),
            k: grid.k,
            gamma_first: first.gamma,
            gamma_second,
            epsilon: first.epsilon,
            delta: first.delta,
            h: first.h,
            first_stage_facets: facets,
            fit_objective: fit.objective,
            fit_evaluations: fit.iterations,
            fit_converged: fit.converged,
            best_restart: fit.best_restart,
            synthesis_residual: residual,
        },
        wall_time: started.elapsed(),
    })
}

/// Problem 1: a first stage on covariogram data, then the covariogram fit on
/// an independent grid.
pub fn run_problem1(input: Input, cfg: &PipelineConfig) -> Result<ReconstructionReport> {
    if cfg.problem != Problem::Cov {
        return Err(Error::config("run_problem1 needs problem = cov"));
    }
    cfg.validate()?;
    let started = Instant::now();
    let fk = cfg.first_k();
    let (s1, s2) = (derive_seed(cfg.seed, 1), derive_seed(cfg.seed, 2));
    let first_design = match cfg.first_stage {
        FirstStage::Blaschke => Design::CovBlaschke,
        FirstStage::Diff => Design::CovGrid,
    };
    let (first, second, truth) = match input {
        Input::Truth(t) => {
            let first = match cfg.first_stage {
                FirstStage::Blaschke => gen_cov_blaschke(t, fk, &Direction::equally_spaced(fk), cfg.noise, s1)?,
                FirstStage::Diff => gen_cov_grid(t, fk, cfg.noise, s1)?,
            };
            (first, gen_cov_grid(t, cfg.k, cfg.noise, s2)?, Some(t))
        }
        Input::Measured { first, second } => {
            check_stage(first, first_design, fk, None, "first-stage")?;
            check_stage(second, Design::CovGrid, cfg.k, None, "second-stage")?;
            check_independent(first, second)?;
            (first.clone(), second.clone(), None)
        }
    };
    let outcome = match cfg.first_stage {
        FirstStage::Blaschke => FirstOutcome {
            q: bright_lsq_fit(&brightness_from_cov_diffs(&first)?)?,
            epsilon: None,
            delta: None,
            h: None,
            gamma: None,
        },
        FirstStage::Diff => {
            let spec = cfg.schedule.kernel_spec(cfg.kernel, fk)?;
            FirstOutcome {
                q: threshold_difference_hull(&first.as_grid()?, &spec),
                epsilon: Some(spec.epsilon),
                delta: Some(spec.delta),
                h: None,
                gamma: None,
            }
        }
    };
    finish(cfg, truth, outcome, &second.as_grid()?, None, started)
}

fn mod2_core(
    cfg: &PipelineConfig,
    truth: Option<&Polygon>,
    first: &MeasurementSet,
    second: &MeasurementSet,
    started: Instant,
) -> Result<ReconstructionReport> {
    let fk = cfg.first_k();
    let outcome = match cfg.first_stage {
        FirstStage::Blaschke => {
            let h = cfg.h_blaschke();
            let y = brightness_from_synthesis(first, h, &Direction::equally_spaced(fk))?;
            FirstOutcome {
                q: bright_lsq_fit(&y)?,
                epsilon: None,
                delta: None,
                h: Some(h),
                gamma: Some(cfg.gamma_blaschke),
            }
        }
        FirstStage::Diff => {
            let spec = cfg.schedule.kernel_spec(cfg.kernel, fk)?;
            FirstOutcome {
                q: threshold_difference_hull(&phase_grid_estimates(first)?, &spec),
                epsilon: Some(spec.epsilon),
                delta: Some(spec.delta),
                h: None,
                gamma: Some(cfg.gamma_diff),
            }
        }
    };
    let grid = phase_grid_estimates(second)?;
    finish(cfg, truth, outcome, &grid, Some(cfg.gamma_lsq), started)
}

fn first_gamma(cfg: &PipelineConfig) -> f64 {
    match cfg.first_stage {
        FirstStage::Blaschke => cfg.gamma_blaschke,
        FirstStage::Diff => cfg.gamma_diff,
    }
}

/// Problem 2: both stages from independent squared-modulus data.
pub fn run_problem2(input: Input, cfg: &PipelineConfig) -> Result<ReconstructionReport> {
    if cfg.problem != Problem::Mod2 {
        return Err(Error::config("run_problem2 needs problem = mod2"));
    }
    cfg.validate()?;
    let started = Instant::now();
    let (fk, g1) = (cfg.first_k(), first_gamma(cfg));
    match input {
        Input::Truth(t) => {
            let first = gen_mod2(t, fk, g1, cfg.noise, derive_seed(cfg.seed, 1))?;
            let second = gen_mod2(t, cfg.k, cfg.gamma_lsq, cfg.noise, derive_seed(cfg.seed, 2))?;
            mod2_core(cfg, Some(t), &first, &second, started)
        }
        Input::Measured { first, second } => {
            check_stage(first, Design::Mod2, fk, Some(g1), "first-stage")?;
            check_stage(second, Design::Mod2, cfg.k, Some(cfg.gamma_lsq), "second-stage")?;
            check_independent(first, second)?;
            mod2_core(cfg, None, first, second, started)
        }
    }
}

/// Problem 3: products of paired modulus samples feed the Problem 2
/// pathway unchanged.
pub fn run_problem3(input: Input, cfg: &PipelineConfig) -> Result<ReconstructionReport> {
    if cfg.problem != Problem::Mod {
        return Err(Error::config("run_problem3 needs problem = mod"));
    }
    cfg.validate()?;
    let started = Instant::now();
    let (fk, g1) = (cfg.first_k(), first_gamma(cfg));
    let (first, second, truth) = match input {
        Input::Truth(t) => (
            gen_mod_pair(t, fk, g1, cfg.noise, derive_seed(cfg.seed, 1))?,
            gen_mod_pair(t, cfg.k, cfg.gamma_lsq, cfg.noise, derive_seed(cfg.seed, 2))?,
            Some(t),
        ),
        Input::Measured { first, second } => {
            check_stage(first, Design::ModPair, fk, Some(g1), "first-stage")?;
            check_stage(second, Design::ModPair, cfg.k, Some(cfg.gamma_lsq), "second-stage")?;
            check_independent(first, second)?;
            (first.clone(), second.clone(), None)
        }
    };
    let (first, second) = (combine_mod_pairs(&first)?, combine_mod_pairs(&second)?);
    mod2_core(cfg, truth, &first, &second, started)
}

/// Dispatches on `cfg.problem`.
pub fn run(input: Input, cfg: &PipelineConfig) -> Result<ReconstructionReport> {
    match cfg.problem {
        Problem::Cov => run_problem1(input, cfg),
        Problem::Mod2 => run_problem2(input, cfg),
        Problem::Mod => run_problem3(input, cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub k: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_stage_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Rate bound on the first-stage error, for the diff path under the
    /// power-law schedule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_first_stage_error: Option<f64>,
    pub failures: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub medians: Vec<MedianRow>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `√n (2/b)^(1/n) k^(-(1 - 3α - 3/(2n))/4)` with `n = 2`.
pub fn corollary_bound(alpha: f64, b: f64, k: usize) -> f64 {
    2f64.sqrt() * (2.0 / b).sqrt() * (k as f64).powf(-(1.0 - 3.0 * alpha - 0.75) / 4.0)
}

impl ExperimentTable {
    /// One line per row; `wall_ms` is left empty unless `timing` is set so
    /// that reruns are byte-identical.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("k,seed,error,first_stage_error,objective,wall_ms,bound,pass,failure\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for r in &self.rows {
            let wall = if timing { format!("{:.3}", r.wall_ms) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                r.seed,
                f(r.error),
                f(r.first_stage_error),
                f(r.objective),
                wall,
                f(r.bound),
                r.pass.map(|p| p.to_string()).unwrap_or_default(),
                r.failure.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }
}

/// Runs every `(k, seed)` cell; reconstruction failures are recorded in the
/// row, configuration errors abort before any work.
pub fn convergence_experiment(
    truth: &Polygon,
    cfg: &PipelineConfig,
    ks: &[usize],
    seeds: &[u64],
) -> Result<ExperimentTable> {
    let cells: Vec<(usize, u64)> = ks.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let configs: Vec<PipelineConfig> = cells
        .iter()
        .map(|&(k, seed)| {
            let c = PipelineConfig {
                k,
                seed,
                ..cfg.clone()
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let volume = truth.area();
    let rows: Vec<ExperimentRow> = configs
        .par_iter()
        .map(|c| {
            let started = Instant::now();
            let bound = match (c.problem, c.first_stage, c.schedule) {
                (Problem::Cov, FirstStage::Diff, DiffSchedule::Corollary { alpha }) => {
                    Some(corollary_bound(alpha, 0.9 * volume, c.first_k()))
                }
                _ => None,
            };
            let mut row = ExperimentRow {
                k: c.k,
                seed: c.seed,
                error: None,
                first_stage_error: None,
                objective: None,
                bound,
                pass: None,
                failure: None,
                wall_ms: 0.0,
            };
            match run(Input::Truth(truth), c) {
                Ok(rep) => {
                    row.error = rep.error_to_truth;
                    row.first_stage_error = rep.first_stage_error;
                    row.objective = Some(rep.diagnostics.fit_objective);
                    row.pass = bound.zip(rep.first_stage_error).map(|(b, e)| e <= b);
                }
                Err(e) => {
                    row.failure = Some(e.to_string());
                    row.pass = bound.map(|_| false);
                }
            }
            row.wall_ms = started.elapsed().as_secs_f64() * 1e3;
            row
        })
        .collect::<Vec<_>>();
    let medians = ks
        .iter()
        .map(|&k| {
            let at: Vec<&ExperimentRow> = rows.iter().filter(|r| r.k == k).collect();
            let errs: Vec<f64> = at.iter().filter_map(|r| r.error).collect();
            let firsts: Vec<f64> = at.iter().filter_map(|r| r.first_stage_error).collect();
            MedianRow {
                k,
                median_error: median(&errs),
                median_first_stage_error: median(&firsts),
                failures: at.iter().filter(|r| r.failure.is_some()).count(),
            }
        })
        .collect();
    Ok(ExperimentTable { rows, medians })
}
