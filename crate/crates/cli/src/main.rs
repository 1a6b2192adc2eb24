use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use covrecon::io::{self, read_body, read_measurements, read_text, write_text};
use covrecon::measurement::{gen_cov_blaschke, gen_cov_grid, gen_mod2, gen_mod_pair, NoiseModel};
use covrecon::pipelines::{
    convergence_experiment, error_to_truth, first_stage_error, run, FirstStage, Input, PipelineConfig, Problem,
};
use covrecon::shapes::ShapeSpec;
use covrecon::{svg, Direction, Error, Polygon, Result};

#[derive(Parser)]
#[command(name = "covrecon", version, about = "Convex body reconstruction from covariogram and Fourier modulus data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Square,
    Regular,
    Random,
    Ellipse,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    CovGrid,
    CovBlaschke,
    Mod2,
    Mod,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Gaussian,
    Poisson,
    PoissonGaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Cov,
    Mod2,
    Mod,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Blaschke,
    Diff,
}

#[derive(Subcommand)]
enum Command {
    /// Write a test body inside the unit box.
    Body {
        #[arg(long, value_enum)]
        shape: Shape,
        /// Vertex count of a regular polygon.
        #[arg(long, default_value_t = 5)]
        m: usize,
        /// Circumradius of a regular polygon.
        #[arg(long, default_value_t = 0.48)]
        scale: f64,
        /// Vertex count of a random polygon.
        #[arg(long, default_value_t = 7)]
        vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.45)]
        a: f64,
        #[arg(long, default_value_t = 0.3)]
        b: f64,
        #[arg(long, default_value_t = 32)]
        segments: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate noisy measurements of a body.
    Measure {
        #[arg(long)]
        body: PathBuf,
        #[arg(long, value_enum)]
        design: DesignArg,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.75)]
        gamma: f64,
        #[arg(long, value_enum, default_value = "none")]
        noise: NoiseArg,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = 1000.0)]
        poisson_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated direction angles in radians (cov-blaschke);
        /// k equally spaced directions when omitted.
        #[arg(long, value_delimiter = ',')]
        directions: Option<Vec<f64>>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a reconstruction pipeline on measurement files, or on simulated
    /// data when only a truth body is given.
    Reconstruct {
        #[arg(long, value_enum, default_value = "cov")]
        problem: ProblemArg,
        #[arg(long, value_enum, default_value = "blaschke")]
        first_stage: StageArg,
        #[arg(long, requires = "second")]
        first: Option<PathBuf>,
        #[arg(long, requires = "first")]
        second: Option<PathBuf>,
        /// Pipeline configuration JSON; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Expected second-stage k; taken from the file when omitted.
        #[arg(long)]
        k: Option<usize>,
        /// Expected first-stage k; taken from the file when omitted.
        #[arg(long)]
        first_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Also draw the reflected reconstruction.
        #[arg(long)]
        ghost: bool,
    },
    /// Run a convergence experiment and write a CSV table.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Fill the wall_ms column (makes output nondeterministic).
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BodySource {
    File { file: PathBuf },
    Shape(ShapeSpec),
}

#[derive(Deserialize)]
struct ExperimentConfig {
    body: BodySource,
    #[serde(default)]
    pipeline: PipelineConfig,
    ks: Vec<usize>,
    seeds: Vec<u64>,
}

fn noise_model(kind: NoiseArg, sigma: f64, scale: f64) -> NoiseModel {
    match kind {
        NoiseArg::None => NoiseModel::None,
        NoiseArg::Gaussian => NoiseModel::Gaussian { sigma },
        NoiseArg::Poisson => NoiseModel::Poisson { scale },
        NoiseArg::PoissonGaussian => NoiseModel::PoissonGaussian { scale, sigma },
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::config(format!("{}: {e}", p.display()))),
        None => Ok(PipelineConfig::default()),
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Body {
            shape,
            m,
            scale,
            vertices,
            seed,
            a,
            b,
            segments,
            output,
        } => {
            let spec = match shape {
                Shape::Square => ShapeSpec::Square,
                Shape::Regular => ShapeSpec::RegularPolygon { m, scale },
                Shape::Random => ShapeSpec::RandomPolygon { vertices, seed },
                Shape::Ellipse => ShapeSpec::EllipsePolygon { a, b, segments },
            };
            write_text(&output, &io::body_to_json(&spec.build()?))
        }
        Command::Measure {
            body,
            design,
            k,
            gamma,
            noise,
            sigma,
            poisson_scale,
            seed,
            directions,
            output,
        } => {
            let p = read_body(&body)?;
            let noise = noise_model(noise, sigma, poisson_scale);
            let ms = match design {
                DesignArg::CovGrid => gen_cov_grid(&p, k, noise, seed)?,
                DesignArg::CovBlaschke => {
                    let dirs = match directions {
                        Some(a) => a.into_iter().map(Direction::from_angle).collect(),
                        None => Direction::equally_spaced(k),
                    };
                    gen_cov_blaschke(&p, k, &dirs, noise, seed)?
                }
                DesignArg::Mod2 => gen_mod2(&p, k, gamma, noise, seed)?,
                DesignArg::Mod => gen_mod_pair(&p, k, gamma, noise, seed)?,
            };
            write_text(&output, &io::measurement_to_json(&ms))
        }
        Command::Reconstruct {
            problem,
            first_stage,
            first,
            second,
            config,
            truth,
            k,
            first_k,
            seed,
            output,
            svg: svg_path,
            ghost,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.problem = match problem {
                ProblemArg::Cov => Problem::Cov,
                ProblemArg::Mod2 => Problem::Mod2,
                ProblemArg::Mod => Problem::Mod,
            };
            cfg.first_stage = match first_stage {
                StageArg::Blaschke => FirstStage::Blaschke,
                StageArg::Diff => FirstStage::Diff,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let truth = truth.as_deref().map(read_body).transpose()?;
            let report = match (first, second) {
                (Some(f), Some(s)) => {
                    let (f, s) = (read_measurements(&f)?, read_measurements(&s)?);
                    cfg.k = k.unwrap_or(s.k);
                    cfg.first_k = Some(first_k.unwrap_or(f.k));
                    let mut r = run(Input::Measured { first: &f, second: &s }, &cfg)?;
                    if let Some(t) = &truth {
                        r.error_to_truth = Some(error_to_truth(t, &r.polygon)?);
                        r.first_stage_error = Some(first_stage_error(t, cfg.first_stage, &r.first_stage_polygon)?);
                    }
                    r
                }
                _ => {
                    let t = truth
                        .as_ref()
                        .ok_or_else(|| Error::config("need --first and --second, or --truth to simulate"))?;
                    if let Some(k) = k {
                        cfg.k = k;
                    }
                    if first_k.is_some() {
                        cfg.first_k = first_k;
                    }
                    run(Input::Truth(t), &cfg)?
                }
            };
            write_text(&output, &io::report_to_json(&report))?;
            if let Some(path) = svg_path {
                let centred = truth.as_ref().map(Polygon::centered).transpose()?;
                write_text(&path, &svg::overlay(centred.as_ref(), &report.polygon, ghost))?;
            }
            Ok(())
        }
        Command::Experiment {
            config,
            output,
            svg: svg_path,
            timing,
        } => {
            let text = read_text(&config)?;
            let exp: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", config.display())))?;
            let body = match exp.body {
                BodySource::File { file } => {
                    let base = config.parent().unwrap_or(Path::new("."));
                    read_body(&base.join(file))?
                }
                BodySource::Shape(s) => s.build()?,
            };
            let table = convergence_experiment(&body, &exp.pipeline, &exp.ks, &exp.seeds)?;
            write_text(&output, &table.to_csv(timing))?;
            if let Some(path) = svg_path {
                let series: Vec<(usize, f64)> = table
                    .medians
                    .iter()
                    .filter_map(|m| m.median_error.map(|e| (m.k, e)))
                    .collect();
                if let Some(plot) = svg::error_plot(&series) {
                    write_text(&path, &plot)?;
                }
            }
            for m in &table.medians {
                match m.median_error {
                    Some(e) => eprintln!("k = {}: median error {e:.6} ({} failures)", m.k, m.failures),
                    None => eprintln!("k = {}: no successful runs ({} failures)", m.k, m.failures),
                }
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ReconstructionFailure { .. } | Error::InfeasibleMeasure(_) => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
