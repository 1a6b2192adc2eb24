//! End-to-end runs on small configurations.

use covrecon::estimators::DiffSchedule;
use covrecon::io::{report_from_json, report_to_json};
use covrecon::measurement::{gen_cov_blaschke, gen_cov_grid, NoiseModel};
use covrecon::pipelines::{derive_seed, run, FirstStage, Input, PipelineConfig, Problem};
use covrecon::shapes::{regular_polygon, ShapeSpec};
use covrecon::{Direction, Error};

fn fixed_diff(problem: Problem) -> PipelineConfig {
    PipelineConfig {
        problem,
        first_stage: FirstStage::Diff,
        k: 16,
        first_k: Some(16),
        schedule: DiffSchedule::Fixed { epsilon: 0.1, delta: 0.1 },
        noise: NoiseModel::None,
        ..PipelineConfig::default()
    }
}

#[test]
fn noiseless_square_through_the_difference_body() {
    let sq = ShapeSpec::Square.build().unwrap();
    let rep = run(Input::Truth(&sq), &fixed_diff(Problem::Cov)).unwrap();
    assert!(rep.error_to_truth.unwrap() <= 0.05);

    let rep = run(Input::Truth(&sq), &fixed_diff(Problem::Mod2)).unwrap();
    let allowance = 0.1 + rep.diagnostics.synthesis_residual.unwrap();
    assert!(rep.error_to_truth.unwrap() <= allowance);
}

#[test]
fn supplied_measurements_match_simulation() {
    let pent = regular_polygon(5, 0.45);
    let cfg = PipelineConfig {
        k: 6,
        first_k: Some(20),
        seed: 4,
        ..PipelineConfig::default()
    };
    let simulated = run(Input::Truth(&pent), &cfg).unwrap();
    let first = gen_cov_blaschke(&pent, 20, &Direction::equally_spaced(20), cfg.noise, derive_seed(4, 1)).unwrap();
    let second = gen_cov_grid(&pent, 6, cfg.noise, derive_seed(4, 2)).unwrap();
    let supplied = run(Input::Measured { first: &first, second: &second }, &cfg).unwrap();
    assert_eq!(supplied.polygon, simulated.polygon);
    assert!(supplied.error_to_truth.is_none());
}

#[test]
fn reports_survive_json() {
    let pent = regular_polygon(5, 0.45);
    let cfg = PipelineConfig {
        k: 5,
        first_k: Some(16),
        ..PipelineConfig::default()
    };
    let rep = run(Input::Truth(&pent), &cfg).unwrap();
    let text = report_to_json(&rep);
    let back = report_from_json(&text).unwrap();
    assert_eq!(back.polygon, rep.polygon);
    assert_eq!(back.first_stage_polygon, rep.first_stage_polygon);
    assert_eq!(back.diagnostics, rep.diagnostics);
    assert_eq!(report_to_json(&back), text);
}

#[test]
fn empty_first_stage_is_a_reconstruction_failure() {
    // the default rate schedule thresholds above the peak at this size
    let sq = ShapeSpec::Square.build().unwrap();
    let cfg = PipelineConfig {
        first_stage: FirstStage::Diff,
        k: 6,
        first_k: Some(16),
        noise: NoiseModel::None,
        ..PipelineConfig::default()
    };
    match run(Input::Truth(&sq), &cfg) {
        Err(e @ Error::ReconstructionFailure { .. }) => assert!(e.to_string().contains("first stage")),
        other => panic!("expected a first-stage failure, got {other:?}"),
    }
}
