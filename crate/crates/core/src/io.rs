//! Versioned JSON files for bodies, measurements and reports.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a write/read cycle reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Polygon, Vec2};
use crate::measurement::{Design, MeasurementSet, NoiseModel};
use crate::pipelines::{FirstStage, Problem, ReconstructionReport, StageDiagnostics};

pub const BODY_SCHEMA: &str = "body/1";
pub const MEAS_SCHEMA: &str = "meas/1";
pub const REPORT_SCHEMA: &str = "report/1";

fn check_schema(found: &str, want: &str) -> Result<()> {
    if found != want {
        return Err(Error::Io(format!("expected schema {want}, found {found}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BodyFile {
    schema: String,
    vertices: Vec<Vec2>,
}

pub fn body_to_json(p: &Polygon) -> String {
    let f = BodyFile {
        schema: BODY_SCHEMA.into(),
        vertices: p.vertices().to_vec(),
    };
    serde_json::to_string_pretty(&f).expect("body serializes") + "\n"
}

/// Parses and validates a body; vertices may come in either orientation.
pub fn body_from_json(s: &str) -> Result<Polygon> {
    let f: BodyFile = serde_json::from_str(s)?;
    check_schema(&f.schema, BODY_SCHEMA)?;
    Polygon::new(f.vertices)
}

/// Measurement file. Payload order is documented on [`MeasurementSet`].
#[derive(Serialize, Deserialize)]
struct MeasFile {
    schema: String,
    design: Design,
    k: usize,
    gamma: Option<f64>,
    noise: NoiseModel,
    seed: u64,
    directions: Vec<Direction>,
    values: Vec<f64>,
}

pub fn measurement_to_json(m: &MeasurementSet) -> String {
    let f = MeasFile {
        schema: MEAS_SCHEMA.into(),
        design: m.design,
        k: m.k,
        gamma: m.gamma,
        noise: m.noise,
        seed: m.seed,
        directions: m.directions.clone(),
        values: m.values.clone(),
    };
    serde_json::to_string(&f).expect("measurements serialize") + "\n"
}

pub fn measurement_from_json(s: &str) -> Result<MeasurementSet> {
    let f: MeasFile = serde_json::from_str(s)?;
    check_schema(&f.schema, MEAS_SCHEMA)?;
    let m = MeasurementSet {
        design: f.design,
        k: f.k,
        gamma: f.gamma,
        directions: f.directions,
        noise: f.noise,
        seed: f.seed,
        values: f.values,
    };
    m.validate()?;
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    schema: String,
    problem: Problem,
    first_stage: FirstStage,
    seed: u64,
    polygon: Vec<Vec2>,
    q_k: Vec<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error_to_truth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_stage_error: Option<f64>,
    diagnostics: StageDiagnostics,
}

pub fn report_to_json(r: &ReconstructionReport) -> String {
    let f = ReportFile {
        schema: REPORT_SCHEMA.into(),
        problem: r.problem,
        first_stage: r.first_stage,
        seed: r.seed,
        polygon: r.polygon.vertices().to_vec(),
        q_k: r.first_stage_polygon.vertices().to_vec(),
        error_to_truth: r.error_to_truth,
        first_stage_error: r.first_stage_error,
        diagnostics: r.diagnostics.clone(),
    };
    serde_json::to_string_pretty(&f).expect("report serializes") + "\n"
}

pub fn report_from_json(s: &str) -> Result<ReconstructionReport> {
    let f: ReportFile = serde_json::from_str(s)?;
    check_schema(&f.schema, REPORT_SCHEMA)?;
    Ok(ReconstructionReport {
        problem: f.problem,
        first_stage: f.first_stage,
        seed: f.seed,
        polygon: Polygon::new(f.polygon)?,
        first_stage_polygon: Polygon::new(f.q_k)?,
        error_to_truth: f.error_to_truth,
        first_stage_error: f.first_stage_error,
        diagnostics: f.diagnostics,
        wall_time: Default::default(),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_body(path: &Path) -> Result<Polygon> {
    body_from_json(&read_text(path)?)
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    measurement_from_json(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{gen_cov_blaschke, gen_mod_pair};
    use crate::shapes::random_polygon;

    #[test]
    fn body_round_trip() {
        let p = random_polygon(7, 3).unwrap();
        let s = body_to_json(&p);
        assert!(s.contains("\"schema\": \"body/1\""));
        assert_eq!(body_from_json(&s).unwrap(), p);
        assert_eq!(body_to_json(&body_from_json(&s).unwrap()), s);
    }

    #[test]
    fn measurement_round_trip_is_bit_exact() {
        let p = random_polygon(6, 1).unwrap();
        let noise = NoiseModel::Gaussian { sigma: 0.013 };
        for m in [
            gen_cov_blaschke(&p, 3, &Direction::equally_spaced(3), noise, 4).unwrap(),
            gen_mod_pair(&p, 4, 0.75, noise, 5).unwrap(),
        ] {
            let back = measurement_from_json(&measurement_to_json(&m)).unwrap();
            assert!(back.values.iter().zip(&m.values).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert_eq!(back, m);
        }
    }

    #[test]
    fn wrong_schema_or_payload_is_rejected() {
        let s = body_to_json(&Polygon::unit_square()).replace("body/1", "body/2");
        assert!(matches!(body_from_json(&s), Err(Error::Io(_))));
        let p = random_polygon(5, 2).unwrap();
        let mut m = gen_mod_pair(&p, 2, 0.75, NoiseModel::None, 0).unwrap();
        m.values.pop();
        assert!(matches!(measurement_from_json(&measurement_to_json(&m)), Err(Error::Shape(_))));
    }
}
