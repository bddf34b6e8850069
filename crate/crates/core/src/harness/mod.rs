//! Seeded Monte Carlo experiments over the space of linear perturbations,
//! and their reports.

mod config;
mod report;
mod run;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::SearchBox;
use crate::maps::LinearMap;
use crate::singular::{DoublePoint, SingularPoint};

pub use config::{Dims, ExperimentConfig, ExperimentKind, GdsmConfig, Prepared};
pub use report::{read_report, summarize_path, write_report, ReportFormat, Summary};
pub use run::{run_experiment, sample_perturbation, worker_pool, THREADS_ENV};

/// Version of the report layout, embedded in JSON and in the CSV header.
pub const FORMAT_VERSION: u32 = 1;

/// A singular point together with the corank-1 transversality verdict,
/// when that test applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    #[serde(flatten)]
    pub point: SingularPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transverse: Option<bool>,
}

/// Largest deviations seen by one `identity_checks` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub lambda: LinearMap,
    /// `|phi_inv(phi(Lambda, alpha)) - alpha|_max`.
    pub phi_round_trip: f64,
    /// `|phi(phi_inv(Lambda, beta)) - beta|_max` for an independent `beta`.
    pub phi_inverse_round_trip: f64,
    /// Largest relative pointwise gap between `Pi o graph(F) o f` and
    /// `H_Lambda o F_alpha o f`.
    pub composition_deviation: f64,
}

/// Central point and search box of a `gdsm_cusp` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdsmRecord {
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "box")]
    pub search_box: SearchBox,
    pub box_expansions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_index: usize,
    /// The perturbation drawn for this sample (`psi(p)` for `gdsm_cusp`).
    pub alpha: LinearMap,
    pub points: Vec<PointRecord>,
    #[serde(default)]
    pub double_points: Vec<DoublePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<IdentityRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gdsm: Option<GdsmRecord>,
    pub min_margin: Option<f64>,
    pub boundary_margin: Option<f64>,
    /// Why the sample failed; empty exactly when `pass` holds.
    pub failures: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_samples: usize,
    pub failures: usize,
    pub min_margin: Option<f64>,
    pub classification_counts: BTreeMap<String, usize>,
}

impl Aggregate {
    pub fn from_samples(samples: &[SampleRecord]) -> Aggregate {
        let mut counts = BTreeMap::new();
        for p in samples.iter().flat_map(|s| &s.points) {
            *counts.entry(p.point.classification.to_string()).or_insert(0) += 1;
        }
        Aggregate {
            n_samples: samples.len(),
            failures: samples.iter().filter(|s| !s.pass).count(),
            min_margin: samples.iter().filter_map(|s| s.min_margin).reduce(f64::min),
            classification_counts: counts,
        }
    }
}

/// Everything a run produced. Wall time is measured by callers and kept out
/// of the report so that a rerun reproduces it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub samples: Vec<SampleRecord>,
    pub aggregate: Aggregate,
}
