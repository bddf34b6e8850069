use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Dims, ExperimentConfig, ExperimentKind, Prepared};
use super::{Aggregate, GdsmRecord, IdentityRecord, PointRecord, RunReport, SampleRecord, FORMAT_VERSION};
use crate::dsl::{MapProgram, SearchBox};
use crate::error::{Error, Result};
use crate::gdsm::{self, CuspExperiment, CuspVariant, GdsmSpec};
use crate::jet::derivative_matrix;
use crate::linalg;
use crate::maps::{self, LinearMap};
use crate::rng;
use crate::singular::grid::Grid;
use crate::singular::{
    check_transverse_corank1, find_double_points, find_singular_points, Classification, SingularSearch,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "JETGEN_THREADS";

/// Threshold for the identity suites.
const IDENTITY_TOL: f64 = 1e-9;
/// `Lambda` is redrawn until `|det Lambda|` reaches this.
const MIN_DET: f64 = 0.1;
const MAX_REDRAWS: usize = 1000;
/// Cells per axis of the grid used to check that `f` is an embedding.
const EMBEDDING_CELLS: usize = 24;

/// `ell x m` perturbation with i.i.d. `N(0, sigma^2)` entries.
pub fn sample_perturbation(stream: &mut ChaCha8Rng, dims: Dims, sigma: f64) -> Result<LinearMap> {
    rng::normal_matrix(stream, dims.ell, dims.m, sigma)
}

/// A thread pool honouring `JETGEN_THREADS` (all cores when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

/// Runs every sample of `config` and assembles the report.
///
/// Samples run in parallel on independent random streams keyed by
/// `(seed, sample_index)`, so the report does not depend on the number of
/// workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let prepared = config.prepare()?;
    let pool = worker_pool()?;
    let variant = match config.kind {
        ExperimentKind::GdsmCusp => Some(CuspVariant::for_matrix(&config.gdsm.as_ref().expect("validated").a)?),
        _ => None,
    };
    let mut warnings = Vec::new();
    if let (Some(f), Some(b)) = (&prepared.embedding, &config.search_box) {
        warnings.extend(embedding_warnings(f, b));
    }
    let samples: Vec<SampleRecord> = pool.install(|| {
        (0..config.n_samples)
            .into_par_iter()
            .map(|k| run_sample(config, &prepared, variant, k))
            .collect::<Result<_>>()
    })?;
    Ok(RunReport {
        format_version: FORMAT_VERSION,
        config_hash: config.hash(),
        config: config.clone(),
        warnings,
        aggregate: Aggregate::from_samples(&samples),
        samples,
    })
}

fn run_sample(
    config: &ExperimentConfig,
    prepared: &Prepared,
    variant: Option<CuspVariant>,
    k: usize,
) -> Result<SampleRecord> {
    let mut stream = rng::stream(config.seed, k as u64);
    let dims = prepared.dims;
    match config.kind {
        ExperimentKind::GdsmCusp => return gdsm_sample(config, variant.expect("set for gdsm"), k),
        ExperimentKind::IdentityChecks => return identity_sample(config, prepared, &mut stream, k),
        _ => {}
    }
    let alpha = if config.zero_perturbation {
        LinearMap::zeros(dims.ell, dims.m)
    } else {
        sample_perturbation(&mut stream, dims, config.sigma)?
    };
    let mut record = SampleRecord {
        sample_index: k,
        alpha: alpha.clone(),
        points: Vec::new(),
        double_points: Vec::new(),
        identity: None,
        gdsm: None,
        min_margin: None,
        boundary_margin: None,
        failures: Vec::new(),
        pass: false,
    };
    let big_f = prepared.big_f.as_ref().expect("validated");
    let perturbed = maps::perturb(big_f, &alpha)?;
    let g = match &prepared.embedding {
        Some(f) => maps::compose(&perturbed, f)?,
        None => perturbed,
    };
    let bbox = config.search_box.as_ref().expect("validated");
    match analyse_sample(config, &g, bbox, &mut record) {
        Ok(()) => {}
        Err(e) => record.failures.push(format!("analysis failed: {e}")),
    }
    record.min_margin = record.points.iter().map(|p| p.point.margin).reduce(f64::min);
    record.pass = record.failures.is_empty();
    Ok(record)
}

fn analyse_sample(config: &ExperimentConfig, g: &MapProgram, bbox: &SearchBox, record: &mut SampleRecord) -> Result<()> {
    let tol = &config.tolerances;
    let SingularSearch {
        points, boundary_margin, ..
    } = find_singular_points(g, bbox, config.grid, tol)?;
    record.boundary_margin = boundary_margin;
    let expected: &[Classification] = match config.kind {
        ExperimentKind::MorseGenericity => &[Classification::MorseNondegenerate],
        ExperimentKind::PlaneExcellent => &[Classification::Fold, Classification::Cusp],
        ExperimentKind::SpacePinch => &[Classification::CrossCap],
        ExperimentKind::GdsmCusp | ExperimentKind::IdentityChecks => unreachable!("handled separately"),
    };
    for point in points {
        if !expected.contains(&point.classification) {
            record.failures.push(format!(
                "{} point of corank {} at {:?} (symbol {}, margin {:.3e})",
                point.classification, point.corank, point.location, point.tb_symbol, point.margin
            ));
        }
        let transverse = match config.kind {
            ExperimentKind::PlaneExcellent | ExperimentKind::SpacePinch if point.corank == 1 => {
                let t = check_transverse_corank1(g, &point.location, tol)?;
                if !t.transverse && config.kind == ExperimentKind::PlaneExcellent {
                    record.failures.push(format!(
                        "corank-1 stratum not transverse at {:?} (margin {:.3e})",
                        point.location, t.margin
                    ));
                }
                Some(t.transverse)
            }
            _ => None,
        };
        record.points.push(PointRecord { point, transverse });
    }
    if config.kind == ExperimentKind::SpacePinch {
        record.double_points = find_double_points(g, bbox, config.grid, tol)?;
        for dp in record.double_points.iter().filter(|dp| !dp.crossing_transverse) {
            record.failures.push(format!(
                "double point {:?} / {:?} is not a transverse crossing (margin {:.3e})",
                dp.q1, dp.q2, dp.margin
            ));
        }
    }
    Ok(())
}

fn gdsm_sample(config: &ExperimentConfig, variant: CuspVariant, k: usize) -> Result<SampleRecord> {
    let a = &config.gdsm.as_ref().expect("validated").a;
    let cfg = CuspExperiment {
        n_samples: config.n_samples,
        seed: config.seed,
        sigma: config.sigma,
        grid: config.grid,
        search_box: config.search_box.clone(),
        tolerances: config.tolerances.clone(),
    };
    let spec = if config.zero_perturbation {
        GdsmSpec::new(a.clone(), vec![vec![0.0; a.cols()]; a.rows()])?
    } else {
        gdsm::sample_spec(a, config.seed, k, config.sigma)?
    };
    let s = gdsm::cusp_sample_for(&spec, variant, &cfg, k)?;
    let mut failures = Vec::new();
    if !s.pass {
        failures.push(format!(
            "{} cusps, {} cross-caps, {} points in total, other points all folds: {}, double points transverse: {}",
            s.cusp_count,
            s.cross_cap_count,
            s.points.len(),
            s.fold_only_elsewhere,
            s.double_points_transverse
        ));
    }
    Ok(SampleRecord {
        sample_index: k,
        alpha: gdsm::psi(&spec),
        points: s
            .points
            .into_iter()
            .map(|point| PointRecord { point, transverse: None })
            .collect(),
        double_points: Vec::new(),
        identity: None,
        gdsm: Some(GdsmRecord {
            p: s.p,
            search_box: s.search_box,
            box_expansions: s.box_expansions,
        }),
        min_margin: s.min_margin,
        boundary_margin: s.boundary_margin,
        pass: failures.is_empty(),
        failures,
    })
}

fn invertible_lambda(stream: &mut ChaCha8Rng, ell: usize) -> Result<LinearMap> {
    for _ in 0..MAX_REDRAWS {
        let lambda = rng::normal_matrix(stream, ell, ell, 1.0)?;
        if lambda.matrix().determinant().abs() >= MIN_DET {
            return Ok(lambda);
        }
    }
    Err(Error::Precondition(format!("no Lambda with |det| >= {MIN_DET} in {MAX_REDRAWS} draws")))
}

fn identity_sample(
    config: &ExperimentConfig,
    prepared: &Prepared,
    stream: &mut ChaCha8Rng,
    k: usize,
) -> Result<SampleRecord> {
    let dims = prepared.dims;
    let lambda = invertible_lambda(stream, dims.ell)?;
    let alpha = if config.zero_perturbation {
        LinearMap::zeros(dims.ell, dims.m)
    } else {
        sample_perturbation(stream, dims, config.sigma)?
    };
    let beta = rng::normal_matrix(stream, dims.m, dims.ell, config.sigma.max(f64::MIN_POSITIVE))?;

    let (_, alpha_prime) = maps::phi(&lambda, &alpha)?;
    let (_, back) = maps::phi_inv(&lambda, &alpha_prime)?;
    let phi_round_trip = back.max_abs_diff(&alpha);
    let (_, pre) = maps::phi_inv(&lambda, &beta)?;
    let (_, forth) = maps::phi(&lambda, &pre)?;
    let phi_inverse_round_trip = forth.max_abs_diff(&beta);

    let big_f = prepared.big_f.as_ref().expect("validated");
    let pi = maps::row_vector_map(&maps::pi_lambda_alpha(&lambda, &alpha)?);
    let graph = maps::graph_embedding(big_f)?;
    let h = maps::h_lambda(&lambda)?;
    let perturbed = maps::perturb(big_f, &alpha)?;
    let (lhs, rhs) = match &prepared.embedding {
        Some(f) => (
            maps::compose(&maps::compose(&pi, &graph)?, f)?,
            maps::compose(&maps::compose(&h, &perturbed)?, f)?,
        ),
        None => (maps::compose(&pi, &graph)?, maps::compose(&h, &perturbed)?),
    };
    let bbox = config.search_box.as_ref().expect("validated");
    let mut composition_deviation = 0.0f64;
    let mut evaluated = 0;
    let mut attempts = 0;
    while evaluated < config.identity_points && attempts < 100 * config.identity_points {
        attempts += 1;
        let x: Vec<f64> = bbox.lo.iter().zip(&bbox.hi).map(|(&lo, &hi)| stream.gen_range(lo..=hi)).collect();
        let (Ok(l), Ok(r)) = (lhs.eval(&x), rhs.eval(&x)) else {
            continue;
        };
        let scale = r.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let gap = l.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        composition_deviation = composition_deviation.max(gap / scale);
        evaluated += 1;
    }

    let mut failures = Vec::new();
    if evaluated < config.identity_points {
        failures.push(format!(
            "only {evaluated} of {} points fell inside the domain",
            config.identity_points
        ));
    }
    for (name, v) in [
        ("phi round trip", phi_round_trip),
        ("phi inverse round trip", phi_inverse_round_trip),
        ("composition identity", composition_deviation),
    ] {
        if v.is_nan() || v > IDENTITY_TOL {
            failures.push(format!("{name} deviates by {v:.3e}"));
        }
    }
    Ok(SampleRecord {
        sample_index: k,
        alpha,
        points: Vec::new(),
        double_points: Vec::new(),
        identity: Some(IdentityRecord {
            lambda,
            phi_round_trip,
            phi_inverse_round_trip,
            composition_deviation,
        }),
        gdsm: None,
        min_margin: None,
        boundary_margin: None,
        pass: failures.is_empty(),
        failures,
    })
}

/// Grid heuristic for `f` being an embedding: full-rank differential at every
/// node and no two non-adjacent nodes with (nearly) the same image.
fn embedding_warnings(f: &MapProgram, bbox: &SearchBox) -> Vec<String> {
    let (n, m) = (f.n_in(), f.n_out());
    if n > m {
        return vec![format!("f maps R^{n} to R^{m} and cannot be an immersion")];
    }
    if bbox.dim() != n || n == 0 || n > 4 {
        return Vec::new();
    }
    let grid = Grid::new(bbox, EMBEDDING_CELLS);
    let mut warnings = Vec::new();
    let mut images = Vec::with_capacity(grid.n_nodes());
    let mut rank_drops = 0;
    for i in 0..grid.n_nodes() {
        let q = grid.node(i);
        let jac = match f.jet(&q, 1).and_then(|j| derivative_matrix(&j)) {
            Ok(j) => j,
            Err(e) => {
                warnings.push(format!("f cannot be evaluated at {q:?}: {e}"));
                return warnings;
            }
        };
        if linalg::rank_with_margin(&jac).0 < n {
            rank_drops += 1;
        }
        images.push(f.eval(&q).expect("jet evaluated"));
    }
    if rank_drops > 0 {
        warnings.push(format!("df has rank below {n} at {rank_drops} grid nodes; f may not be an immersion"));
    }
    let scale = images.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    let floor = 1.5 * grid.max_step();
    let mut collisions = 0;
    for i in 0..images.len() {
        let qi = grid.node(i);
        for j in i + 1..images.len() {
            let qj = grid.node(j);
            let src: f64 = qi.iter().zip(&qj).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if src < floor {
                continue;
            }
            let img: f64 = images[i].iter().zip(&images[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if img <= 1e-8 * scale {
                collisions += 1;
            }
        }
    }
    if collisions > 0 {
        warnings.push(format!("{collisions} pairs of distant grid nodes share an image; f may not be injective"));
    }
    warnings
}
