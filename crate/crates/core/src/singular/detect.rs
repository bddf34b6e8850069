use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{analyze_point, cusp_system};
use super::grid::Grid;
use super::local::{jacobian_jets, rank_stratum_equations, values_and_gradient};
use super::{Classification, SingularPoint, Tolerances};
use crate::dsl::{MapProgram, SearchBox};
use crate::error::{Error, Result};
use crate::jet::derivative_matrix;
use crate::linalg;

/// Largest source dimension accepted by the grid searches.
pub const MAX_INPUTS: usize = 4;

/// Result of [`find_singular_points`], with search diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSearch {
    /// Deduplicated points, sorted by location.
    pub points: Vec<SingularPoint>,
    pub seeds: usize,
    pub converged: usize,
    /// Seeds whose Newton iteration diverged, stalled, or ended at a
    /// point that is not singular.
    pub failed: usize,
    /// Converged points that lie outside the search box.
    pub outside: usize,
    /// Smallest distance from a reported point to the box boundary, as a
    /// fraction of the box width.
    pub boundary_margin: Option<f64>,
}

pub(crate) fn validate_box(g: &MapProgram, bbox: &SearchBox, grid: usize) -> Result<()> {
    let n = g.n_in();
    if n == 0 || n > MAX_INPUTS {
        return Err(Error::Precondition(format!(
            "grid searches support 1 to {MAX_INPUTS} inputs, map has {n}"
        )));
    }
    if bbox.dim() != n {
        return Err(Error::shape(format!(
            "search box has dimension {}, map has {n} inputs",
            bbox.dim()
        )));
    }
    if grid < 2 {
        return Err(Error::Precondition(format!("grid resolution {grid} is below 2")));
    }
    if !g.domain().is_whole() && !g.domain().contains_closed(bbox) {
        let corner = g
            .domain()
            .intervals()
            .iter()
            .zip(bbox.lo.iter().zip(&bbox.hi))
            .map(|(iv, (&lo, &hi))| if iv.lo < lo { hi } else { lo })
            .collect();
        return Err(Error::Domain {
            point: corner,
            domain: g.domain().to_string(),
        });
    }
    Ok(())
}

/// Newton iteration with minimum-norm steps on an arbitrary system. Gives
/// up when the iterate leaves the region accepted by `inside`.
pub(crate) fn newton<I, F>(x0: &[f64], inside: I, tol: &Tolerances, system: F) -> Option<Vec<f64>>
where
    I: Fn(&[f64]) -> bool,
    F: Fn(&[f64]) -> Option<(DVector<f64>, DMatrix<f64>)>,
{
    let mut x = DVector::from_column_slice(x0);
    for _ in 0..tol.newton_max_iter {
        if !inside(x.as_slice()) {
            return None;
        }
        let (f, df) = system(x.as_slice())?;
        let step = linalg::min_norm_solve(&df, &(-f))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        x += &step;
        if step.norm() < tol.newton_step_tol * x.norm().max(1.0) {
            return Some(x.as_slice().to_vec());
        }
    }
    None
}

fn rank_system(g: &MapProgram, x: &[f64], r: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let jet = g.jet(x, 2).ok()?;
    let jac = derivative_matrix(&jet).ok()?;
    let eqs = rank_stratum_equations(&jacobian_jets(&jet).ok()?, &jac, r).ok()?;
    values_and_gradient(&eqs).ok()
}

/// Whether `dg(x)` has rank at most `r`, allowing borderline decisions.
fn has_rank_at_most(g: &MapProgram, x: &[f64], r: usize, tol: &Tolerances) -> bool {
    let Ok(jet) = g.jet(x, 1) else { return false };
    let Ok(jac) = derivative_matrix(&jet) else { return false };
    let sv = linalg::singular_values(&jac);
    let thr = tol.threshold(sv.first().copied().unwrap_or(0.0));
    sv.get(r).is_none_or(|&s| s <= thr * tol.indeterminate_factor)
}

pub(crate) fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Greedy merge of points closer than `radius`; earlier entries win.
pub(crate) fn dedup(points: Vec<Vec<f64>>, radius: f64) -> Vec<Vec<f64>> {
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / radius).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for x in points {
        let k = key(&x);
        let n = k.len();
        let mut dup = false;
        'outer: for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let nb: Vec<i64> = k
                .iter()
                .map(|&v| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    v + d
                })
                .collect();
            if let Some(ids) = buckets.get(&nb) {
                for &i in ids {
                    let d2: f64 = kept[i].iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
                    if d2.sqrt() < radius {
                        dup = true;
                        break 'outer;
                    }
                }
            }
        }
        if !dup {
            buckets.entry(k).or_default().push(kept.len());
            kept.push(x);
        }
    }
    kept
}

struct NodeData {
    sv: Vec<f64>,
    det: Option<f64>,
}

/// Locates the singular points of `g` in a closed box.
///
/// Seeds come from a grid with `grid` cells per axis: cells where `det dg`
/// changes sign (square maps) and nodes where a singular value of `dg` is
/// locally minimal. Each seed is refined by Newton iteration on the local
/// defining minors of the rank stratum. For maps of the plane, points where
/// the kernel is tangent to the critical curve are refined separately so
/// that cusps are located exactly.
pub fn find_singular_points(
    g: &MapProgram,
    bbox: &SearchBox,
    grid: usize,
    tol: &Tolerances,
) -> Result<SingularSearch> {
    validate_box(g, bbox, grid)?;
    let (n, p) = (g.n_in(), g.n_out());
    let kmin = n.min(p);
    let mesh = Grid::new(bbox, grid);
    let data: Vec<Option<NodeData>> = (0..mesh.n_nodes())
        .into_par_iter()
        .map(|i| {
            let jac = derivative_matrix(&g.jet(&mesh.node(i), 1).ok()?).ok()?;
            Some(NodeData {
                sv: linalg::singular_values(&jac),
                det: (n == p).then(|| jac.determinant()),
            })
        })
        .collect();

    // (target rank, start point)
    let mut seeds: Vec<(usize, Vec<f64>)> = Vec::new();
    for r in (0..kmin).rev() {
        let value = |i: usize| data[i].as_ref().map(|d| d.sv[r]);
        for i in 0..mesh.n_nodes() {
            let Some(v) = value(i) else { continue };
            let neighbors = mesh.neighbors(i);
            let is_min = neighbors.iter().all(|&j| match value(j) {
                Some(w) => v < w || (v == w && i < j),
                None => true,
            });
            // a zero within about one step, extrapolating the local variation;
            // separates nearby isolated points whose minima merge on the grid
            let reach = neighbors
                .iter()
                .filter_map(|&j| value(j).map(|w| (w - v).abs()))
                .fold(0.0, f64::max);
            if is_min || (v > 0.0 && v <= reach) {
                seeds.push((r, mesh.node(i)));
            }
        }
        if r + 1 == kmin && n == p {
            for (center, corners) in mesh.cells() {
                let dets: Vec<f64> = corners
                    .iter()
                    .filter_map(|&c| data[c].as_ref().and_then(|d| d.det))
                    .collect();
                let lo = dets.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = dets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lo <= 0.0 && hi >= 0.0 && lo < hi {
                    seeds.push((r, center));
                }
            }
        }
    }

    let outer = bbox.expanded(2.0);
    let inside = |x: &[f64]| outer.contains(x) && g.domain().contains(x);
    let refined: Vec<Option<(usize, Vec<f64>)>> = seeds
        .par_iter()
        .map(|(r, x0)| {
            let x = newton(x0, inside, tol, |x| rank_system(g, x, *r))?;
            has_rank_at_most(g, &x, *r, tol).then_some((*r, x))
        })
        .collect();
    let mut failed = refined.iter().filter(|c| c.is_none()).count();
    let mut converged = refined.len() - failed;
    let mut seed_count = seeds.len();
    let mut found: Vec<(usize, u8, Vec<f64>)> = refined.into_iter().flatten().map(|(r, x)| (r, 1, x)).collect();

    if (n, p) == (2, 2) {
        // kernel-tangency points on the critical curve, started from every
        // curve point since the basin of a cusp can be narrow along the curve
        let starts: Vec<Vec<f64>> = found
            .iter()
            .filter(|(r, _, _)| *r == 1)
            .map(|(_, _, x)| x.clone())
            .collect();
        let cusps: Vec<Option<Vec<f64>>> = starts
            .par_iter()
            .map(|x0| {
                let x = newton(x0, inside, tol, |x| cusp_system(g, x).ok().map(|(f, df, _)| (f, df)))?;
                has_rank_at_most(g, &x, 1, tol).then_some(x)
            })
            .collect();
        seed_count += cusps.len();
        failed += cusps.iter().filter(|c| c.is_none()).count();
        converged += cusps.iter().filter(|c| c.is_some()).count();
        found.extend(cusps.into_iter().flatten().map(|x| (1, 0, x)));
    }

    let inside = found.len();
    found.retain(|(_, _, x)| bbox.contains(x));
    let outside = inside - found.len();
    // deeper strata and cusp candidates take precedence when merging
    found.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| lex(&a.2, &b.2)));
    let mut locations = dedup(found.into_iter().map(|(_, _, x)| x).collect(), tol.dedup_radius);
    locations.sort_by(|a, b| lex(a, b));

    let analysed: Vec<SingularPoint> = locations
        .par_iter()
        .map(|x| analyze_point(g, x, tol))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<SingularPoint> = analysed
        .into_iter()
        .filter(|sp| sp.classification != Classification::Regular)
        .collect();
    let boundary_margin = points
        .iter()
        .map(|sp| bbox.boundary_margin(&sp.location))
        .reduce(f64::min);
    Ok(SingularSearch {
        points,
        seeds: seed_count,
        converged,
        failed,
        outside,
        boundary_margin,
    })
}
