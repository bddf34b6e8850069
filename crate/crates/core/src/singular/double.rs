use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::{dedup, lex, newton, validate_box};
use super::grid::Grid;
use super::local::margin;
use super::Tolerances;
use crate::dsl::{MapProgram, SearchBox};
use crate::error::{Error, Result};
use crate::jet::derivative_matrix;
use crate::linalg;

/// Two distinct source points with the same image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublePoint {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub image: Vec<f64>,
    /// The two image tangent spaces together span the target.
    pub crossing_transverse: bool,
    pub margin: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn pair_system(g: &MapProgram, z: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = g.n_in();
    let p = g.n_out();
    let (q1, q2) = z.split_at(n);
    let j1 = g.jet(q1, 1).ok()?;
    let j2 = g.jet(q2, 1).ok()?;
    let f = DVector::from_iterator(p, j1.values().iter().zip(j2.values()).map(|(a, b)| a - b));
    let (d1, d2) = (derivative_matrix(&j1).ok()?, derivative_matrix(&j2).ok()?);
    let mut df = DMatrix::zeros(p, 2 * n);
    df.view_mut((0, 0), (p, n)).copy_from(&d1);
    df.view_mut((0, n), (p, n)).copy_from(&(-d2));
    Some((f, df))
}

fn crossing(g: &MapProgram, q1: &[f64], q2: &[f64], tol: &Tolerances) -> Result<(bool, f64)> {
    let d1 = derivative_matrix(&g.jet(q1, 1)?)?;
    let d2 = derivative_matrix(&g.jet(q2, 1)?)?;
    let n = g.n_in();
    let p = g.n_out();
    let mut stacked = DMatrix::zeros(2 * n, p);
    stacked.view_mut((0, 0), (n, p)).copy_from(&d1.transpose());
    stacked.view_mut((n, 0), (n, p)).copy_from(&d2.transpose());
    let sv = linalg::singular_values(&stacked);
    let thr = tol.threshold(sv[0]);
    let smin = sv.get(p - 1).copied().unwrap_or(0.0);
    Ok((smin > thr, margin(smin, thr)))
}

/// Double points of a map into a higher-dimensional space, within a box.
///
/// Grid nodes whose images are close are paired (nodes nearer than
/// `separation_factor` grid spacings are never paired) and each pair is
/// refined by Gauss-Newton on `g(q1) - g(q2) = 0`. Pairs that collapse
/// below the separation floor, leave the box, or fail to converge are
/// dropped.
pub fn find_double_points(g: &MapProgram, bbox: &SearchBox, grid: usize, tol: &Tolerances) -> Result<Vec<DoublePoint>> {
    validate_box(g, bbox, grid)?;
    let (n, p) = (g.n_in(), g.n_out());
    if p <= n {
        return Err(Error::Precondition(format!(
            "double points need more outputs than inputs, map is ({n}, {p})"
        )));
    }
    let mesh = Grid::new(bbox, grid);
    let images: Vec<Option<Vec<f64>>> = (0..mesh.n_nodes())
        .into_par_iter()
        .map(|i| g.eval(&mesh.node(i)).ok())
        .collect();
    // largest image displacement along a grid edge bounds the pairing radius
    let reach = (0..mesh.n_nodes())
        .filter_map(|i| {
            let a = images[i].as_ref()?;
            mesh.forward_neighbors(i)
                .into_iter()
                .filter_map(|j| images[j].as_ref().map(|b| dist(a, b)))
                .reduce(f64::max)
        })
        .fold(0.0, f64::max);
    if reach == 0.0 {
        return Ok(Vec::new());
    }
    let separation = tol.separation_factor * mesh.max_step();

    let key = |y: &[f64]| -> Vec<i64> { y.iter().map(|v| (v / reach).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, y) in images.iter().enumerate() {
        if let Some(y) = y {
            buckets.entry(key(y)).or_default().push(i);
        }
    }
    let pairs: Vec<(usize, usize)> = (0..mesh.n_nodes())
        .into_par_iter()
        .filter_map(|a| {
            let ya = images[a].as_ref()?;
            let qa = mesh.node(a);
            let k = key(ya);
            let mut best: Option<(f64, usize)> = None;
            for code in 0..3usize.pow(p as u32) {
                let mut c = code;
                let nb: Vec<i64> = k
                    .iter()
                    .map(|&v| {
                        let d = (c % 3) as i64 - 1;
                        c /= 3;
                        v + d
                    })
                    .collect();
                for &b in buckets.get(&nb).into_iter().flatten() {
                    if b <= a {
                        continue;
                    }
                    let d = dist(ya, images[b].as_ref().expect("bucketed"));
                    if d <= reach && dist(&qa, &mesh.node(b)) >= separation && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, b));
                    }
                }
            }
            best.map(|(_, b)| (a, b))
        })
        .collect();

    let outer = bbox.expanded(2.0);
    let scale = images
        .iter()
        .flatten()
        .flat_map(|y| y.iter().map(|v| v.abs()))
        .fold(1.0, f64::max);
    let mut refined: Vec<Vec<f64>> = pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let z0: Vec<f64> = mesh.node(a).into_iter().chain(mesh.node(b)).collect();
            let inside = |z: &[f64]| {
                let (q1, q2) = z.split_at(n);
                [q1, q2].iter().all(|q| outer.contains(q) && g.domain().contains(q))
            };
            let z = newton(&z0, inside, tol, |z| pair_system(g, z))?;
            let (q1, q2) = z.split_at(n);
            let gap = dist(&g.eval(q1).ok()?, &g.eval(q2).ok()?);
            let ok = bbox.contains(q1)
                && bbox.contains(q2)
                && dist(q1, q2) >= separation
                && gap <= 1e3 * tol.newton_step_tol * scale;
            if !ok {
                return None;
            }
            // canonical order of the pair
            Some(if lex(q1, q2).is_le() {
                z.clone()
            } else {
                q2.iter().chain(q1).copied().collect()
            })
        })
        .collect();
    refined.sort_by(|a, b| lex(a, b));
    dedup(refined, tol.dedup_radius)
        .into_iter()
        .map(|z| {
            let (q1, q2) = z.split_at(n);
            let y1 = g.eval(q1)?;
            let y2 = g.eval(q2)?;
            let (transverse, m) = crossing(g, q1, q2, tol)?;
            Ok(DoublePoint {
                q1: q1.to_vec(),
                q2: q2.to_vec(),
                image: y1.iter().zip(&y2).map(|(a, b)| 0.5 * (a + b)).collect(),
                crossing_transverse: transverse,
                margin: m,
            })
        })
        .collect()
}
