use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Tolerances;
use crate::dsl::MapProgram;
use crate::error::{Error, Result};
use crate::jet::{JetPoly, JetSpace};
use crate::linalg;

/// Outcome of [`infinitesimal_stability_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub stable: bool,
    /// Codimension of the truncated extended tangent space.
    pub defect: usize,
    pub rank: usize,
    /// Dimension of the truncated space of vector fields along the germ.
    pub dimension: usize,
    pub margin: f64,
}

/// Tests infinitesimal stability of the multigerm of `g` at `points` (all
/// with the same image) modulo terms of degree above `order`.
///
/// Checks whether `tg(source fields) + wg(target fields)` spans all vector
/// fields along the germ, each truncated to degree `order` at every point.
/// Target fields are shared between the points of the multigerm. The
/// truncated condition is necessary for stability, and sufficient once
/// `order` is at least the target dimension.
pub fn infinitesimal_stability_check(
    g: &MapProgram,
    points: &[Vec<f64>],
    order: usize,
    tol: &Tolerances,
) -> Result<StabilityResult> {
    if points.is_empty() {
        return Err(Error::Precondition("no points given".into()));
    }
    if order == 0 {
        return Err(Error::InsufficientOrder { have: 0, need: 1 });
    }
    let (n, p) = (g.n_in(), g.n_out());
    for (i, q) in points.iter().enumerate() {
        if q.len() != n {
            return Err(Error::shape(format!("point {i} has {} coordinates, map has {n} inputs", q.len())));
        }
        if !g.domain().contains(q) {
            return Err(Error::Domain {
                point: q.clone(),
                domain: g.domain().to_string(),
            });
        }
        for other in &points[..i] {
            let d: f64 = q.iter().zip(other).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d < tol.dedup_radius {
                return Err(Error::Precondition(format!("repeated point {q:?}")));
            }
        }
    }
    let y = g.eval(&points[0])?;
    let y_scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for q in &points[1..] {
        let yq = g.eval(q)?;
        let gap = yq.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if gap > 1e-8 * y_scale {
            return Err(Error::Fiber(format!(
                "g({q:?}) = {yq:?} differs from g({:?}) = {y:?}",
                points[0]
            )));
        }
    }

    let source = JetSpace::get(n, order);
    let target = JetSpace::get(p, order);
    let k = source.len();
    let s = points.len();
    let rows = s * p * k;
    let cols = s * n * k + p * target.len();
    let mut m = DMatrix::zeros(rows, cols);
    let mut col = 0;

    // per point: g - y truncated to `order`, and the partial derivatives of g
    let mut centered: Vec<Vec<JetPoly>> = Vec::with_capacity(s);
    for (pt, q) in points.iter().enumerate() {
        let jet = g.jet(q, order + 1)?;
        let parts: Vec<Vec<JetPoly>> = jet
            .components()
            .iter()
            .map(|c| (0..n).map(|j| c.partial(j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let base = parts[0][0].base_arc().clone();
        for j in 0..n {
            for a in 0..k {
                let mut e = vec![0.0; k];
                e[a] = 1.0;
                let mono = JetPoly::from_coeffs(source.clone(), base.clone(), e)?;
                for (i, comp) in parts.iter().enumerate() {
                    let prod = mono.mul(&comp[j])?;
                    for (t, v) in prod.coeffs().iter().enumerate() {
                        m[((pt * p + i) * k + t, col)] = *v;
                    }
                }
                col += 1;
            }
        }
        let mut c = Vec::with_capacity(p);
        for comp in jet.components() {
            let mut coeffs = comp.truncate(order)?.coeffs().to_vec();
            coeffs[0] = 0.0;
            c.push(JetPoly::from_coeffs(source.clone(), base.clone(), coeffs)?);
        }
        centered.push(c);
    }
    for i in 0..p {
        for b in target.monomials() {
            for (pt, c) in centered.iter().enumerate() {
                let mut poly = c[0].constant_like(1.0);
                for (comp, &e) in c.iter().zip(b.exponents()) {
                    for _ in 0..e {
                        poly = poly.mul(comp)?;
                    }
                }
                for (t, v) in poly.coeffs().iter().enumerate() {
                    m[((pt * p + i) * k + t, col)] = *v;
                }
            }
            col += 1;
        }
    }
    debug_assert_eq!(col, cols);

    let sv = linalg::singular_values(&m);
    let thr = tol.threshold(sv.first().copied().unwrap_or(0.0));
    let rank = sv.iter().filter(|&&v| v > thr).count();
    let margin = sv
        .iter()
        .map(|&v| super::local::margin(v, thr))
        .fold(super::local::MARGIN_CAP, f64::min);
    Ok(StabilityResult {
        stable: rank == rows,
        defect: rows - rank,
        rank,
        dimension: rows,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_map;

    fn check(src: &str, pts: &[Vec<f64>], order: usize) -> StabilityResult {
        infinitesimal_stability_check(&parse_map(src).unwrap(), pts, order, &Tolerances::default()).unwrap()
    }

    #[test]
    fn normal_forms() {
        let o = vec![vec![0.0, 0.0]];
        for order in 2..=4 {
            assert!(check("map (x,y) -> (x, y^2)", &o, order).stable);
            assert!(check("map (x,y) -> (x, y^3 - x*y)", &o, order).stable);
            let r = check("map (x,y) -> (x, y^3)", &o, order);
            assert!(!r.stable);
            assert!(r.defect >= 1);
        }
        assert!(check("map (x) -> (x^2)", &[vec![0.0]], 2).stable);
        assert!(!check("map (x) -> (x^3)", &[vec![0.0]], 2).stable);
        assert!(check("map (x,y) -> (x, x*y, y^2)", &o, 3).stable);
    }

    #[test]
    fn fold_away_from_origin() {
        let r = check("map (x,y) -> (x, y^3 - x*y)", &[vec![3.0 * 0.04, 0.2]], 3);
        assert!(r.stable, "{r:?}");
    }

    #[test]
    fn multigerms() {
        // two transverse sheets meeting over the origin are stable
        let src = "map (x,y) -> (x^2 - 1, y, x*(x^2 - 1))";
        let r = check(src, &[vec![-1.0, 0.0], vec![1.0, 0.0]], 3);
        assert!(r.stable, "{r:?}");
        // tangent sheets are not
        let src = "map (x,y) -> (x^2 - 1, y, (x + 1)*(x^2 - 1)^2)";
        let r = check(src, &[vec![-1.0, 0.0], vec![1.0, 0.0]], 3);
        assert!(!r.stable);
    }

    #[test]
    fn points_must_share_a_fiber() {
        let g = parse_map("map (x,y) -> (x, y^2)").unwrap();
        let r = infinitesimal_stability_check(&g, &[vec![0.0, 0.0], vec![1.0, 0.0]], 3, &Tolerances::default());
        assert!(matches!(r, Err(Error::Fiber(_))));
    }
}
