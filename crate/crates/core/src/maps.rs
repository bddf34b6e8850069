//! Map-level algebra: linear perturbations `F + alpha`, the graph embedding,
//! and the coordinate changes that relate `Pi o graph(F) o f` to
//! `H_Lambda o F_alpha o f`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dsl::{default_vars, BoxDomain, MapProgram, ProgramBuilder};
use crate::error::{Error, Result};
use crate::linalg;

/// `|det|` floor (after row equilibration) for membership in `GL(l)`.
pub const GL_DET_FLOOR: f64 = 1e-12;

/// Dense real matrix, serialized as row-major nested arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap(DMatrix<f64>);

impl LinearMap {
    pub fn new(m: DMatrix<f64>) -> Result<LinearMap> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::shape("linear map has non-finite entries"));
        }
        Ok(LinearMap(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<LinearMap> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows in linear map"));
        }
        LinearMap::new(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<LinearMap> {
        if data.len() != rows * cols {
            return Err(Error::shape("entry count does not match dimensions"));
        }
        LinearMap::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn zeros(rows: usize, cols: usize) -> LinearMap {
        LinearMap(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> LinearMap {
        LinearMap(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Entries in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        self.to_rows().into_iter().flatten().collect()
    }

    /// Square and `|det| > 1e-12` after row equilibration.
    pub fn is_invertible(&self) -> bool {
        self.rows() == self.cols()
            && self.rows() > 0
            && linalg::equilibrated_det(&self.0).is_some_and(|d| d.abs() > GL_DET_FLOOR)
    }

    fn require_gl(&self, what: &str) -> Result<()> {
        if self.is_invertible() {
            Ok(())
        } else {
            Err(Error::NotInGl(format!(
                "{what} ({}x{}) is singular or not square",
                self.rows(),
                self.cols()
            )))
        }
    }

    pub fn max_abs_diff(&self, other: &LinearMap) -> f64 {
        if self.0.shape() != other.0.shape() {
            return f64::INFINITY;
        }
        linalg::max_abs(&(&self.0 - &other.0))
    }
}

impl Serialize for LinearMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<LinearMap, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        LinearMap::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `F_alpha = F + alpha`: component `i` gains `sum_j alpha_ij x_j`.
pub fn perturb(f: &MapProgram, alpha: &LinearMap) -> Result<MapProgram> {
    if alpha.rows() != f.n_out() || alpha.cols() != f.n_in() {
        return Err(Error::shape(format!(
            "perturbation is {}x{}, map is R^{} -> R^{}",
            alpha.rows(),
            alpha.cols(),
            f.n_in(),
            f.n_out()
        )));
    }
    let mut b = ProgramBuilder::new(f.n_in());
    let inputs: Vec<usize> = (0..f.n_in()).collect();
    let outs = b.splice(&strip_domain(f), &inputs)?;
    let outputs = outs
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let terms: Vec<(f64, usize)> = (0..f.n_in()).map(|j| (alpha.get(i, j), j)).collect();
            b.add_linear(Some(o), &terms)
        })
        .collect();
    Ok(b.finish(f.vars().to_vec(), f.domain().clone(), outputs))
}

// Splicing a program whose own domain equals the result's domain would add a
// redundant guard.
fn strip_domain(f: &MapProgram) -> MapProgram {
    f.with_domain(BoxDomain::whole(f.n_in()))
}

/// `outer o inner`, defined where `inner` lands in the domain of `outer`.
pub fn compose(outer: &MapProgram, inner: &MapProgram) -> Result<MapProgram> {
    if outer.n_in() != inner.n_out() {
        return Err(Error::shape(format!(
            "cannot compose R^{} -> R^{} after R^{} -> R^{}",
            outer.n_in(),
            outer.n_out(),
            inner.n_in(),
            inner.n_out()
        )));
    }
    let mut b = ProgramBuilder::new(inner.n_in());
    let inputs: Vec<usize> = (0..inner.n_in()).collect();
    let mid = b.splice(&strip_domain(inner), &inputs)?;
    let outs = b.splice(outer, &mid)?;
    Ok(b.finish(inner.vars().to_vec(), inner.domain().clone(), outs))
}

/// `x -> (F_1(x), ..., F_l(x), x_1, ..., x_m)`.
pub fn graph_embedding(f: &MapProgram) -> Result<MapProgram> {
    let mut b = ProgramBuilder::new(f.n_in());
    let inputs: Vec<usize> = (0..f.n_in()).collect();
    let mut outs = b.splice(&strip_domain(f), &inputs)?;
    outs.extend(inputs.iter().copied());
    Ok(b.finish(f.vars().to_vec(), f.domain().clone(), outs))
}

/// The linear map `X -> X M` of row vectors, `R^rows -> R^cols`.
pub fn row_vector_map(m: &LinearMap) -> MapProgram {
    let mut b = ProgramBuilder::new(m.rows());
    let outputs = (0..m.cols())
        .map(|i| {
            let terms: Vec<(f64, usize)> = (0..m.rows()).map(|k| (m.get(k, i), k)).collect();
            b.add_linear(None, &terms)
        })
        .collect();
    b.finish(default_vars(m.rows()), BoxDomain::whole(m.rows()), outputs)
}

/// `H_Lambda(X) = X Lambda`, a linear isomorphism of `R^l`.
pub fn h_lambda(lambda: &LinearMap) -> Result<MapProgram> {
    lambda.require_gl("Lambda")?;
    Ok(row_vector_map(lambda))
}

/// `phi(Lambda, alpha) = (Lambda, alpha')` with
/// `alpha'_{ji} = sum_k lambda_{ki} alpha_{kj}`, i.e. `alpha' = alpha^T Lambda`
/// (an `m x l` matrix).
pub fn phi(lambda: &LinearMap, alpha: &LinearMap) -> Result<(LinearMap, LinearMap)> {
    lambda.require_gl("Lambda")?;
    if alpha.rows() != lambda.rows() {
        return Err(Error::shape(format!(
            "alpha has {} rows, Lambda is {}x{}",
            alpha.rows(),
            lambda.rows(),
            lambda.cols()
        )));
    }
    let (l, m) = (alpha.rows(), alpha.cols());
    let mut out = DMatrix::zeros(m, l);
    for j in 0..m {
        for i in 0..l {
            out[(j, i)] = (0..l).map(|k| lambda.get(k, i) * alpha.get(k, j)).sum();
        }
    }
    Ok((lambda.clone(), LinearMap(out)))
}

/// Inverse of [`phi`]: for each `j`, solves
/// `Lambda^T (alpha_{1j}, ..., alpha_{lj})^T = (alpha'_{j1}, ..., alpha'_{jl})^T`.
pub fn phi_inv(lambda: &LinearMap, alpha_prime: &LinearMap) -> Result<(LinearMap, LinearMap)> {
    lambda.require_gl("Lambda")?;
    let l = lambda.rows();
    if alpha_prime.cols() != l {
        return Err(Error::shape(format!(
            "alpha' has {} columns, Lambda is {l}x{l}",
            alpha_prime.cols()
        )));
    }
    let m = alpha_prime.rows();
    let system = lambda.matrix().transpose();
    let lu = system.lu();
    let mut alpha = DMatrix::zeros(l, m);
    for j in 0..m {
        let rhs = DVector::from_fn(l, |i, _| alpha_prime.get(j, i));
        let col = lu
            .solve(&rhs)
            .ok_or_else(|| Error::NotInGl("Lambda^T system is singular".into()))?;
        alpha.set_column(j, &col);
    }
    Ok((lambda.clone(), LinearMap(alpha)))
}

/// The `(m + l) x l` matrix of `Pi_(Lambda, alpha)`: `Lambda` stacked on
/// `alpha' = alpha^T Lambda`. Acts on row vectors, `X -> X Pi`.
pub fn pi_lambda_alpha(lambda: &LinearMap, alpha: &LinearMap) -> Result<LinearMap> {
    let (_, alpha_prime) = phi(lambda, alpha)?;
    let (l, m) = (lambda.rows(), alpha.cols());
    let mut out = DMatrix::zeros(m + l, l);
    out.view_mut((0, 0), (l, l)).copy_from(lambda.matrix());
    out.view_mut((l, 0), (m, l)).copy_from(alpha_prime.matrix());
    Ok(LinearMap(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_map;

    fn lm(rows: usize, cols: usize, data: &[f64]) -> LinearMap {
        LinearMap::from_row_slice(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_map_plus_identity_is_identity() {
        let f = parse_map("map (x,y) -> (0, 0)").unwrap();
        let g = perturb(&f, &LinearMap::identity(2)).unwrap();
        assert_eq!(g.eval(&[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn swap_perturbation() {
        let f = parse_map("map (x,y) -> (x^2, y^2)").unwrap();
        let g = perturb(&f, &lm(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(g.eval(&[2.0, 3.0]).unwrap(), vec![4.0 + 3.0, 9.0 + 2.0]);
    }

    #[test]
    fn zero_perturbation_is_structurally_identity() {
        let f = parse_map("map (x) -> (sin(x))").unwrap();
        let g = perturb(&f, &LinearMap::zeros(1, 1)).unwrap();
        assert_eq!(g, f);
        let f = parse_map("map (x, y) on x in (0, 1) -> (log(x) * y, y^3)").unwrap();
        assert_eq!(perturb(&f, &LinearMap::zeros(2, 2)).unwrap(), f);
    }

    #[test]
    fn perturbation_shape_is_checked() {
        let f = parse_map("map (x,y) -> (x)").unwrap();
        assert!(matches!(
            perturb(&f, &LinearMap::zeros(2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn perturbation_keeps_domain() {
        let f = parse_map("map (x) on x in (0, inf) -> (log(x))").unwrap();
        let g = perturb(&f, &lm(1, 1, &[2.0])).unwrap();
        assert!(matches!(g.eval(&[-1.0]), Err(Error::Domain { .. })));
        assert!((g.eval(&[1.0]).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn graph_of_zero_and_square() {
        let f = parse_map("map (x,y) -> (0)").unwrap();
        let g = graph_embedding(&f).unwrap();
        assert_eq!(g.eval(&[3.0, 4.0]).unwrap(), vec![0.0, 3.0, 4.0]);
        let f = parse_map("map (x) -> (x^2)").unwrap();
        let g = graph_embedding(&f).unwrap();
        let j = crate::jet::derivative_matrix(&g.jet(&[0.0], 1).unwrap()).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn h_lambda_examples() {
        let id = h_lambda(&LinearMap::identity(2)).unwrap();
        assert_eq!(id.eval(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let swap = h_lambda(&lm(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(swap.eval(&[1.0, 2.0]).unwrap(), vec![2.0, 1.0]);
        let diag = h_lambda(&lm(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        assert_eq!(diag.eval(&[1.0, 2.0]).unwrap(), vec![2.0, 6.0]);
        assert!(matches!(
            h_lambda(&lm(2, 2, &[1.0, 2.0, 2.0, 4.0])),
            Err(Error::NotInGl(_))
        ));
    }

    #[test]
    fn phi_with_identity_transposes() {
        let alpha = lm(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (_, ap) = phi(&LinearMap::identity(2), &alpha).unwrap();
        assert_eq!(ap.matrix(), &alpha.matrix().transpose());
        let (_, back) = phi_inv(&LinearMap::identity(2), &ap).unwrap();
        assert_eq!(back, alpha);
    }

    #[test]
    fn phi_scalar_case() {
        let (lam, ap) = phi(&lm(1, 1, &[2.5]), &lm(1, 2, &[1.0, -4.0])).unwrap();
        assert_eq!(lam, lm(1, 1, &[2.5]));
        assert_eq!(ap, lm(2, 1, &[2.5, -10.0]));
        let (_, a) = phi_inv(&lm(1, 1, &[2.5]), &ap).unwrap();
        assert_eq!(a, lm(1, 2, &[1.0, -4.0]));
    }

    #[test]
    fn phi_rejects_singular_lambda() {
        let sing = lm(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(phi(&sing, &LinearMap::zeros(2, 1)), Err(Error::NotInGl(_))));
        assert!(matches!(phi_inv(&sing, &LinearMap::zeros(1, 2)), Err(Error::NotInGl(_))));
    }

    #[test]
    fn pi_blocks() {
        let p = pi_lambda_alpha(&LinearMap::identity(2), &LinearMap::zeros(2, 3)).unwrap();
        let proj = row_vector_map(&p);
        assert_eq!(proj.eval(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(), vec![1.0, 2.0]);
        let p = pi_lambda_alpha(&lm(1, 1, &[3.0]), &lm(1, 1, &[0.5])).unwrap();
        assert_eq!(p, lm(2, 1, &[3.0, 1.5]));
    }

    #[test]
    fn serializes_row_major() {
        let a = lm(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: LinearMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<LinearMap>("[[1.0],[2.0,3.0]]").is_err());
    }
}
