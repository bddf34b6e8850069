//! Local differential data of a map at a point, computed from its jet.

use nalgebra::{DMatrix, DVector};

use crate::dsl::MapProgram;
use crate::error::{Error, Result};
use crate::jet::{derivative_matrix, JetPoly, JetTuple};
use crate::linalg;

/// Upper bound on reported margins, so that they stay finite.
pub const MARGIN_CAP: f64 = 1e12;

/// Decision margin for a value compared against a threshold: `>= 1`, and
/// close to 1 when the value sits near the threshold.
pub(crate) fn margin(value: f64, threshold: f64) -> f64 {
    let v = value.abs();
    if v == 0.0 {
        return MARGIN_CAP;
    }
    let r = v / threshold;
    let m = if r >= 1.0 { r } else { 1.0 / r };
    m.min(MARGIN_CAP)
}

/// Jet-derived quantities at a point.
pub(crate) struct Local {
    pub n: usize,
    pub p: usize,
    pub jet: JetTuple,
    pub jac: DMatrix<f64>,
    // Hessian of each component
    pub hess: Vec<DMatrix<f64>>,
}

impl Local {
    pub fn at(g: &MapProgram, q: &[f64], order: usize) -> Result<Local> {
        let jet = g.jet(q, order.max(2))?;
        let jac = derivative_matrix(&jet)?;
        let hess = jet
            .components()
            .iter()
            .map(JetPoly::hessian)
            .collect::<Result<Vec<_>>>()?;
        Ok(Local {
            n: g.n_in(),
            p: g.n_out(),
            jet,
            jac,
            hess,
        })
    }

    /// `D^2 g(u, v)` as a vector in the target.
    pub fn second(&self, u: &[f64], v: &[f64]) -> DVector<f64> {
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        DVector::from_fn(self.p, |i, _| (u.transpose() * &self.hess[i] * &v)[(0, 0)])
    }

    pub fn hessian_scale(&self) -> f64 {
        self.hess.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn jacobian_scale(&self) -> f64 {
        linalg::singular_values(&self.jac)
            .first()
            .copied()
            .unwrap_or(0.0)
    }
}

/// Jets of the Jacobian entries: `out[i][k] = d g_i / d x_k`, one order lower.
pub(crate) fn jacobian_jets(jet: &JetTuple) -> Result<Vec<Vec<JetPoly>>> {
    let n = jet.n_vars().unwrap_or(0);
    jet.components()
        .iter()
        .map(|c| (0..n).map(|k| c.partial(k)).collect())
        .collect()
}

/// Determinant of the square sub-matrix `rows x cols` of a matrix of jets.
pub(crate) fn minor_jet(m: &[Vec<JetPoly>], rows: &[usize], cols: &[usize]) -> Result<JetPoly> {
    debug_assert_eq!(rows.len(), cols.len());
    match rows.len() {
        0 => Err(Error::shape("empty minor")),
        1 => Ok(m[rows[0]][cols[0]].clone()),
        2 => {
            let a = m[rows[0]][cols[0]].mul(&m[rows[1]][cols[1]])?;
            let b = m[rows[0]][cols[1]].mul(&m[rows[1]][cols[0]])?;
            a.sub(&b)
        }
        _ => {
            let mut acc: Option<JetPoly> = None;
            for (k, &c) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let sub = minor_jet(m, &rows[1..], &rest)?;
                let term = m[rows[0]][c].mul(&sub)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) if k % 2 == 0 => a.add(&term)?,
                    Some(a) => a.sub(&term)?,
                });
            }
            Ok(acc.expect("non-empty"))
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

fn det_values(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]).determinant()
}

/// Local defining functions of `{rank dg <= r}` near a point where the rank
/// is about `r`: with the `r x r` minor of largest modulus at the point
/// fixed, the `(r+1) x (r+1)` minors bordering it. There are `(p-r)(n-r)`.
pub(crate) fn rank_stratum_equations(
    jac_jets: &[Vec<JetPoly>],
    jac: &DMatrix<f64>,
    r: usize,
) -> Result<Vec<JetPoly>> {
    let (p, n) = jac.shape();
    let (rows, cols) = if r == 0 {
        (Vec::new(), Vec::new())
    } else {
        let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
        for rs in combinations(p, r) {
            for cs in combinations(n, r) {
                let d = det_values(jac, &rs, &cs).abs();
                if d > best.0 {
                    best = (d, rs.clone(), cs);
                }
            }
        }
        (best.1, best.2)
    };
    let mut eqs = Vec::new();
    for i in (0..p).filter(|i| !rows.contains(i)) {
        for j in (0..n).filter(|j| !cols.contains(j)) {
            let mut rs = rows.clone();
            rs.push(i);
            let mut cs = cols.clone();
            cs.push(j);
            rs.sort_unstable();
            cs.sort_unstable();
            eqs.push(minor_jet(jac_jets, &rs, &cs)?);
        }
    }
    Ok(eqs)
}

/// Values and gradients of a list of scalar jets.
pub(crate) fn values_and_gradient(eqs: &[JetPoly]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = eqs.first().map_or(0, JetPoly::n_vars);
    let vals = DVector::from_iterator(eqs.len(), eqs.iter().map(JetPoly::value));
    let mut grad = DMatrix::zeros(eqs.len(), n);
    for (i, e) in eqs.iter().enumerate() {
        let g = e.gradient()?;
        for (j, v) in g.into_iter().enumerate() {
            grad[(i, j)] = v;
        }
    }
    Ok((vals, grad))
}

/// Quantities behind fold and cusp recognition for maps of the plane:
/// `lambda = det dg`, a kernel field `eta` built from the dominant row of
/// the Jacobian, and the derivatives `eta lambda`, `eta eta lambda`.
pub(crate) struct PlaneInvariants {
    pub lambda: f64,
    pub grad_lambda: [f64; 2],
    pub eta: [f64; 2],
    pub eta_lambda: f64,
    pub grad_eta_lambda: [f64; 2],
    pub eta_eta_lambda: f64,
}

impl PlaneInvariants {
    /// Requires a jet of order at least 3 of a map `R^2 -> R^2`.
    pub fn from_jet(jet: &JetTuple) -> Result<PlaneInvariants> {
        if jet.len() != 2 || jet.n_vars() != Some(2) {
            return Err(Error::shape("plane invariants need a map R^2 -> R^2"));
        }
        let order = jet.order().unwrap_or(0);
        if order < 3 {
            return Err(Error::InsufficientOrder {
                have: order,
                need: 3,
            });
        }
        let jet = if order > 3 {
            JetTuple::new(
                jet.components()
                    .iter()
                    .map(|c| c.truncate(3))
                    .collect::<Result<Vec<_>>>()?,
            )?
        } else {
            jet.clone()
        };
        let jj = jacobian_jets(&jet)?; // order 2
        let lambda = minor_jet(&jj, &[0, 1], &[0, 1])?;
        let row_norm = |r: usize| jj[r][0].value().hypot(jj[r][1].value());
        let r = if row_norm(0) >= row_norm(1) { 0 } else { 1 };
        let eta = [jj[r][1].neg(), jj[r][0].clone()];
        let lx = lambda.partial(0)?; // order 1
        let ly = lambda.partial(1)?;
        let eta_lambda = eta[0].truncate(1)?.mul(&lx)?.add(&eta[1].truncate(1)?.mul(&ly)?)?;
        let gel = eta_lambda.gradient()?;
        let e0 = [eta[0].value(), eta[1].value()];
        Ok(PlaneInvariants {
            lambda: lambda.value(),
            grad_lambda: [lx.value(), ly.value()],
            eta: e0,
            eta_lambda: eta_lambda.value(),
            grad_eta_lambda: [gel[0], gel[1]],
            eta_eta_lambda: e0[0] * gel[0] + e0[1] * gel[1],
        })
    }

    pub fn grad_lambda_norm(&self) -> f64 {
        self.grad_lambda[0].hypot(self.grad_lambda[1])
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta[0].hypot(self.eta[1])
    }

    /// Cosine of the angle between the kernel direction and `grad lambda`.
    pub fn tangency(&self) -> f64 {
        let d = self.eta_norm() * self.grad_lambda_norm();
        if d == 0.0 {
            0.0
        } else {
            self.eta_lambda / d
        }
    }

    /// `eta eta lambda`, normalised by `|eta|^2` and the size of the
    /// differential.
    pub fn cusp_coefficient(&self, jac_scale: f64) -> f64 {
        let d = self.eta_norm().powi(2) * jac_scale;
        if d == 0.0 {
            0.0
        } else {
            self.eta_eta_lambda / d
        }
    }
}
