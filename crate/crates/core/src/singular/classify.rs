use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::local::{jacobian_jets, margin, rank_stratum_equations, values_and_gradient, Local, PlaneInvariants};
use super::{Classification, SingularPoint, TbSymbol, Tolerances};
use crate::dsl::MapProgram;
use crate::error::{Error, Result};
use crate::linalg;

/// Jet order used when analysing a point.
pub(crate) const ANALYSIS_ORDER: usize = 3;

/// Tracks the least confident of a series of threshold decisions.
struct Decisions {
    value: f64,
    threshold: f64,
    margin: f64,
}

impl Decisions {
    fn new() -> Self {
        Decisions {
            value: f64::NAN,
            threshold: f64::NAN,
            margin: super::local::MARGIN_CAP,
        }
    }

    /// Records `value > threshold` and returns the outcome.
    fn record(&mut self, value: f64, threshold: f64) -> bool {
        let m = margin(value, threshold);
        if m < self.margin {
            self.value = value;
            self.threshold = threshold;
            self.margin = m;
        }
        value.abs() > threshold
    }

    /// Records a rank decision and returns the rank.
    fn rank(&mut self, singular_values: &[f64], threshold: f64) -> usize {
        singular_values
            .iter()
            .filter(|&&s| self.record(s, threshold))
            .count()
    }

    fn check(&self, tol: &Tolerances) -> Result<()> {
        if self.margin < tol.indeterminate_factor {
            return Err(Error::IndeterminateRank {
                value: self.value,
                threshold: self.threshold,
            });
        }
        Ok(())
    }
}

fn check_point(g: &MapProgram, q: &[f64]) -> Result<()> {
    if q.len() != g.n_in() {
        return Err(Error::shape(format!(
            "point has {} coordinates, map has {} inputs",
            q.len(),
            g.n_in()
        )));
    }
    if !g.domain().contains(q) {
        return Err(Error::Domain {
            point: q.to_vec(),
            domain: g.domain().to_string(),
        });
    }
    Ok(())
}

fn jac_rank(l: &Local, tol: &Tolerances, d: &mut Decisions) -> usize {
    let sv = linalg::singular_values(&l.jac);
    let thr = tol.threshold(sv.first().copied().unwrap_or(0.0));
    d.rank(&sv, thr)
}

fn symbol(l: &Local, tol: &Tolerances, d: &mut Decisions) -> Result<TbSymbol> {
    let (n, p) = (l.n, l.p);
    let rank = jac_rank(l, tol, d);
    let i = n - rank;
    if rank >= n.min(p) {
        return Ok(TbSymbol(vec![i]));
    }
    // second entry: dimension of {u in K : pi_Q D^2 g(v, u) = 0 for all v in K}
    let kernel = linalg::null_space(&l.jac, i);
    let c = p - rank;
    let coker = linalg::left_null_space(&l.jac, c);
    let mut m = DMatrix::zeros(i * c, i);
    for a in 0..i {
        let va: Vec<f64> = kernel.column(a).iter().copied().collect();
        for u in 0..i {
            let vu: Vec<f64> = kernel.column(u).iter().copied().collect();
            let second = l.second(&va, &vu);
            for b in 0..c {
                m[(a * c + b, u)] = coker.column(b).dot(&second);
            }
        }
    }
    let thr = tol.threshold(l.hessian_scale());
    let j = i - d.rank(&linalg::singular_values(&m), thr);
    let mut sym = vec![i, j];
    if (n, p) == (2, 2) && i == 1 && j == 1 {
        let order = l.jet.order().unwrap_or(0);
        if order < 3 {
            return Err(Error::InsufficientOrder {
                have: order,
                need: 3,
            });
        }
        let inv = PlaneInvariants::from_jet(&l.jet)?;
        if d.record(inv.cusp_coefficient(l.jacobian_scale()), tol.rank_rtol) {
            sym.push(0);
        }
    }
    Ok(TbSymbol(sym))
}

/// Thom-Boardman symbol of `g` at `q` from its jet of the given order.
///
/// The first entry is `dim ker dg`; the second the dimension of the kernel
/// of the intrinsic second derivative restricted to `ker dg`. For corank-1
/// maps of the plane a trailing `0` records that the third-order kernel
/// derivative of `det dg` is non-zero.
pub fn tb_symbol(g: &MapProgram, q: &[f64], order: usize, tol: &Tolerances) -> Result<TbSymbol> {
    check_point(g, q)?;
    if order < 2 {
        return Err(Error::InsufficientOrder {
            have: order,
            need: 2,
        });
    }
    let l = Local::at(g, q, order)?;
    let mut d = Decisions::new();
    let sym = symbol(&l, tol, &mut d)?;
    d.check(tol)?;
    Ok(sym)
}

struct Analysis {
    rank: usize,
    symbol: TbSymbol,
    class: Classification,
    margin: f64,
}

fn analyze(g: &MapProgram, q: &[f64], tol: &Tolerances) -> Result<Analysis> {
    check_point(g, q)?;
    let l = Local::at(g, q, ANALYSIS_ORDER)?;
    let (n, p) = (l.n, l.p);
    let mut d = Decisions::new();
    let sym = symbol(&l, tol, &mut d)?;
    let rank = jac_rank(&l, tol, &mut d);
    let class = if p == 1 {
        if rank >= 1 {
            Classification::Regular
        } else {
            let sv = linalg::singular_values(&l.hess[0]);
            let thr = tol.threshold(sv.first().copied().unwrap_or(0.0));
            if d.rank(&sv, thr) == n {
                Classification::MorseNondegenerate
            } else {
                Classification::DegenerateCritical
            }
        }
    } else if rank >= n.min(p) {
        Classification::Regular
    } else if (n, p) == (2, 2) && rank == 1 {
        let inv = PlaneInvariants::from_jet(&l.jet)?;
        let thr = tol.threshold(l.jacobian_scale() * l.hessian_scale());
        if !d.record(inv.grad_lambda_norm(), thr) {
            Classification::Unclassified
        } else {
            match sym.entries() {
                [1, 0] => Classification::Fold,
                [1, 1, 0] => Classification::Cusp,
                _ => Classification::Unclassified,
            }
        }
    } else if (n, p) == (2, 3) && rank == 1 {
        // cross-cap: u -> pi_Q D^2 g(v, u) is onto the 2-dimensional cokernel
        let v: Vec<f64> = linalg::null_space(&l.jac, 1).column(0).iter().copied().collect();
        let coker = linalg::left_null_space(&l.jac, 2);
        let mut c = DMatrix::zeros(2, 2);
        for u in 0..2 {
            let mut e = [0.0; 2];
            e[u] = 1.0;
            let second = l.second(&v, &e);
            for b in 0..2 {
                c[(b, u)] = coker.column(b).dot(&second);
            }
        }
        let thr = tol.threshold(l.hessian_scale());
        if d.rank(&linalg::singular_values(&c), thr) == 2 {
            Classification::CrossCap
        } else {
            Classification::Unclassified
        }
    } else {
        Classification::Unclassified
    };
    let class = if d.margin < tol.indeterminate_factor {
        Classification::Unclassified
    } else {
        class
    };
    Ok(Analysis {
        rank,
        symbol: sym,
        class,
        margin: d.margin,
    })
}

/// Classifies the germ of `g` at `q`, returning the class and the decision
/// margin. Borderline rank decisions give [`Classification::Unclassified`].
pub fn classify_germ(g: &MapProgram, q: &[f64], tol: &Tolerances) -> Result<(Classification, f64)> {
    let a = analyze(g, q, tol)?;
    Ok((a.class, a.margin))
}

/// Full analysis of a point as a [`SingularPoint`] record.
pub fn analyze_point(g: &MapProgram, q: &[f64], tol: &Tolerances) -> Result<SingularPoint> {
    let a = analyze(g, q, tol)?;
    Ok(SingularPoint {
        location: q.to_vec(),
        corank: g.n_in() - a.rank,
        tb_symbol: a.symbol,
        classification: a.class,
        margin: a.margin,
    })
}

/// Outcome of a transversality check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transversality {
    pub transverse: bool,
    pub margin: f64,
}

/// Whether the 1-jet extension of `g` meets the corank-1 stratum
/// transversally at `q`: the local defining minors have independent
/// gradients there.
pub fn check_transverse_corank1(g: &MapProgram, q: &[f64], tol: &Tolerances) -> Result<Transversality> {
    check_point(g, q)?;
    let l = Local::at(g, q, 2)?;
    let (n, p) = (l.n, l.p);
    let mut d = Decisions::new();
    let rank = jac_rank(&l, tol, &mut d);
    if rank >= n.min(p) {
        return Err(Error::Precondition(format!("{q:?} is not a singular point")));
    }
    if n - rank != 1 {
        return Err(Error::UnsupportedStratum(format!(
            "corank {} at {q:?}; only corank 1 is supported",
            n - rank
        )));
    }
    let eqs = rank_stratum_equations(&jacobian_jets(&l.jet)?, &l.jac, rank)?;
    let (_, grad) = values_and_gradient(&eqs)?;
    let scale = l.jacobian_scale().powi(rank as i32) * l.hessian_scale();
    let r = d.rank(&linalg::singular_values(&grad), tol.threshold(scale));
    Ok(Transversality {
        transverse: r == eqs.len(),
        margin: d.margin,
    })
}

/// Gradient of `det dg` and of the kernel derivative of `det dg` for maps of
/// the plane, with their values; used to refine cusp locations.
pub(crate) fn cusp_system(g: &MapProgram, q: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let jet = g.jet(q, 3)?;
    let inv = PlaneInvariants::from_jet(&jet)?;
    let f = DVector::from_vec(vec![inv.lambda, inv.eta_lambda]);
    let df = DMatrix::from_row_slice(
        2,
        2,
        &[
            inv.grad_lambda[0],
            inv.grad_lambda[1],
            inv.grad_eta_lambda[0],
            inv.grad_eta_lambda[1],
        ],
    );
    Ok((f, df, inv.tangency()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_map;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sym(src: &str, q: &[f64]) -> String {
        tb_symbol(&parse_map(src).unwrap(), q, 3, &tol()).unwrap().to_string()
    }

    fn class(src: &str, q: &[f64]) -> Classification {
        classify_germ(&parse_map(src).unwrap(), q, &tol()).unwrap().0
    }

    #[test]
    fn boardman_symbols_of_normal_forms() {
        assert_eq!(sym("map (x,y) -> (x, y^2)", &[0.0, 0.0]), "(1,0)");
        assert_eq!(sym("map (x,y) -> (x, y^3 - x*y)", &[0.0, 0.0]), "(1,1,0)");
        assert_eq!(sym("map (x,y) -> (x, y^2)", &[0.3, 0.5]), "(0)");
        assert_eq!(sym("map (x,y) -> (x^2, x*y, y)", &[0.0, 0.0]), "(1,0)");
        assert_eq!(sym("map (x,y) -> (x^2, y^2)", &[0.0, 0.0]), "(2,0)");
    }

    #[test]
    fn symbol_needs_order_three_for_plane_cusps() {
        let g = parse_map("map (x,y) -> (x, y^3 - x*y)").unwrap();
        assert!(matches!(
            tb_symbol(&g, &[0.0, 0.0], 2, &tol()),
            Err(Error::InsufficientOrder { have: 2, need: 3 })
        ));
        assert!(matches!(
            tb_symbol(&g, &[0.0, 0.0], 1, &tol()),
            Err(Error::InsufficientOrder { .. })
        ));
    }

    #[test]
    fn near_threshold_rank_is_indeterminate() {
        let g = parse_map("map (x,y) -> (x, y^2)").unwrap();
        // d/dy = 2y = 4e-8, within 10x of the 1e-8 threshold
        let r = tb_symbol(&g, &[0.0, 2e-8], 3, &tol());
        assert!(matches!(r, Err(Error::IndeterminateRank { .. })), "{r:?}");
        let (c, m) = classify_germ(&g, &[0.0, 2e-8], &tol()).unwrap();
        assert_eq!(c, Classification::Unclassified);
        assert!(m < 10.0);
    }

    #[test]
    fn germ_classes() {
        assert_eq!(class("map (x) -> (x^3)", &[0.0]), Classification::DegenerateCritical);
        assert_eq!(class("map (x) -> (x^2)", &[0.0]), Classification::MorseNondegenerate);
        assert_eq!(class("map (x,y) -> (x^2 - y^2)", &[0.0, 0.0]), Classification::MorseNondegenerate);
        assert_eq!(class("map (x,y) -> (x^2 + y^3)", &[0.0, 0.0]), Classification::DegenerateCritical);
        assert_eq!(class("map (x) -> (x^3)", &[1.0]), Classification::Regular);
        assert_eq!(class("map (x,y) -> (x, y^2)", &[0.0, 0.0]), Classification::Fold);
        assert_eq!(class("map (x,y) -> (x, y^3 - x*y)", &[0.0, 0.0]), Classification::Cusp);
        assert_eq!(class("map (x,y) -> (x^2, x*y, y)", &[0.0, 0.0]), Classification::CrossCap);
        assert_eq!(class("map (x,y) -> (x, y^3)", &[0.0, 0.0]), Classification::Unclassified);
        assert_eq!(class("map (x,y) -> (x^2, y^2)", &[0.0, 0.0]), Classification::Unclassified);
        assert_eq!(class("map (x,y) -> (x, y, x^2)", &[0.0, 0.0]), Classification::Regular);
    }

    #[test]
    fn folds_away_from_the_origin_of_the_cusp() {
        // the critical curve is x = 3y^2
        let g = parse_map("map (x,y) -> (x, y^3 - x*y)").unwrap();
        let (c, _) = classify_germ(&g, &[3.0 * 0.25, 0.5], &tol()).unwrap();
        assert_eq!(c, Classification::Fold);
    }

    #[test]
    fn transversality_of_corank_one_stratum() {
        let t = tol();
        let fold = parse_map("map (x,y) -> (x, y^2)").unwrap();
        assert!(check_transverse_corank1(&fold, &[0.0, 0.0], &t).unwrap().transverse);
        let flat = parse_map("map (x,y) -> (x, y^3)").unwrap();
        assert!(!check_transverse_corank1(&flat, &[0.0, 0.0], &t).unwrap().transverse);
        let umbrella = parse_map("map (x,y) -> (x^2, x*y, y)").unwrap();
        assert!(check_transverse_corank1(&umbrella, &[0.0, 0.0], &t).unwrap().transverse);
        let corank2 = parse_map("map (x,y) -> (x^2, y^2)").unwrap();
        assert!(matches!(
            check_transverse_corank1(&corank2, &[0.0, 0.0], &t),
            Err(Error::UnsupportedStratum(_))
        ));
        assert!(matches!(
            check_transverse_corank1(&fold, &[1.0, 1.0], &t),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn points_outside_the_domain_are_rejected() {
        let g = parse_map("map (x) on x in (0, 1) -> (x^2)").unwrap();
        assert!(matches!(classify_germ(&g, &[2.0], &tol()), Err(Error::Domain { .. })));
    }
}
