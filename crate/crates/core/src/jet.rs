//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`JetPoly`] stores the Taylor coefficients of a function germ at a base
//! point, densely, for every monomial of degree at most `order`. Monomials are
//! kept in graded-lexicographic order: the constant term first, then the
//! linear terms `x_1, ..., x_n`, then degree two starting at `x_1^2`, and so on.
//! All arithmetic truncates at the jet order, so a product of two jets is the
//! jet of the product.
//!
//! Coefficients are Taylor coefficients, not derivatives: the coefficient of
//! `x^a` is `D^a f / a!`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Jet order used when a caller has no reason to pick one.
pub const DEFAULT_ORDER: usize = 3;

/// Exponent vector of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Box<[u32]>);

impl MultiIndex {
    pub fn new(exponents: impl Into<Box<[u32]>>) -> Self {
        MultiIndex(exponents.into())
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n].into())
    }

    /// The index of the linear monomial `x_var`.
    pub fn unit(n: usize, var: usize) -> Self {
        let mut e = vec![0; n];
        e[var] = 1;
        MultiIndex(e.into())
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// `a!` = product of the factorials of the exponents.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e).map(f64::from).product::<f64>())
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// All monomials of degree `<= order` in `n_vars` variables, with the
/// truncated multiplication table. Shared between jets of the same shape.
#[derive(Debug)]
pub struct JetSpace {
    n_vars: usize,
    order: usize,
    monomials: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    // (i, j, k): monomial i times monomial j is monomial k
    products: Vec<(u32, u32, u32)>,
    // for each monomial of positive degree: (parent index, var) with
    // monomial = parent * x_var, parent of strictly lower degree
    parents: Vec<(usize, usize)>,
}

/// Spaces keyed by `(n_vars, order)`.
type SpaceCache = HashMap<(usize, usize), Arc<JetSpace>>;

impl JetSpace {
    /// Shared space for `n_vars` variables at order `order`.
    pub fn get(n_vars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<SpaceCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((n_vars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(n_vars, order)))
            .clone()
    }

    fn build(n_vars: usize, order: usize) -> JetSpace {
        let mut monomials = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u32; n_vars];
            push_degree(&mut monomials, &mut current, 0, degree as u32);
        }
        let lookup: HashMap<MultiIndex, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.degree() + b.degree() <= order {
                    let k = lookup[&a.plus(b)];
                    products.push((i as u32, j as u32, k as u32));
                }
            }
        }
        let parents = monomials
            .iter()
            .map(|m| {
                if m.degree() == 0 {
                    return (0, 0);
                }
                let var = m.0.iter().position(|&e| e > 0).unwrap();
                let mut p = m.0.to_vec();
                p[var] -= 1;
                (lookup[&MultiIndex(p.into())], var)
            })
            .collect();
        JetSpace {
            n_vars,
            order,
            monomials,
            lookup,
            products,
            parents,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        self.lookup.get(m).copied()
    }
}

// Exponent vectors of a fixed degree, first variable descending.
fn push_degree(out: &mut Vec<MultiIndex>, current: &mut [u32], var: usize, remaining: u32) {
    if var + 1 == current.len() {
        current[var] = remaining;
        out.push(MultiIndex(current.to_vec().into()));
        return;
    }
    if current.is_empty() {
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        push_degree(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// Truncated Taylor polynomial of a scalar function at a base point.
#[derive(Clone)]
pub struct JetPoly {
    space: Arc<JetSpace>,
    base: Arc<[f64]>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for JetPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetPoly")
            .field("n_vars", &self.n_vars())
            .field("order", &self.order())
            .field("base", &self.base)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for JetPoly {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl JetPoly {
    pub fn constant(space: Arc<JetSpace>, base: Arc<[f64]>, value: f64) -> Result<Self> {
        check_base(&space, &base)?;
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Ok(JetPoly {
            space,
            base,
            coeffs,
        })
    }

    /// The jet of the coordinate function `x_var` at the base point.
    pub fn variable(space: Arc<JetSpace>, base: Arc<[f64]>, var: usize) -> Result<Self> {
        check_base(&space, &base)?;
        if var >= space.n_vars {
            return Err(Error::shape(format!(
                "variable {var} out of range for {} variables",
                space.n_vars
            )));
        }
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = base[var];
        if space.order >= 1 {
            coeffs[1 + var] = 1.0;
        }
        Ok(JetPoly {
            space,
            base,
            coeffs,
        })
    }

    /// Builds a jet from coefficients listed in the space's monomial order.
    pub fn from_coeffs(space: Arc<JetSpace>, base: Arc<[f64]>, coeffs: Vec<f64>) -> Result<Self> {
        check_base(&space, &base)?;
        if coeffs.len() != space.len() {
            return Err(Error::shape(format!(
                "expected {} coefficients, got {}",
                space.len(),
                coeffs.len()
            )));
        }
        Ok(JetPoly {
            space,
            base,
            coeffs,
        })
    }

    /// Builds a jet from `(exponents, coefficient)` terms; terms above the
    /// order are dropped.
    pub fn from_terms(
        space: Arc<JetSpace>,
        base: Arc<[f64]>,
        terms: &[(&[u32], f64)],
    ) -> Result<Self> {
        let mut jet = JetPoly::constant(space, base, 0.0)?;
        for (exps, c) in terms {
            let m = MultiIndex::new(exps.to_vec());
            if m.n_vars() != jet.n_vars() {
                return Err(Error::shape("term arity does not match jet"));
            }
            if let Some(i) = jet.space.index_of(&m) {
                jet.coeffs[i] += c;
            }
        }
        Ok(jet)
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn n_vars(&self) -> usize {
        self.space.n_vars
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    pub(crate) fn base_arc(&self) -> &Arc<[f64]> {
        &self.base
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, m: &MultiIndex) -> f64 {
        self.space.index_of(m).map_or(0.0, |i| self.coeffs[i])
    }

    /// First partial derivatives at the base point.
    pub fn gradient(&self) -> Result<Vec<f64>> {
        if self.order() < 1 {
            return Err(Error::InsufficientOrder { have: 0, need: 1 });
        }
        Ok(self.coeffs[1..=self.n_vars()].to_vec())
    }

    /// Matrix of second partial derivatives at the base point.
    pub fn hessian(&self) -> Result<DMatrix<f64>> {
        if self.order() < 2 {
            return Err(Error::InsufficientOrder {
                have: self.order(),
                need: 2,
            });
        }
        let n = self.n_vars();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                let m = MultiIndex::new(e);
                h[(i, j)] = self.coeff(&m) * m.factorial();
            }
        }
        Ok(h)
    }

    pub fn same_shape(&self, other: &JetPoly) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            && (Arc::ptr_eq(&self.base, &other.base) || self.base == other.base)
    }

    fn check_compatible(&self, other: &JetPoly) -> Result<()> {
        if self.n_vars() != other.n_vars() || self.order() != other.order() {
            return Err(Error::shape(format!(
                "jets differ in shape: ({} vars, order {}) vs ({} vars, order {})",
                self.n_vars(),
                self.order(),
                other.n_vars(),
                other.order()
            )));
        }
        if !(Arc::ptr_eq(&self.base, &other.base) || self.base == other.base) {
            return Err(Error::shape("jets have different base points"));
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<f64>) -> JetPoly {
        JetPoly {
            space: self.space.clone(),
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn constant_like(&self, value: f64) -> JetPoly {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        self.with_coeffs(coeffs)
    }

    pub fn add(&self, other: &JetPoly) -> Result<JetPoly> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &JetPoly) -> Result<JetPoly> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn neg(&self) -> JetPoly {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> JetPoly {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add_scalar(&self, s: f64) -> JetPoly {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += s;
        self.with_coeffs(coeffs)
    }

    /// Truncated product.
    pub fn mul(&self, other: &JetPoly) -> Result<JetPoly> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(self.mul_coeffs(&other.coeffs)))
    }

    fn mul_coeffs(&self, other: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            out[k as usize] += self.coeffs[i as usize] * other[j as usize];
        }
        out
    }

    /// `sum_k d[k] * (self - self(0))^k`, the composition of a univariate
    /// Taylor series with coefficients `d` with this jet.
    fn compose_series(&self, d: &[f64]) -> JetPoly {
        let mut h = self.coeffs.clone();
        h[0] = 0.0;
        let mut acc = vec![0.0; self.coeffs.len()];
        acc[0] = *d.last().unwrap_or(&0.0);
        for &dk in d.iter().rev().skip(1) {
            let mut next = vec![0.0; acc.len()];
            for &(i, j, k) in &self.space.products {
                next[k as usize] += acc[i as usize] * h[j as usize];
            }
            next[0] += dk;
            acc = next;
        }
        self.with_coeffs(acc)
    }

    fn binomial_series(&self, exponent: f64) -> Vec<f64> {
        let a0 = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut c = 1.0;
        for k in 0..=self.order() {
            d.push(c * a0.powf(exponent - k as f64));
            c *= (exponent - k as f64) / (k as f64 + 1.0);
        }
        d
    }

    pub fn recip(&self) -> Result<JetPoly> {
        let a0 = self.value();
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::eval("division by zero"));
        }
        let d: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / a0.powi(k as i32 + 1)
            })
            .collect();
        Ok(self.compose_series(&d))
    }

    pub fn div(&self, other: &JetPoly) -> Result<JetPoly> {
        self.check_compatible(other)?;
        self.mul(&other.recip()?)
    }

    pub fn powi(&self, n: i32) -> Result<JetPoly> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.with_coeffs(result.mul_coeffs(&base.coeffs));
            }
            e >>= 1;
            if e > 0 {
                base = base.with_coeffs(base.mul_coeffs(&base.coeffs));
            }
        }
        Ok(result)
    }

    pub fn sqrt(&self) -> Result<JetPoly> {
        let a0 = self.value();
        if a0 <= 0.0 {
            if a0 == 0.0 && self.order() == 0 {
                return Ok(self.constant_like(0.0));
            }
            return Err(Error::eval(format!("sqrt is not smooth at {a0}")));
        }
        Ok(self.compose_series(&self.binomial_series(0.5)))
    }

    pub fn exp(&self) -> JetPoly {
        let e = self.value().exp();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            d.push(e / fact);
        }
        self.compose_series(&d)
    }

    pub fn ln(&self) -> Result<JetPoly> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::eval(format!("log of non-positive value {a0}")));
        }
        let mut d = vec![a0.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (k as f64 * a0.powi(k as i32)));
        }
        Ok(self.compose_series(&d))
    }

    pub fn sin(&self) -> JetPoly {
        let (s, c) = self.value().sin_cos();
        self.compose_series(&trig_series(s, c, self.order()))
    }

    pub fn cos(&self) -> JetPoly {
        let (s, c) = self.value().sin_cos();
        // cos(a + h) = sin(a + pi/2 + h)
        self.compose_series(&trig_series(c, -s, self.order()))
    }

    /// Partial derivative in `var`; the result has order one less.
    pub fn partial(&self, var: usize) -> Result<JetPoly> {
        if self.order() == 0 {
            return Err(Error::InsufficientOrder { have: 0, need: 1 });
        }
        if var >= self.n_vars() {
            return Err(Error::shape(format!("variable {var} out of range")));
        }
        let space = JetSpace::get(self.n_vars(), self.order() - 1);
        let mut coeffs = vec![0.0; space.len()];
        for (i, m) in self.space.monomials.iter().enumerate() {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut lowered = m.0.to_vec();
            lowered[var] -= 1;
            let k = space.lookup[&MultiIndex(lowered.into())];
            coeffs[k] += f64::from(e) * self.coeffs[i];
        }
        Ok(JetPoly {
            space,
            base: self.base.clone(),
            coeffs,
        })
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Result<JetPoly> {
        if order > self.order() {
            return Err(Error::InsufficientOrder {
                have: self.order(),
                need: order,
            });
        }
        let space = JetSpace::get(self.n_vars(), order);
        // monomials of lower order form a prefix in graded order
        let coeffs = self.coeffs[..space.len()].to_vec();
        Ok(JetPoly {
            space,
            base: self.base.clone(),
            coeffs,
        })
    }

    /// Raises the storage order, padding with zeros. Only meaningful for
    /// exact polynomials (constants, linear maps).
    pub fn extend_order(&self, order: usize) -> Result<JetPoly> {
        if order < self.order() {
            return self.truncate(order);
        }
        let space = JetSpace::get(self.n_vars(), order);
        let mut coeffs = vec![0.0; space.len()];
        coeffs[..self.coeffs.len()].copy_from_slice(&self.coeffs);
        Ok(JetPoly {
            space,
            base: self.base.clone(),
            coeffs,
        })
    }

    /// Evaluates the polynomial at `base + offset`.
    pub fn eval_offset(&self, offset: &[f64]) -> f64 {
        self.space
            .monomials
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| {
                c * m
                    .0
                    .iter()
                    .zip(offset)
                    .map(|(&e, &h)| h.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

fn check_base(space: &JetSpace, base: &[f64]) -> Result<()> {
    if base.len() != space.n_vars {
        return Err(Error::shape(format!(
            "base point has {} coordinates, jet has {} variables",
            base.len(),
            space.n_vars
        )));
    }
    Ok(())
}

fn trig_series(s: f64, c: f64, order: usize) -> Vec<f64> {
    // derivatives of sin at a cycle sin, cos, -sin, -cos
    let cycle = [s, c, -s, -c];
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            cycle[k % 4] / fact
        })
        .collect()
}

/// Truncated product of two jets.
pub fn jet_mul(a: &JetPoly, b: &JetPoly) -> Result<JetPoly> {
    a.mul(b)
}

/// Jet of a map into `R^l`: one [`JetPoly`] per component.
#[derive(Debug, Clone, PartialEq)]
pub struct JetTuple {
    components: Vec<JetPoly>,
}

impl JetTuple {
    pub fn new(components: Vec<JetPoly>) -> Result<Self> {
        if let Some(first) = components.first() {
            for c in &components[1..] {
                if c.n_vars() != first.n_vars() || c.order() != first.order() {
                    return Err(Error::shape("jet tuple components differ in shape"));
                }
                if c.base_point() != first.base_point() {
                    return Err(Error::shape("jet tuple components differ in base point"));
                }
            }
        }
        Ok(JetTuple { components })
    }

    /// Jet of the identity map of `R^n` at `base`.
    pub fn identity(base: &[f64], order: usize) -> JetTuple {
        let space = JetSpace::get(base.len(), order);
        let base: Arc<[f64]> = base.into();
        let components = (0..base.len())
            .map(|i| JetPoly::variable(space.clone(), base.clone(), i).expect("in range"))
            .collect();
        JetTuple { components }
    }

    pub fn components(&self) -> &[JetPoly] {
        &self.components
    }

    pub fn into_components(self) -> Vec<JetPoly> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn n_vars(&self) -> Option<usize> {
        self.components.first().map(JetPoly::n_vars)
    }

    pub fn order(&self) -> Option<usize> {
        self.components.first().map(JetPoly::order)
    }

    pub fn base_point(&self) -> Option<&[f64]> {
        self.components.first().map(JetPoly::base_point)
    }

    pub fn values(&self) -> Vec<f64> {
        self.components.iter().map(JetPoly::value).collect()
    }
}

/// Jet of `outer ∘ inner` at the base point of `inner`.
///
/// `outer` must be expanded at the point `inner(base)`.
pub fn jet_compose(outer: &JetTuple, inner: &JetTuple) -> Result<JetTuple> {
    let (Some(k), Some(order)) = (outer.n_vars(), inner.order()) else {
        return Err(Error::shape("empty jet tuple in composition"));
    };
    if k != inner.len() {
        return Err(Error::shape(format!(
            "outer jet has {k} variables but inner jet has {} components",
            inner.len()
        )));
    }
    if outer.order() != Some(order) {
        return Err(Error::shape("jet orders differ in composition"));
    }
    let outer_base = outer.base_point().unwrap_or(&[]);
    for (u0, c) in outer_base.iter().zip(inner.components()) {
        let v = c.value();
        if (u0 - v).abs() > 1e-12 * (1.0 + u0.abs().max(v.abs())) {
            return Err(Error::shape(format!(
                "outer base point {outer_base:?} is not the value {:?} of the inner jet",
                inner.values()
            )));
        }
    }
    let outer_space = outer.components[0].space.clone();
    let shifts: Vec<JetPoly> = inner
        .components()
        .iter()
        .map(|c| c.add_scalar(-c.value()))
        .collect();
    // monomials of the outer space evaluated at the inner shifts
    let template = &inner.components[0];
    let mut powers: Vec<JetPoly> = Vec::with_capacity(outer_space.len());
    for (idx, m) in outer_space.monomials.iter().enumerate() {
        if m.degree() == 0 {
            powers.push(template.constant_like(1.0));
        } else {
            let (parent, var) = outer_space.parents[idx];
            let p = powers[parent].mul(&shifts[var])?;
            powers.push(p);
        }
    }
    let components = outer
        .components()
        .iter()
        .map(|oc| {
            let mut acc = vec![0.0; template.coeffs.len()];
            for (c, p) in oc.coeffs.iter().zip(&powers) {
                if *c != 0.0 {
                    for (a, b) in acc.iter_mut().zip(&p.coeffs) {
                        *a += c * b;
                    }
                }
            }
            template.with_coeffs(acc)
        })
        .collect();
    Ok(JetTuple { components })
}

/// The differential: entry `(i, j)` is `d g_i / d x_j` at the base point.
pub fn derivative_matrix(jt: &JetTuple) -> Result<DMatrix<f64>> {
    let n = jt.n_vars().unwrap_or(0);
    if jt.order().unwrap_or(0) < 1 {
        return Err(Error::InsufficientOrder { have: 0, need: 1 });
    }
    Ok(DMatrix::from_fn(jt.len(), n, |i, j| {
        jt.components[i].coeffs[1 + j]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(order: usize, base: &[f64]) -> Vec<JetPoly> {
        JetTuple::identity(base, order).into_components()
    }

    fn close(a: &JetPoly, b: &JetPoly, tol: f64) -> bool {
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn graded_order_starts_with_constant_then_linear() {
        let s = JetSpace::get(2, 2);
        let m: Vec<String> = s.monomials().iter().map(|m| m.to_string()).collect();
        assert_eq!(m, ["(0,0)", "(1,0)", "(0,1)", "(2,0)", "(1,1)", "(0,2)"]);
        assert_eq!(JetSpace::get(3, 4).len(), 35);
    }

    #[test]
    fn product_of_conjugates() {
        let v = vars(2, &[0.0]);
        let x = &v[0];
        let p = x.add_scalar(1.0).mul(&x.neg().add_scalar(1.0)).unwrap();
        assert_eq!(p.coeffs(), &[1.0, 0.0, -1.0]);

        let v = vars(2, &[0.0, 0.0]);
        let p = v[0].add(&v[1]).unwrap().mul(&v[0].sub(&v[1]).unwrap()).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn multiplication_truncates() {
        let v = vars(2, &[0.0]);
        let x3 = v[0].powi(3).unwrap();
        assert!(x3.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn mismatched_jets_are_rejected() {
        let a = vars(2, &[0.0]);
        let b = vars(3, &[0.0]);
        assert!(matches!(a[0].mul(&b[0]), Err(Error::Shape(_))));
        let c = vars(2, &[1.0]);
        assert!(matches!(a[0].mul(&c[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn compose_square_with_shift() {
        // outer u -> u^2 expanded at u = 1, inner x -> 1 + x at 0
        let u = vars(2, &[1.0]);
        let outer = JetTuple::new(vec![u[0].powi(2).unwrap()]).unwrap();
        let x = vars(2, &[0.0]);
        let inner = JetTuple::new(vec![x[0].add_scalar(1.0)]).unwrap();
        let r = jet_compose(&outer, &inner).unwrap();
        assert_eq!(r.components()[0].coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn compose_sin_series() {
        let u = vars(3, &[0.0]);
        let outer = JetTuple::new(vec![u[0].sin()]).unwrap();
        let inner = JetTuple::identity(&[0.0], 3);
        let r = jet_compose(&outer, &inner).unwrap();
        let c = r.components()[0].coeffs();
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 1.0);
        assert_eq!(c[2], 0.0);
        assert!((c[3] + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn compose_with_identity_outer() {
        let x = vars(3, &[0.5, -1.0]);
        let g = x[0].sin().mul(&x[1]).unwrap();
        let inner = JetTuple::new(vec![g.clone(), x[1].exp()]).unwrap();
        let outer = JetTuple::identity(&inner.values(), 3);
        let r = jet_compose(&outer, &inner).unwrap();
        assert!(close(&r.components()[0], &g, 1e-14));
    }

    #[test]
    fn compose_rejects_arity_mismatch() {
        let outer = JetTuple::identity(&[0.0, 0.0], 2);
        let inner = JetTuple::identity(&[0.0], 2);
        assert!(matches!(jet_compose(&outer, &inner), Err(Error::Shape(_))));
    }

    #[test]
    fn derivative_matrix_examples() {
        let x = vars(2, &[0.0, 0.0]);
        let jt = JetTuple::new(vec![x[0].clone(), x[1].powi(2).unwrap()]).unwrap();
        assert_eq!(
            derivative_matrix(&jt).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(
            derivative_matrix(&JetTuple::identity(&[3.0, 4.0], 1)).unwrap(),
            DMatrix::identity(2, 2)
        );
        let x = vars(2, &[1.0, 0.0]);
        let jt = JetTuple::new(vec![
            x[0].powi(2).unwrap(),
            x[0].mul(&x[1]).unwrap(),
            x[1].clone(),
        ])
        .unwrap();
        assert_eq!(
            derivative_matrix(&jt).unwrap(),
            DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, 1.0])
        );
    }

    #[test]
    fn derivative_matrix_needs_order_one() {
        let jt = JetTuple::identity(&[0.0], 0);
        assert!(matches!(
            derivative_matrix(&jt),
            Err(Error::InsufficientOrder { .. })
        ));
    }

    #[test]
    fn elementary_series_match_known_expansions() {
        let x = vars(4, &[0.0]);
        let e = x[0].exp();
        let expect = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (c, w) in e.coeffs().iter().zip(expect) {
            assert!((c - w).abs() < 1e-15);
        }
        let l = x[0].add_scalar(1.0).ln().unwrap();
        let expect = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25];
        for (c, w) in l.coeffs().iter().zip(expect) {
            assert!((c - w).abs() < 1e-15);
        }
        let s = x[0].add_scalar(1.0).sqrt().unwrap();
        let expect = [1.0, 0.5, -0.125, 0.0625, -5.0 / 128.0];
        for (c, w) in s.coeffs().iter().zip(expect) {
            assert!((c - w).abs() < 1e-15);
        }
        let r = x[0].add_scalar(1.0).recip().unwrap();
        assert_eq!(r.coeffs(), &[1.0, -1.0, 1.0, -1.0, 1.0]);
        let c = x[0].cos();
        let expect = [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0];
        for (c, w) in c.coeffs().iter().zip(expect) {
            assert!((c - w).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_elementary_functions_error() {
        let x = vars(2, &[0.0]);
        assert!(x[0].recip().is_err());
        assert!(x[0].ln().is_err());
        assert!(x[0].sqrt().is_err());
        assert!(x[0].powi(-1).is_err());
    }

    #[test]
    fn partial_and_hessian() {
        let x = vars(3, &[1.0, 2.0]);
        // f = x^2 y
        let f = x[0].powi(2).unwrap().mul(&x[1]).unwrap();
        let fx = f.partial(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 4.0).abs() < 1e-14);
        let h = f.hessian().unwrap();
        assert!((h[(0, 0)] - 4.0).abs() < 1e-14);
        assert!((h[(0, 1)] - 2.0).abs() < 1e-14);
        assert!(h[(1, 1)].abs() < 1e-14);
    }

    #[test]
    fn truncate_keeps_prefix() {
        let x = vars(3, &[0.0, 0.0]);
        let f = x[0].add(&x[1]).unwrap().powi(3).unwrap().add_scalar(2.0);
        let t = f.truncate(1).unwrap();
        assert_eq!(t.coeffs(), &[2.0, 0.0, 0.0]);
    }
}
