//! Compiled map programs: a hash-consed expression DAG evaluated over plain
//! reals or over jets.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{JetPoly, JetTuple};

use super::domain::BoxDomain;
use super::parser::{parse_ast, write_number, Expr, Func, MapAst};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Input(usize),
    Const(f64),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NodeKey {
    Input(usize),
    Const(u64),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Call(Func, usize),
}

impl Node {
    fn key(&self) -> NodeKey {
        match *self {
            Node::Input(i) => NodeKey::Input(i),
            Node::Const(c) => NodeKey::Const(c.to_bits()),
            Node::Neg(a) => NodeKey::Neg(a),
            Node::Add(a, b) => NodeKey::Add(a, b),
            Node::Sub(a, b) => NodeKey::Sub(a, b),
            Node::Mul(a, b) => NodeKey::Mul(a, b),
            Node::Div(a, b) => NodeKey::Div(a, b),
            Node::Pow(a, n) => NodeKey::Pow(a, n),
            Node::Call(f, a) => NodeKey::Call(f, a),
        }
    }

    fn remap(&self, map: &[usize]) -> Node {
        match *self {
            Node::Input(i) => Node::Input(i),
            Node::Const(c) => Node::Const(c),
            Node::Neg(a) => Node::Neg(map[a]),
            Node::Add(a, b) => Node::Add(map[a], map[b]),
            Node::Sub(a, b) => Node::Sub(map[a], map[b]),
            Node::Mul(a, b) => Node::Mul(map[a], map[b]),
            Node::Div(a, b) => Node::Div(map[a], map[b]),
            Node::Pow(a, n) => Node::Pow(map[a], n),
            Node::Call(f, a) => Node::Call(f, map[a]),
        }
    }
}

/// Intermediate values that must stay inside a domain, recorded when a
/// program is composed after another.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub nodes: Vec<usize>,
    pub domain: BoxDomain,
}

/// A smooth map `U -> R^k` on an open box `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapProgram {
    vars: Vec<String>,
    domain: BoxDomain,
    nodes: Vec<Node>,
    outputs: Vec<usize>,
    guards: Vec<Guard>,
}

/// Incremental constructor for programs.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    nodes: Vec<Node>,
    cache: HashMap<NodeKey, usize>,
    guards: Vec<Guard>,
}

impl ProgramBuilder {
    /// A builder with input nodes `0..n_in` already allocated.
    pub fn new(n_in: usize) -> ProgramBuilder {
        let mut b = ProgramBuilder::default();
        for i in 0..n_in {
            b.push(Node::Input(i));
        }
        b
    }

    fn push(&mut self, node: Node) -> usize {
        let key = node.key();
        if let Some(&id) = self.cache.get(&key) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node);
        self.cache.insert(key, id);
        id
    }

    pub fn input(&mut self, i: usize) -> usize {
        self.push(Node::Input(i))
    }

    pub fn constant(&mut self, c: f64) -> usize {
        self.push(Node::Const(c))
    }

    pub fn neg(&mut self, a: usize) -> usize {
        self.push(Node::Neg(a))
    }

    pub fn add(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Add(a, b))
    }

    pub fn sub(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Sub(a, b))
    }

    pub fn mul(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Mul(a, b))
    }

    pub fn div(&mut self, a: usize, b: usize) -> usize {
        self.push(Node::Div(a, b))
    }

    pub fn powi(&mut self, a: usize, n: i32) -> usize {
        self.push(Node::Pow(a, n))
    }

    pub fn call(&mut self, f: Func, a: usize) -> usize {
        self.push(Node::Call(f, a))
    }

    /// `start + sum c_k * node_k`, skipping zero coefficients. Returns the
    /// node for `start` unchanged when every coefficient is zero.
    pub fn add_linear(&mut self, start: Option<usize>, terms: &[(f64, usize)]) -> usize {
        let mut acc = start;
        for &(c, node) in terms {
            if c == 0.0 {
                continue;
            }
            let term = if c == 1.0 {
                node
            } else {
                let k = self.constant(c);
                self.mul(k, node)
            };
            acc = Some(match acc {
                Some(a) => self.add(a, term),
                None => term,
            });
        }
        acc.unwrap_or_else(|| self.constant(0.0))
    }

    /// Splices `program` in with its inputs bound to `inputs`; returns the
    /// nodes of its outputs. The program's domain becomes a guard on
    /// `inputs` unless it is all of `R^n`.
    pub fn splice(&mut self, program: &MapProgram, inputs: &[usize]) -> Result<Vec<usize>> {
        if inputs.len() != program.n_in() {
            return Err(Error::shape(format!(
                "program takes {} inputs, {} supplied",
                program.n_in(),
                inputs.len()
            )));
        }
        let mut map = Vec::with_capacity(program.nodes.len());
        for node in &program.nodes {
            let id = match node {
                Node::Input(i) => inputs[*i],
                other => self.push(other.remap(&map)),
            };
            map.push(id);
        }
        if !program.domain.is_whole() {
            self.guards.push(Guard {
                nodes: inputs.to_vec(),
                domain: program.domain.clone(),
            });
        }
        for g in &program.guards {
            self.guards.push(Guard {
                nodes: g.nodes.iter().map(|&n| map[n]).collect(),
                domain: g.domain.clone(),
            });
        }
        Ok(program.outputs.iter().map(|&o| map[o]).collect())
    }

    pub fn finish(self, vars: Vec<String>, domain: BoxDomain, outputs: Vec<usize>) -> MapProgram {
        MapProgram {
            vars,
            domain,
            nodes: self.nodes,
            outputs,
            guards: self.guards,
        }
    }
}

/// Default variable names: `x, y, z` up to three inputs, else `x1, ..., xn`.
pub fn default_vars(n: usize) -> Vec<String> {
    if n <= 3 {
        ["x", "y", "z"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

/// Number types a program can be evaluated over.
pub trait Field: Clone {
    fn constant_like(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Result<Self>;
    fn sub(&self, other: &Self) -> Result<Self>;
    fn mul(&self, other: &Self) -> Result<Self>;
    fn div(&self, other: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    fn powi(&self, n: i32) -> Result<Self>;
    fn call(&self, f: Func) -> Result<Self>;
}

impl Field for f64 {
    fn constant_like(&self, c: f64) -> f64 {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &f64) -> Result<f64> {
        Ok(self + other)
    }
    fn sub(&self, other: &f64) -> Result<f64> {
        Ok(self - other)
    }
    fn mul(&self, other: &f64) -> Result<f64> {
        Ok(self * other)
    }
    fn div(&self, other: &f64) -> Result<f64> {
        if *other == 0.0 {
            return Err(Error::eval("division by zero"));
        }
        Ok(self / other)
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn powi(&self, n: i32) -> Result<f64> {
        if n < 0 && *self == 0.0 {
            return Err(Error::eval("negative power of zero"));
        }
        Ok(f64::powi(*self, n))
    }
    fn call(&self, f: Func) -> Result<f64> {
        let x = *self;
        Ok(match f {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return Err(Error::eval(format!("log of non-positive value {x}")));
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(Error::eval(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
        })
    }
}

impl Field for JetPoly {
    fn constant_like(&self, c: f64) -> JetPoly {
        JetPoly::constant_like(self, c)
    }
    fn value(&self) -> f64 {
        JetPoly::value(self)
    }
    fn add(&self, other: &JetPoly) -> Result<JetPoly> {
        JetPoly::add(self, other)
    }
    fn sub(&self, other: &JetPoly) -> Result<JetPoly> {
        JetPoly::sub(self, other)
    }
    fn mul(&self, other: &JetPoly) -> Result<JetPoly> {
        JetPoly::mul(self, other)
    }
    fn div(&self, other: &JetPoly) -> Result<JetPoly> {
        JetPoly::div(self, other)
    }
    fn neg(&self) -> JetPoly {
        JetPoly::neg(self)
    }
    fn powi(&self, n: i32) -> Result<JetPoly> {
        JetPoly::powi(self, n)
    }
    fn call(&self, f: Func) -> Result<JetPoly> {
        match f {
            Func::Sin => Ok(self.sin()),
            Func::Cos => Ok(self.cos()),
            Func::Exp => Ok(self.exp()),
            Func::Log => self.ln(),
            Func::Sqrt => self.sqrt(),
        }
    }
}

impl MapProgram {
    pub fn n_in(&self) -> usize {
        self.vars.len()
    }

    pub fn n_out(&self) -> usize {
        self.outputs.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn guards(&self) -> &[Guard] {
        &self.guards
    }

    /// Evaluates every node; inputs must already be validated.
    fn run<T: Field>(&self, inputs: &[T]) -> Result<Vec<T>> {
        let template = inputs
            .first()
            .ok_or_else(|| Error::shape("program has no inputs"))?;
        let mut vals: Vec<T> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match *node {
                Node::Input(i) => inputs[i].clone(),
                Node::Const(c) => template.constant_like(c),
                Node::Neg(a) => vals[a].neg(),
                Node::Add(a, b) => vals[a].add(&vals[b])?,
                Node::Sub(a, b) => vals[a].sub(&vals[b])?,
                Node::Mul(a, b) => vals[a].mul(&vals[b])?,
                Node::Div(a, b) => vals[a].div(&vals[b])?,
                Node::Pow(a, n) => vals[a].powi(n)?,
                Node::Call(f, a) => vals[a].call(f)?,
            };
            if !v.value().is_finite() {
                return Err(Error::eval("non-finite intermediate value"));
            }
            vals.push(v);
        }
        for g in &self.guards {
            let point: Vec<f64> = g.nodes.iter().map(|&n| vals[n].value()).collect();
            if !g.domain.contains(&point) {
                return Err(Error::Domain {
                    point,
                    domain: g.domain.to_string(),
                });
            }
        }
        Ok(vals)
    }

    /// Same program with a different declared domain.
    pub fn with_domain(&self, domain: BoxDomain) -> MapProgram {
        MapProgram {
            domain,
            ..self.clone()
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in() {
            return Err(Error::shape(format!(
                "program takes {} inputs, got {}",
                self.n_in(),
                x.len()
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::Domain {
                point: x.to_vec(),
                domain: self.domain.to_string(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let vals = self.run(x)?;
        Ok(self.outputs.iter().map(|&o| vals[o]).collect())
    }

    /// Pushes a jet through the program: the result is the jet of the
    /// composition of this map with the map whose jet is `input`.
    pub fn eval_jet(&self, input: &JetTuple) -> Result<JetTuple> {
        self.check_input(&input.values())?;
        let vals = self.run(input.components())?;
        JetTuple::new(self.outputs.iter().map(|&o| vals[o].clone()).collect())
    }

    /// The `order`-jet of the map at `x`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<JetTuple> {
        self.eval_jet(&JetTuple::identity(x, order))
    }

    fn fmt_node(&self, f: &mut fmt::Formatter<'_>, id: usize) -> fmt::Result {
        match self.nodes[id] {
            Node::Input(i) => f.write_str(&self.vars[i]),
            Node::Const(c) => write_number(f, c),
            Node::Neg(a) => {
                f.write_str("(-")?;
                self.fmt_node(f, a)?;
                f.write_str(")")
            }
            Node::Add(a, b) => self.fmt_binary(f, a, " + ", b),
            Node::Sub(a, b) => self.fmt_binary(f, a, " - ", b),
            Node::Mul(a, b) => self.fmt_binary(f, a, " * ", b),
            Node::Div(a, b) => self.fmt_binary(f, a, " / ", b),
            Node::Pow(a, n) => {
                f.write_str("(")?;
                self.fmt_node(f, a)?;
                write!(f, ")^{n}")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.fmt_node(f, a)?;
                f.write_str(")")
            }
        }
    }

    fn fmt_binary(&self, f: &mut fmt::Formatter<'_>, a: usize, op: &str, b: usize) -> fmt::Result {
        f.write_str("(")?;
        self.fmt_node(f, a)?;
        f.write_str(op)?;
        self.fmt_node(f, b)?;
        f.write_str(")")
    }
}

/// Prints the program in the input grammar. Guards introduced by
/// composition are not expressible in the grammar and are not printed.
impl fmt::Display for MapProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "map ({})", self.vars.join(", "))?;
        let bounded: Vec<_> = self
            .domain
            .intervals()
            .iter()
            .enumerate()
            .filter(|(_, iv)| !iv.is_whole())
            .collect();
        if !bounded.is_empty() {
            f.write_str(" on ")?;
            for (k, (i, iv)) in bounded.into_iter().enumerate() {
                if k > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{} in ({}, {})", self.vars[i], Bound(iv.lo), Bound(iv.hi))?;
            }
        }
        f.write_str(" -> (")?;
        for (k, &o) in self.outputs.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            self.fmt_node(f, o)?;
        }
        f.write_str(")")
    }
}

struct Bound(f64);

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            v if v == f64::INFINITY => f.write_str("inf"),
            v if v == f64::NEG_INFINITY => f.write_str("-inf"),
            v => write!(f, "{v:?}"),
        }
    }
}

/// Closed range of values an expression can take over a box.
#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    const WHOLE: Range = Range {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    fn point(v: f64) -> Range {
        Range { lo: v, hi: v }
    }

    fn is_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    fn sane(lo: f64, hi: f64) -> Range {
        if lo.is_nan() || hi.is_nan() {
            Range::WHOLE
        } else {
            Range { lo, hi }
        }
    }

    fn mul(self, o: Range) -> Range {
        if self.is_zero() || o.is_zero() {
            return Range::point(0.0);
        }
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        if p.iter().any(|v| v.is_nan()) {
            return Range::WHOLE;
        }
        Range {
            lo: p.iter().copied().fold(f64::INFINITY, f64::min),
            hi: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn powi(self, n: i32) -> Range {
        if n == 0 {
            return Range::point(1.0);
        }
        if n < 0 {
            if self.contains_zero() {
                return Range::WHOLE;
            }
            let p = self.powi(-n);
            return Range::sane(1.0 / p.hi, 1.0 / p.lo).ordered();
        }
        let (a, b) = (self.lo.powi(n), self.hi.powi(n));
        if n % 2 == 0 && self.contains_zero() {
            Range::sane(0.0, a.max(b))
        } else {
            Range::sane(a.min(b), a.max(b))
        }
    }

    fn ordered(self) -> Range {
        Range {
            lo: self.lo.min(self.hi),
            hi: self.lo.max(self.hi),
        }
    }
}

/// Rejects operations that are undefined at every point of the domain.
fn check_defined(e: &Expr, vars: &[Range], ast: &MapAst) -> Result<Range> {
    let show = |e: &Expr| {
        super::parser::ExprDisplay {
            expr: e,
            vars: &ast.vars,
        }
        .to_string()
    };
    Ok(match e {
        Expr::Num(v) => Range::point(*v),
        Expr::Var(i) => vars[*i],
        Expr::Neg(a) => {
            let r = check_defined(a, vars, ast)?;
            Range { lo: -r.hi, hi: -r.lo }
        }
        Expr::Add(a, b) => {
            let (x, y) = (check_defined(a, vars, ast)?, check_defined(b, vars, ast)?);
            Range::sane(x.lo + y.lo, x.hi + y.hi)
        }
        Expr::Sub(a, b) => {
            let (x, y) = (check_defined(a, vars, ast)?, check_defined(b, vars, ast)?);
            Range::sane(x.lo - y.hi, x.hi - y.lo)
        }
        Expr::Mul(a, b) => check_defined(a, vars, ast)?.mul(check_defined(b, vars, ast)?),
        Expr::Div(a, b) => {
            let num = check_defined(a, vars, ast)?;
            let den = check_defined(b, vars, ast)?;
            if den.is_zero() {
                return Err(Error::UndefinedOnDomain(format!(
                    "denominator `{}` is zero on the whole domain",
                    show(b)
                )));
            }
            if den.contains_zero() {
                Range::WHOLE
            } else {
                num.mul(Range::sane(1.0 / den.hi, 1.0 / den.lo).ordered())
            }
        }
        Expr::Pow(a, n) => {
            let r = check_defined(a, vars, ast)?;
            if *n < 0 && r.is_zero() {
                return Err(Error::UndefinedOnDomain(format!(
                    "`{}` is zero on the whole domain and raised to a negative power",
                    show(a)
                )));
            }
            r.powi(*n)
        }
        Expr::Call(f, a) => {
            let r = check_defined(a, vars, ast)?;
            match f {
                Func::Sin | Func::Cos => Range { lo: -1.0, hi: 1.0 },
                Func::Exp => Range::sane(r.lo.exp(), r.hi.exp()),
                Func::Log => {
                    if r.hi <= 0.0 {
                        return Err(Error::UndefinedOnDomain(format!(
                            "log argument `{}` is non-positive on the whole domain",
                            show(a)
                        )));
                    }
                    let lo = if r.lo <= 0.0 { f64::NEG_INFINITY } else { r.lo.ln() };
                    Range::sane(lo, r.hi.ln())
                }
                Func::Sqrt => {
                    if r.hi < 0.0 {
                        return Err(Error::UndefinedOnDomain(format!(
                            "sqrt argument `{}` is negative on the whole domain",
                            show(a)
                        )));
                    }
                    Range::sane(r.lo.max(0.0).sqrt(), r.hi.sqrt())
                }
            }
        }
    })
}

fn compile_expr(b: &mut ProgramBuilder, e: &Expr) -> usize {
    match e {
        Expr::Num(v) => b.constant(*v),
        Expr::Var(i) => b.input(*i),
        Expr::Neg(a) => {
            let a = compile_expr(b, a);
            b.neg(a)
        }
        Expr::Add(x, y) => {
            let (x, y) = (compile_expr(b, x), compile_expr(b, y));
            b.add(x, y)
        }
        Expr::Sub(x, y) => {
            let (x, y) = (compile_expr(b, x), compile_expr(b, y));
            b.sub(x, y)
        }
        Expr::Mul(x, y) => {
            let (x, y) = (compile_expr(b, x), compile_expr(b, y));
            b.mul(x, y)
        }
        Expr::Div(x, y) => {
            let (x, y) = (compile_expr(b, x), compile_expr(b, y));
            b.div(x, y)
        }
        Expr::Pow(a, n) => {
            let a = compile_expr(b, a);
            b.powi(a, *n)
        }
        Expr::Call(f, a) => {
            let a = compile_expr(b, a);
            b.call(*f, a)
        }
    }
}

/// Compiles a parsed map after checking it is not undefined everywhere.
pub fn compile(ast: &MapAst) -> Result<MapProgram> {
    let ranges: Vec<Range> = ast
        .domain
        .intervals()
        .iter()
        .map(|iv| Range { lo: iv.lo, hi: iv.hi })
        .collect();
    for e in &ast.outputs {
        check_defined(e, &ranges, ast)?;
    }
    let mut b = ProgramBuilder::new(ast.vars.len());
    let outputs = ast.outputs.iter().map(|e| compile_expr(&mut b, e)).collect();
    Ok(b.finish(ast.vars.clone(), ast.domain.clone(), outputs))
}

/// Parses and compiles map source text.
pub fn parse_map(src: &str) -> Result<MapProgram> {
    compile(&parse_ast(src)?)
}

/// Argument of [`eval_program`].
#[derive(Debug, Clone)]
pub enum EvalInput {
    Point(Vec<f64>),
    Jet(JetTuple),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutput {
    Point(Vec<f64>),
    Jet(JetTuple),
}

pub fn eval_program(p: &MapProgram, input: &EvalInput) -> Result<EvalOutput> {
    match input {
        EvalInput::Point(x) => p.eval(x).map(EvalOutput::Point),
        EvalInput::Jet(j) => p.eval_jet(j).map(EvalOutput::Jet),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_simple_map() {
        let p = parse_map("map (x,y) -> (x, y^2)").unwrap();
        assert_eq!((p.n_in(), p.n_out()), (2, 2));
        assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), vec![2.0, 9.0]);
    }

    #[test]
    fn identity_map() {
        let p = parse_map("map (x,y,z) -> (x, y, z)").unwrap();
        assert_eq!(p.eval(&[0.5, -2.0, 7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn log_on_half_line() {
        let p = parse_map("map (x) on x in (0, inf) -> (log(x))").unwrap();
        assert_eq!(p.domain().intervals()[0].lo, 0.0);
        assert!(p.eval(&[1.0]).unwrap()[0].abs() < 1e-15);
        assert!(matches!(p.eval(&[-1.0]), Err(Error::Domain { .. })));
        // the boundary itself is outside an open domain
        assert!(matches!(p.eval(&[0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn runtime_division_by_zero() {
        let p = parse_map("map (x) on x in (-1, 1) -> (1/x)").unwrap();
        assert!(matches!(p.eval(&[0.0]), Err(Error::Evaluation(_))));
        assert!(matches!(p.jet(&[0.0], 2), Err(Error::Evaluation(_))));
        assert!((p.eval(&[0.5]).unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_undefined_operations_are_rejected() {
        for src in [
            "map (x) -> (x / 0)",
            "map (x) -> (log(-1))",
            "map (x) -> (sqrt(-2 - x^2))",
            "map (x) on x in (-inf, 0) -> (log(x))",
            "map (x) -> ((x - x) * 0 + 1 / (0 * x))",
        ] {
            assert!(
                matches!(parse_map(src), Err(Error::UndefinedOnDomain(_))),
                "{src}"
            );
        }
        // undefined somewhere but not everywhere is fine
        assert!(parse_map("map (x) -> (1 / x)").is_ok());
    }

    #[test]
    fn pretty_print_round_trip() {
        for src in [
            "map (x,y) -> (x, y^2)",
            "map (x) on x in (0, inf) -> (log(x) * -3 + sin(x)^-2)",
            "map (u, v) on u in (-1, 2.5), v in (-inf, 1e-3) -> (exp(u - v) / (1 + v^2), sqrt(u + 2), cos(pi*u))",
            "map (a) -> (-(a + 1)^3 - -2)",
        ] {
            let p = parse_map(src).unwrap();
            let printed = p.to_string();
            let q = parse_map(&printed).unwrap();
            assert_eq!(p, q, "{src} -> {printed}");
        }
    }

    #[test]
    fn jet_and_plain_agree() {
        let p = parse_map("map (x,y) -> (sin(x)*y + exp(y)/(2 + x^2), sqrt(3 + x*y))").unwrap();
        let x = [0.3, -0.7];
        let plain = p.eval(&x).unwrap();
        let jet = p.jet(&x, 3).unwrap();
        for (a, b) in plain.iter().zip(jet.values()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn hash_consing_shares_subexpressions() {
        let p = parse_map("map (x) -> (x^2 + x^2, x^2)").unwrap();
        // x, 2-power node, sum
        assert_eq!(p.nodes().len(), 3);
    }
}
