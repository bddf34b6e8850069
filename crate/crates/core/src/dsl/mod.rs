//! The map definition language: parsing, compilation and evaluation.

mod domain;
mod parser;
mod program;

pub use domain::{BoxDomain, Interval, SearchBox};
pub use parser::{parse_ast, Expr, Func, MapAst};
pub use program::{
    compile, default_vars, eval_program, parse_map, EvalInput, EvalOutput, Field, Guard,
    MapProgram, Node, ProgramBuilder,
};
