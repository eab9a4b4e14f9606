//! A typed lambda-calculus engine with overloaded bindings and typed
//! external commands, plus the interactive shell built on it.

pub mod env;
pub mod expr;
pub mod lexer;
pub mod parser;
pub mod proc;
pub mod rewrite;
pub mod types;
pub mod value;
pub mod infer;
pub mod eval;
pub mod prelude;
pub mod shell;
