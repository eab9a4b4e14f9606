use std::fmt;
use std::io::Write;

use crate::env::TypeEnvironment;
use crate::eval::{EvalError, Evaluator, DEFAULT_MAX_DEPTH};
use crate::expr::{Annotation, Expr};
use crate::infer::{self, generalize, InferContext, InferError, Mode};
use crate::lexer::{tokenize, Span, TokenKind};
use crate::parser::{parse_statement, ParseError, Statement};
use crate::prelude::install_prelude;
use crate::proc::{self, CommandLookup, PathLookup, Sink};
use crate::rewrite::{normalize, RewriteError};
use crate::types::{alpha_eq, PlaceholderSupply, Type};
use crate::value::{ByteSource, HostError, StreamHandle, Value};

use super::render::{render, summary};

/// Which stage rejected a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Lex,
    Parse,
    Rewrite,
    Type,
    Eval,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Lex => "syntax error",
            Stage::Parse => "parse error",
            Stage::Rewrite => "operator error",
            Stage::Type => "type error",
            Stage::Eval => "runtime error",
        })
    }
}

/// An error report for one input line, with the offending span marked.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub stage: Stage,
    pub message: String,
    pub span: Option<Span>,
    pub line: String,
}

impl Diagnostic {
    fn new(stage: Stage, message: impl ToString, span: Option<Span>, line: &str) -> Self {
        Diagnostic {
            stage,
            message: message.to_string(),
            span,
            line: line.to_string(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)?;
        let Some(span) = self.span.filter(|s| s.end <= self.line.len() && s.start <= s.end) else {
            return Ok(());
        };
        if !self.line.is_char_boundary(span.start) || !self.line.is_char_boundary(span.end) {
            return Ok(());
        }
        let col = self.line[..span.start].chars().count();
        let width = self.line[span.start..span.end].chars().count().max(1);
        write!(
            f,
            "\n  | {}\n  | {}{}",
            self.line,
            " ".repeat(col),
            "^".repeat(width)
        )
    }
}

impl std::error::Error for Diagnostic {}

/// Which intermediate forms to print before each result.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpFlags {
    pub ast: bool,
    pub rewritten: bool,
    pub types: bool,
}

/// One shell session: the environment plus everything that must persist
/// across lines.
pub struct Session {
    env: TypeEnvironment,
    supply: PlaceholderSupply,
    commands: Box<dyn CommandLookup>,
    pub mode: Mode,
    pub dump: DumpFlags,
    /// Where command output goes when a result is rendered.
    pub sink: Sink,
    pub max_depth: usize,
}

impl Session {
    /// A session with the standard prelude and `PATH` command lookup.
    pub fn new(mode: Mode) -> Self {
        Self::with_env(install_prelude(&TypeEnvironment::new()), mode)
    }

    /// A session over `env` as given.
    pub fn with_env(env: TypeEnvironment, mode: Mode) -> Self {
        Session {
            env,
            supply: PlaceholderSupply::new(),
            commands: Box::new(PathLookup::new()),
            mode,
            dump: DumpFlags::default(),
            sink: Sink::Capture,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn with_commands(mut self, commands: Box<dyn CommandLookup>) -> Self {
        self.commands = commands;
        self
    }

    pub fn env(&self) -> &TypeEnvironment {
        &self.env
    }

    /// Evaluates one logical line and writes its rendering to `out`.
    /// On error the environment is left exactly as it was.
    pub fn eval_line(&mut self, line: &str, out: &mut dyn Write) -> Result<(), Diagnostic> {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return Ok(());
        }
        let tokens = tokenize(line).map_err(|e| Diagnostic::new(Stage::Lex, &e, Some(e.span()), line))?;
        let stmt = parse_statement(&tokens).map_err(|e| parse_diag(&e, line))?;
        match stmt {
            Statement::Expr(expr) => {
                let (value, ty) = self.evaluate(&expr, line, out)?;
                let (value, ty) = self.run_if_command(value, ty, line)?;
                render(&value, &ty, self.mode, self.sink, out)
                    .map_err(|e| Diagnostic::new(Stage::Eval, e, Some(expr.span()), line))?;
            }
            Statement::Bind(bind) => {
                let body = match (&bind.annotation, bind.body.annotation()) {
                    (Some(ann), Annotation::Unknown) => {
                        bind.body.with_annotation(Annotation::Syntax(ann.clone()))
                    }
                    (Some(_), _) => {
                        return Err(Diagnostic::new(
                            Stage::Parse,
                            "annotate either the name or the value, not both",
                            Some(bind.span),
                            line,
                        ))
                    }
                    (None, _) => bind.body.clone(),
                };
                let (value, ty) = self.evaluate(&body, line, out)?;
                let scheme = generalize(&ty, &self.env);
                let stored = value.with_type(scheme.ty.clone());
                let mut env = self.env.clone();
                env.retain_in_place(&bind.name, |b| {
                    b.is_parameter() || !b.ty().is_some_and(|t| alpha_eq(t, &ty))
                });
                env.bind_in_place(&bind.name, bind.attrs, stored);
                self.env = env;
                if self.mode == Mode::Repl {
                    writeln!(out, "{} : {} = {}", bind.name, ty.pretty(), summary(&value))
                        .map_err(|e| Diagnostic::new(Stage::Eval, e, None, line))?;
                }
            }
        }
        self.record_status();
        Ok(())
    }

    /// Like [`Session::eval_line`], collecting the output as text.
    pub fn eval_to_string(&mut self, line: &str) -> Result<String, Diagnostic> {
        let mut buf = Vec::new();
        self.eval_line(line, &mut buf)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }

    fn evaluate(
        &mut self,
        expr: &Expr,
        line: &str,
        out: &mut dyn Write,
    ) -> Result<(Expr, Type), Diagnostic> {
        let dump = |out: &mut dyn Write, label: &str, text: String| {
            let _ = writeln!(out, "{label}: {text}");
        };
        if self.dump.ast {
            dump(out, "ast", expr.to_string());
        }
        let rewritten = normalize(expr, &self.env).map_err(|e| rewrite_diag(&e, line))?;
        if self.dump.rewritten {
            dump(out, "rewritten", rewritten.to_string());
        }
        let mut ctx = InferContext::new(&mut self.supply, self.mode).with_commands(&*self.commands);
        let typed = infer::infer(&rewritten, &self.env, &mut ctx).map_err(|e| infer_diag(&e, line))?;
        let ty = typed.ty().cloned().expect("inferred tree is typed");
        if self.dump.types {
            dump(out, "types", format!("{typed} : {}", ty.pretty()));
        }
        let value = Evaluator::new()
            .with_max_depth(self.max_depth)
            .reduce(&typed)
            .map_err(|e| eval_diag(&e, line, expr.span()))?;
        Ok((value, ty))
    }

    /// A bare command (or anything awaiting only standard input) runs with
    /// empty input so that `ls` on its own lists the directory.
    fn run_if_command(&self, value: Expr, ty: Type, line: &str) -> Result<(Expr, Type), Diagnostic> {
        let Type::Arrow(param, result) = &ty else {
            return Ok((value, ty));
        };
        if !param.is_named(crate::types::BYTE_STREAM_IN) {
            return Ok((value, ty));
        }
        let input = Expr::constant(Value::ByteStreamIn(StreamHandle::new(ByteSource::Empty)));
        let applied = Expr::apply(value, input).with_type((**result).clone());
        let value = Evaluator::new()
            .with_max_depth(self.max_depth)
            .reduce(&applied)
            .map_err(|e| eval_diag(&e, line, Span::new(0, line.len())))?;
        Ok((value, (**result).clone()))
    }

    fn record_status(&mut self) {
        if let Some(code) = proc::last_status() {
            let mut env = self.env.clone();
            env.retain_in_place("lastStatus", |_| false);
            env.bind_in_place("lastStatus", None, Expr::constant(Value::ExitStatus(code)));
            self.env = env;
        }
    }

    /// True when `text` cannot be complete yet: an unclosed bracket or
    /// string, or a trailing infix operator.
    pub fn needs_more(&self, text: &str) -> bool {
        let tokens = match tokenize(text) {
            Ok(t) => t,
            Err(crate::lexer::LexError::UnterminatedString(_)) => return true,
            Err(_) => return false,
        };
        let depth: i32 = tokens
            .iter()
            .map(|t| match t.kind {
                TokenKind::OpenParen => 1,
                TokenKind::CloseParen => -1,
                _ => 0,
            })
            .sum();
        if depth > 0 {
            return true;
        }
        tokens.last().is_some_and(|t| {
            matches!(t.kind, TokenKind::Symbol | TokenKind::Identity)
                && t.text != "="
                && self.env.is_infix(&t.text)
        })
    }
}

fn parse_diag(e: &ParseError, line: &str) -> Diagnostic {
    Diagnostic::new(Stage::Parse, e, e.span(), line)
}

fn rewrite_diag(e: &RewriteError, line: &str) -> Diagnostic {
    Diagnostic::new(Stage::Rewrite, e, Some(e.span()), line)
}

fn infer_diag(e: &InferError, line: &str) -> Diagnostic {
    Diagnostic::new(Stage::Type, e, Some(e.span()), line)
}

fn eval_diag(e: &EvalError, line: &str, fallback: Span) -> Diagnostic {
    Diagnostic::new(Stage::Eval, e, Some(e.span().unwrap_or(fallback)), line)
}

impl From<HostError> for Diagnostic {
    fn from(e: HostError) -> Self {
        Diagnostic::new(Stage::Eval, e, None, "")
    }
}
