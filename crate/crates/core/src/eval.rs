//! β-reduction of typed trees.
//!
//! [`reduce`] evaluates call-by-value to weak head normal form: arguments
//! are reduced left to right before a lambda or host function receives
//! them, and lambda bodies are left alone until applied. Saturated host
//! functions run their implementation; saturated commands become lazy
//! pipeline plans that run when drained.
//!
//! [`normalize_term`] reduces everywhere, including under lambdas, with a
//! step budget and a choice of strategy.

use std::collections::HashSet;

use thiserror::Error;

use crate::env::TypeEnvironment;
use crate::expr::{Annotation, Expr, HostImpl, Name, Node};
use crate::lexer::Span;
use crate::types::Type;
use crate::value::{Stage, StreamHandle, Value};

pub const DEFAULT_MAX_DEPTH: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{message}")]
    Host { message: String, span: Span },
    #[error("evaluation nested deeper than {limit} levels")]
    Depth { limit: usize, span: Span },
    #[error("`{found}` is not a function")]
    NotAFunction { found: String, span: Span },
    #[error("no normal form within {limit} steps")]
    StepLimit { limit: usize },
    #[error("unresolved placeholder {0} reached evaluation")]
    Unresolved(u32),
}

impl EvalError {
    pub fn span(&self) -> Option<Span> {
        match self {
            EvalError::Host { span, .. }
            | EvalError::Depth { span, .. }
            | EvalError::NotAFunction { span, .. } => Some(*span),
            EvalError::StepLimit { .. } | EvalError::Unresolved(_) => None,
        }
    }
}

/// Order in which [`normalize_term`] picks redexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Leftmost-outermost first.
    NormalOrder,
    /// Leftmost-innermost first.
    Applicative,
}

#[derive(Debug, Clone)]
pub struct Evaluator<'e> {
    env: Option<&'e TypeEnvironment>,
    max_depth: usize,
}

impl Default for Evaluator<'_> {
    fn default() -> Self {
        Evaluator {
            env: None,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Reduces `expr` to a value form. Free variables bound once in `env`
/// (trees that skipped inference) are looked up there.
pub fn reduce(expr: &Expr, env: &TypeEnvironment) -> Result<Expr, EvalError> {
    Evaluator::new().with_env(env).reduce(expr)
}

impl<'e> Evaluator<'e> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_env(mut self, env: &'e TypeEnvironment) -> Self {
        self.env = Some(env);
        self
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn reduce(&self, expr: &Expr) -> Result<Expr, EvalError> {
        self.eval(expr, 0)
    }

    fn eval(&self, e: &Expr, depth: usize) -> Result<Expr, EvalError> {
        if depth > self.max_depth {
            return Err(EvalError::Depth {
                limit: self.max_depth,
                span: e.span(),
            });
        }
        match e.node() {
            Node::Apply(f, a) => {
                let fv = self.eval(f, depth + 1)?;
                let av = self.eval(a, depth + 1)?;
                self.apply(e, fv, av, depth + 1)
            }
            Node::Variable(n) => match self.env.and_then(|env| env.lookup(n)) {
                Some([b]) if !b.is_parameter() => Ok(b.value.clone()),
                _ => Ok(e.clone()),
            },
            Node::Placeholder(id) => Err(EvalError::Unresolved(*id)),
            _ => Ok(e.clone()),
        }
    }

    fn apply(&self, app: &Expr, fv: Expr, av: Expr, depth: usize) -> Result<Expr, EvalError> {
        if let Node::Lambda(p, body) = fv.node() {
            let name = p.as_variable().expect("lambda parameter is a variable");
            let next = substitute(body, name, &av);
            return self.eval(&next, depth + 1);
        }
        let partial = Expr::new(Node::Apply(fv, av), app.annotation().clone(), app.span());
        let (head, args) = partial.spine();
        match head.node() {
            Node::HostFunction(h) if args.len() >= h.arity => {
                call_host(&head, &args, app.span())
            }
            Node::Command(c) if args.len() >= c.arity() => run_command(&head, &args, app.span()),
            Node::TypeConstructor { arity, .. } if args.len() >= *arity => {
                apply_type(&head, &args, app.span())
            }
            Node::HostFunction(_) | Node::Command(_) | Node::TypeConstructor { .. } => Ok(partial),
            // Free variables only occur when reducing open terms.
            Node::Variable(_) => Ok(partial),
            _ => Err(EvalError::NotAFunction {
                found: head.to_string(),
                span: app.span(),
            }),
        }
    }
}

fn host_error(message: impl Into<String>, span: Span) -> EvalError {
    EvalError::Host {
        message: message.into(),
        span,
    }
}

fn constant_args(args: &[Expr], span: Span) -> Result<Vec<Value>, EvalError> {
    args.iter()
        .map(|a| {
            a.as_constant()
                .cloned()
                .ok_or_else(|| host_error(format!("expected a value argument, found `{a}`"), span))
        })
        .collect()
}

fn call_host(head: &Expr, args: &[Expr], span: Span) -> Result<Expr, EvalError> {
    let Node::HostFunction(h) = head.node() else {
        unreachable!("caller checked the head");
    };
    match &h.imp {
        HostImpl::Native(f) => {
            let values = constant_args(args, span)?;
            let v = f(&values).map_err(|e| host_error(e.0, span))?;
            Ok(Expr::constant(v).with_span(span))
        }
        HostImpl::Arrow => match args[0].node() {
            Node::Variable(_) => Ok(Expr::new(
                Node::Lambda(args[0].clone(), args[1].clone()),
                Annotation::Unknown,
                span,
            )),
            _ => Err(host_error("lambda parameter must be an identifier", span)),
        },
        HostImpl::Bind => Err(host_error("`=` binds a name only at the start of a line", span)),
    }
}

fn run_command(head: &Expr, args: &[Expr], span: Span) -> Result<Expr, EvalError> {
    let Node::Command(c) = head.node() else {
        unreachable!("caller checked the head");
    };
    let values = constant_args(args, span)?;
    let (strs, input) = values.split_at(c.str_args);
    let args = strs
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| host_error(e.0, span))?;
    let source = input[0]
        .stream_handle()
        .ok_or_else(|| host_error("command input must be a stream", span))?
        .take()
        .map_err(|e| host_error(e.0, span))?;
    let plan = source.pipe_into(Stage {
        spec: c.spec.clone(),
        args,
    });
    Ok(Expr::constant(Value::ByteStreamOut(StreamHandle::new(plan))).with_span(span))
}

fn apply_type(head: &Expr, args: &[Expr], span: Span) -> Result<Expr, EvalError> {
    let Node::TypeConstructor { name, arity } = head.node() else {
        unreachable!("caller checked the head");
    };
    let mut t = Type::ctor(name, *arity);
    for a in args {
        match a.node() {
            Node::TypeTerm(arg) => t = Type::app(t, arg.clone()),
            _ => return Err(host_error(format!("`{a}` is not a type"), span)),
        }
    }
    Ok(Expr::type_term(t).with_span(span))
}

/// Names occurring free in `e`.
pub fn free_vars(e: &Expr) -> HashSet<Name> {
    let mut out = HashSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<Name>, out: &mut HashSet<Name>) {
    match e.node() {
        Node::Variable(n) if !bound.contains(n) => {
            out.insert(n.clone());
        }
        Node::Apply(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        Node::Lambda(p, b) => {
            let name = p.as_variable().expect("lambda parameter is a variable").clone();
            bound.push(name);
            collect_free(b, bound, out);
            bound.pop();
        }
        _ => {}
    }
}

fn fresh_name(base: &str, avoid: &HashSet<Name>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    (1..)
        .map(|i| Name::from(format!("{stem}{i}")))
        .find(|n| !avoid.contains(n))
        .expect("unbounded supply of names")
}

/// Replaces free occurrences of `name` in `body` with `value`, renaming
/// inner binders that would capture a free name of `value`.
pub fn substitute(body: &Expr, name: &str, value: &Expr) -> Expr {
    let value_free = free_vars(value);
    subst(body, name, value, &value_free)
}

fn subst(body: &Expr, name: &str, value: &Expr, value_free: &HashSet<Name>) -> Expr {
    match body.node() {
        Node::Variable(n) if &**n == name => value.clone(),
        Node::Apply(f, a) => {
            let f2 = subst(f, name, value, value_free);
            let a2 = subst(a, name, value, value_free);
            if f2.ptr_eq(f) && a2.ptr_eq(a) {
                body.clone()
            } else {
                body.with_node(Node::Apply(f2, a2))
            }
        }
        Node::Lambda(p, b) => {
            let pn = p.as_variable().expect("lambda parameter is a variable");
            if &**pn == name || !free_vars(b).contains(name) {
                return body.clone();
            }
            let (p, b) = if value_free.contains(pn) {
                let mut avoid = value_free.clone();
                avoid.extend(free_vars(b));
                avoid.insert(Name::from(name));
                let renamed = fresh_name(pn, &avoid);
                let new_param = p.with_node(Node::Variable(renamed.clone()));
                let b = subst(b, pn, &new_param, &HashSet::from([renamed]));
                (new_param, b)
            } else {
                (p.clone(), b.clone())
            };
            let b2 = subst(&b, name, value, value_free);
            body.with_node(Node::Lambda(p, b2))
        }
        _ => body.clone(),
    }
}

/// Reduces everywhere, including under lambdas, until no redex remains or
/// `max_steps` reductions have been made.
pub fn normalize_term(expr: &Expr, strategy: Strategy, max_steps: usize) -> Result<Expr, EvalError> {
    let mut cur = expr.clone();
    for _ in 0..max_steps {
        match step(&cur, strategy)? {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    Err(EvalError::StepLimit { limit: max_steps })
}

fn is_redex(e: &Expr) -> bool {
    let Node::Apply(f, _) = e.node() else {
        return false;
    };
    if matches!(f.node(), Node::Lambda(..)) {
        return true;
    }
    let (head, args) = e.spine();
    match head.node() {
        Node::HostFunction(h) => {
            args.len() >= h.arity && args.iter().all(|a| a.as_constant().is_some())
        }
        Node::TypeConstructor { arity, .. } => {
            args.len() >= *arity && args.iter().all(|a| matches!(a.node(), Node::TypeTerm(_)))
        }
        _ => false,
    }
}

fn contract(e: &Expr) -> Result<Expr, EvalError> {
    let Node::Apply(f, a) = e.node() else {
        unreachable!("redex is an application");
    };
    if let Node::Lambda(p, body) = f.node() {
        let name = p.as_variable().expect("lambda parameter is a variable");
        return Ok(substitute(body, name, a));
    }
    let (head, args) = e.spine();
    match head.node() {
        Node::HostFunction(_) => call_host(&head, &args, e.span()),
        _ => apply_type(&head, &args, e.span()),
    }
}

/// One reduction step, or `None` at normal form.
fn step(e: &Expr, strategy: Strategy) -> Result<Option<Expr>, EvalError> {
    if strategy == Strategy::NormalOrder && is_redex(e) {
        return contract(e).map(Some);
    }
    let inner = match e.node() {
        Node::Apply(f, a) => {
            if let Some(f2) = step(f, strategy)? {
                Some(e.with_node(Node::Apply(f2, a.clone())))
            } else {
                step(a, strategy)?.map(|a2| e.with_node(Node::Apply(f.clone(), a2)))
            }
        }
        Node::Lambda(p, b) => step(b, strategy)?.map(|b2| e.with_node(Node::Lambda(p.clone(), b2))),
        _ => None,
    };
    if inner.is_some() {
        return Ok(inner);
    }
    if strategy == Strategy::Applicative && is_redex(e) {
        return contract(e).map(Some);
    }
    Ok(None)
}
