//! Hindley-Milner inference over the expression tree, with overload
//! resolution for names bound more than once.
//!
//! Every resolved occurrence of a bound name is replaced in the output by
//! the chosen bound value, annotated with the type of that use site.
//! Lambda parameters stay as variables.

mod overload;
mod unify;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use overload::{rank_literal, resolve_overloads, Mode, OverloadCandidate, OverloadError};
pub use unify::{unify, Substitution, UnifyError};

use crate::env::{Binding, TypeEnvironment};
use crate::expr::{Annotation, Expr, HostImpl, Name, Node};
use crate::lexer::Span;
use crate::proc::{self, CommandLookup};
use crate::types::{PlaceholderSupply, Type};
use crate::value::Value;
use overload::{choose, describe, Fitting};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferError {
    #[error("unbound identifier `{name}`")]
    Unbound { name: String, span: Span },
    #[error("ambiguous result type {types} for `{name}`; add a type annotation")]
    Ambiguous {
        name: String,
        types: String,
        span: Span,
    },
    #[error("no overload of `{name}` has type {ty}")]
    NoOverload {
        name: String,
        ty: String,
        span: Span,
    },
    #[error("{source}")]
    Unify { source: UnifyError, span: Span },
    #[error("invalid type annotation: {message}")]
    Annotation { message: String, span: Span },
    #[error("{message}")]
    Lambda { message: String, span: Span },
    #[error("`=` binds a name only at the start of a line")]
    BindInExpression { span: Span },
}

impl InferError {
    pub fn span(&self) -> Span {
        match self {
            InferError::Unbound { span, .. }
            | InferError::Ambiguous { span, .. }
            | InferError::NoOverload { span, .. }
            | InferError::Unify { span, .. }
            | InferError::Annotation { span, .. }
            | InferError::Lambda { span, .. }
            | InferError::BindInExpression { span } => *span,
        }
    }
}

/// A type with universally quantified placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub quantified: BTreeSet<u32>,
    pub ty: Type,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.quantified.is_empty() {
            return f.write_str(&self.ty.pretty());
        }
        // Quantified names follow the order `pretty` assigns them.
        let names = self.ty.pretty();
        let mut order = Vec::new();
        collect_order(&self.ty, &mut order);
        let letters: Vec<String> = order
            .iter()
            .filter(|v| self.quantified.contains(v))
            .map(|v| {
                let idx = order.iter().position(|o| o == v).unwrap_or(0);
                letter(idx)
            })
            .collect();
        write!(f, "∀{}. {}", letters.join(" "), names)
    }
}

fn collect_order(t: &Type, out: &mut Vec<u32>) {
    match t {
        Type::Var(v) if !out.contains(v) => out.push(*v),
        Type::App(a, b) | Type::Arrow(a, b) => {
            collect_order(a, out);
            collect_order(b, out);
        }
        _ => {}
    }
}

fn letter(i: usize) -> String {
    let c = (b'a' + (i % 26) as u8) as char;
    if i < 26 {
        c.to_string()
    } else {
        format!("{c}{}", i / 26)
    }
}

/// Quantifies the placeholders of `ty` that are not fixed by a lambda
/// parameter visible in `env`.
pub fn generalize(ty: &Type, env: &TypeEnvironment) -> Scheme {
    let fixed = env.parameter_placeholders();
    Scheme {
        quantified: ty.vars().difference(&fixed).copied().collect(),
        ty: ty.clone(),
    }
}

/// Replaces quantified placeholders with fresh ones.
pub fn instantiate(scheme: &Scheme, supply: &mut PlaceholderSupply) -> Type {
    let map: HashMap<u32, Type> = scheme
        .quantified
        .iter()
        .map(|v| (*v, supply.fresh()))
        .collect();
    scheme.ty.rename_vars(&map)
}

/// Per-call settings and the session's placeholder supply.
pub struct InferContext<'a> {
    pub supply: &'a mut PlaceholderSupply,
    pub mode: Mode,
    /// Consulted for names the environment does not bind.
    pub commands: Option<&'a dyn CommandLookup>,
}

impl<'a> InferContext<'a> {
    pub fn new(supply: &'a mut PlaceholderSupply, mode: Mode) -> Self {
        InferContext {
            supply,
            mode,
            commands: None,
        }
    }

    pub fn with_commands(mut self, commands: &'a dyn CommandLookup) -> Self {
        self.commands = Some(commands);
        self
    }
}

/// Infers `expr` (already normalized) and returns it fully typed: every
/// node's annotation holds its type with the final substitution applied.
pub fn infer(
    expr: &Expr,
    env: &TypeEnvironment,
    ctx: &mut InferContext<'_>,
) -> Result<Expr, InferError> {
    let mut session = Session {
        ctx,
        subst: Substitution::new(),
        pending: Vec::new(),
        chosen: HashMap::new(),
        annotation_vars: HashMap::new(),
    };
    let typed = session.infer(expr, env, 0)?;
    session.resolve_pending()?;
    Ok(session.zonk(&typed))
}

/// Convenience: infer with no command fallback and return just the type.
pub fn infer_type(expr: &Expr, env: &TypeEnvironment, mode: Mode) -> Result<Type, InferError> {
    let mut supply = PlaceholderSupply::new();
    let mut ctx = InferContext::new(&mut supply, mode);
    let typed = infer(expr, env, &mut ctx)?;
    Ok(typed.ty().cloned().expect("inferred tree is typed"))
}

struct Candidate {
    value: Expr,
    ty: Type,
    registration: usize,
    priority: Option<u32>,
}

struct Pending {
    occ: u32,
    name: Name,
    ty: Type,
    argc: usize,
    span: Span,
    candidates: Vec<Candidate>,
}

struct Session<'c, 'a> {
    ctx: &'c mut InferContext<'a>,
    subst: Substitution,
    pending: Vec<Pending>,
    chosen: HashMap<u32, Expr>,
    annotation_vars: HashMap<Name, Type>,
}

fn typed(e: &Expr, node: Node, ty: Type) -> Expr {
    Expr::new(node, Annotation::Type(ty), e.span())
}

impl Session<'_, '_> {
    fn fresh(&mut self) -> Type {
        self.ctx.supply.fresh()
    }

    fn unify_at(&mut self, expected: &Type, found: &Type, span: Span) -> Result<(), InferError> {
        self.subst
            .unify(expected, found)
            .map_err(|source| InferError::Unify { source, span })
    }

    /// `argc` is the number of arguments this term is applied to.
    fn infer(&mut self, e: &Expr, env: &TypeEnvironment, argc: usize) -> Result<Expr, InferError> {
        let out = self.infer_node(e, env, argc)?;
        if let Annotation::Syntax(a) = e.annotation() {
            let want = self.annotation_type(a, env)?;
            let have = out.ty().cloned().expect("typed");
            self.unify_at(&want, &have, e.span())?;
        }
        Ok(out)
    }

    fn infer_node(
        &mut self,
        e: &Expr,
        env: &TypeEnvironment,
        argc: usize,
    ) -> Result<Expr, InferError> {
        match e.node() {
            Node::Variable(name) => self.variable(e, name, env, argc),
            Node::Constant(v) => Ok(typed(e, e.node().clone(), v.type_of())),
            Node::Apply(f, a) => {
                if let Some(lambda) = self.arrow_sugar(e, env)? {
                    return self.infer(&lambda, env, argc);
                }
                let tf = self.infer(f, env, argc + 1)?;
                let ta = self.infer(a, env, 0)?;
                let r = self.fresh();
                let want = Type::arrow(ta.ty().cloned().expect("typed"), r.clone());
                let have = tf.ty().cloned().expect("typed");
                self.unify_at(&want, &have, e.span())?;
                Ok(typed(e, Node::Apply(tf, ta), r))
            }
            Node::Lambda(p, body) => self.lambda(e, p, body, env),
            Node::TypeTerm(t) => Ok(typed(e, e.node().clone(), t.kind().unwrap_or(Type::Star))),
            Node::TypeConstructor { name, arity } => {
                let kind = Type::ctor(name, *arity).kind().unwrap_or(Type::Star);
                Ok(typed(e, e.node().clone(), kind))
            }
            Node::HostFunction(h) => {
                self.reject_special(&h.imp, e.span())?;
                let scheme = generalize(&h.signature, &TypeEnvironment::new());
                let ty = instantiate(&scheme, self.ctx.supply);
                Ok(typed(e, e.node().clone(), ty))
            }
            Node::Command(c) => Ok(typed(e, e.node().clone(), c.signature())),
            Node::Placeholder(_) => Ok(e.clone()),
        }
    }

    fn reject_special(&self, imp: &HostImpl, span: Span) -> Result<(), InferError> {
        match imp {
            HostImpl::Arrow => Err(InferError::Lambda {
                message: "`->` needs a parameter on its left and a body on its right".into(),
                span,
            }),
            HostImpl::Bind => Err(InferError::BindInExpression { span }),
            HostImpl::Native(_) => Ok(()),
        }
    }

    fn is_arrow_operator(&self, head: &Expr, env: &TypeEnvironment) -> bool {
        let Some(name) = head.as_variable() else {
            return false;
        };
        match env.lookup(name) {
            Some([b]) => matches!(
                b.value.node(),
                Node::HostFunction(h) if matches!(h.imp, HostImpl::Arrow)
            ),
            _ => false,
        }
    }

    /// `-> p body a1 a2 ...` becomes `(Lambda p body) a1 a2 ...`.
    fn arrow_sugar(&self, e: &Expr, env: &TypeEnvironment) -> Result<Option<Expr>, InferError> {
        let (head, args) = e.spine();
        if args.len() < 2 || !self.is_arrow_operator(&head, env) {
            return Ok(None);
        }
        let param = lambda_parameter(&args[0], env)?;
        let mut out = Expr::new(
            Node::Lambda(param, args[1].clone()),
            Annotation::Unknown,
            head.span().join(args[1].span()),
        );
        for a in &args[2..] {
            out = Expr::apply(out, a.clone());
        }
        Ok(Some(out.with_annotation(e.annotation().clone()).with_span(e.span())))
    }

    fn lambda(
        &mut self,
        e: &Expr,
        p: &Expr,
        body: &Expr,
        env: &TypeEnvironment,
    ) -> Result<Expr, InferError> {
        let name = p.as_variable().ok_or_else(|| InferError::Lambda {
            message: "lambda parameter must be an identifier".into(),
            span: p.span(),
        })?;
        let tp = match p.annotation() {
            Annotation::Syntax(a) => self.annotation_type(a, env)?,
            Annotation::Type(t) => t.clone(),
            Annotation::Unknown => self.fresh(),
        };
        let param = Expr::new(Node::Variable(name.clone()), Annotation::Type(tp.clone()), p.span());
        let inner = env.push_scope().bind(name, None, param.clone());
        let tb = self.infer(body, &inner, 0)?;
        let ty = Type::arrow(tp, tb.ty().cloned().expect("typed"));
        Ok(typed(e, Node::Lambda(param, tb), ty))
    }

    fn variable(
        &mut self,
        e: &Expr,
        name: &Name,
        env: &TypeEnvironment,
        argc: usize,
    ) -> Result<Expr, InferError> {
        if let Some(bindings) = env.lookup(name) {
            if let [b] = bindings {
                if b.is_parameter() {
                    let ty = b.ty().cloned().expect("parameters are typed");
                    return Ok(typed(e, e.node().clone(), ty));
                }
                if let Node::HostFunction(h) = b.value.node() {
                    self.reject_special(&h.imp, e.span())?;
                }
            }
            let candidates = bindings
                .iter()
                .enumerate()
                .map(|(i, b)| Candidate {
                    value: b.value.clone(),
                    ty: self.instantiate_binding(b, env),
                    registration: i,
                    priority: None,
                })
                .collect();
            return Ok(self.occurrence(e, name, candidates, argc));
        }
        if let Some(lookup) = self.ctx.commands {
            if let Some(spec) = lookup.resolve(name) {
                let mut candidates = Vec::new();
                for str_args in [Some(argc), argc.checked_sub(1)].into_iter().flatten() {
                    for w in proc::wrap_command(name, &spec, env, str_args) {
                        candidates.push(Candidate {
                            registration: candidates.len(),
                            ty: w.ty,
                            value: w.value,
                            priority: Some(w.priority),
                        });
                    }
                }
                return Ok(self.occurrence(e, name, candidates, argc));
            }
        }
        if name.contains('.') {
            // Bare words such as file names read as strings.
            let v = Value::str(&**name);
            return Ok(typed(e, Node::Constant(v), Type::str()));
        }
        Err(InferError::Unbound {
            name: name.to_string(),
            span: e.span(),
        })
    }

    fn instantiate_binding(&mut self, b: &Binding, env: &TypeEnvironment) -> Type {
        let Some(ty) = b.ty() else {
            return self.fresh();
        };
        let fixed: BTreeSet<u32> = env
            .parameter_placeholders()
            .into_iter()
            .flat_map(|v| self.subst.apply(&Type::Var(v)).vars())
            .collect();
        let scheme = Scheme {
            quantified: ty.vars().difference(&fixed).copied().collect(),
            ty: ty.clone(),
        };
        instantiate(&scheme, self.ctx.supply)
    }

    fn occurrence(
        &mut self,
        e: &Expr,
        name: &Name,
        mut candidates: Vec<Candidate>,
        argc: usize,
    ) -> Expr {
        let occ = self.ctx.supply.fresh_id();
        let ty = if candidates.len() == 1 {
            let c = candidates.pop().expect("one candidate");
            self.chosen.insert(occ, c.value);
            c.ty
        } else {
            let ty = self.fresh();
            self.pending.push(Pending {
                occ,
                name: name.clone(),
                ty: ty.clone(),
                argc,
                span: e.span(),
                candidates,
            });
            ty
        };
        typed(e, Node::Placeholder(occ), ty)
    }

    fn fitting(&self, p: &Pending) -> Vec<(usize, Fitting)> {
        p.candidates
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let mut s = self.subst.clone();
                s.unify(&c.ty, &p.ty).ok()?;
                let full = s.apply(&c.ty);
                let remaining = full.after_params(p.argc).unwrap_or(full);
                Some((
                    i,
                    Fitting {
                        registration: c.registration,
                        conversion_priority: c.priority,
                        remaining,
                    },
                ))
            })
            .collect()
    }

    fn commit(&mut self, idx: usize, pick: usize) -> Result<(), InferError> {
        let p = self.pending.remove(idx);
        let c = &p.candidates[pick];
        self.unify_at(&c.ty, &p.ty, p.span)?;
        self.chosen.insert(p.occ, c.value.clone());
        Ok(())
    }

    /// Settles every overloaded occurrence: first those that only one
    /// candidate fits, then stuck ones in source order by tie-break.
    fn resolve_pending(&mut self) -> Result<(), InferError> {
        loop {
            let mut progressed = false;
            let mut i = 0;
            while i < self.pending.len() {
                let fits = self.fitting(&self.pending[i]);
                match fits.len() {
                    0 => {
                        let p = &self.pending[i];
                        return Err(InferError::NoOverload {
                            name: p.name.to_string(),
                            ty: self.subst.apply(&p.ty).pretty(),
                            span: p.span,
                        });
                    }
                    1 => {
                        self.commit(i, fits[0].0)?;
                        progressed = true;
                    }
                    _ => i += 1,
                }
            }
            if self.pending.is_empty() {
                return Ok(());
            }
            if progressed {
                continue;
            }
            let fits = self.fitting(&self.pending[0]);
            let options: Vec<Fitting> = fits.iter().map(|(_, f)| f.clone()).collect();
            match choose(&options, self.ctx.mode) {
                Some(k) => self.commit(0, fits[k].0)?,
                None => {
                    let p = &self.pending[0];
                    return Err(InferError::Ambiguous {
                        name: p.name.to_string(),
                        types: describe(options.into_iter().map(|f| f.remaining)),
                        span: p.span,
                    });
                }
            }
        }
    }

    fn annotation_error(message: impl Into<String>, span: Span) -> InferError {
        InferError::Annotation {
            message: message.into(),
            span,
        }
    }

    /// Reads a syntactic annotation as a type.
    fn annotation_type(&mut self, a: &Expr, env: &TypeEnvironment) -> Result<Type, InferError> {
        let t = self.annotation_type_inner(a, env)?;
        if let Annotation::Syntax(k) = a.annotation() {
            let want = self.annotation_type(k, env)?;
            let kind = t.kind().unwrap_or(Type::Star);
            self.unify_at(&want, &kind, a.span())?;
        }
        Ok(t)
    }

    fn annotation_type_inner(
        &mut self,
        a: &Expr,
        env: &TypeEnvironment,
    ) -> Result<Type, InferError> {
        match a.node() {
            Node::Variable(n) if &**n == "*" => Ok(Type::Star),
            Node::Variable(n) => match env.lookup(n) {
                Some(list) => match list.last().map(|b| b.value.node()) {
                    Some(Node::TypeTerm(t)) => Ok(t.clone()),
                    Some(Node::TypeConstructor { name, arity }) => Ok(Type::ctor(name, *arity)),
                    _ => Err(Self::annotation_error(format!("`{n}` is not a type"), a.span())),
                },
                None if n.starts_with(|c: char| c.is_lowercase()) => {
                    if let Some(t) = self.annotation_vars.get(n) {
                        return Ok(t.clone());
                    }
                    let t = self.fresh();
                    self.annotation_vars.insert(n.clone(), t.clone());
                    Ok(t)
                }
                None => Err(Self::annotation_error(format!("unknown type `{n}`"), a.span())),
            },
            Node::TypeTerm(t) => Ok(t.clone()),
            Node::TypeConstructor { name, arity } => Ok(Type::ctor(name, *arity)),
            Node::Apply(..) => {
                let (head, args) = a.spine();
                if head.as_variable().is_some_and(|n| &**n == "->") && args.len() == 2 {
                    let from = self.annotation_type(&args[0], env)?;
                    let to = self.annotation_type(&args[1], env)?;
                    return Ok(Type::arrow(from, to));
                }
                let mut t = self.annotation_type(&head, env)?;
                for arg in &args {
                    let ta = self.annotation_type(arg, env)?;
                    let fits = match (t.kind(), ta.kind()) {
                        (Some(Type::Arrow(k, _)), Some(ka)) => *k == ka || matches!(ta, Type::Var(_)),
                        _ => matches!(t, Type::Var(_)),
                    };
                    if !fits {
                        return Err(Self::annotation_error(
                            format!("`{t}` cannot be applied to `{ta}`"),
                            arg.span(),
                        ));
                    }
                    t = Type::app(t, ta);
                }
                Ok(t)
            }
            _ => Err(Self::annotation_error(
                format!("`{a}` is not a type"),
                a.span(),
            )),
        }
    }

    fn zonk(&self, e: &Expr) -> Expr {
        let ty = self.subst.apply(e.ty().expect("typed during inference"));
        match e.node() {
            Node::Placeholder(occ) => self
                .chosen
                .get(occ)
                .expect("every occurrence resolved")
                .with_type(ty)
                .with_span(e.span()),
            Node::Apply(f, a) => typed(e, Node::Apply(self.zonk(f), self.zonk(a)), ty),
            Node::Lambda(p, b) => typed(e, Node::Lambda(self.zonk(p), self.zonk(b)), ty),
            _ => e.with_annotation(Annotation::Type(ty)),
        }
    }
}

/// The parameter of an arrow: an identifier, optionally annotated, or the
/// same written after `fun`.
fn lambda_parameter(p: &Expr, env: &TypeEnvironment) -> Result<Expr, InferError> {
    if p.as_variable().is_some() {
        return Ok(p.clone());
    }
    if let Node::Apply(f, x) = p.node() {
        if f.as_variable().is_some_and(|n| &**n == "fun" && env.lookup(n).is_none())
            && x.as_variable().is_some()
        {
            return Ok(x.clone());
        }
    }
    Err(InferError::Lambda {
        message: format!("lambda parameter must be an identifier, found `{p}`"),
        span: p.span(),
    })
}
