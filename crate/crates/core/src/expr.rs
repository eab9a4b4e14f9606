//! The uniform expression tree shared by every stage.
//!
//! Every node carries an annotation slot. Before inference it is either empty
//! or a syntactic annotation written by the user (`x : Int`); after inference
//! it holds the node's type. Type terms are annotated with their kind, so an
//! annotation chain is at most `value : type : kind` deep.

use std::fmt;
use std::rc::Rc;

use crate::lexer::Span;
use crate::proc::CommandSpec;
use crate::types::{self, Type};
use crate::value::{quote, HostError, Value};

pub type Name = Rc<str>;

pub type NativeFn = Rc<dyn Fn(&[Value]) -> Result<Value, HostError>>;

/// What a host function does once all of its arguments are present.
#[derive(Clone)]
pub enum HostImpl {
    Native(NativeFn),
    /// Builds a lambda from its parameter and body operands.
    Arrow,
    /// Marker for `=`; only meaningful at the start of a line.
    Bind,
}

#[derive(Clone)]
pub struct HostFunction {
    pub name: Name,
    /// Curried signature; placeholders in it are implicitly quantified.
    pub signature: Type,
    pub arity: usize,
    pub imp: HostImpl,
}

impl HostFunction {
    pub fn native(
        name: &str,
        signature: Type,
        imp: impl Fn(&[Value]) -> Result<Value, HostError> + 'static,
    ) -> Self {
        let arity = signature.uncurry().0.len();
        HostFunction {
            name: Rc::from(name),
            signature,
            arity,
            imp: HostImpl::Native(Rc::new(imp)),
        }
    }

    fn same_impl(&self, other: &HostFunction) -> bool {
        match (&self.imp, &other.imp) {
            (HostImpl::Native(a), HostImpl::Native(b)) => Rc::ptr_eq(a, b),
            (HostImpl::Arrow, HostImpl::Arrow) | (HostImpl::Bind, HostImpl::Bind) => true,
            _ => false,
        }
    }
}

impl fmt::Debug for HostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Host({} : {})", self.name, self.signature)
    }
}

/// An external command with `str_args` leading argument strings, then stdin.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandTerm {
    pub name: Name,
    pub spec: CommandSpec,
    pub str_args: usize,
}

impl CommandTerm {
    pub fn signature(&self) -> Type {
        Type::curried(
            std::iter::repeat_n(Type::str(), self.str_args)
                .chain([Type::con(types::BYTE_STREAM_IN)]),
            Type::con(types::BYTE_STREAM_OUT),
        )
    }

    pub fn arity(&self) -> usize {
        self.str_args + 1
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Variable(Name),
    Constant(Value),
    Apply(Expr, Expr),
    /// Parameter is always a `Variable` node, possibly annotated.
    Lambda(Expr, Expr),
    /// A fully applied type used as a term.
    TypeTerm(Type),
    TypeConstructor { name: Name, arity: usize },
    HostFunction(HostFunction),
    Command(CommandTerm),
    /// Stand-in for a not yet resolved occurrence during inference.
    Placeholder(u32),
}

#[derive(Debug, Clone)]
pub enum Annotation {
    Unknown,
    Syntax(Expr),
    Type(Type),
}

#[derive(Debug)]
pub struct ExprData {
    pub node: Node,
    pub annotation: Annotation,
    pub span: Span,
    /// Written inside parentheses; operator rewriting treats it as one term.
    pub grouped: bool,
}

/// Immutable, cheaply clonable expression tree node.
#[derive(Clone)]
pub struct Expr(Rc<ExprData>);

impl Expr {
    pub fn new(node: Node, annotation: Annotation, span: Span) -> Self {
        Self::build(node, annotation, span, false)
    }

    fn build(node: Node, annotation: Annotation, span: Span, grouped: bool) -> Self {
        Expr(Rc::new(ExprData {
            node,
            annotation,
            span,
            grouped,
        }))
    }

    pub fn from_node(node: Node) -> Self {
        Expr::new(node, Annotation::Unknown, Span::default())
    }

    pub fn var(name: &str) -> Self {
        Expr::from_node(Node::Variable(Rc::from(name)))
    }

    pub fn constant(value: Value) -> Self {
        let ty = value.type_of();
        Expr::new(Node::Constant(value), Annotation::Type(ty), Span::default())
    }

    pub fn apply(f: Expr, a: Expr) -> Self {
        let span = f.span().join(a.span());
        Expr::new(Node::Apply(f, a), Annotation::Unknown, span)
    }

    /// Left-folds `head a1 a2 ...` into nested applications.
    pub fn apply_all(head: Expr, args: impl IntoIterator<Item = Expr>) -> Self {
        args.into_iter().fold(head, Expr::apply)
    }

    pub fn lambda(param: &str, body: Expr) -> Self {
        Expr::from_node(Node::Lambda(Expr::var(param), body))
    }

    pub fn type_term(ty: Type) -> Self {
        let kind = ty.kind().unwrap_or(Type::Star);
        Expr::new(Node::TypeTerm(ty), Annotation::Type(kind), Span::default())
    }

    pub fn type_constructor(name: &str, arity: usize) -> Self {
        let kind = Type::ctor(name, arity).kind().unwrap_or(Type::Star);
        Expr::new(
            Node::TypeConstructor {
                name: Rc::from(name),
                arity,
            },
            Annotation::Type(kind),
            Span::default(),
        )
    }

    pub fn host(f: HostFunction) -> Self {
        let sig = f.signature.clone();
        Expr::new(Node::HostFunction(f), Annotation::Type(sig), Span::default())
    }

    pub fn command(c: CommandTerm) -> Self {
        let sig = c.signature();
        Expr::new(Node::Command(c), Annotation::Type(sig), Span::default())
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn annotation(&self) -> &Annotation {
        &self.0.annotation
    }

    pub fn span(&self) -> Span {
        self.0.span
    }

    /// Inferred type, when the annotation slot holds one.
    pub fn ty(&self) -> Option<&Type> {
        match &self.0.annotation {
            Annotation::Type(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_grouped(&self) -> bool {
        self.0.grouped
    }

    /// Marks the expression as parenthesized.
    pub fn grouped(&self) -> Expr {
        Self::build(self.0.node.clone(), self.0.annotation.clone(), self.0.span, true)
    }

    pub fn with_annotation(&self, annotation: Annotation) -> Expr {
        Self::build(self.0.node.clone(), annotation, self.0.span, self.0.grouped)
    }

    pub fn with_type(&self, ty: Type) -> Expr {
        self.with_annotation(Annotation::Type(ty))
    }

    pub fn with_span(&self, span: Span) -> Expr {
        Self::build(self.0.node.clone(), self.0.annotation.clone(), span, self.0.grouped)
    }

    pub fn with_node(&self, node: Node) -> Expr {
        Self::build(node, self.0.annotation.clone(), self.0.span, self.0.grouped)
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_variable(&self) -> Option<&Name> {
        match self.node() {
            Node::Variable(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_constant(&self) -> Option<&Value> {
        match self.node() {
            Node::Constant(v) => Some(v),
            _ => None,
        }
    }

    /// Head and arguments of a left-nested application spine.
    pub fn spine(&self) -> (Expr, Vec<Expr>) {
        let mut args = Vec::new();
        let mut cur = self.clone();
        loop {
            let next = match cur.node() {
                Node::Apply(f, a) => {
                    args.push(a.clone());
                    f.clone()
                }
                _ => break,
            };
            cur = next;
        }
        args.reverse();
        (cur, args)
    }

    /// Leaf terms in source order.
    pub fn leaves(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Expr>) {
        match self.node() {
            Node::Apply(f, a) => {
                f.collect_leaves(out);
                a.collect_leaves(out);
            }
            Node::Lambda(p, b) => {
                p.collect_leaves(out);
                b.collect_leaves(out);
            }
            _ => out.push(self.clone()),
        }
    }

    /// Node-by-node equality ignoring spans and annotations.
    pub fn same_shape(&self, other: &Expr) -> bool {
        match (self.node(), other.node()) {
            (Node::Apply(f1, a1), Node::Apply(f2, a2))
            | (Node::Lambda(f1, a1), Node::Lambda(f2, a2)) => {
                f1.same_shape(f2) && a1.same_shape(a2)
            }
            (a, b) => leaf_eq(a, b),
        }
    }
}

fn leaf_eq(a: &Node, b: &Node) -> bool {
    match (a, b) {
        (Node::Variable(x), Node::Variable(y)) => x == y,
        (Node::Constant(x), Node::Constant(y)) => x == y,
        (Node::TypeTerm(x), Node::TypeTerm(y)) => x == y,
        (
            Node::TypeConstructor { name: n1, arity: a1 },
            Node::TypeConstructor { name: n2, arity: a2 },
        ) => n1 == n2 && a1 == a2,
        (Node::HostFunction(f), Node::HostFunction(g)) => {
            f.name == g.name && f.arity == g.arity && f.same_impl(g)
        }
        (Node::Command(c), Node::Command(d)) => c == d,
        (Node::Placeholder(x), Node::Placeholder(y)) => x == y,
        _ => false,
    }
}

impl PartialEq for Annotation {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Annotation::Unknown, Annotation::Unknown) => true,
            (Annotation::Syntax(a), Annotation::Syntax(b)) => a == b,
            (Annotation::Type(a), Annotation::Type(b)) => a == b,
            _ => false,
        }
    }
}

/// Structural equality including annotations; spans are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if self.annotation() != other.annotation() {
            return false;
        }
        match (self.node(), other.node()) {
            (Node::Apply(f1, a1), Node::Apply(f2, a2))
            | (Node::Lambda(f1, a1), Node::Lambda(f2, a2)) => f1 == f2 && a1 == a2,
            (a, b) => leaf_eq(a, b),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical text form: node, then children, then the annotation unless it
/// is absent or still a placeholder. Variables without annotation print bare.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ann = match self.annotation() {
            Annotation::Unknown | Annotation::Type(Type::Var(_)) => None,
            Annotation::Syntax(e) => Some(e.to_string()),
            Annotation::Type(t) => Some(t.to_string()),
        };
        let tail = |f: &mut fmt::Formatter<'_>| match &ann {
            Some(a) => write!(f, ", {a})"),
            None => f.write_str(")"),
        };
        match self.node() {
            Node::Variable(n) => match &ann {
                None => f.write_str(n),
                Some(a) => write!(f, "Variable({n}, {a})"),
            },
            Node::Constant(v) => {
                let text = match v {
                    Value::Str(s) => quote(s),
                    other => other.quoted(),
                };
                write!(f, "Constant({text}")?;
                tail(f)
            }
            Node::Apply(func, arg) => {
                write!(f, "Apply({func}, {arg}")?;
                tail(f)
            }
            Node::Lambda(p, body) => {
                write!(f, "Lambda({p}, {body}")?;
                tail(f)
            }
            Node::TypeTerm(t) => {
                write!(f, "Type({t}")?;
                tail(f)
            }
            Node::TypeConstructor { name, .. } => {
                write!(f, "TypeConstructor({name}")?;
                tail(f)
            }
            Node::HostFunction(h) => {
                write!(f, "Host({}", h.name)?;
                tail(f)
            }
            Node::Command(c) => {
                write!(f, "Command({}", c.spec.path.display())?;
                tail(f)
            }
            Node::Placeholder(id) => write!(f, "Placeholder({id})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_of_echo_tree() {
        let tree = Expr::apply_all(
            Expr::var("echo"),
            [
                Expr::constant(Value::str("abc def ghi")),
                Expr::var("|"),
                Expr::var("wc"),
            ],
        );
        assert_eq!(
            tree.to_string(),
            r#"Apply(Apply(Apply(echo, Constant("abc def ghi", Str)), |), wc)"#
        );
    }

    #[test]
    fn annotated_variable_prints_annotation() {
        let foo = Expr::var("foo").with_annotation(Annotation::Syntax(Expr::var("Int")));
        assert_eq!(foo.to_string(), "Variable(foo, Int)");
        let typed = Expr::var("foo").with_type(Type::int());
        assert_eq!(typed.to_string(), "Variable(foo, Int)");
        assert_eq!(Expr::type_term(Type::int()).to_string(), "Type(Int, *)");
        assert_eq!(
            Expr::type_constructor("List", 1).to_string(),
            "TypeConstructor(List, * -> *)"
        );
        assert_eq!(Expr::var("x").with_type(Type::Var(4)).to_string(), "x");
    }

    #[test]
    fn spine_round_trip() {
        let e = Expr::apply_all(Expr::var("a"), [Expr::var("b"), Expr::var("c")]);
        let (h, args) = e.spine();
        assert_eq!(h.to_string(), "a");
        assert_eq!(args.len(), 2);
        assert_eq!(Expr::apply_all(h, args), e);
    }

    #[test]
    fn equality_ignores_spans_but_not_annotations() {
        let a = Expr::var("x").with_span(Span::new(0, 1));
        let b = Expr::var("x").with_span(Span::new(5, 6));
        assert_eq!(a, b);
        assert_ne!(a, b.with_type(Type::int()));
        assert!(a.same_shape(&b.with_type(Type::int())));
    }
}
