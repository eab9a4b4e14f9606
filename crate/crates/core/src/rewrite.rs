//! Operator rewriting driven by bound attributes.
//!
//! The parser folds every term to the left. Before inference, identifiers
//! bound as `INFIX` are moved in front of their operands and `RTL` operators
//! take everything to their right as a single operand.
//!
//! [`normalize`] is what the engine runs: each application spine is split at
//! its infix operators into operand segments, which are then folded in the
//! operators' associativity direction. All operators share one precedence.
//!
//! [`infix_to_prefix`] and [`rotate_right`] are the single-step tree
//! transforms (operator swaps with its immediate left sibling; right rotation
//! groups the remainder). They are exposed for tooling and tests.

use thiserror::Error;

use crate::env::{Associativity, BoundAttributes, TypeEnvironment};
use crate::expr::{Annotation, Expr, Node};
use crate::lexer::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("infix operator `{op}` at {span} has no left operand")]
    NoLeftOperand { op: String, span: Span },
    #[error("operator `{op}` at {span} has no right operand")]
    NoRightOperand { op: String, span: Span },
    #[error(
        "`{left}` and `{right}` associate in different directions; add parentheses (at {span})"
    )]
    MixedAssociativity {
        left: String,
        right: String,
        span: Span,
    },
}

impl RewriteError {
    pub fn span(&self) -> Span {
        match self {
            RewriteError::NoLeftOperand { span, .. }
            | RewriteError::NoRightOperand { span, .. }
            | RewriteError::MixedAssociativity { span, .. } => *span,
        }
    }
}

/// Attributes of `term` when it is an unparenthesized infix identifier.
fn operator(term: &Expr, env: &TypeEnvironment) -> Option<BoundAttributes> {
    if term.is_grouped() {
        return None;
    }
    let name = term.as_variable()?;
    let attrs = env.attributes(name);
    attrs.is_infix().then_some(attrs)
}

fn op_name(term: &Expr) -> String {
    term.as_variable().map(|n| n.to_string()).unwrap_or_default()
}

/// Flattens an application spine without descending into parenthesized groups.
fn terms(expr: &Expr) -> Vec<Expr> {
    let mut args = Vec::new();
    let mut cur = expr.clone();
    loop {
        let next = match cur.node() {
            Node::Apply(f, a) if !cur.is_grouped() || cur.ptr_eq(expr) => {
                args.push(a.clone());
                f.clone()
            }
            _ => break,
        };
        cur = next;
    }
    args.push(cur);
    args.reverse();
    args
}

fn fold(terms: Vec<Expr>) -> Expr {
    let mut it = terms.into_iter();
    let head = it.next().expect("non-empty operand");
    it.fold(head, Expr::apply)
}

/// Copies annotation, span and grouping of `original` onto a rebuilt node.
fn restore(original: &Expr, rebuilt: Expr, annotation: Annotation) -> Expr {
    let e = rebuilt.with_annotation(annotation).with_span(original.span());
    if original.is_grouped() {
        e.grouped()
    } else {
        e
    }
}

fn same_terms(a: &[Expr], b: &[Expr]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.ptr_eq(y))
}

/// Applies `step` to every spine bottom-up, sharing untouched subtrees.
fn bottom_up(
    expr: &Expr,
    env: &TypeEnvironment,
    step: &dyn Fn(Vec<Expr>, &TypeEnvironment) -> Result<Vec<Expr>, RewriteError>,
) -> Result<Expr, RewriteError> {
    let annotation = match expr.annotation() {
        Annotation::Syntax(a) => {
            let a2 = bottom_up(a, env, step)?;
            if a2.ptr_eq(a) {
                expr.annotation().clone()
            } else {
                Annotation::Syntax(a2)
            }
        }
        other => other.clone(),
    };
    let ann_same = !matches!((&annotation, expr.annotation()),
        (Annotation::Syntax(a), Annotation::Syntax(b)) if !a.ptr_eq(b));
    match expr.node() {
        Node::Apply(..) => {
            let original = terms(expr);
            let children = original
                .iter()
                .map(|t| bottom_up(t, env, step))
                .collect::<Result<Vec<_>, _>>()?;
            let rewritten = step(children, env)?;
            if same_terms(&rewritten, &original) && ann_same {
                return Ok(expr.clone());
            }
            Ok(restore(expr, fold(rewritten), annotation))
        }
        Node::Lambda(p, b) => {
            let p2 = bottom_up(p, env, step)?;
            let b2 = bottom_up(b, env, step)?;
            if p2.ptr_eq(p) && b2.ptr_eq(b) && ann_same {
                return Ok(expr.clone());
            }
            Ok(expr
                .with_node(Node::Lambda(p2, b2))
                .with_annotation(annotation))
        }
        _ if ann_same => Ok(expr.clone()),
        _ => Ok(expr.with_annotation(annotation)),
    }
}

fn segment_spine(terms: Vec<Expr>, env: &TypeEnvironment) -> Result<Vec<Expr>, RewriteError> {
    let ops: Vec<(usize, BoundAttributes)> = terms
        .iter()
        .enumerate()
        .skip(1)
        .filter_map(|(i, t)| operator(t, env).map(|a| (i, a)))
        .collect();
    if ops.is_empty() {
        return Ok(terms);
    }
    let assoc = ops[0].1.associativity;
    if let Some(&(j, _)) = ops.iter().find(|(_, a)| a.associativity != assoc) {
        return Err(RewriteError::MixedAssociativity {
            left: op_name(&terms[ops[0].0]),
            right: op_name(&terms[j]),
            span: terms[j].span(),
        });
    }

    let mut segments: Vec<Vec<Expr>> = vec![Vec::new()];
    let mut operators: Vec<Expr> = Vec::new();
    let mut op_iter = ops.iter().map(|(i, _)| *i).peekable();
    for (i, t) in terms.into_iter().enumerate() {
        if op_iter.peek() == Some(&i) {
            op_iter.next();
            if segments.last().is_some_and(Vec::is_empty) {
                return Err(RewriteError::NoLeftOperand {
                    op: op_name(&t),
                    span: t.span(),
                });
            }
            operators.push(t);
            segments.push(Vec::new());
        } else {
            segments.last_mut().expect("at least one segment").push(t);
        }
    }
    if segments.last().is_some_and(Vec::is_empty) {
        let op = operators.last().expect("trailing operator");
        return Err(RewriteError::NoRightOperand {
            op: op_name(op),
            span: op.span(),
        });
    }

    // A bare operator used as an operand keeps behaving as a plain term when
    // the result is rewritten again.
    let mut operands: Vec<Expr> = segments
        .into_iter()
        .map(|seg| match seg.as_slice() {
            [only] if operator(only, env).is_some() => only.grouped(),
            _ => fold(seg),
        })
        .collect();
    let combined = match assoc {
        Associativity::Ltr => {
            let mut rest = operands.into_iter();
            let mut acc = rest.next().expect("left operand");
            for (op, rhs) in operators.into_iter().zip(rest) {
                acc = Expr::apply(Expr::apply(op, acc), rhs);
            }
            acc
        }
        Associativity::Rtl => {
            let mut acc = operands.pop().expect("right operand");
            for op in operators.into_iter().rev() {
                let lhs = operands.pop().expect("left operand");
                acc = Expr::apply(Expr::apply(op, lhs), acc);
            }
            acc
        }
    };
    Ok(terms_of(combined))
}

fn terms_of(expr: Expr) -> Vec<Expr> {
    terms(&expr)
}

/// Rewrites infix and right-associative operators into prefix applications.
/// Idempotent; subtrees without operators are returned shared.
pub fn normalize(expr: &Expr, env: &TypeEnvironment) -> Result<Expr, RewriteError> {
    bottom_up(expr, env, &segment_spine)
}

fn swap_spine(mut terms: Vec<Expr>, env: &TypeEnvironment) -> Result<Vec<Expr>, RewriteError> {
    let mut i = 1;
    while i < terms.len() {
        if operator(&terms[i], env).is_some() {
            terms.swap(i - 1, i);
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(terms)
}

/// Moves every infix operator in front of its immediate left sibling.
pub fn infix_to_prefix(expr: &Expr, env: &TypeEnvironment) -> Result<Expr, RewriteError> {
    bottom_up(expr, env, &swap_spine)
}

fn rotate_spine(terms: Vec<Expr>, env: &TypeEnvironment) -> Result<Vec<Expr>, RewriteError> {
    let rtl = terms.iter().position(|t| {
        !t.is_grouped()
            && t.as_variable()
                .is_some_and(|n| env.attributes(n).associativity == Associativity::Rtl)
    });
    let Some(k) = rtl else {
        return Ok(terms);
    };
    if terms.len() < k + 3 {
        return Err(RewriteError::NoRightOperand {
            op: op_name(&terms[k]),
            span: terms[k].span(),
        });
    }
    let mut out = terms;
    let rest = out.split_off(k + 2);
    let grouped = if rest.len() == 1 {
        rest.into_iter().next().expect("one term")
    } else {
        fold(rotate_spine(rest, env)?)
    };
    out.push(grouped);
    Ok(out)
}

/// Groups everything after a right-associative operator's first operand
/// into a single argument. Expects prefix-converted input.
pub fn rotate_right(expr: &Expr, env: &TypeEnvironment) -> Result<Expr, RewriteError> {
    bottom_up(expr, env, &rotate_spine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BoundAttributes;
    use crate::lexer::tokenize;
    use crate::parser::parse;

    fn env() -> TypeEnvironment {
        let mut env = TypeEnvironment::new();
        for (name, attrs) in [
            ("->", BoundAttributes::INFIX_RTL),
            ("+", BoundAttributes::INFIX_LTR),
            ("|", BoundAttributes::INFIX_LTR),
        ] {
            env.bind_in_place(name, Some(attrs), Expr::var(name));
        }
        env
    }

    fn parsed(src: &str) -> Expr {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn norm(src: &str) -> String {
        normalize(&parsed(src), &env()).unwrap().to_string()
    }

    #[test]
    fn infix_moves_to_front() {
        assert_eq!(norm("123 + 456"), "Apply(Apply(+, Constant(123, Int)), Constant(456, Int))");
    }

    #[test]
    fn rtl_groups_right_hand_side() {
        assert_eq!(norm("a -> b c"), "Apply(Apply(->, a), Apply(b, c))");
        assert_eq!(
            norm("a -> b -> c"),
            "Apply(Apply(->, a), Apply(Apply(->, b), c))"
        );
    }

    #[test]
    fn ltr_chain_nests_left() {
        assert_eq!(norm("x | y | z"), "Apply(Apply(|, Apply(Apply(|, x), y)), z)");
    }

    #[test]
    fn segments_keep_their_applications() {
        assert_eq!(
            norm(r#"echo "abc def ghi" | wc"#),
            r#"Apply(Apply(|, Apply(echo, Constant("abc def ghi", Str))), wc)"#
        );
    }

    #[test]
    fn parenthesized_operator_is_a_plain_term() {
        assert_eq!(norm("(+) 1 2"), "Apply(Apply(+, Constant(1, Int)), Constant(2, Int))");
        let e = parsed("(+) 1 2");
        assert!(normalize(&e, &env()).unwrap().ptr_eq(&e));
    }

    #[test]
    fn rewrites_inside_groups_and_lambdas() {
        assert_eq!(norm("f (1 + 2)"), "Apply(f, Apply(Apply(+, Constant(1, Int)), Constant(2, Int)))");
    }

    #[test]
    fn errors() {
        let e = env();
        assert!(matches!(
            normalize(&parsed("a +"), &e),
            Err(RewriteError::NoRightOperand { .. })
        ));
        assert!(matches!(
            normalize(&parsed("a + + b"), &e),
            Err(RewriteError::NoLeftOperand { .. })
        ));
        assert!(matches!(
            normalize(&parsed("a + b -> c"), &e),
            Err(RewriteError::MixedAssociativity { .. })
        ));
    }

    #[test]
    fn idempotent_on_samples() {
        let e = env();
        for src in ["a -> b -> c d", "x | y | z", "f (a + b) + c", "(a -> b) c"] {
            let once = normalize(&parsed(src), &e).unwrap();
            let twice = normalize(&once, &e).unwrap();
            assert_eq!(once, twice, "{src}");
            assert!(twice.ptr_eq(&once));
        }
    }

    #[test]
    fn single_step_transforms() {
        let e = env();
        let swapped = infix_to_prefix(&parsed("abc 123 + 456"), &e).unwrap();
        assert_eq!(
            swapped.to_string(),
            "Apply(Apply(Apply(abc, +), Constant(123, Int)), Constant(456, Int))"
        );
        let p = infix_to_prefix(&parsed("a b -> c d"), &e).unwrap();
        let rotated = rotate_right(&p, &e).unwrap();
        assert_eq!(rotated.to_string(), "Apply(Apply(Apply(a, ->), b), Apply(c, d))");
    }
}
