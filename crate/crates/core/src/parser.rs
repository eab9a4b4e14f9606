//! Builds the left-associative application tree. The parser knows nothing
//! about operators: every run of terms folds left into `Apply` nodes, and
//! operator handling is left to the rewrite pass.

use std::rc::Rc;

use thiserror::Error;

use crate::env::{Associativity, BoundAttributes, Fixity};
use crate::expr::{Annotation, Expr, Node};
use crate::lexer::{matching_close, Span, Token, TokenKind};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unmatched `{text}` at {span}")]
    Unmatched { text: String, span: Span },
    #[error("`{open}` at {open_span} is closed by `{close}` at {close_span}")]
    Mismatched {
        open: String,
        open_span: Span,
        close: String,
        close_span: Span,
    },
    #[error("empty parenthesized group at {0}")]
    EmptyGroup(Span),
    #[error("type annotation `:` has no term on its left at {0}")]
    AnnotationWithoutTerm(Span),
    #[error("type annotation `:` has no type on its right at {0}")]
    AnnotationWithoutType(Span),
    #[error("numeric literal `{text}` is out of range at {span}")]
    NumericRange { text: String, span: Span },
    #[error("malformed binding at {span}: {message}")]
    Binding { message: String, span: Span },
}

impl ParseError {
    pub fn span(&self) -> Option<Span> {
        match self {
            ParseError::Empty => None,
            ParseError::Unmatched { span, .. }
            | ParseError::NumericRange { span, .. }
            | ParseError::Binding { span, .. } => Some(*span),
            ParseError::Mismatched { close_span, .. } => Some(*close_span),
            ParseError::EmptyGroup(s)
            | ParseError::AnnotationWithoutTerm(s)
            | ParseError::AnnotationWithoutType(s) => Some(*s),
        }
    }
}

enum Item {
    Term(Expr),
    Colon(Span),
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    /// Reads items up to the close matching `open` (or end of input at top level).
    fn level(&mut self, open: Option<&Token>) -> Result<(Vec<Item>, Span), ParseError> {
        let mut items = Vec::new();
        while let Some(tok) = self.tokens.get(self.pos) {
            self.pos += 1;
            match tok.kind {
                TokenKind::CloseParen => {
                    let Some(open) = open else {
                        return Err(ParseError::Unmatched {
                            text: tok.text.clone(),
                            span: tok.span,
                        });
                    };
                    if matching_close(&open.text) != tok.text.chars().next() {
                        return Err(ParseError::Mismatched {
                            open: open.text.clone(),
                            open_span: open.span,
                            close: tok.text.clone(),
                            close_span: tok.span,
                        });
                    }
                    return Ok((items, open.span.join(tok.span)));
                }
                TokenKind::OpenParen => {
                    let (inner, span) = self.level(Some(tok))?;
                    if inner.is_empty() {
                        return Err(ParseError::EmptyGroup(span));
                    }
                    // the group keeps its full span, parens included
                    let group = build(inner, span)?.with_span(span).grouped();
                    items.push(Item::Term(group));
                }
                TokenKind::Symbol if tok.text == ":" => items.push(Item::Colon(tok.span)),
                _ => items.push(Item::Term(atom(tok)?)),
            }
        }
        match open {
            Some(open) => Err(ParseError::Unmatched {
                text: open.text.clone(),
                span: open.span,
            }),
            None => {
                let span = match (self.tokens.first(), self.tokens.last()) {
                    (Some(a), Some(b)) => a.span.join(b.span),
                    _ => Span::default(),
                };
                Ok((items, span))
            }
        }
    }
}

fn atom(tok: &Token) -> Result<Expr, ParseError> {
    let expr = match tok.kind {
        TokenKind::StringLit => Expr::constant(Value::str(&tok.text)),
        TokenKind::Numeric => Expr::constant(numeric(tok)?),
        _ => Expr::from_node(Node::Variable(Rc::from(tok.text.as_str()))),
    };
    Ok(expr.with_span(tok.span))
}

fn numeric(tok: &Token) -> Result<Value, ParseError> {
    let range = || ParseError::NumericRange {
        text: tok.text.clone(),
        span: tok.span,
    };
    if tok.text.contains('.') {
        tok.text.parse().map(Value::Float).map_err(|_| range())
    } else {
        tok.text.parse().map(Value::Int).map_err(|_| range())
    }
}

fn build(items: Vec<Item>, span: Span) -> Result<Expr, ParseError> {
    let Some(colon) = items.iter().position(|i| matches!(i, Item::Colon(_))) else {
        return Ok(fold(items));
    };
    let mut lhs = items;
    let mut rhs = lhs.split_off(colon);
    let colon_span = match rhs.remove(0) {
        Item::Colon(s) => s,
        Item::Term(_) => unreachable!("split at a colon"),
    };
    if lhs.is_empty() {
        return Err(ParseError::AnnotationWithoutTerm(colon_span));
    }
    if rhs.is_empty() {
        return Err(ParseError::AnnotationWithoutType(colon_span));
    }
    let ty = build(rhs, span)?;
    let term = fold(lhs);
    Ok(term.with_annotation(Annotation::Syntax(ty)))
}

fn fold(items: Vec<Item>) -> Expr {
    let mut terms = items.into_iter().map(|i| match i {
        Item::Term(e) => e,
        Item::Colon(_) => unreachable!("colons are split off before folding"),
    });
    let head = terms.next().expect("fold on a non-empty level");
    terms.fold(head, Expr::apply)
}

/// Parses a token sequence, honouring `term : type` annotations.
pub fn parse(tokens: &[Token]) -> Result<Expr, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { tokens, pos: 0 };
    let (items, span) = p.level(None)?;
    if items.is_empty() {
        return Err(ParseError::Empty);
    }
    build(items, span)
}

/// Alias kept for callers that want to be explicit about annotation support.
pub fn parse_annotated(tokens: &[Token]) -> Result<Expr, ParseError> {
    parse(tokens)
}

/// A top-level input line: either an expression or a binding.
#[derive(Debug, Clone)]
pub enum Statement {
    Expr(Expr),
    Bind(BindStatement),
}

#[derive(Debug, Clone)]
pub struct BindStatement {
    pub name: String,
    pub attrs: Option<BoundAttributes>,
    pub annotation: Option<Expr>,
    pub body: Expr,
    pub span: Span,
}

/// Recognizes `name = expr`, `name : T = expr` and `(sym @ ATTRS) = expr`;
/// anything else parses as an ordinary expression.
pub fn parse_statement(tokens: &[Token]) -> Result<Statement, ParseError> {
    let mut depth = 0i32;
    let mut eq_at = None;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::OpenParen => depth += 1,
            TokenKind::CloseParen => depth -= 1,
            TokenKind::Symbol if depth == 0 && t.text == "=" => {
                eq_at = Some(i);
                break;
            }
            _ => {}
        }
    }
    let Some(eq) = eq_at.filter(|&i| i > 0) else {
        return parse(tokens).map(Statement::Expr);
    };
    let Some(head) = bind_head(&tokens[..eq])? else {
        return parse(tokens).map(Statement::Expr);
    };
    let body_tokens = &tokens[eq + 1..];
    if body_tokens.is_empty() {
        return Err(ParseError::Binding {
            message: format!("`{}` has no right-hand side", head.0),
            span: tokens[eq].span,
        });
    }
    let body = parse(body_tokens)?;
    let span = tokens[0].span.join(tokens[tokens.len() - 1].span);
    Ok(Statement::Bind(BindStatement {
        name: head.0,
        attrs: head.1,
        annotation: head.2,
        body,
        span,
    }))
}

type BindHead = (String, Option<BoundAttributes>, Option<Expr>);

fn is_name(t: &Token) -> bool {
    match t.kind {
        TokenKind::Identity => true,
        TokenKind::Symbol => t.text != "=" && t.text != ":" && t.text != "@",
        _ => false,
    }
}

fn bind_head(prefix: &[Token]) -> Result<Option<BindHead>, ParseError> {
    match prefix {
        [name] if is_name(name) => Ok(Some((name.text.clone(), None, None))),
        [name, colon, ty @ ..] if is_name(name) && colon.is_symbol(":") => {
            if ty.is_empty() {
                return Err(ParseError::AnnotationWithoutType(colon.span));
            }
            Ok(Some((name.text.clone(), None, Some(parse(ty)?))))
        }
        [open, name, at, attrs @ .., close]
            if open.kind == TokenKind::OpenParen
                && close.kind == TokenKind::CloseParen
                && is_name(name)
                && at.is_symbol("@") =>
        {
            let attrs = parse_attrs(attrs, at.span)?;
            Ok(Some((name.text.clone(), Some(attrs), None)))
        }
        _ => Ok(None),
    }
}

fn parse_attrs(tokens: &[Token], at: Span) -> Result<BoundAttributes, ParseError> {
    let mut fixity = None;
    let mut assoc = None;
    let bad = |message: String, span: Span| ParseError::Binding { message, span };
    for (i, t) in tokens.iter().enumerate() {
        if i % 2 == 1 {
            if !t.is_symbol(",") {
                return Err(bad(format!("expected `,` but found `{}`", t.text), t.span));
            }
            continue;
        }
        let (slot_is_fixity, fix, asc) = match t.text.as_str() {
            "PREFIX" => (true, Some(Fixity::Prefix), None),
            "INFIX" => (true, Some(Fixity::Infix), None),
            "LTR" => (false, None, Some(Associativity::Ltr)),
            "RTL" => (false, None, Some(Associativity::Rtl)),
            other => return Err(bad(format!("unknown attribute `{other}`"), t.span)),
        };
        let clash = if slot_is_fixity {
            fixity.replace(fix.unwrap()).is_some()
        } else {
            assoc.replace(asc.unwrap()).is_some()
        };
        if clash {
            return Err(bad(format!("attribute `{}` conflicts", t.text), t.span));
        }
    }
    if tokens.is_empty() || tokens.len() % 2 == 0 {
        return Err(bad("expected attribute list after `@`".into(), at));
    }
    let default = BoundAttributes::default();
    Ok(BoundAttributes {
        fixity: fixity.unwrap_or(default.fixity),
        associativity: assoc.unwrap_or(default.associativity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;

    fn p(src: &str) -> Result<Expr, ParseError> {
        parse(&tokenize(src).unwrap())
    }

    #[test]
    fn echo_tree() {
        assert_eq!(
            p(r#"echo "abc def ghi" | wc"#).unwrap().to_string(),
            r#"Apply(Apply(Apply(echo, Constant("abc def ghi", Str)), |), wc)"#
        );
    }

    #[test]
    fn single_token() {
        let e = p("wc").unwrap();
        assert_eq!(e.to_string(), "wc");
        assert!(matches!(e.annotation(), Annotation::Unknown));
    }

    #[test]
    fn grouped_middle_term() {
        assert_eq!(
            p("a (b c) d").unwrap().to_string(),
            "Apply(Apply(a, Apply(b, c)), d)"
        );
    }

    #[test]
    fn numeric_constants() {
        assert_eq!(p("12").unwrap().to_string(), "Constant(12, Int)");
        assert_eq!(p("-1.5").unwrap().to_string(), "Constant(-1.5, Float)");
        assert!(matches!(
            p("99999999999999999999"),
            Err(ParseError::NumericRange { .. })
        ));
    }

    #[test]
    fn paren_errors() {
        assert!(matches!(p("(a b"), Err(ParseError::Unmatched { span, .. }) if span == Span::new(0, 1)));
        assert!(matches!(p("a b)"), Err(ParseError::Unmatched { span, .. }) if span == Span::new(3, 4)));
        assert!(matches!(p("(a]"), Err(ParseError::Mismatched { .. })));
        assert!(matches!(p("f ()"), Err(ParseError::EmptyGroup(_))));
        assert_eq!(p("[a b]").unwrap().to_string(), "Apply(a, b)");
    }

    #[test]
    fn annotations() {
        let e = p("(f: Int -> Int) 3").unwrap();
        assert_eq!(
            e.to_string(),
            "Apply(Variable(f, Apply(Apply(Int, ->), Int)), Constant(3, Int))"
        );
        let whole = p("f x : Int").unwrap();
        assert_eq!(whole.to_string(), "Apply(f, x, Int)");
        assert!(matches!(p(": Int"), Err(ParseError::AnnotationWithoutTerm(_))));
        assert!(matches!(p("x :"), Err(ParseError::AnnotationWithoutType(_))));
    }

    #[test]
    fn bind_statements() {
        let st = parse_statement(&tokenize(r#"result: Int = toInt "123""#).unwrap()).unwrap();
        let Statement::Bind(b) = st else { panic!("expected bind") };
        assert_eq!(b.name, "result");
        assert_eq!(b.annotation.unwrap().to_string(), "Int");
        assert_eq!(b.body.to_string(), r#"Apply(toInt, Constant("123", Str))"#);

        let st = parse_statement(&tokenize("(|> @ INFIX,LTR) = f -> g -> g f").unwrap()).unwrap();
        let Statement::Bind(b) = st else { panic!("expected bind") };
        assert_eq!(b.name, "|>");
        assert_eq!(b.attrs, Some(BoundAttributes::INFIX_LTR));

        let st = parse_statement(&tokenize("x = 1").unwrap()).unwrap();
        assert!(matches!(st, Statement::Bind(ref b) if b.name == "x" && b.attrs.is_none()));

        let st = parse_statement(&tokenize("f x = 1").unwrap()).unwrap();
        assert!(matches!(st, Statement::Expr(_)));

        assert!(parse_statement(&tokenize("x =").unwrap()).is_err());
        assert!(parse_statement(&tokenize("(+ @ INFIX,PREFIX) = 1").unwrap()).is_err());
        assert!(parse_statement(&tokenize("(+ @ FOO) = 1").unwrap()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Juxtaposition folds to the left with leaves in source order.
            #[test]
            fn application_folds_left(names in prop::collection::vec("[a-z][a-z0-9]{0,4}", 1..10)) {
                let tree = p(&names.join(" ")).unwrap();
                let expected = names[1..]
                    .iter()
                    .fold(names[0].clone(), |acc, n| format!("Apply({acc}, {n})"));
                prop_assert_eq!(tree.to_string(), expected);
            }

            #[test]
            fn parens_keep_their_contents_together(
                outer in "[a-z]{1,3}",
                inner in prop::collection::vec("[a-z]{1,3}", 2..5),
            ) {
                let grouped = p(&format!("{outer} ({})", inner.join(" "))).unwrap();
                let alone = p(&inner.join(" ")).unwrap();
                prop_assert_eq!(grouped.to_string(), format!("Apply({outer}, {alone})"));
            }
        }
    }
}
