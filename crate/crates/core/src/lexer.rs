//! Tokenizer for a single logical input line.
//!
//! The grammar is deliberately tiny: identities, string literals, numerics,
//! parentheses and runs of symbol characters. Nothing here knows about
//! operators; `|`, `->` and `+` are all just symbols.

use std::fmt;

use thiserror::Error;

/// Byte offsets `[start, end)` into the input line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identity,
    StringLit,
    Numeric,
    OpenParen,
    CloseParen,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text; for string literals the unescaped contents without quotes.
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_symbol(&self, text: &str) -> bool {
        self.kind == TokenKind::Symbol && self.text == text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Identity => write!(f, "Identity({})", self.text),
            TokenKind::StringLit => write!(f, "String({:?})", self.text),
            TokenKind::Numeric => write!(f, "Numeric({})", self.text),
            TokenKind::OpenParen => write!(f, "Open({})", self.text),
            TokenKind::CloseParen => write!(f, "Close({})", self.text),
            TokenKind::Symbol => write!(f, "Symbol({})", self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting at {0}")]
    UnterminatedString(Span),
    #[error("unknown escape sequence `\\{ch}` at {span}")]
    BadEscape { ch: char, span: Span },
    #[error("numeric literal with more than one decimal point at {0}")]
    MultipleDecimalPoints(Span),
    #[error("unexpected character {ch:?} at {span}")]
    UnexpectedChar { ch: char, span: Span },
}

impl LexError {
    pub fn span(&self) -> Span {
        match self {
            LexError::UnterminatedString(s) | LexError::MultipleDecimalPoints(s) => *s,
            LexError::BadEscape { span, .. } | LexError::UnexpectedChar { span, .. } => *span,
        }
    }
}

const PAREN_PAIRS: [(char, char); 4] = [('(', ')'), ('[', ']'), ('{', '}'), ('⟨', '⟩')];

pub fn is_open_paren(c: char) -> bool {
    PAREN_PAIRS.iter().any(|&(o, _)| o == c)
}

pub fn is_close_paren(c: char) -> bool {
    PAREN_PAIRS.iter().any(|&(_, cl)| cl == c)
}

/// The closing counterpart of an opening parenthesis.
pub fn matching_close(open: &str) -> Option<char> {
    let c = open.chars().next()?;
    PAREN_PAIRS.iter().find(|&&(o, _)| o == c).map(|&(_, cl)| cl)
}

fn is_symbol_char(c: char) -> bool {
    !(c.is_alphanumeric()
        || c.is_whitespace()
        || c.is_control()
        || c == '"'
        || is_open_paren(c)
        || is_close_paren(c))
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek_at(&self, i: usize) -> Option<char> {
        self.chars.get(i).map(|&(_, c)| c)
    }

    fn offset(&self, i: usize) -> usize {
        self.chars.get(i).map_or(self.src.len(), |&(o, _)| o)
    }

    fn span(&self, from: usize, to: usize) -> Span {
        Span::new(self.offset(from), self.offset(to))
    }

    fn token(&self, kind: TokenKind, from: usize, to: usize) -> Token {
        let span = self.span(from, to);
        Token {
            kind,
            text: self.src[span.start..span.end].to_string(),
            span,
        }
    }

    /// A sign belongs to a numeric only at a term boundary and directly before a digit.
    fn sign_starts_numeric(&self, i: usize) -> bool {
        let sign = matches!(self.peek_at(i), Some('+') | Some('-'));
        let digit_follows = self.peek_at(i + 1).is_some_and(|c| c.is_ascii_digit());
        let boundary = i == 0
            || self
                .peek_at(i - 1)
                .is_some_and(|p| p.is_whitespace() || is_open_paren(p));
        sign && digit_follows && boundary
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        while let Some(c) = self.peek_at(self.pos) {
            let start = self.pos;
            if c.is_whitespace() {
                self.pos += 1;
            } else if c == '"' {
                tokens.push(self.string()?);
            } else if is_open_paren(c) {
                self.pos += 1;
                tokens.push(self.token(TokenKind::OpenParen, start, self.pos));
            } else if is_close_paren(c) {
                self.pos += 1;
                tokens.push(self.token(TokenKind::CloseParen, start, self.pos));
            } else if c.is_ascii_digit() || self.sign_starts_numeric(start) {
                tokens.push(self.numeric()?);
            } else if c.is_alphabetic() {
                tokens.push(self.identity());
            } else if is_symbol_char(c) {
                while self.peek_at(self.pos).is_some_and(is_symbol_char) {
                    self.pos += 1;
                }
                tokens.push(self.token(TokenKind::Symbol, start, self.pos));
            } else {
                return Err(LexError::UnexpectedChar {
                    ch: c,
                    span: self.span(start, start + 1),
                });
            }
        }
        Ok(tokens)
    }

    fn identity(&mut self) -> Token {
        let start = self.pos;
        self.pos += 1;
        loop {
            match self.peek_at(self.pos) {
                Some(c) if is_ident_continue(c) => self.pos += 1,
                // dotted names such as `fixture.csv` stay one identity
                Some('.') if self.peek_at(self.pos + 1).is_some_and(is_ident_continue) => {
                    self.pos += 2
                }
                _ => break,
            }
        }
        self.token(TokenKind::Identity, start, self.pos)
    }

    fn numeric(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        if matches!(self.peek_at(self.pos), Some('+') | Some('-')) {
            self.pos += 1;
        }
        let mut seen_point = false;
        loop {
            match self.peek_at(self.pos) {
                Some(c) if c.is_ascii_digit() => self.pos += 1,
                Some('.') if self.peek_at(self.pos + 1).is_some_and(|c| c.is_ascii_digit()) => {
                    if seen_point {
                        let mut end = self.pos + 1;
                        while self
                            .peek_at(end)
                            .is_some_and(|c| c.is_ascii_digit() || c == '.')
                        {
                            end += 1;
                        }
                        return Err(LexError::MultipleDecimalPoints(self.span(start, end)));
                    }
                    seen_point = true;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        Ok(self.token(TokenKind::Numeric, start, self.pos))
    }

    fn string(&mut self) -> Result<Token, LexError> {
        let start = self.pos;
        self.pos += 1;
        let mut text = String::new();
        loop {
            match self.peek_at(self.pos) {
                None => return Err(LexError::UnterminatedString(self.span(start, start + 1))),
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    let escaped = match self.peek_at(self.pos + 1) {
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some(other) => {
                            return Err(LexError::BadEscape {
                                ch: other,
                                span: self.span(self.pos, self.pos + 2),
                            })
                        }
                        None => {
                            return Err(LexError::UnterminatedString(self.span(start, start + 1)))
                        }
                    };
                    text.push(escaped);
                    self.pos += 2;
                }
                Some(c) => {
                    text.push(c);
                    self.pos += 1;
                }
            }
        }
        Ok(Token {
            kind: TokenKind::StringLit,
            text,
            span: self.span(start, self.pos),
        })
    }
}

/// Split one input line into tokens.
pub fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    Lexer {
        src: input,
        chars: input.char_indices().collect(),
        pos: 0,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds_and_text(input: &str) -> Vec<(TokenKind, String)> {
        tokenize(input)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn echo_pipeline_tokens() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text(r#"echo "abc def ghi" | wc"#),
            vec![
                (Identity, "echo".into()),
                (StringLit, "abc def ghi".into()),
                (Symbol, "|".into()),
                (Identity, "wc".into()),
            ]
        );
    }

    #[test]
    fn empty_line() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("   \t ").unwrap().is_empty());
    }

    #[test]
    fn no_whitespace_needed_between_kinds() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("a(-|)b"),
            vec![
                (Identity, "a".into()),
                (OpenParen, "(".into()),
                (Symbol, "-|".into()),
                (CloseParen, ")".into()),
                (Identity, "b".into()),
            ]
        );
        assert_eq!(
            kinds_and_text(r#"echo"x"|wc"#),
            vec![
                (Identity, "echo".into()),
                (StringLit, "x".into()),
                (Symbol, "|".into()),
                (Identity, "wc".into()),
            ]
        );
    }

    #[test]
    fn sign_rules() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("123 + 456"),
            vec![
                (Numeric, "123".into()),
                (Symbol, "+".into()),
                (Numeric, "456".into())
            ]
        );
        assert_eq!(kinds_and_text("-5"), vec![(Numeric, "-5".into())]);
        assert_eq!(
            kinds_and_text("(+2.5)"),
            vec![
                (OpenParen, "(".into()),
                (Numeric, "+2.5".into()),
                (CloseParen, ")".into())
            ]
        );
        assert_eq!(
            kinds_and_text("x-5"),
            vec![
                (Identity, "x".into()),
                (Symbol, "-".into()),
                (Numeric, "5".into())
            ]
        );
    }

    #[test]
    fn dotted_identity_and_ident_rules() {
        use TokenKind::*;
        assert_eq!(
            kinds_and_text("cat fixture.csv"),
            vec![(Identity, "cat".into()), (Identity, "fixture.csv".into())]
        );
        assert_eq!(
            kinds_and_text("to_int2 x."),
            vec![
                (Identity, "to_int2".into()),
                (Identity, "x".into()),
                (Symbol, ".".into())
            ]
        );
    }

    #[test]
    fn string_escapes() {
        let toks = tokenize(r#""a\"b\\c\nd\te""#).unwrap();
        assert_eq!(toks[0].text, "a\"b\\c\nd\te");
        assert_eq!(toks[0].span, Span::new(0, 15));
    }

    #[test]
    fn unterminated_string_reports_opening_quote() {
        let err = tokenize(r#"echo "abc"#).unwrap_err();
        assert_eq!(err, LexError::UnterminatedString(Span::new(5, 6)));
    }

    #[test]
    fn two_decimal_points_is_an_error() {
        assert!(matches!(
            tokenize("1.2.3"),
            Err(LexError::MultipleDecimalPoints(_))
        ));
    }

    #[test]
    fn control_character_rejected() {
        assert!(matches!(
            tokenize("a \u{7} b"),
            Err(LexError::UnexpectedChar { ch: '\u{7}', .. })
        ));
    }

    #[test]
    fn bracket_shapes_are_parens() {
        let toks = tokenize("[a]{b}⟨c⟩").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == TokenKind::OpenParen).count(), 3);
        assert_eq!(kinds.iter().filter(|k| **k == TokenKind::CloseParen).count(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn word() -> impl Strategy<Value = String> {
            prop_oneof![
                "[a-z][a-z0-9]{0,5}(\\.[a-z]{1,3})?",
                "[0-9]{1,4}(\\.[0-9]{1,3})?",
                "\"[a-z ]{0,6}\"",
                prop::sample::select(vec!["+", "|", "->", "&&", "(", ")", "[", "]"]).prop_map(str::to_string),
            ]
        }

        proptest! {
            #[test]
            fn never_panics(input in "\\PC{0,40}") {
                let _ = tokenize(&input);
            }

            #[test]
            fn spans_cover_source_in_order(words in prop::collection::vec(word(), 0..12)) {
                let src = words.join(" ");
                let toks = tokenize(&src).unwrap();
                let mut last = 0;
                for t in &toks {
                    prop_assert!(t.span.start >= last && t.span.end > t.span.start);
                    last = t.span.end;
                    if t.kind != TokenKind::StringLit {
                        prop_assert_eq!(&src[t.span.start..t.span.end], t.text.as_str());
                    }
                }
            }

            // Extra blanks between tokens never change the result. A sign
            // right after `(` is part of the number, so no minus signs here.
            #[test]
            fn extra_whitespace_is_insignificant(
                words in prop::collection::vec(word(), 1..12),
                pads in prop::collection::vec(1usize..4, 12),
            ) {
                let single = words.join(" ");
                let padded: String = words
                    .iter()
                    .zip(&pads)
                    .map(|(w, n)| format!("{w}{}", " ".repeat(*n)))
                    .collect();
                let strip = |s: &str| -> Vec<(TokenKind, String)> {
                    tokenize(s).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
                };
                prop_assert_eq!(strip(&single), strip(&padded));
            }
        }
    }
}
