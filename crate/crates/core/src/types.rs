//! Type-level terms: named types, type constructors, applications, arrows,
//! inference placeholders and the kind terminator `*`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

pub const INT: &str = "Int";
pub const FLOAT: &str = "Float";
pub const BOOL: &str = "Bool";
pub const CHAR: &str = "Char";
pub const STR: &str = "Str";
pub const UNIT: &str = "Unit";
pub const LIST: &str = "List";
pub const SEQ: &str = "Seq";
pub const PAIR: &str = "Pair";
pub const BYTE_STREAM_IN: &str = "ByteStreamIn";
pub const BYTE_STREAM_OUT: &str = "ByteStreamOut";
pub const TEXT_READER: &str = "TextReader";
pub const TEXT_WRITER: &str = "TextWriter";
pub const EXIT_STATUS: &str = "ExitStatus";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Type {
    /// Unresolved inference variable.
    Var(u32),
    /// A fully applied named type of kind `*`.
    Con(Rc<str>),
    /// A type constructor awaiting `arity` type arguments.
    Ctor { name: Rc<str>, arity: usize },
    App(Rc<Type>, Rc<Type>),
    Arrow(Rc<Type>, Rc<Type>),
    /// The kind of fully applied types.
    Star,
}

impl Type {
    pub fn con(name: &str) -> Type {
        Type::Con(Rc::from(name))
    }

    pub fn ctor(name: &str, arity: usize) -> Type {
        debug_assert!(arity >= 1);
        Type::Ctor {
            name: Rc::from(name),
            arity,
        }
    }

    pub fn app(f: Type, arg: Type) -> Type {
        Type::App(Rc::new(f), Rc::new(arg))
    }

    pub fn arrow(from: Type, to: Type) -> Type {
        Type::Arrow(Rc::new(from), Rc::new(to))
    }

    /// `p1 -> p2 -> ... -> result`
    pub fn curried(params: impl IntoIterator<Item = Type>, result: Type) -> Type {
        let params: Vec<Type> = params.into_iter().collect();
        params
            .into_iter()
            .rev()
            .fold(result, |acc, p| Type::arrow(p, acc))
    }

    pub fn int() -> Type {
        Type::con(INT)
    }
    pub fn float() -> Type {
        Type::con(FLOAT)
    }
    pub fn bool() -> Type {
        Type::con(BOOL)
    }
    pub fn char() -> Type {
        Type::con(CHAR)
    }
    pub fn str() -> Type {
        Type::con(STR)
    }
    pub fn unit() -> Type {
        Type::con(UNIT)
    }
    pub fn list(elem: Type) -> Type {
        Type::app(Type::ctor(LIST, 1), elem)
    }
    pub fn seq(elem: Type) -> Type {
        Type::app(Type::ctor(SEQ, 1), elem)
    }
    pub fn pair(a: Type, b: Type) -> Type {
        Type::app(Type::app(Type::ctor(PAIR, 2), a), b)
    }

    /// Kind of a type-level term; `None` for `*` itself (the tower stops there).
    pub fn kind(&self) -> Option<Type> {
        match self {
            Type::Star => None,
            Type::Ctor { arity, .. } => Some(Type::curried(
                std::iter::repeat_n(Type::Star, *arity),
                Type::Star,
            )),
            Type::App(f, _) => match f.kind()? {
                Type::Arrow(_, rest) => Some((*rest).clone()),
                _ => Some(Type::Star),
            },
            _ => Some(Type::Star),
        }
    }

    pub fn is_arrow(&self) -> bool {
        matches!(self, Type::Arrow(..))
    }

    /// Splits `a -> b -> c` into `([a, b], c)`.
    pub fn uncurry(&self) -> (Vec<Type>, Type) {
        let mut params = Vec::new();
        let mut cur = self;
        while let Type::Arrow(a, b) = cur {
            params.push((**a).clone());
            cur = b;
        }
        (params, cur.clone())
    }

    /// Drops `n` leading parameters, if the chain is that long.
    pub fn after_params(&self, n: usize) -> Option<Type> {
        let mut cur = self;
        for _ in 0..n {
            match cur {
                Type::Arrow(_, b) => cur = b,
                _ => return None,
            }
        }
        Some(cur.clone())
    }

    /// Head name and arguments of a (possibly nested) application.
    pub fn head_and_args(&self) -> Option<(&str, Vec<&Type>)> {
        match self {
            Type::Con(n) => Some((n, vec![])),
            Type::Ctor { name, .. } => Some((name, vec![])),
            Type::App(f, a) => {
                let (h, mut args) = f.head_and_args()?;
                args.push(a);
                Some((h, args))
            }
            _ => None,
        }
    }

    pub fn is_named(&self, name: &str) -> bool {
        matches!(self, Type::Con(n) if &**n == name)
    }

    pub fn vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<u32>) {
        match self {
            Type::Var(v) => {
                out.insert(*v);
            }
            Type::App(a, b) | Type::Arrow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            _ => {}
        }
    }

    pub fn occurs(&self, var: u32) -> bool {
        match self {
            Type::Var(v) => *v == var,
            Type::App(a, b) | Type::Arrow(a, b) => a.occurs(var) || b.occurs(var),
            _ => false,
        }
    }

    pub fn rename_vars(&self, map: &HashMap<u32, Type>) -> Type {
        match self {
            Type::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Type::App(a, b) => Type::app(a.rename_vars(map), b.rename_vars(map)),
            Type::Arrow(a, b) => Type::arrow(a.rename_vars(map), b.rename_vars(map)),
            _ => self.clone(),
        }
    }

    /// Display with placeholders renamed `a`, `b`, ... in order of appearance.
    pub fn pretty(&self) -> String {
        let mut names = HashMap::new();
        let mut out = String::new();
        self.write(&mut out, Prec::Top, &mut |v| {
            let n = names.len();
            names
                .entry(v)
                .or_insert_with(|| letter_name(n))
                .clone()
        });
        out
    }

    fn write(&self, out: &mut String, prec: Prec, var: &mut dyn FnMut(u32) -> String) {
        match self {
            Type::Var(v) => out.push_str(&var(*v)),
            Type::Con(n) | Type::Ctor { name: n, .. } => out.push_str(n),
            Type::Star => out.push('*'),
            Type::App(f, a) => {
                let paren = prec == Prec::Arg;
                if paren {
                    out.push('(');
                }
                f.write(out, Prec::Fun, var);
                out.push(' ');
                a.write(out, Prec::Arg, var);
                if paren {
                    out.push(')');
                }
            }
            Type::Arrow(a, b) => {
                let paren = prec != Prec::Top;
                if paren {
                    out.push('(');
                }
                a.write(out, Prec::Fun, var);
                out.push_str(" -> ");
                b.write(out, Prec::Top, var);
                if paren {
                    out.push(')');
                }
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Prec {
    Top,
    Fun,
    Arg,
}

fn letter_name(n: usize) -> String {
    let letter = (b'a' + (n % 26) as u8) as char;
    if n < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", n / 26)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write(&mut out, Prec::Top, &mut |v| format!("?{v}"));
        f.write_str(&out)
    }
}

/// True when the two types are equal up to a consistent renaming of placeholders.
pub fn alpha_eq(a: &Type, b: &Type) -> bool {
    fn go(a: &Type, b: &Type, fwd: &mut HashMap<u32, u32>, back: &mut HashMap<u32, u32>) -> bool {
        match (a, b) {
            (Type::Var(x), Type::Var(y)) => {
                *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x
            }
            (Type::App(a1, a2), Type::App(b1, b2)) | (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => {
                go(a1, b1, fwd, back) && go(a2, b2, fwd, back)
            }
            (Type::Var(_), _) | (_, Type::Var(_)) => false,
            _ => a == b,
        }
    }
    go(a, b, &mut HashMap::new(), &mut HashMap::new())
}

/// Fresh placeholder ids, monotonically increasing for the life of a session.
#[derive(Debug, Default)]
pub struct PlaceholderSupply {
    next: u32,
}

impl PlaceholderSupply {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u32) -> Self {
        PlaceholderSupply { next }
    }

    pub fn fresh_id(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn fresh(&mut self) -> Type {
        Type::Var(self.fresh_id())
    }

    pub fn peek(&self) -> u32 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_precedence() {
        let t = Type::arrow(
            Type::arrow(Type::int(), Type::int()),
            Type::list(Type::pair(Type::str(), Type::list(Type::int()))),
        );
        assert_eq!(t.to_string(), "(Int -> Int) -> List (Pair Str (List Int))");
        let v = Type::arrow(Type::Var(3), Type::Var(3));
        assert_eq!(v.to_string(), "?3 -> ?3");
        assert_eq!(v.pretty(), "a -> a");
    }

    #[test]
    fn kinds() {
        assert_eq!(Type::int().kind(), Some(Type::Star));
        assert_eq!(
            Type::ctor(LIST, 1).kind(),
            Some(Type::arrow(Type::Star, Type::Star))
        );
        let half = Type::app(Type::ctor(PAIR, 2), Type::int());
        assert_eq!(half.kind(), Some(Type::arrow(Type::Star, Type::Star)));
        assert_eq!(Type::list(Type::int()).kind(), Some(Type::Star));
        assert_eq!(Type::Star.kind(), None);
    }

    #[test]
    fn alpha_equivalence() {
        let a = Type::arrow(Type::Var(1), Type::arrow(Type::Var(2), Type::Var(1)));
        let b = Type::arrow(Type::Var(7), Type::arrow(Type::Var(9), Type::Var(7)));
        let c = Type::arrow(Type::Var(7), Type::arrow(Type::Var(7), Type::Var(7)));
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&a, &c));
    }

    #[test]
    fn uncurry_chain() {
        let t = Type::curried([Type::str(), Type::int()], Type::int());
        let (ps, r) = t.uncurry();
        assert_eq!(ps, vec![Type::str(), Type::int()]);
        assert_eq!(r, Type::int());
        assert_eq!(t.after_params(1), Some(Type::arrow(Type::int(), Type::int())));
        assert_eq!(t.after_params(3), None);
    }
}
