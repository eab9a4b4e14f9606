//! Robinson unification over [`Type`] with an occurs check.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::types::Type;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("type mismatch: expected {expected}, found {found}")]
    Mismatch { expected: Type, found: Type },
    #[error("infinite type: ?{var} occurs in {ty}")]
    Occurs { var: u32, ty: Type },
    #[error("kind mismatch: {left} has kind {left_kind}, {right} has kind {right_kind}")]
    Kind {
        left: Type,
        left_kind: Type,
        right: Type,
        right_kind: Type,
    },
}

/// Bindings from placeholder ids to types. Never contains a cycle.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Substitution {
    map: HashMap<u32, Type>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, var: u32) -> Option<&Type> {
        self.map.get(&var)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (u32, &Type)> {
        self.map.iter().map(|(k, v)| (*k, v))
    }

    /// Binds without checks; callers must have done the occurs check.
    fn bind(&mut self, var: u32, ty: Type) {
        self.map.insert(var, ty);
    }

    /// Replaces bound placeholders until none remain.
    pub fn apply(&self, ty: &Type) -> Type {
        match ty {
            Type::Var(v) => match self.map.get(v) {
                Some(t) => self.apply(t),
                None => ty.clone(),
            },
            Type::App(a, b) => Type::app(self.apply(a), self.apply(b)),
            Type::Arrow(a, b) => Type::arrow(self.apply(a), self.apply(b)),
            _ => ty.clone(),
        }
    }

    /// Fully applied form: every binding's right side is free of bound placeholders.
    pub fn normalized(&self) -> Substitution {
        Substitution {
            map: self.map.keys().map(|k| (*k, self.apply(&Type::Var(*k)))).collect(),
        }
    }

    /// Unifies `a` and `b`, extending this substitution. On error the
    /// substitution may hold partial progress; callers that need atomicity
    /// unify on a clone.
    pub fn unify(&mut self, a: &Type, b: &Type) -> Result<(), UnifyError> {
        let a = self.shallow(a);
        let b = self.shallow(b);
        match (&a, &b) {
            (Type::Var(x), Type::Var(y)) if x == y => Ok(()),
            (Type::Var(x), other) | (other, Type::Var(x)) => {
                let resolved = self.apply(other);
                if resolved.occurs(*x) {
                    return Err(UnifyError::Occurs {
                        var: *x,
                        ty: resolved,
                    });
                }
                self.bind(*x, resolved);
                Ok(())
            }
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::App(a1, a2), Type::App(b1, b2)) => {
                self.unify(a1, b1)?;
                self.unify(a2, b2)
            }
            (Type::Con(x), Type::Con(y)) if x == y => Ok(()),
            (Type::Ctor { name: n1, arity: a1 }, Type::Ctor { name: n2, arity: a2 })
                if n1 == n2 && a1 == a2 =>
            {
                Ok(())
            }
            (Type::Star, Type::Star) => Ok(()),
            _ => {
                let (ka, kb) = (self.apply(&a), self.apply(&b));
                match (ka.kind(), kb.kind()) {
                    (Some(k1), Some(k2)) if k1 != k2 => Err(UnifyError::Kind {
                        left: ka,
                        left_kind: k1,
                        right: kb,
                        right_kind: k2,
                    }),
                    _ => Err(UnifyError::Mismatch {
                        expected: ka,
                        found: kb,
                    }),
                }
            }
        }
    }

    fn shallow(&self, ty: &Type) -> Type {
        let mut cur = ty;
        while let Type::Var(v) = cur {
            match self.map.get(v) {
                Some(t) => cur = t,
                None => break,
            }
        }
        cur.clone()
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut keys: Vec<_> = self.map.keys().collect();
        keys.sort();
        f.write_str("{")?;
        for (i, k) in keys.into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "?{k} ↦ {}", self.map[k])?;
        }
        f.write_str("}")
    }
}

/// Unifies `a` and `b` under `s`, returning the extended substitution.
pub fn unify(a: &Type, b: &Type, s: &Substitution) -> Result<Substitution, UnifyError> {
    let mut out = s.clone();
    out.unify(a, b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u32) -> Type {
        Type::Var(n)
    }

    #[test]
    fn variable_against_constant() {
        let s = unify(&v(1), &Type::int(), &Substitution::new()).unwrap();
        assert_eq!(s.apply(&v(1)), Type::int());
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn reflexive_constant_adds_nothing() {
        let s = unify(&Type::int(), &Type::int(), &Substitution::new()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn arrows_unify_componentwise() {
        let a = Type::arrow(v(1), v(1));
        let b = Type::arrow(Type::int(), v(2));
        let s = unify(&a, &b, &Substitution::new()).unwrap();
        assert_eq!(s.apply(&v(1)), Type::int());
        assert_eq!(s.apply(&v(2)), Type::int());
    }

    #[test]
    fn distinct_constants_mismatch() {
        let err = unify(&Type::int(), &Type::str(), &Substitution::new()).unwrap_err();
        assert!(matches!(err, UnifyError::Mismatch { .. }));
    }

    #[test]
    fn occurs_check() {
        let err = unify(&v(1), &Type::list(v(1)), &Substitution::new()).unwrap_err();
        assert!(matches!(err, UnifyError::Occurs { var: 1, .. }));
    }

    #[test]
    fn constructor_arity_is_a_kind_error() {
        let err = unify(
            &Type::ctor("List", 1),
            &Type::ctor("Pair", 2),
            &Substitution::new(),
        )
        .unwrap_err();
        assert!(matches!(err, UnifyError::Kind { .. }));
    }
}
