//! Choosing among overloads that all fit their use site.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::unify::Substitution;
use crate::types::{self, Type};

/// How ties between fitting overloads are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Ambiguity is an error that asks for an annotation.
    #[default]
    Script,
    /// Prefer overloads whose result is a printable literal.
    Repl,
}

/// Priority class of a fully applied type; lower is preferred.
/// Arrows, placeholders and kinds are not literals.
pub fn rank_literal(t: &Type) -> Option<u8> {
    match t {
        Type::Con(n) => Some(match &**n {
            types::INT => 1,
            types::FLOAT => 2,
            types::BOOL | types::CHAR => 3,
            types::STR => 4,
            types::BYTE_STREAM_IN
            | types::BYTE_STREAM_OUT
            | types::TEXT_READER
            | types::TEXT_WRITER => 7,
            _ => 8,
        }),
        Type::App(..) => {
            let (head, _) = t.head_and_args()?;
            Some(match head {
                types::LIST => 5,
                types::SEQ => 6,
                _ => 8,
            })
        }
        Type::Var(_) | Type::Arrow(..) | Type::Ctor { .. } | Type::Star => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverloadCandidate {
    pub signature: Type,
    pub registration: usize,
    /// Set for conversion-derived overloads; lower is preferred.
    pub conversion_priority: Option<u32>,
}

impl OverloadCandidate {
    pub fn new(signature: Type, registration: usize) -> Self {
        OverloadCandidate {
            signature,
            registration,
            conversion_priority: None,
        }
    }

    pub fn with_priority(mut self, priority: u32) -> Self {
        self.conversion_priority = Some(priority);
        self
    }
}

/// A candidate that fits, with its type left after the applied arguments.
#[derive(Debug, Clone)]
pub(crate) struct Fitting {
    pub registration: usize,
    pub conversion_priority: Option<u32>,
    pub remaining: Type,
}

/// Picks one of several fitting candidates, or `None` when the mode
/// gives no way to decide.
pub(crate) fn choose(fitting: &[Fitting], mode: Mode) -> Option<usize> {
    if fitting.len() == 1 {
        return Some(0);
    }
    if fitting.iter().all(|f| f.conversion_priority.is_some()) {
        return (0..fitting.len())
            .min_by_key(|&i| (fitting[i].conversion_priority, fitting[i].registration));
    }
    if mode == Mode::Repl {
        return (0..fitting.len())
            .filter_map(|i| rank_literal(&fitting[i].remaining).map(|r| (r, fitting[i].registration, i)))
            .min()
            .map(|(_, _, i)| i);
    }
    None
}

/// Result types of fitting candidates, rendered as `(Int -> Int) | Int`.
pub(crate) fn describe(types: impl IntoIterator<Item = Type>) -> String {
    types
        .into_iter()
        .map(|t| {
            let s = t.pretty();
            if t.is_arrow() {
                format!("({s})")
            } else {
                s
            }
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverloadError {
    #[error("no overload accepts the given arguments")]
    NoMatch,
    #[error("ambiguous result type {}; add a type annotation", describe(.0.iter().map(|c| c.1.clone())))]
    Ambiguous(Vec<(usize, Type, Option<u8>)>),
}

/// Filters `candidates` by argument types in declaration order, then by the
/// expected result type, then breaks ties per `mode`. Returns the index of
/// the chosen candidate.
pub fn resolve_overloads(
    candidates: &[OverloadCandidate],
    arg_types: &[Type],
    expected: Option<&Type>,
    mode: Mode,
) -> Result<usize, OverloadError> {
    // Candidate placeholders are renamed above every id in the inputs so
    // they cannot collide with the caller's.
    let base = arg_types
        .iter()
        .chain(expected)
        .flat_map(Type::vars)
        .max()
        .map_or(0, |m| m + 1);

    let mut indices = Vec::new();
    let mut fitting = Vec::new();
    for (idx, cand) in candidates.iter().enumerate() {
        let rename: HashMap<u32, Type> = cand
            .signature
            .vars()
            .into_iter()
            .map(|v| (v, Type::Var(base + v)))
            .collect();
        let sig = cand.signature.rename_vars(&rename);
        let (params, _) = sig.uncurry();
        if params.len() < arg_types.len() {
            continue;
        }
        let mut s = Substitution::new();
        let params_fit = params
            .iter()
            .zip(arg_types)
            .all(|(p, a)| s.unify(p, a).is_ok());
        if !params_fit {
            continue;
        }
        let remaining = sig.after_params(arg_types.len()).expect("enough parameters");
        if let Some(exp) = expected {
            if s.unify(&remaining, exp).is_err() {
                continue;
            }
        }
        indices.push(idx);
        fitting.push(Fitting {
            registration: cand.registration,
            conversion_priority: cand.conversion_priority,
            remaining: s.apply(&remaining),
        });
    }
    if fitting.is_empty() {
        return Err(OverloadError::NoMatch);
    }
    match choose(&fitting, mode) {
        Some(i) => Ok(indices[i]),
        None => Err(OverloadError::Ambiguous(
            indices
                .iter()
                .zip(&fitting)
                .map(|(&i, f)| (i, f.remaining.clone(), rank_literal(&f.remaining)))
                .collect(),
        )),
    }
}

impl fmt::Display for OverloadCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {}", self.registration, self.signature.pretty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_int() -> Vec<OverloadCandidate> {
        vec![
            OverloadCandidate::new(
                Type::curried([Type::str(), Type::int()], Type::int()),
                0,
            ),
            OverloadCandidate::new(Type::arrow(Type::str(), Type::int()), 1),
        ]
    }

    #[test]
    fn literal_ranks() {
        assert_eq!(rank_literal(&Type::int()), Some(1));
        assert_eq!(rank_literal(&Type::float()), Some(2));
        assert_eq!(rank_literal(&Type::bool()), Some(3));
        assert_eq!(rank_literal(&Type::char()), Some(3));
        assert_eq!(rank_literal(&Type::str()), Some(4));
        assert_eq!(rank_literal(&Type::list(Type::int())), Some(5));
        assert_eq!(rank_literal(&Type::seq(Type::str())), Some(6));
        assert_eq!(rank_literal(&Type::con(types::TEXT_WRITER)), Some(7));
        assert_eq!(rank_literal(&Type::con(types::EXIT_STATUS)), Some(8));
        assert_eq!(rank_literal(&Type::arrow(Type::int(), Type::int())), None);
    }

    #[test]
    fn script_mode_reports_ambiguity() {
        let err = resolve_overloads(&to_int(), &[Type::str()], None, Mode::Script).unwrap_err();
        assert_eq!(
            err.to_string(),
            "ambiguous result type (Int -> Int) | Int; add a type annotation"
        );
    }

    #[test]
    fn expected_type_selects() {
        let got = resolve_overloads(&to_int(), &[Type::str()], Some(&Type::int()), Mode::Script);
        assert_eq!(got, Ok(1));
    }

    #[test]
    fn repl_prefers_literal() {
        let got = resolve_overloads(&to_int(), &[Type::str()], None, Mode::Repl);
        assert_eq!(got, Ok(1));
    }

    #[test]
    fn singleton_wins_in_any_mode() {
        let one = vec![OverloadCandidate::new(Type::arrow(Type::int(), Type::int()), 0)];
        assert_eq!(resolve_overloads(&one, &[], None, Mode::Script), Ok(0));
    }

    #[test]
    fn argument_types_filter() {
        let max = vec![
            OverloadCandidate::new(Type::curried([Type::int(), Type::int()], Type::int()), 0),
            OverloadCandidate::new(
                Type::curried([Type::float(), Type::float()], Type::float()),
                1,
            ),
        ];
        let got = resolve_overloads(&max, &[Type::float(), Type::float()], None, Mode::Script);
        assert_eq!(got, Ok(1));
        let none = resolve_overloads(&max, &[Type::str()], None, Mode::Script);
        assert_eq!(none, Err(OverloadError::NoMatch));
    }
}
