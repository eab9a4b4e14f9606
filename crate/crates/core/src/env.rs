//! Lexically scoped, persistent symbol table of overload sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::expr::{Expr, Name, Node};
use crate::types::Type;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fixity {
    Prefix,
    Infix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Associativity {
    Ltr,
    Rtl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundAttributes {
    pub fixity: Fixity,
    pub associativity: Associativity,
}

impl BoundAttributes {
    pub const PREFIX_LTR: BoundAttributes = BoundAttributes {
        fixity: Fixity::Prefix,
        associativity: Associativity::Ltr,
    };
    pub const INFIX_LTR: BoundAttributes = BoundAttributes {
        fixity: Fixity::Infix,
        associativity: Associativity::Ltr,
    };
    pub const INFIX_RTL: BoundAttributes = BoundAttributes {
        fixity: Fixity::Infix,
        associativity: Associativity::Rtl,
    };

    pub fn is_infix(&self) -> bool {
        self.fixity == Fixity::Infix
    }
}

impl Default for BoundAttributes {
    fn default() -> Self {
        BoundAttributes::PREFIX_LTR
    }
}

impl fmt::Display for BoundAttributes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fix = match self.fixity {
            Fixity::Prefix => "PREFIX",
            Fixity::Infix => "INFIX",
        };
        let assoc = match self.associativity {
            Associativity::Ltr => "LTR",
            Associativity::Rtl => "RTL",
        };
        write!(f, "{fix},{assoc}")
    }
}

/// One overload entry.
#[derive(Debug, Clone)]
pub struct Binding {
    pub value: Expr,
    /// Attributes given explicitly at bind time; `None` inherits.
    pub attrs: Option<BoundAttributes>,
}

impl Binding {
    /// Lambda parameters are bound to themselves and stay monomorphic.
    pub fn is_parameter(&self) -> bool {
        matches!(self.value.node(), Node::Variable(_))
    }

    pub fn ty(&self) -> Option<&Type> {
        self.value.ty()
    }
}

/// A registered adapter between stream representations.
#[derive(Debug, Clone)]
pub struct Conversion {
    pub from: Type,
    pub to: Type,
    pub function: Expr,
    /// Lower is preferred.
    pub priority: u32,
}

#[derive(Debug, Default)]
struct Frame {
    entries: HashMap<Name, Vec<Binding>>,
    parent: Option<Rc<Frame>>,
}

/// Cloning is cheap and a clone never observes later binds made through
/// another handle.
#[derive(Debug, Clone, Default)]
pub struct TypeEnvironment {
    top: Rc<Frame>,
    conversions: Rc<Vec<Conversion>>,
}

impl TypeEnvironment {
    pub fn new() -> Self {
        Self::default()
    }

    /// A child environment with a fresh innermost frame.
    pub fn push_scope(&self) -> Self {
        TypeEnvironment {
            top: Rc::new(Frame {
                entries: HashMap::new(),
                parent: Some(self.top.clone()),
            }),
            conversions: self.conversions.clone(),
        }
    }

    fn frame_mut(&mut self) -> &mut Frame {
        if Rc::get_mut(&mut self.top).is_none() {
            let copy = Frame {
                entries: self.top.entries.clone(),
                parent: self.top.parent.clone(),
            };
            self.top = Rc::new(copy);
        }
        Rc::get_mut(&mut self.top).expect("frame uniquely owned after copy")
    }

    /// Appends an overload for `name` to the innermost frame.
    pub fn bind(&self, name: &str, attrs: Option<BoundAttributes>, value: Expr) -> Self {
        let mut next = self.clone();
        next.bind_in_place(name, attrs, value);
        next
    }

    pub fn bind_in_place(&mut self, name: &str, attrs: Option<BoundAttributes>, value: Expr) {
        self.frame_mut()
            .entries
            .entry(Rc::from(name))
            .or_default()
            .push(Binding { value, attrs });
    }

    /// Drops overloads of `name` in the innermost frame matching `pred`.
    pub fn retain_in_place(&mut self, name: &str, mut pred: impl FnMut(&Binding) -> bool) {
        if !self.top.entries.contains_key(name) {
            return;
        }
        let frame = self.frame_mut();
        if let Some(list) = frame.entries.get_mut(name) {
            list.retain(|b| pred(b));
            if list.is_empty() {
                frame.entries.remove(name);
            }
        }
    }

    /// The overload list from the innermost frame that binds `name`.
    pub fn lookup(&self, name: &str) -> Option<&[Binding]> {
        let mut frame = Some(&self.top);
        while let Some(f) = frame {
            if let Some(list) = f.entries.get(name) {
                return Some(list);
            }
            frame = f.parent.as_ref();
        }
        None
    }

    /// The most recent explicit attributes among the visible overloads.
    pub fn attributes(&self, name: &str) -> BoundAttributes {
        self.lookup(name)
            .and_then(|list| list.iter().rev().find_map(|b| b.attrs))
            .unwrap_or_default()
    }

    pub fn is_infix(&self, name: &str) -> bool {
        self.attributes(name).is_infix()
    }

    /// Every visible name, innermost shadowing outermost.
    pub fn names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        let mut frame = Some(&self.top);
        while let Some(f) = frame {
            out.extend(f.entries.keys().cloned());
            frame = f.parent.as_ref();
        }
        out
    }

    /// Placeholders in the types of visible lambda parameters.
    pub fn parameter_placeholders(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        let mut frame = Some(&self.top);
        while let Some(f) = frame {
            for list in f.entries.values() {
                for b in list.iter().filter(|b| b.is_parameter()) {
                    if let Some(t) = b.ty() {
                        out.extend(t.vars());
                    }
                }
            }
            frame = f.parent.as_ref();
        }
        out
    }

    pub fn conversions(&self) -> &[Conversion] {
        &self.conversions
    }

    /// Adds a conversion, replacing any with the same endpoints. Returns the replaced one.
    pub fn add_conversion(&mut self, conv: Conversion) -> Option<Conversion> {
        let list = Rc::make_mut(&mut self.conversions);
        let existing = list
            .iter()
            .position(|c| c.from == conv.from && c.to == conv.to);
        match existing {
            Some(i) => Some(std::mem::replace(&mut list[i], conv)),
            None => {
                list.push(conv);
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Value;

    #[test]
    fn single_binding_lookup() {
        let env = TypeEnvironment::new().bind("x", None, Expr::constant(Value::Int(123)));
        let found = env.lookup("x").unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].value, Expr::constant(Value::Int(123)));
        assert!(TypeEnvironment::new().lookup("nosuch").is_none());
    }

    #[test]
    fn overloads_keep_registration_order() {
        let env = TypeEnvironment::new()
            .bind("f", None, Expr::constant(Value::Int(1)))
            .bind("f", None, Expr::constant(Value::str("one")));
        let found = env.lookup("f").unwrap();
        assert_eq!(found.len(), 2);
        assert_eq!(found[0].value.as_constant(), Some(&Value::Int(1)));
        assert_eq!(found[1].value.as_constant(), Some(&Value::str("one")));
    }

    #[test]
    fn attributes_are_queryable() {
        let env = TypeEnvironment::new().bind(
            "->",
            Some(BoundAttributes::INFIX_RTL),
            Expr::var("->"),
        );
        let attrs = env.attributes("->");
        assert_eq!(attrs.fixity, Fixity::Infix);
        assert_eq!(attrs.associativity, Associativity::Rtl);
        assert_eq!(env.attributes("other"), BoundAttributes::default());
    }

    #[test]
    fn inner_frame_shadows_outer() {
        let outer = TypeEnvironment::new().bind("x", None, Expr::constant(Value::Int(2)));
        let inner = outer
            .push_scope()
            .bind("x", None, Expr::constant(Value::Int(1)));
        let found = inner.lookup("x").unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].value.as_constant(), Some(&Value::Int(1)));
        assert_eq!(
            outer.lookup("x").unwrap()[0].value.as_constant(),
            Some(&Value::Int(2))
        );
    }

    #[test]
    fn pre_bind_handle_is_unaffected() {
        let before = TypeEnvironment::new().bind("a", None, Expr::constant(Value::Int(1)));
        let mut after = before.clone();
        after.bind_in_place("a", None, Expr::constant(Value::Int(2)));
        after.bind_in_place("b", None, Expr::constant(Value::Int(3)));
        assert_eq!(before.lookup("a").unwrap().len(), 1);
        assert!(before.lookup("b").is_none());
        assert_eq!(after.lookup("a").unwrap().len(), 2);
    }
}
