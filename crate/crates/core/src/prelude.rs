//! The standard environment: type names, operators, text and stream
//! functions, and the conversions used to wrap external commands.

use std::collections::HashSet;
use std::io::Cursor;
use std::rc::Rc;
use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

use crate::env::{BoundAttributes, Conversion, TypeEnvironment};
use crate::expr::{Expr, HostFunction, HostImpl, Node};
use crate::infer::{self, InferContext, Mode};
use crate::lexer::tokenize;
use crate::parser::parse;
use crate::proc;
use crate::rewrite::normalize;
use crate::types::{self, PlaceholderSupply, Type};
use crate::value::{ByteSource, HostError, SeqHandle, StreamHandle, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreludeError {
    #[error("invalid signature `{text}`: {message}")]
    Signature { text: String, message: String },
    #[error("signature `{0}` takes a tuple; write it curried, e.g. `Int -> Int -> Int`")]
    Tupled(String),
    #[error("cannot define `{name}`: {message}")]
    Definition { name: String, message: String },
}

/// Placeholder ids for prelude signatures live far above the ids a
/// session hands out, so the two never meet.
static SIGNATURE_VARS: AtomicU32 = AtomicU32::new(1 << 30);

fn signature_var() -> Type {
    Type::Var(SIGNATURE_VARS.fetch_add(1, Ordering::Relaxed))
}

fn attrs_env() -> TypeEnvironment {
    TypeEnvironment::new().bind("->", Some(BoundAttributes::INFIX_RTL), Expr::var("->"))
}

/// Reads `Str -> List a -> Int`-style text. Type names are looked up in
/// `env`; unbound lowercase names are placeholders shared within the text.
pub fn parse_signature(text: &str, env: &TypeEnvironment) -> Result<Type, PreludeError> {
    let err = |message: String| PreludeError::Signature {
        text: text.to_string(),
        message,
    };
    let tokens = tokenize(text).map_err(|e| err(e.to_string()))?;
    if tokens.iter().any(|t| t.is_symbol(",")) {
        return Err(PreludeError::Tupled(text.to_string()));
    }
    let expr = parse(&tokens).map_err(|e| err(e.to_string()))?;
    let expr = normalize(&expr, &attrs_env()).map_err(|e| err(e.to_string()))?;
    let mut vars = std::collections::HashMap::new();
    to_type(&expr, env, &mut vars).map_err(err)
}

fn to_type(
    e: &Expr,
    env: &TypeEnvironment,
    vars: &mut std::collections::HashMap<String, Type>,
) -> Result<Type, String> {
    match e.node() {
        Node::Variable(n) => {
            let bound = env.lookup(n).and_then(|l| l.last()).map(|b| b.value.node().clone());
            match bound {
                Some(Node::TypeTerm(t)) => Ok(t),
                Some(Node::TypeConstructor { name, arity }) => Ok(Type::ctor(&name, arity)),
                _ if n.starts_with(|c: char| c.is_lowercase()) => {
                    Ok(vars.entry(n.to_string()).or_insert_with(signature_var).clone())
                }
                _ => Err(format!("unknown type `{n}`")),
            }
        }
        Node::Apply(..) => {
            let (head, args) = e.spine();
            if head.as_variable().is_some_and(|n| &**n == "->") && args.len() == 2 {
                return Ok(Type::arrow(
                    to_type(&args[0], env, vars)?,
                    to_type(&args[1], env, vars)?,
                ));
            }
            let mut t = to_type(&head, env, vars)?;
            for a in &args {
                t = Type::app(t, to_type(a, env, vars)?);
            }
            Ok(t)
        }
        _ => Err(format!("`{e}` is not a type")),
    }
}

/// Appends a host function overload for `name`. Multi-parameter
/// implementations receive all arguments at once and are exposed curried.
pub fn register_host_function(
    env: &TypeEnvironment,
    name: &str,
    signature: &str,
    attrs: Option<BoundAttributes>,
    imp: impl Fn(&[Value]) -> Result<Value, HostError> + 'static,
) -> Result<TypeEnvironment, PreludeError> {
    let ty = parse_signature(signature, env)?;
    let f = HostFunction::native(name, ty, imp);
    Ok(env.bind(name, attrs, Expr::host(f)))
}

/// Registers an adapter between stream representations. A second
/// registration for the same pair replaces the first.
pub fn register_conversion(
    env: &TypeEnvironment,
    from: Type,
    to: Type,
    function: Expr,
    priority: u32,
) -> TypeEnvironment {
    let mut next = env.clone();
    let replaced = next.add_conversion(Conversion {
        from: from.clone(),
        to: to.clone(),
        function,
        priority,
    });
    if replaced.is_some() {
        log::warn!("conversion {from} -> {to} registered again; replacing the earlier one");
    }
    next
}

fn host(name: &str, sig: Type, imp: impl Fn(&[Value]) -> Result<Value, HostError> + 'static) -> Expr {
    Expr::host(HostFunction::native(name, sig, imp))
}

fn special(name: &str, imp: HostImpl) -> Expr {
    let (a, b) = (signature_var(), signature_var());
    Expr::host(HostFunction {
        name: name.into(),
        signature: Type::curried([a.clone(), b.clone()], Type::arrow(a, b)),
        arity: 2,
        imp,
    })
}

fn con(name: &str) -> Type {
    Type::con(name)
}

fn handle(v: &Value) -> Result<&StreamHandle, HostError> {
    v.stream_handle()
        .ok_or_else(|| HostError::new(format!("expected a stream, got {}", v.type_of())))
}

fn seq_of(v: &Value) -> Result<&SeqHandle, HostError> {
    match v {
        Value::Seq(s) => Ok(s),
        other => Err(HostError::new(format!("expected a sequence, got {}", other.type_of()))),
    }
}

/// An iterator that runs `make` on the first pull.
fn deferred(
    make: impl FnOnce() -> Result<Box<dyn Iterator<Item = Result<Value, HostError>>>, HostError> + 'static,
) -> Box<dyn Iterator<Item = Result<Value, HostError>>> {
    let mut make = Some(make);
    let mut inner: Option<Box<dyn Iterator<Item = Result<Value, HostError>>>> = None;
    Box::new(std::iter::from_fn(move || {
        if let Some(m) = make.take() {
            match m() {
                Ok(it) => inner = Some(it),
                Err(e) => return Some(Err(e)),
            }
        }
        inner.as_mut()?.next()
    }))
}

fn lines_of(source: ByteSource) -> SeqHandle {
    SeqHandle::new(
        Type::str(),
        deferred(move || {
            let bytes = proc::drain(&source)?;
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let lines: Vec<Result<Value, HostError>> =
                text.lines().map(|l| Ok(Value::str(l))).collect();
            Ok(Box::new(lines.into_iter()))
        }),
    )
}

fn csv_rows(source: ByteSource) -> SeqHandle {
    SeqHandle::new(
        Type::list(Type::str()),
        deferred(move || {
            let bytes = proc::drain(&source)?;
            let reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .from_reader(Cursor::new(bytes));
            Ok(Box::new(reader.into_records().map(|r| {
                let rec = r.map_err(|e| HostError::new(format!("pcsv: {e}")))?;
                Ok(Value::list(Type::str(), rec.iter().map(Value::str).collect()))
            })))
        }),
    )
}

fn parse_int(s: &str, radix: u32) -> Result<Value, HostError> {
    if !(2..=36).contains(&radix) {
        return Err(HostError::new(format!("toInt: radix {radix} is out of range 2..36")));
    }
    i64::from_str_radix(s.trim(), radix)
        .map(Value::Int)
        .map_err(|_| HostError::new(format!("toInt: cannot read {} as an integer", Value::str(s).quoted())))
}

fn int_op(name: &'static str, f: fn(i64, i64) -> Option<i64>) -> Expr {
    host(
        name,
        Type::curried([Type::int(), Type::int()], Type::int()),
        move |a| {
            f(a[0].as_int()?, a[1].as_int()?)
                .map(Value::Int)
                .ok_or_else(|| HostError::new(format!("`{name}`: integer overflow or division by zero")))
        },
    )
}

fn float_op(name: &'static str, f: fn(f64, f64) -> f64) -> Expr {
    host(
        name,
        Type::curried([Type::float(), Type::float()], Type::float()),
        move |a| Ok(Value::Float(f(a[0].as_float()?, a[1].as_float()?))),
    )
}

fn bool_op(name: &'static str, f: fn(bool, bool) -> bool) -> Expr {
    host(
        name,
        Type::curried([Type::bool(), Type::bool()], Type::bool()),
        move |a| Ok(Value::Bool(f(a[0].as_bool()?, a[1].as_bool()?))),
    )
}

/// Infers a definition written in the language itself.
fn define(env: &TypeEnvironment, name: &str, source: &str) -> Result<Expr, PreludeError> {
    let err = |message: String| PreludeError::Definition {
        name: name.to_string(),
        message,
    };
    let tokens = tokenize(source).map_err(|e| err(e.to_string()))?;
    let parsed = parse(&tokens).map_err(|e| err(e.to_string()))?;
    let normalized = normalize(&parsed, env).map_err(|e| err(e.to_string()))?;
    let mut supply = PlaceholderSupply::starting_at(SIGNATURE_VARS.fetch_add(1 << 16, Ordering::Relaxed));
    let mut ctx = InferContext::new(&mut supply, Mode::Script);
    infer::infer(&normalized, env, &mut ctx).map_err(|e| err(e.to_string()))
}

/// The stream conversions, by name: `(name, from, to, priority)`.
pub const CONVERSIONS: &[(&str, &str, &str, u32)] = &[
    ("bs", "ByteStreamOut", "ByteStreamIn", 1),
    ("tws", "TextWriter", "ByteStreamIn", 2),
    ("sws", "Seq Str", "ByteStreamIn", 3),
    ("trs", "TextReader", "ByteStreamIn", 4),
    ("reader", "ByteStreamOut", "TextReader", 1),
    ("lines", "ByteStreamOut", "Seq Str", 2),
];

fn conversion_impl(name: &str) -> fn(&[Value]) -> Result<Value, HostError> {
    match name {
        "bs" | "tws" | "trs" => |a| Ok(Value::ByteStreamIn(handle(&a[0])?.clone())),
        "sws" => |a| {
            let seq = seq_of(&a[0])?.clone();
            Ok(Value::ByteStreamIn(StreamHandle::new(ByteSource::Lines(seq))))
        },
        "reader" => |a| Ok(Value::TextReader(handle(&a[0])?.clone())),
        "lines" => |a| Ok(Value::Seq(lines_of(handle(&a[0])?.take()?))),
        _ => unreachable!("unknown conversion"),
    }
}

/// Binds the standard environment into `env`.
pub fn install_prelude(env: &TypeEnvironment) -> TypeEnvironment {
    try_install(env).expect("prelude definitions are well-formed")
}

fn try_install(env: &TypeEnvironment) -> Result<TypeEnvironment, PreludeError> {
    let mut env = env.clone();
    for name in [
        types::INT,
        types::FLOAT,
        types::BOOL,
        types::CHAR,
        types::STR,
        types::UNIT,
        types::BYTE_STREAM_IN,
        types::BYTE_STREAM_OUT,
        types::TEXT_READER,
        types::TEXT_WRITER,
        types::EXIT_STATUS,
    ] {
        env.bind_in_place(name, None, Expr::type_term(con(name)));
    }
    for (name, arity) in [(types::LIST, 1), (types::SEQ, 1), (types::PAIR, 2)] {
        env.bind_in_place(name, None, Expr::type_constructor(name, arity));
    }
    env.bind_in_place("bool", None, Expr::type_term(Type::bool()));
    env.bind_in_place("LineSeq", None, Expr::type_term(Type::seq(Type::str())));

    env.bind_in_place("->", Some(BoundAttributes::INFIX_RTL), special("->", HostImpl::Arrow));
    env.bind_in_place("=", Some(BoundAttributes::INFIX_RTL), special("=", HostImpl::Bind));

    let ltr = Some(BoundAttributes::INFIX_LTR);
    env.bind_in_place("+", ltr, int_op("+", i64::checked_add));
    env.bind_in_place("+", ltr, float_op("+", |a, b| a + b));
    env.bind_in_place("-", ltr, int_op("-", i64::checked_sub));
    env.bind_in_place("-", ltr, float_op("-", |a, b| a - b));
    env.bind_in_place("*", ltr, int_op("*", i64::checked_mul));
    env.bind_in_place("*", ltr, float_op("*", |a, b| a * b));
    env.bind_in_place("/", ltr, int_op("/", i64::checked_div));
    env.bind_in_place("/", ltr, float_op("/", |a, b| a / b));
    env.bind_in_place("&&", ltr, bool_op("&&", |a, b| a && b));
    env.bind_in_place("||", ltr, bool_op("||", |a, b| a || b));

    env.bind_in_place("true", None, Expr::constant(Value::Bool(true)));
    env.bind_in_place("false", None, Expr::constant(Value::Bool(false)));

    let pipe = define(&env, "|", "f -> g -> g f")?;
    env.bind_in_place("|", ltr, pipe);

    // Radix form first: it is overload (1), the plain form (2).
    env = register_host_function(&env, "toInt", "Str -> Int -> Int", None, |a| {
        let radix = u32::try_from(a[1].as_int()?)
            .map_err(|_| HostError::new("toInt: radix must be positive"))?;
        parse_int(a[0].as_str()?, radix)
    })?;
    env = register_host_function(&env, "toInt", "Str -> Int", None, |a| {
        parse_int(a[0].as_str()?, 10)
    })?;
    env = register_host_function(&env, "toFloat", "Str -> Float", None, |a| {
        let s = a[0].as_str()?;
        s.trim()
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|_| HostError::new(format!("toFloat: cannot read {} as a number", Value::str(s).quoted())))
    })?;
    env = register_host_function(&env, "toStr", "Int -> Str", None, |a| {
        Ok(Value::str(a[0].as_int()?.to_string()))
    })?;
    env = register_host_function(&env, "toStr", "Float -> Str", None, |a| {
        Ok(Value::str(a[0].to_string()))
    })?;
    env = register_host_function(&env, "max", "Int -> Int -> Int", None, |a| {
        Ok(Value::Int(a[0].as_int()?.max(a[1].as_int()?)))
    })?;
    env = register_host_function(&env, "max", "Float -> Float -> Float", None, |a| {
        Ok(Value::Float(a[0].as_float()?.max(a[1].as_float()?)))
    })?;

    env = register_host_function(&env, "echo", "Str -> TextWriter", None, |a| {
        let text = format!("{}\n", a[0].as_str()?);
        Ok(Value::TextWriter(StreamHandle::new(ByteSource::text(&text))))
    })?;
    env = register_host_function(&env, "cat", "Str -> TextReader", None, |a| {
        let path = a[0].as_str()?.to_string();
        Ok(Value::TextReader(StreamHandle::new(ByteSource::File(path.into()))))
    })?;
    env = register_host_function(&env, "pcsv", "TextReader -> Seq (List Str)", None, |a| {
        Ok(Value::Seq(csv_rows(handle(&a[0])?.take()?)))
    })?;
    env = register_host_function(
        &env,
        "elementAt",
        "Int -> Seq (List Str) -> Seq Str",
        None,
        |a| {
            let index = a[0].as_int()?;
            let rows = seq_of(&a[1])?.take()?;
            let items = rows.enumerate().map(move |(n, row)| match row? {
                Value::List { items, .. } => usize::try_from(index)
                    .ok()
                    .and_then(|i| items.get(i).cloned())
                    .ok_or_else(|| HostError::new(format!("elementAt: row {n} has no column {index}"))),
                other => Err(HostError::new(format!("elementAt: expected a row, got {}", other.type_of()))),
            });
            Ok(Value::Seq(SeqHandle::new(Type::str(), Box::new(items))))
        },
    )?;
    env = register_host_function(&env, "distinct", "Seq Str -> Seq Str", None, |a| {
        let items = seq_of(&a[0])?.take()?;
        let mut seen: HashSet<Rc<str>> = HashSet::new();
        let unique = items.filter(move |item| match item {
            Ok(Value::Str(s)) => seen.insert(s.clone()),
            _ => true,
        });
        Ok(Value::Seq(SeqHandle::new(Type::str(), Box::new(unique))))
    })?;

    for &(name, from, to, priority) in CONVERSIONS {
        let from_ty = parse_signature(from, &env)?;
        let to_ty = parse_signature(to, &env)?;
        let f = host(name, Type::arrow(from_ty.clone(), to_ty.clone()), conversion_impl(name));
        env.bind_in_place(name, None, f.clone());
        env = register_conversion(&env, from_ty, to_ty, f, priority);
    }
    // A command used as a source runs with empty input.
    let mut with_empty = env.clone();
    with_empty.bind_in_place(
        "emptyInput",
        None,
        Expr::constant(Value::ByteStreamIn(StreamHandle::new(ByteSource::Empty))),
    );
    let run = define(&with_empty, "run", "f -> bs (f emptyInput)")?;
    env.bind_in_place("run", None, run.clone());
    let run_ty = run.ty().cloned().expect("typed definition");
    let (params, result) = run_ty.uncurry();
    debug_assert_eq!(result, con(types::BYTE_STREAM_IN));
    env = register_conversion(&env, params[0].clone(), result, run, 5);
    Ok(env)
}
