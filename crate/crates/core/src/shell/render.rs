//! Turning reduced values into terminal text.

use std::io::Write;

use crate::expr::{Expr, Node};
use crate::infer::Mode;
use crate::proc::{self, Sink};
use crate::types::Type;
use crate::value::{HostError, Value};

fn io(e: std::io::Error) -> HostError {
    HostError::new(e.to_string())
}

/// Short form used where a value must not be consumed, e.g. after a bind.
pub fn summary(value: &Expr) -> String {
    match value.node() {
        Node::Constant(v) if v.is_stream() => "<stream>".to_string(),
        Node::Constant(v) => v.quoted(),
        Node::TypeTerm(t) => t.pretty(),
        Node::TypeConstructor { name, .. } => name.to_string(),
        _ => "<fun>".to_string(),
    }
}

/// Writes `value`. In the REPL the type follows after ` : `, on its own
/// line when the value printed lines of its own; scripts print values only,
/// with strings unquoted.
pub fn render(
    value: &Expr,
    ty: &Type,
    mode: Mode,
    sink: Sink,
    out: &mut dyn Write,
) -> Result<(), HostError> {
    let typed = mode == Mode::Repl;
    let inline = |out: &mut dyn Write, text: String| -> Result<(), HostError> {
        if typed {
            writeln!(out, "{text} : {}", ty.pretty()).map_err(io)
        } else {
            writeln!(out, "{text}").map_err(io)
        }
    };
    match value.node() {
        Node::Constant(Value::Seq(seq)) => {
            for item in seq.take()? {
                match item? {
                    Value::Str(s) => writeln!(out, "{s}").map_err(io)?,
                    other => writeln!(out, "{}", other.quoted()).map_err(io)?,
                }
            }
            type_line(out, ty, typed)
        }
        Node::Constant(v) if v.is_stream() => {
            let source = v.stream_handle().expect("stream value").take()?;
            if sink == Sink::Inherit {
                proc::drain_to(&source, sink, out)?;
            } else {
                let buf = proc::drain(&source)?;
                out.write_all(&buf).map_err(io)?;
                if typed && !buf.is_empty() && !buf.ends_with(b"\n") {
                    writeln!(out).map_err(io)?;
                }
            }
            type_line(out, ty, typed)
        }
        Node::Constant(Value::Str(s)) if !typed => inline(out, s.to_string()),
        Node::Constant(v) => inline(out, v.quoted()),
        Node::TypeTerm(t) => inline(out, t.pretty()),
        Node::TypeConstructor { name, .. } => inline(out, name.to_string()),
        _ => inline(out, "<fun>".to_string()),
    }
}

fn type_line(out: &mut dyn Write, ty: &Type, typed: bool) -> Result<(), HostError> {
    if typed {
        writeln!(out, ": {}", ty.pretty()).map_err(io)?;
    }
    out.flush().map_err(io)
}
