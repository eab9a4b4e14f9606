//! Runtime values produced by host functions and external commands.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::path::PathBuf;
use std::rc::Rc;

use thiserror::Error;

use crate::proc::CommandSpec;
use crate::types::{self, Type};

/// Failure raised by a host function implementation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct HostError(pub String);

impl HostError {
    pub fn new(msg: impl Into<String>) -> Self {
        HostError(msg.into())
    }
}

pub type SeqItems = Box<dyn Iterator<Item = Result<Value, HostError>>>;

/// Lazy, single-consumer sequence of values.
#[derive(Clone)]
pub struct SeqHandle {
    items: Rc<RefCell<Option<SeqItems>>>,
    elem: Type,
}

impl SeqHandle {
    pub fn new(elem: Type, items: SeqItems) -> Self {
        SeqHandle {
            items: Rc::new(RefCell::new(Some(items))),
            elem,
        }
    }

    pub fn from_values(elem: Type, values: Vec<Value>) -> Self {
        Self::new(elem, Box::new(values.into_iter().map(Ok)))
    }

    pub fn elem(&self) -> &Type {
        &self.elem
    }

    pub fn is_consumed(&self) -> bool {
        self.items.borrow().is_none()
    }

    /// Hands the iterator to the caller; a second take is a contract violation.
    pub fn take(&self) -> Result<SeqItems, HostError> {
        self.items
            .borrow_mut()
            .take()
            .ok_or_else(|| HostError::new("sequence already consumed"))
    }
}

impl PartialEq for SeqHandle {
    fn eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.items, &other.items)
    }
}

impl fmt::Debug for SeqHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seq<{}>", self.elem)
    }
}

/// One external command in a pipeline: the resolved spec plus the
/// argument strings supplied at the application site.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub spec: CommandSpec,
    pub args: Vec<String>,
}

impl Stage {
    pub fn argv(&self) -> Vec<String> {
        self.spec
            .leading_args
            .iter()
            .chain(self.args.iter())
            .cloned()
            .collect()
    }
}

/// Where the bytes of a stream come from. Pipelines are plans: nothing runs
/// until the stream is drained.
#[derive(Debug, Clone, PartialEq)]
pub enum ByteSource {
    Empty,
    Bytes(Rc<[u8]>),
    File(PathBuf),
    Lines(SeqHandle),
    Pipeline {
        input: Box<ByteSource>,
        stages: Vec<Stage>,
    },
}

impl ByteSource {
    pub fn text(s: &str) -> Self {
        ByteSource::Bytes(Rc::from(s.as_bytes()))
    }

    pub fn is_replayable(&self) -> bool {
        match self {
            ByteSource::Lines(_) => false,
            ByteSource::Pipeline { input, .. } => input.is_replayable(),
            _ => true,
        }
    }

    /// Feeds this source into one more command, flattening into a single OS pipeline.
    pub fn pipe_into(self, stage: Stage) -> ByteSource {
        match self {
            ByteSource::Pipeline { input, mut stages } => {
                stages.push(stage);
                ByteSource::Pipeline { input, stages }
            }
            other => ByteSource::Pipeline {
                input: Box::new(other),
                stages: vec![stage],
            },
        }
    }
}

/// Single-consumer handle around a byte source.
#[derive(Debug, Clone)]
pub struct StreamHandle {
    source: ByteSource,
    consumed: Rc<Cell<bool>>,
}

impl StreamHandle {
    pub fn new(source: ByteSource) -> Self {
        StreamHandle {
            source,
            consumed: Rc::new(Cell::new(false)),
        }
    }

    pub fn source(&self) -> &ByteSource {
        &self.source
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed.get()
    }

    /// Sources backed by a lazy sequence can be read once; everything else
    /// (bytes, files, command plans) is re-read on every take.
    pub fn take(&self) -> Result<ByteSource, HostError> {
        if !self.source.is_replayable() {
            if self.consumed.replace(true) {
                return Err(HostError::new("stream already consumed"));
            }
            return Ok(self.source.clone());
        }
        self.consumed.set(true);
        Ok(self.source.clone())
    }
}

impl PartialEq for StreamHandle {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Char(char),
    Str(Rc<str>),
    Unit,
    List { items: Rc<[Value]>, elem: Type },
    Seq(SeqHandle),
    ByteStreamIn(StreamHandle),
    ByteStreamOut(StreamHandle),
    TextReader(StreamHandle),
    TextWriter(StreamHandle),
    ExitStatus(i32),
}

impl Value {
    pub fn str(s: impl AsRef<str>) -> Value {
        Value::Str(Rc::from(s.as_ref()))
    }

    pub fn list(elem: Type, items: Vec<Value>) -> Value {
        Value::List {
            items: Rc::from(items),
            elem,
        }
    }

    pub fn type_of(&self) -> Type {
        match self {
            Value::Int(_) => Type::int(),
            Value::Float(_) => Type::float(),
            Value::Bool(_) => Type::bool(),
            Value::Char(_) => Type::char(),
            Value::Str(_) => Type::str(),
            Value::Unit => Type::unit(),
            Value::List { elem, .. } => Type::list(elem.clone()),
            Value::Seq(s) => Type::seq(s.elem().clone()),
            Value::ByteStreamIn(_) => Type::con(types::BYTE_STREAM_IN),
            Value::ByteStreamOut(_) => Type::con(types::BYTE_STREAM_OUT),
            Value::TextReader(_) => Type::con(types::TEXT_READER),
            Value::TextWriter(_) => Type::con(types::TEXT_WRITER),
            Value::ExitStatus(_) => Type::con(types::EXIT_STATUS),
        }
    }

    pub fn is_stream(&self) -> bool {
        matches!(
            self,
            Value::Seq(_)
                | Value::ByteStreamIn(_)
                | Value::ByteStreamOut(_)
                | Value::TextReader(_)
                | Value::TextWriter(_)
        )
    }

    pub fn stream_handle(&self) -> Option<&StreamHandle> {
        match self {
            Value::ByteStreamIn(h)
            | Value::ByteStreamOut(h)
            | Value::TextReader(h)
            | Value::TextWriter(h) => Some(h),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Result<i64, HostError> {
        match self {
            Value::Int(i) => Ok(*i),
            other => Err(HostError::new(format!("expected Int, got {}", other.type_of()))),
        }
    }

    pub fn as_float(&self) -> Result<f64, HostError> {
        match self {
            Value::Float(x) => Ok(*x),
            other => Err(HostError::new(format!("expected Float, got {}", other.type_of()))),
        }
    }

    pub fn as_bool(&self) -> Result<bool, HostError> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(HostError::new(format!("expected Bool, got {}", other.type_of()))),
        }
    }

    pub fn as_str(&self) -> Result<&str, HostError> {
        match self {
            Value::Str(s) => Ok(s),
            other => Err(HostError::new(format!("expected Str, got {}", other.type_of()))),
        }
    }

    /// Rendering used in value position: strings are quoted.
    pub fn quoted(&self) -> String {
        match self {
            Value::Str(s) => quote(s),
            Value::Char(c) => format!("{c:?}"),
            Value::List { items, .. } => {
                let inner: Vec<String> = items.iter().map(Value::quoted).collect();
                format!("[{}]", inner.join(", "))
            }
            other => other.to_string(),
        }
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => write!(f, "{c}"),
            Value::Str(s) => f.write_str(s),
            Value::Unit => f.write_str("()"),
            Value::List { .. } => f.write_str(&self.quoted()),
            Value::Seq(_) => f.write_str("<seq>"),
            Value::ByteStreamIn(_)
            | Value::ByteStreamOut(_)
            | Value::TextReader(_)
            | Value::TextWriter(_) => write!(f, "<{}>", self.type_of()),
            Value::ExitStatus(code) => write!(f, "exit {code}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_handle_is_single_consumer() {
        let lines = SeqHandle::from_values(Type::str(), vec![Value::str("a")]);
        let h = StreamHandle::new(ByteSource::Lines(lines));
        let shared = h.clone();
        assert!(h.take().is_ok());
        assert!(shared.is_consumed());
        assert_eq!(shared.take().unwrap_err().0, "stream already consumed");
        let bytes = StreamHandle::new(ByteSource::text("abc"));
        assert!(bytes.take().is_ok());
        assert!(bytes.take().is_ok());
    }

    #[test]
    fn seq_handle_is_single_consumer() {
        let s = SeqHandle::from_values(Type::int(), vec![Value::Int(1)]);
        let items: Vec<_> = s.take().unwrap().collect();
        assert_eq!(items, vec![Ok(Value::Int(1))]);
        assert!(s.take().is_err());
    }

    #[test]
    fn rendering() {
        assert_eq!(Value::str("a\"b").quoted(), r#""a\"b""#);
        assert_eq!(Value::str("ab").to_string(), "ab");
        assert_eq!(Value::Float(2.0).to_string(), "2.0");
        let l = Value::list(Type::str(), vec![Value::str("x"), Value::str("y")]);
        assert_eq!(l.to_string(), r#"["x", "y"]"#);
        assert_eq!(l.type_of().to_string(), "List Str");
    }

    #[test]
    fn pipe_into_flattens() {
        let spec = CommandSpec::new("/bin/cat", vec![]);
        let stage = Stage {
            spec,
            args: vec![],
        };
        let once = ByteSource::Empty.pipe_into(stage.clone());
        let twice = once.pipe_into(stage);
        match twice {
            ByteSource::Pipeline { input, stages } => {
                assert_eq!(*input, ByteSource::Empty);
                assert_eq!(stages.len(), 2);
            }
            _ => panic!("expected pipeline"),
        }
    }
}
