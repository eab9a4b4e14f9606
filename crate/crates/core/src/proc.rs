//! External commands: lookup on `PATH`, typed wrapping with conversion
//! overloads, and pipeline execution over OS processes.

use std::cell::RefCell;
use std::collections::HashMap;
use std::env as std_env;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::SystemTime;

use thiserror::Error;

use crate::env::TypeEnvironment;
use crate::expr::{CommandTerm, Expr, HostImpl, Node};
use crate::types::{self, Type};
use crate::value::{ByteSource, HostError, Stage, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandSpec {
    pub path: PathBuf,
    /// Fixed arguments placed before any given at the call site.
    pub leading_args: Vec<String>,
}

impl CommandSpec {
    pub fn new(path: impl Into<PathBuf>, leading_args: Vec<String>) -> Self {
        CommandSpec {
            path: path.into(),
            leading_args,
        }
    }
}

/// Finds commands for names the environment does not bind.
pub trait CommandLookup {
    fn resolve(&self, name: &str) -> Option<CommandSpec>;
}

fn is_executable(path: &Path) -> bool {
    fs::metadata(path)
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

/// First executable named `name` in the directories of `path_var`.
pub fn resolve_in(name: &str, path_var: &OsString) -> Option<CommandSpec> {
    if name.is_empty() || name.contains('/') {
        return None;
    }
    std_env::split_paths(path_var)
        .map(|dir| dir.join(name))
        .find(|p| is_executable(p))
        .map(|p| CommandSpec::new(p, Vec::new()))
}

/// Searches the process `PATH`.
pub fn resolve_command(name: &str) -> Option<CommandSpec> {
    let path = std_env::var_os("PATH")?;
    resolve_in(name, &path)
}

/// `PATH` lookup with a per-session cache. A cached hit is dropped when
/// the file's modification time changes or the file disappears.
#[derive(Debug, Default)]
pub struct PathLookup {
    cache: RefCell<HashMap<String, (CommandSpec, Option<SystemTime>)>>,
}

impl PathLookup {
    pub fn new() -> Self {
        Self::default()
    }
}

fn mtime(path: &Path) -> Option<SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

impl CommandLookup for PathLookup {
    fn resolve(&self, name: &str) -> Option<CommandSpec> {
        if let Some((spec, stamp)) = self.cache.borrow().get(name) {
            if is_executable(&spec.path) && mtime(&spec.path) == *stamp {
                return Some(spec.clone());
            }
        }
        let spec = resolve_command(name)?;
        let stamp = mtime(&spec.path);
        self.cache
            .borrow_mut()
            .insert(name.to_string(), (spec.clone(), stamp));
        Some(spec)
    }
}

/// Fixed name-to-command table, for tests and stubs.
impl CommandLookup for HashMap<String, CommandSpec> {
    fn resolve(&self, name: &str) -> Option<CommandSpec> {
        self.get(name).cloned()
    }
}

/// One typed overload of an external command.
#[derive(Debug, Clone)]
pub struct WrappedCommand {
    pub value: Expr,
    pub ty: Type,
    /// Lower is preferred when several overloads fit.
    pub priority: u32,
}

fn byte_in() -> Type {
    Type::con(types::BYTE_STREAM_IN)
}

fn byte_out() -> Type {
    Type::con(types::BYTE_STREAM_OUT)
}

/// Overloads for a command taking `str_args` argument strings: the raw
/// `Str.. -> ByteStreamIn -> ByteStreamOut` form, plus `fun x -> raw (c x)`
/// for every registered conversion `c` into `ByteStreamIn`, each of these
/// also composed with every conversion out of `ByteStreamOut`.
/// Priority is `10 * input priority + output priority`, the raw input and
/// output counting as 1 and 0.
pub fn wrap_command(
    name: &str,
    spec: &CommandSpec,
    env: &TypeEnvironment,
    str_args: usize,
) -> Vec<WrappedCommand> {
    let raw = Expr::command(CommandTerm {
        name: name.into(),
        spec: spec.clone(),
        str_args,
    });
    let arg_names: Vec<String> = (0..str_args).map(|i| format!("arg{i}")).collect();

    let mut inputs: Vec<(Type, u32, Option<Expr>)> = vec![(byte_in(), 1, None)];
    for conv in env.conversions().iter().filter(|c| c.to == byte_in()) {
        inputs.push((conv.from.clone(), conv.priority, Some(conv.function.clone())));
    }
    let mut outputs: Vec<(Type, u32, Option<Expr>)> = vec![(byte_out(), 0, None)];
    for conv in env.conversions().iter().filter(|c| c.from == byte_out()) {
        outputs.push((conv.to.clone(), conv.priority, Some(conv.function.clone())));
    }

    let mut out = Vec::new();
    for (in_ty, in_prio, in_conv) in &inputs {
        for (out_ty, out_prio, out_conv) in &outputs {
            let value = if in_conv.is_none() && out_conv.is_none() {
                raw.clone()
            } else {
                let applied = arg_names
                    .iter()
                    .fold(raw.clone(), |acc, n| Expr::apply(acc, Expr::var(n)));
                let input = match in_conv {
                    Some(c) => Expr::apply(c.clone(), Expr::var("input")),
                    None => Expr::var("input"),
                };
                let mut body = Expr::apply(applied, input);
                if let Some(c) = out_conv {
                    body = Expr::apply(c.clone(), body);
                }
                arg_names
                    .iter()
                    .map(String::as_str)
                    .chain(["input"])
                    .rev()
                    .fold(body, |acc, p| Expr::lambda(p, acc))
            };
            let ty = Type::curried(
                std::iter::repeat_n(Type::str(), str_args).chain([in_ty.clone()]),
                out_ty.clone(),
            );
            out.push(WrappedCommand {
                value,
                ty,
                priority: in_prio * 10 + out_prio,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot start stage {stage} (`{command}`): {reason}")]
pub struct SpawnError {
    pub stage: usize,
    pub command: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandResult {
    pub exit_code: i32,
    /// Captured output; only the last stage's, and empty when inherited.
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    /// The stage's input was closed before everything was written to it.
    pub broken_pipe: bool,
}

/// Where the last stage writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sink {
    Capture,
    /// The terminal: stdout is inherited, and so is stdin when the
    /// pipeline has no engine-provided input.
    Inherit,
}

thread_local! {
    static LAST_STATUS: RefCell<Option<i32>> = const { RefCell::new(None) };
}

/// Exit code of the final stage of the most recent pipeline on this thread.
pub fn last_status() -> Option<i32> {
    LAST_STATUS.with(|s| *s.borrow())
}

fn exit_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status
        .code()
        .unwrap_or_else(|| 128 + status.signal().unwrap_or(0))
}

fn reap(children: &mut [Child]) {
    for c in children.iter_mut() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Runs `stages` connected by OS pipes, feeding `source` to the first
/// stage. Blocks until every stage has exited.
pub fn spawn_pipeline(
    stages: &[Stage],
    source: &ByteSource,
    sink: Sink,
) -> Result<Vec<CommandResult>, SpawnError> {
    assert!(!stages.is_empty(), "pipeline needs at least one stage");
    let feeds = !matches!(source, ByteSource::Empty);
    let mut children: Vec<Child> = Vec::with_capacity(stages.len());
    let mut upstream = None;
    for (i, stage) in stages.iter().enumerate() {
        let last = i + 1 == stages.len();
        let mut cmd = Command::new(&stage.spec.path);
        cmd.args(stage.argv());
        let stdin = match upstream.take() {
            Some(out) => Stdio::from(out),
            None if feeds => Stdio::piped(),
            None if sink == Sink::Inherit => Stdio::inherit(),
            None => Stdio::null(),
        };
        cmd.stdin(stdin).stderr(Stdio::piped());
        cmd.stdout(if last && sink == Sink::Inherit {
            Stdio::inherit()
        } else {
            Stdio::piped()
        });
        match cmd.spawn() {
            Ok(mut child) => {
                if !last {
                    upstream = child.stdout.take();
                }
                children.push(child);
            }
            Err(e) => {
                drop(cmd);
                reap(&mut children);
                return Err(SpawnError {
                    stage: i,
                    command: stage.spec.path.display().to_string(),
                    reason: e.to_string(),
                });
            }
        }
    }

    let stderr_readers: Vec<_> = children
        .iter_mut()
        .map(|c| {
            let mut err = c.stderr.take().expect("stderr piped");
            thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = err.read_to_end(&mut buf);
                buf
            })
        })
        .collect();
    let stdout_reader = children
        .last_mut()
        .and_then(|c| c.stdout.take())
        .map(|mut out| {
            thread::spawn(move || {
                let mut buf = Vec::new();
                let _ = out.read_to_end(&mut buf);
                buf
            })
        });

    // The source may be an engine-side lazy sequence, so it is written
    // from this thread while the readers above drain the other ends.
    let mut broken_pipe = false;
    let mut feed_error = None;
    if let Some(mut stdin) = children[0].stdin.take() {
        match write_source(source, &mut stdin) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => broken_pipe = true,
            Err(e) => feed_error = Some(e),
        }
    }

    let mut results = Vec::with_capacity(children.len());
    for (i, (child, err)) in children.iter_mut().zip(stderr_readers).enumerate() {
        let status = child.wait();
        let stderr = err.join().unwrap_or_default();
        results.push(CommandResult {
            exit_code: status.map(exit_code).unwrap_or(-1),
            stdout: Vec::new(),
            stderr,
            broken_pipe: i == 0 && broken_pipe,
        });
    }
    if let Some(reader) = stdout_reader {
        results.last_mut().expect("one stage").stdout = reader.join().unwrap_or_default();
    }
    if let Some(e) = feed_error {
        log::warn!("writing pipeline input failed: {e}");
    }
    LAST_STATUS.with(|s| *s.borrow_mut() = results.last().map(|r| r.exit_code));
    Ok(results)
}

fn io_error(e: HostError) -> io::Error {
    io::Error::other(e.0)
}

/// Copies all bytes of `source` into `w`.
pub fn write_source(source: &ByteSource, w: &mut dyn Write) -> io::Result<()> {
    match source {
        ByteSource::Empty => Ok(()),
        ByteSource::Bytes(b) => w.write_all(b),
        ByteSource::File(path) => {
            let mut f = fs::File::open(path)
                .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
            io::copy(&mut f, w).map(|_| ())
        }
        ByteSource::Lines(seq) => {
            for item in seq.take().map_err(io_error)? {
                let v = item.map_err(io_error)?;
                match v {
                    Value::Str(s) => {
                        w.write_all(s.as_bytes())?;
                    }
                    other => write!(w, "{other}")?,
                }
                w.write_all(b"\n")?;
            }
            Ok(())
        }
        ByteSource::Pipeline { .. } => {
            let bytes = drain(source).map_err(io_error)?;
            w.write_all(&bytes)
        }
    }
}

/// Failure text for a pipeline whose last stage exited nonzero with no output.
fn stage_failure(stages: &[Stage], results: &[CommandResult]) -> Option<String> {
    let (i, r) = results
        .iter()
        .enumerate()
        .find(|(_, r)| r.exit_code != 0 && !r.stderr.is_empty())?;
    let text = String::from_utf8_lossy(&r.stderr);
    Some(format!(
        "`{}` exited with status {}: {}",
        stages[i].spec.path.display(),
        r.exit_code,
        text.trim_end()
    ))
}

/// Produces every byte of `source`, running it if it is a command plan.
/// Stage stderr is forwarded to this process's stderr.
pub fn drain(source: &ByteSource) -> Result<Vec<u8>, HostError> {
    match source {
        ByteSource::Pipeline { input, stages } => {
            let results = spawn_pipeline(stages, input, Sink::Capture)
                .map_err(|e| HostError::new(e.to_string()))?;
            forward_stderr(&results);
            let out = results.last().map(|r| r.stdout.clone()).unwrap_or_default();
            if out.is_empty() {
                if let Some(msg) = stage_failure(stages, &results) {
                    log::debug!("{msg}");
                }
            }
            Ok(out)
        }
        other => {
            let mut buf = Vec::new();
            write_source(other, &mut buf).map_err(|e| HostError::new(e.to_string()))?;
            Ok(buf)
        }
    }
}

fn forward_stderr(results: &[CommandResult]) {
    let mut err = io::stderr().lock();
    for r in results {
        let _ = err.write_all(&r.stderr);
    }
}

/// Runs `source` with its final output going straight to the terminal.
/// Non-plan sources are copied to `out`.
pub fn drain_to(source: &ByteSource, sink: Sink, out: &mut dyn Write) -> Result<(), HostError> {
    match (source, sink) {
        (ByteSource::Pipeline { input, stages }, Sink::Inherit) => {
            out.flush().map_err(|e| HostError::new(e.to_string()))?;
            let results = spawn_pipeline(stages, input, Sink::Inherit)
                .map_err(|e| HostError::new(e.to_string()))?;
            forward_stderr(&results);
            Ok(())
        }
        _ => {
            let bytes = drain(source)?;
            out.write_all(&bytes)
                .map_err(|e| HostError::new(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdaptError {
    #[error("no conversion from {from} to {to}")]
    NoConversion { from: Type, to: Type },
    #[error(transparent)]
    Host(#[from] HostError),
}

/// Converts `value` to `target` with the best registered conversion whose
/// source type is the value's type. Already at `target`: returned as is.
pub fn adapt_stream(value: Value, target: &Type, env: &TypeEnvironment) -> Result<Value, AdaptError> {
    let from = value.type_of();
    if &from == target {
        return Ok(value);
    }
    let best = env
        .conversions()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.from == from && &c.to == target)
        .min_by_key(|(i, c)| (c.priority, *i))
        .map(|(_, c)| c);
    let Some(conv) = best else {
        return Err(AdaptError::NoConversion {
            from,
            to: target.clone(),
        });
    };
    match conv.function.node() {
        Node::HostFunction(h) => match &h.imp {
            HostImpl::Native(f) => Ok(f(&[value])?),
            _ => Err(AdaptError::NoConversion {
                from,
                to: target.clone(),
            }),
        },
        _ => Err(AdaptError::NoConversion {
            from,
            to: target.clone(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stage(path: &str, args: &[&str]) -> Stage {
        Stage {
            spec: CommandSpec::new(path, vec![]),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn resolves_from_path() {
        let sh = resolve_command("sh").expect("sh on PATH");
        assert!(sh.path.ends_with("sh"));
        assert!(resolve_command("definitely-not-a-command-xyz").is_none());
    }

    #[test]
    fn cached_lookup_matches_direct() {
        let lookup = PathLookup::new();
        assert_eq!(lookup.resolve("sh"), resolve_command("sh"));
        assert_eq!(lookup.resolve("sh"), resolve_command("sh"));
    }

    #[test]
    fn single_true_stage() {
        let t = resolve_command("true").unwrap();
        let r = spawn_pipeline(
            &[Stage { spec: t, args: vec![] }],
            &ByteSource::Empty,
            Sink::Capture,
        )
        .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].exit_code, 0);
        assert!(r[0].stdout.is_empty());
    }

    #[test]
    fn bogus_path_fails_at_stage_zero() {
        let err = spawn_pipeline(
            &[stage("/nonexistent/bogus-command", &[])],
            &ByteSource::Empty,
            Sink::Capture,
        )
        .unwrap_err();
        assert_eq!(err.stage, 0);
    }

    #[test]
    fn stages_connect_and_stderr_stays_separate() {
        let sh = resolve_command("sh").unwrap().path;
        let sh = sh.to_str().unwrap();
        let r = spawn_pipeline(
            &[
                stage(sh, &["-c", "cat; echo oops >&2"]),
                stage(sh, &["-c", "tr a-z A-Z"]),
            ],
            &ByteSource::text("abc\n"),
            Sink::Capture,
        )
        .unwrap();
        assert_eq!(r[1].stdout, b"ABC\n");
        assert_eq!(r[0].stderr, b"oops\n");
        assert!(r[1].stderr.is_empty());
        assert_eq!(last_status(), Some(0));
    }

    #[test]
    fn large_input_does_not_deadlock() {
        let cat = resolve_command("cat").unwrap();
        let data = vec![b'x'; 64 << 20];
        let r = spawn_pipeline(
            &[Stage { spec: cat.clone(), args: vec![] }, Stage { spec: cat, args: vec![] }],
            &ByteSource::Bytes(data.clone().into()),
            Sink::Capture,
        )
        .unwrap();
        assert_eq!(r[1].stdout.len(), data.len());
    }

    #[test]
    fn downstream_exit_is_not_an_error() {
        let head = resolve_command("head").unwrap();
        let data = vec![b'y'; 1 << 20];
        let r = spawn_pipeline(
            &[Stage { spec: head, args: vec!["-c".into(), "1".into()] }],
            &ByteSource::Bytes(data.into()),
            Sink::Capture,
        )
        .unwrap();
        assert_eq!(r[0].stdout, b"y");
        assert_eq!(r[0].exit_code, 0);
    }

    #[test]
    fn wrapping_without_conversions() {
        let spec = CommandSpec::new("/bin/wc", vec![]);
        let w = wrap_command("wc", &spec, &TypeEnvironment::new(), 0);
        let types: Vec<String> = w.iter().map(|c| c.ty.to_string()).collect();
        assert_eq!(types, vec!["ByteStreamIn -> ByteStreamOut"]);
        assert_eq!(w[0].priority, 10);
        assert!(matches!(w[0].value.node(), Node::Command(_)));
    }

    fn open_fds() -> usize {
        std::fs::read_dir("/proc/self/fd").expect("procfs").count()
    }

    fn on_path(name: &str, args: &[&str]) -> Stage {
        Stage {
            spec: resolve_command(name).unwrap_or_else(|| panic!("{name} not on PATH")),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    // Counting descriptors is only meaningful with no other test running,
    // so the count happens in a child copy of this test binary.
    #[test]
    #[ignore = "run through pipelines_close_every_descriptor"]
    fn descriptor_probe() {
        let input = ByteSource::text(&"line\n".repeat(50_000));
        let missing = stage("/nonexistent/favalon-test", &[]);
        spawn_pipeline(&[on_path("cat", &[])], &ByteSource::Empty, Sink::Capture).unwrap();
        let before = open_fds();
        for _ in 0..25 {
            spawn_pipeline(&[on_path("cat", &[]), on_path("wc", &["-l"])], &input, Sink::Capture).unwrap();
            spawn_pipeline(&[on_path("cat", &[]), on_path("head", &["-n", "1"])], &input, Sink::Capture)
                .unwrap();
            assert!(spawn_pipeline(&[on_path("cat", &[]), missing.clone()], &input, Sink::Capture).is_err());
        }
        assert_eq!(open_fds(), before);
    }

    #[test]
    #[cfg(target_os = "linux")]
    fn pipelines_close_every_descriptor() {
        let out = std::process::Command::new(std::env::current_exe().unwrap())
            .args(["proc::tests::descriptor_probe", "--exact", "--ignored", "--test-threads=1"])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("1 passed"));
    }
}
