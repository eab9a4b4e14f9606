//! The interactive frontend and script runner.

mod render;
mod repl;
mod session;

use std::io::Write;
use std::path::Path;

pub use render::{render, summary};
pub use repl::repl_loop;
pub use session::{Diagnostic, DumpFlags, Session, Stage};

/// Groups physical lines into logical statements: a line continues while
/// brackets or a string are open or it ends in an infix operator.
/// Yields `(first line number, text)`.
pub fn statements(session: &Session, text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (i, line) in text.lines().enumerate() {
        let (start, buf) = match pending.take() {
            Some((start, mut buf)) => {
                buf.push('\n');
                buf.push_str(line);
                (start, buf)
            }
            None if line.trim_start().starts_with('#') => continue,
            None => (i + 1, line.to_string()),
        };
        if session.needs_more(&buf) {
            pending = Some((start, buf));
        } else {
            out.push((start, buf));
        }
    }
    out.extend(pending);
    out
}

/// Evaluates `text` statement by statement, stopping at the first error.
/// The diagnostic is prefixed with `origin:line`.
pub fn run_source(
    session: &mut Session,
    origin: &str,
    text: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    for (line_no, stmt) in statements(session, text) {
        if let Err(d) = session.eval_line(&stmt, out) {
            let _ = out.flush();
            let _ = writeln!(err, "{origin}:{line_no}: {d}");
            return 1;
        }
    }
    let _ = out.flush();
    0
}

/// Runs a script file. Exit status 0 on success, 1 on the first diagnostic
/// or when the file cannot be read.
pub fn run_script(
    path: &Path,
    session: &mut Session,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match std::fs::read_to_string(path) {
        Ok(text) => run_source(session, &path.display().to_string(), &text, out, err),
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", path.display());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::Mode;

    fn script(text: &str) -> (i32, String, String) {
        let mut session = Session::new(Mode::Script);
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_source(&mut session, "script.fv", text, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn values_print_bare_and_strings_unquoted() {
        let (code, out, _) = script("# comment\nx = 20 + 1\nx * 2\n\"hi there\"\ntoInt \"ff\" 16\n");
        assert_eq!(code, 0);
        assert_eq!(out, "42\nhi there\n255\n");
    }

    #[test]
    fn continuation_after_trailing_operator_and_open_paren() {
        let (code, out, err) = script("1 +\n  2\nmax (1\n  + 5) 3\n");
        assert_eq!(code, 0, "{err}");
        assert_eq!(out, "3\n6\n");
    }

    #[test]
    fn first_error_stops_with_line_number() {
        let (code, out, err) = script("1\n\n\"a\" + 1\n2\n");
        assert_eq!(code, 1);
        assert_eq!(out, "1\n");
        assert!(err.starts_with("script.fv:3: type error"), "{err}");
    }

    #[test]
    fn ambiguous_overload_is_an_error_in_scripts() {
        let (code, _, err) = script("toInt \"123\"\n");
        assert_eq!(code, 1);
        assert!(err.contains("(Int -> Int) | Int"), "{err}");
    }

    #[test]
    fn statements_group_continued_lines() {
        let session = Session::new(Mode::Script);
        let got = statements(&session, "# skip\na = (1\n+ 2)\nb = \"x\ny\"\nc\n");
        assert_eq!(
            got,
            vec![
                (2, "a = (1\n+ 2)".to_string()),
                (4, "b = \"x\ny\"".to_string()),
                (6, "c".to_string()),
            ]
        );
    }

    #[test]
    fn dump_flags_show_each_stage() {
        let mut session = Session::new(Mode::Script);
        session.dump = DumpFlags {
            ast: true,
            rewritten: true,
            types: true,
        };
        let text = session.eval_to_string("1 + 2").unwrap();
        assert!(text.contains("ast: Apply(Apply(Constant(1, Int), +), Constant(2, Int))"), "{text}");
        assert!(text.contains("rewritten: Apply(Apply(+, Constant(1, Int)), Constant(2, Int))"), "{text}");
        assert!(text.contains("types: "), "{text}");
        assert!(text.ends_with("3\n"));
    }

    #[test]
    fn commands_compose_with_host_functions() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("names.txt");
        std::fs::write(&file, "b\na\nb\nc\na\n").unwrap();
        let (code, out, err) = script(&format!("cat \"{}\" | sort | uniq\n", file.display()));
        assert_eq!(code, 0, "{err}");
        assert_eq!(out, "a\nb\nc\n");
    }

    #[test]
    fn repl_shows_types_and_binds() {
        let mut session = Session::new(Mode::Repl);
        assert_eq!(session.eval_to_string("n = 4").unwrap(), "n : Int = 4\n");
        assert_eq!(session.eval_to_string("n * n").unwrap(), "16 : Int\n");
        assert_eq!(session.eval_to_string("\"a\"").unwrap(), "\"a\" : Str\n");
        // A failed line leaves the binding alone.
        assert!(session.eval_line("n = \"x\" + 1", &mut Vec::new()).is_err());
        assert_eq!(session.eval_to_string("n").unwrap(), "4 : Int\n");
    }
}
