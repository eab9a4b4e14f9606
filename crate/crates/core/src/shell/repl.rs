//! Line editing and the read-eval-print loop.

use std::io::{self, BufRead, IsTerminal, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rustyline::completion::{Completer, Pair};
use rustyline::error::ReadlineError;
use rustyline::highlight::Highlighter;
use rustyline::hint::Hinter;
use rustyline::validate::Validator;
use rustyline::{Context, Editor, Helper};

use super::Session;

const PROMPT: &str = "favalon> ";
const CONTINUE: &str = "....... ";

/// Completes bound names.
struct Names(Vec<String>);

impl Completer for Names {
    type Candidate = Pair;

    fn complete(&self, line: &str, pos: usize, _: &Context<'_>) -> rustyline::Result<(usize, Vec<Pair>)> {
        let start = line[..pos]
            .rfind(|c: char| c.is_whitespace() || "()[]{}".contains(c))
            .map_or(0, |i| i + 1);
        let word = &line[start..pos];
        let found = self
            .0
            .iter()
            .filter(|n| n.starts_with(word))
            .map(|n| Pair {
                display: n.clone(),
                replacement: n.clone(),
            })
            .collect();
        Ok((start, found))
    }
}

impl Hinter for Names {
    type Hint = String;
}
impl Highlighter for Names {}
impl Validator for Names {}
impl Helper for Names {}

/// Runs the interactive loop until `exit` or end of input. Returns the
/// process exit status.
pub fn repl_loop(session: &mut Session) -> i32 {
    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&interrupted);
        // Children share our process group and get the signal themselves;
        // the shell only notes it.
        if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
            log::debug!("no interrupt handler: {e}");
        }
    }
    if io::stdin().is_terminal() {
        match Editor::<Names, rustyline::history::DefaultHistory>::new() {
            Ok(editor) => return interactive(session, editor, &interrupted),
            Err(e) => log::warn!("line editor unavailable: {e}"),
        }
    }
    piped(session)
}

fn interactive(
    session: &mut Session,
    mut editor: Editor<Names, rustyline::history::DefaultHistory>,
    interrupted: &AtomicBool,
) -> i32 {
    let mut stdout = io::stdout();
    let mut buffer = String::new();
    loop {
        editor.set_helper(Some(Names(session.env().names().iter().map(|n| n.to_string()).collect())));
        let prompt = if buffer.is_empty() { PROMPT } else { CONTINUE };
        match editor.readline(prompt) {
            Ok(line) => {
                if !buffer.is_empty() {
                    buffer.push('\n');
                }
                buffer.push_str(&line);
                if session.needs_more(&buffer) {
                    continue;
                }
                let text = std::mem::take(&mut buffer);
                if text.trim() == "exit" {
                    return 0;
                }
                if !text.trim().is_empty() {
                    let _ = editor.add_history_entry(text.as_str());
                }
                interrupted.store(false, Ordering::SeqCst);
                if let Err(d) = session.eval_line(&text, &mut stdout) {
                    let _ = stdout.flush();
                    eprintln!("{d}");
                }
            }
            Err(ReadlineError::Interrupted) => buffer.clear(),
            Err(ReadlineError::Eof) => return 0,
            Err(e) => {
                eprintln!("{e}");
                return 1;
            }
        }
    }
}

/// Non-interactive standard input: no prompt, errors reported and skipped.
fn piped(session: &mut Session) -> i32 {
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    let mut buffer = String::new();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { return 1 };
        if !buffer.is_empty() {
            buffer.push('\n');
        }
        buffer.push_str(&line);
        if session.needs_more(&buffer) {
            continue;
        }
        let text = std::mem::take(&mut buffer);
        if text.trim() == "exit" {
            return 0;
        }
        if let Err(d) = session.eval_line(&text, &mut stdout) {
            let _ = stdout.flush();
            eprintln!("{d}");
        }
    }
    if !buffer.is_empty() {
        if let Err(d) = session.eval_line(&buffer, &mut stdout) {
            eprintln!("{d}");
        }
    }
    0
}
