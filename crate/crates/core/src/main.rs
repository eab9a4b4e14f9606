use std::io::{self, IsTerminal};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use favalon::env::TypeEnvironment;
use favalon::infer::Mode;
use favalon::proc::Sink;
use favalon::shell::{self, DumpFlags, Session};

/// Typed shell: runs a script, or starts an interactive session.
#[derive(Parser, Debug)]
#[command(name = "favalon", version)]
struct Args {
    /// Script to run; reads interactively when omitted.
    script: Option<PathBuf>,

    /// Startup file evaluated before anything else.
    #[arg(long, env = "FAVALON_RC")]
    rc: Option<PathBuf>,

    /// Print each parsed tree.
    #[arg(long)]
    dump_ast: bool,

    /// Print each tree after operator rewriting.
    #[arg(long)]
    dump_rewritten: bool,

    /// Print each typed tree.
    #[arg(long)]
    dump_types: bool,

    /// Start with an empty environment.
    #[arg(long)]
    no_prelude: bool,
}

// Deeply nested inputs recurse through every stage.
const STACK_SIZE: usize = 256 * 1024 * 1024;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let worker = std::thread::Builder::new()
        .name("favalon".into())
        .stack_size(STACK_SIZE)
        .spawn(move || run(args));
    match worker.map(|h| h.join()) {
        Ok(Ok(code)) => ExitCode::from(code as u8),
        Ok(Err(_)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("favalon: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(args: Args) -> i32 {
    let mode = if args.script.is_some() { Mode::Script } else { Mode::Repl };
    let mut session = if args.no_prelude {
        Session::with_env(TypeEnvironment::new(), mode)
    } else {
        Session::new(mode)
    };
    session.dump = DumpFlags {
        ast: args.dump_ast,
        rewritten: args.dump_rewritten,
        types: args.dump_types,
    };
    if mode == Mode::Repl && io::stdout().is_terminal() {
        session.sink = Sink::Inherit;
    }

    let mut out = io::stdout();
    let mut err = io::stderr();
    if let Some(rc) = &args.rc {
        let code = shell::run_script(rc, &mut session, &mut out, &mut err);
        if code != 0 && mode == Mode::Script {
            return code;
        }
    }
    match &args.script {
        Some(path) => shell::run_script(path, &mut session, &mut out, &mut err),
        None => shell::repl_loop(&mut session),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn arguments() {
        Args::command().debug_assert();
        let a = Args::try_parse_from(["favalon", "--dump-types", "--rc", "init.fv", "main.fv"]).unwrap();
        assert_eq!(a.script.as_deref(), Some(std::path::Path::new("main.fv")));
        assert_eq!(a.rc.as_deref(), Some(std::path::Path::new("init.fv")));
        assert!(a.dump_types && !a.dump_ast);
        let err = Args::try_parse_from(["favalon", "--no-such-flag"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
