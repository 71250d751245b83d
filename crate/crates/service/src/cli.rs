//! The `bart` command line.

use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use bart::classifier::{parse_feed, ControllerConfig, Controller};
use bart::compiler::{compile_source, load, save, CompileOptions};
use bart::influence::{solve, SolveOptions};
use bart::{CompiledModel, Error, Session};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::api;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bart", version, about = "Compile, query and serve hierarchical Bayesian models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a .bart source into a .bartc model.
    Compile {
        input: PathBuf,
        /// Output path; defaults to the input with a .bartc extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = CompileOptions::default().max_cluster_states)]
        max_cluster_states: usize,
    },
    /// Beliefs of a network under evidence.
    Query {
        model: PathBuf,
        #[arg(long)]
        network: String,
        /// `node=value` instantiations and `node~w1/w2/...` likelihoods, comma separated.
        #[arg(long, default_value = "")]
        evidence: String,
        /// Report only this node.
        #[arg(long)]
        node: Option<String>,
        /// Include the most probable explanation.
        #[arg(long)]
        mpe: bool,
        /// Include the impact ranking for this target.
        #[arg(long)]
        impact: Option<String>,
    },
    /// Optimal policy of an influence diagram.
    Solve {
        model: PathBuf,
        #[arg(long)]
        diagram: String,
        #[arg(long)]
        no_prune: bool,
        #[arg(long, default_value = "")]
        evidence: String,
    },
    /// Run the establish-refine controller over a feed.
    Classify {
        model: PathBuf,
        #[arg(long)]
        taxonomy: String,
        /// JSON-lines feed file.
        #[arg(long)]
        feed: PathBuf,
        #[arg(long, default_value_t = ControllerConfig::default().tau_establish)]
        tau_establish: f64,
        #[arg(long, default_value_t = ControllerConfig::default().tau_reject)]
        tau_reject: f64,
        #[arg(long, default_value_t = ControllerConfig::default().max_steps)]
        max_steps: usize,
        /// Also write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Interactive session on standard input.
    Repl { model: PathBuf },
    /// HTTP session service.
    Serve {
        model: PathBuf,
        #[arg(long, env = "BART_PORT", default_value_t = 8080)]
        port: u16,
        /// Serve files from this directory for paths the API does not claim.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Where `POST /sessions/{id}/snapshot` writes.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
}

/// Everything that can end a command early.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(PathBuf, io::Error),
    Model(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Io(..) => EXIT_USAGE,
            Failure::Model(e) if api::is_runtime(e) => EXIT_RUNTIME,
            Failure::Model(_) => EXIT_INPUT,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error[usage]: {m}"),
            Failure::Io(p, e) => write!(f, "error[io]: {}: {e}", p.display()),
            Failure::Model(Error::Compile(diags)) => {
                write!(f, "error[compile-error]: {} problem(s)", diags.len())?;
                for d in diags {
                    write!(f, "\n  {}[{}]: {}", d.node, d.kind.as_str(), d.message)?;
                }
                Ok(())
            }
            Failure::Model(e) => {
                write!(f, "error[{}]: {e}", e.kind())?;
                if let Some(span) = e.span() {
                    write!(f, " (at {span})")?;
                }
                Ok(())
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Usage(format!("{} is not UTF-8", path.display())))
}

/// Loads a `.bartc`, or compiles a `.bart` on the fly.
pub fn load_model(path: &Path) -> Result<CompiledModel, Failure> {
    if path.extension().is_some_and(|e| e == "bart") {
        Ok(compile_source(&read_text(path)?, &CompileOptions::default())?)
    } else {
        Ok(load(&read(path)?)?)
    }
}

fn evidence_arg(spec: &str) -> Result<Vec<api::FindingBody>, Failure> {
    api::parse_evidence_spec(spec).map_err(Failure::Usage)
}

/// The JSON `query` prints, also used to compare against the HTTP service.
pub fn query(
    model: &CompiledModel,
    network: &str,
    evidence: &str,
    node: Option<&str>,
    mpe: bool,
    impact: Option<&str>,
) -> Result<Value, Failure> {
    let mut session = Session::open(model, network)?;
    for (n, f) in api::findings(&evidence_arg(evidence)?)? {
        session.assert_evidence(&n, f)?;
    }
    let beliefs = match node {
        Some(n) => json!({ n: session.belief(n)? }),
        None => json!(session.beliefs()),
    };
    if !mpe && impact.is_none() {
        return Ok(beliefs);
    }
    let mut out = json!({ "beliefs": beliefs });
    if mpe {
        out["mpe"] = json!(session.mpe()?);
    }
    if let Some(t) = impact {
        out["impact"] = json!(session.impact(t)?);
    }
    Ok(out)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let emit = |out: &mut dyn Write, v: &Value| -> Result<(), Failure> {
        writeln!(out, "{v}").map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e))
    };
    match command {
        Command::Compile { input, output, max_cluster_states } => {
            let model = compile_source(&read_text(&input)?, &CompileOptions { max_cluster_states })?;
            let output = output.unwrap_or_else(|| input.with_extension("bartc"));
            std::fs::write(&output, save(&model)).map_err(|e| Failure::Io(output.clone(), e))?;
            log::info!("wrote {}", output.display());
            let compounds: usize = model.networks.iter().map(|n| n.compound_count()).sum();
            emit(out, &json!({ "output": output, "source_hash": model.source_hash, "compounds": compounds }))
        }
        Command::Query { model, network, evidence, node, mpe, impact } => {
            let m = load_model(&model)?;
            emit(out, &query(&m, &network, &evidence, node.as_deref(), mpe, impact.as_deref())?)
        }
        Command::Solve { model, diagram, no_prune, evidence } => {
            let m = load_model(&model)?;
            let ev = api::evidence(&evidence_arg(&evidence)?)?;
            let options = SolveOptions { prune: !no_prune, ..SolveOptions::default() };
            emit(out, &json!(solve(m.diagram(&diagram)?, &ev, &options)?))
        }
        Command::Classify { model, taxonomy, feed, tau_establish, tau_reject, max_steps, trace } => {
            let m = load_model(&model)?;
            let items = parse_feed(&read_text(&feed)?)?;
            let config = ControllerConfig { tau_establish, tau_reject, max_steps };
            config.validate()?;
            let mut controller = Controller::new(&m, &taxonomy, config)?;
            controller.push_feed(items);
            let result = controller.run();
            if let Some(path) = &trace {
                let text = serde_json::to_string_pretty(controller.trace()).expect("trace serializes") + "\n";
                std::fs::write(path, text).map_err(|e| Failure::Io(path.clone(), e))?;
            }
            emit(out, &json!(result?))
        }
        Command::Repl { model } => {
            let m = load_model(&model)?;
            let stdin = io::stdin();
            crate::repl::run(&m, stdin.lock(), out).map_err(|e| Failure::Io(PathBuf::from("<stdio>"), e))
        }
        Command::Serve { model, port, static_dir, snapshot_dir } => {
            let m = load_model(&model)?;
            let mut state = crate::server::AppState::new(m);
            if let Some(dir) = snapshot_dir {
                state = state.with_snapshot_dir(dir);
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(PathBuf::from("<runtime>"), e))?;
            runtime
                .block_on(crate::server::serve(state, port, static_dir))
                .map_err(|e| Failure::Io(PathBuf::from(format!("port {port}")), e))
        }
    }
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{f}");
            f.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let c = run(std::iter::once("bart").chain(args.iter().copied()), &mut out, &mut err);
        (c, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(code(&[]).0, EXIT_USAGE);
        assert_eq!(code(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(code(&["query", "x.bartc"]).0, EXIT_USAGE);
        let (c, out, _) = code(&["--help"]);
        assert_eq!(c, EXIT_OK);
        assert!(out.contains("compile"));
    }

    #[test]
    fn missing_file_is_io() {
        let (c, _, err) = code(&["query", "/nonexistent/m.bartc", "--network", "n"]);
        assert_eq!(c, EXIT_USAGE);
        assert!(err.starts_with("error[io]"));
    }
}
