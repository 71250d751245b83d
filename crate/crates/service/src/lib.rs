//! Command line, REPL and HTTP session service over `bart` models.
//!
//! The HTTP router is built by [`server::router`] and can be driven in
//! process (e.g. with `tower::ServiceExt::oneshot`) or served with
//! [`server::serve`].

pub mod api;
pub mod cli;
pub mod repl;
pub mod server;

/// Logging filter from `BART_LOG` (`error`, `info` or `debug`); defaults to `error`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("BART_LOG", "error");
    let _ = env_logger::Builder::from_env(env).try_init();
}
