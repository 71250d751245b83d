fn main() {
    bart_service::init_logging();
    let code = bart_service::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
