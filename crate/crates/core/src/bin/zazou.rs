use clap::Parser;
use zazou::cli::{run, RunConfig};

fn main() {
    let config = RunConfig::parse();
    let level = match config.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(&config) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
