use clap::Parser;
use relent_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RELENT_LOG", "warn")).init();
    std::process::exit(run(&cli));
}
