use clap::Parser;
use skyjo_arena::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let stdin = std::io::stdin();
    if let Err(e) = run(&cli, &mut stdin.lock(), &mut std::io::stdout()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
