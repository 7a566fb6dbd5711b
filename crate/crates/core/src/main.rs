use clap::Parser;

use catbond::cli::{colorize_zone, run, Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let text = match cli.command {
                Command::Backtest { .. } => colorize_zone(&outcome.summary),
                _ => outcome.summary.clone(),
            };
            print!("{text}");
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            std::process::exit(outcome.exit_code());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
