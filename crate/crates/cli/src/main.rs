use std::process::ExitCode;

use clap::Parser;

use hopf_rigidity_cli::{run, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = cli.into_config().and_then(|config| run(&config));
    match outcome {
        Ok(o) => {
            print!("{}", o.summary);
            eprintln!("report written to {}", o.path.display());
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == EXIT_USAGE {
                eprintln!("run with --help for usage");
            }
            ExitCode::from(code as u8)
        }
    }
}
