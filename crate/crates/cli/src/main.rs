use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lexharm_cli::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let pretty = cli.pretty;
    match run(cli.command) {
        Ok(v) if v.is_null() => ExitCode::SUCCESS,
        Ok(v) => {
            let text = if pretty {
                serde_json::to_string_pretty(&v)
            } else {
                serde_json::to_string(&v)
            };
            // A closed pipe (`| head`) is not a failure of the command.
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}",
                text.expect("JSON values serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
