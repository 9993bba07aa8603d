use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use complexnn::cli::{self, parse_config};
use complexnn::io::read_text;

/// Neural methods for complex data: SOM variants, perceptron selection,
/// regime-switching autoregression and two-scale forecasting.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Command to run (som-train, som-median, som-kernel, som-cat,
    /// mlp-select, hmm-sim, hmm-fit, forecast); overrides `command` in the
    /// config file.
    command: Option<String>,

    /// Configuration file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set seed=3`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = (|| {
        let text = match &args.config {
            Some(p) => read_text(p)?,
            None => String::new(),
        };
        let mut overrides = args.overrides.clone();
        if let Some(c) = &args.command {
            overrides.push(format!("command={c}"));
        }
        let config = parse_config(&text, &overrides)?;
        cli::run(&config)
    })();
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", cli::diagnostic(&e));
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
