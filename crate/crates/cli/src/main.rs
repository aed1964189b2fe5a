use std::path::PathBuf;

use clap::{Parser, Subcommand};

use fsi_cli::commands;

#[derive(Parser)]
#[command(
    name = "fsi",
    version,
    about = "Fluid / variable-coefficient wave interaction lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write energies.csv, summary.txt, summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the escape-field hypothesis for the configured metric and field.
    CheckEscape {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the multiplier identities on manufactured fields.
    VerifyIdentities {
        #[arg(long)]
        config: PathBuf,
    },
    /// Manufactured-solution convergence studies.
    Mms {
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

fn init_threads() {
    let Ok(v) = std::env::var("FSI_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("warning: FSI_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: FSI_THREADS must be a positive integer, got `{v}`"),
    }
}

fn main() {
    let cli = Cli::parse();
    init_threads();
    let code = match cli.command {
        Command::Run { config, out } => commands::cmd_run(&config, &out),
        Command::CheckEscape { config } => commands::cmd_check_escape(&config),
        Command::VerifyIdentities { config } => commands::cmd_verify_identities(&config),
        Command::Mms { levels } => commands::cmd_mms(levels),
    };
    std::process::exit(code);
}
