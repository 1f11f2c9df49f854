use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qfikit::cli::{self, Command, Flags, OutputFormat, SweepSpec};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// QFI of one parameter by all three paths.
    Qfi,
    /// QFI matrix, its classical/quantum split and the Cramér–Rao bound.
    Qfim,
    /// Symmetric logarithmic derivatives.
    Sld,
    /// Uhlmann fidelity between θ and θ + fs_delta along --param.
    Fidelity,
    /// Fidelity susceptibility: analytic, finite-difference and QFI/4.
    Fs,
    /// Every consistency diagnostic; exit 4 if any is out of tolerance.
    Check,
    /// Repeat qfi/fs over a range of one parameter.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Qfi => Command::Qfi,
            Cmd::Qfim => Command::Qfim,
            Cmd::Sld => Command::Sld,
            Cmd::Fidelity => Command::Fidelity,
            Cmd::Fs => Command::Fs,
            Cmd::Check => Command::Check,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qfikit", version, about = "Quantum Fisher information and fidelity susceptibility for density matrices of any rank")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON model configuration.
    #[arg(long)]
    config: PathBuf,
    /// Parameter index (default 0, or the swept parameter).
    #[arg(long)]
    param: Option<usize>,
    /// Report format; csv is available for sweep only.
    #[arg(long, default_value = "json")]
    output: OutputFormat,
    /// Overrides numerics.fs_delta.
    #[arg(long)]
    fs_delta: Option<f64>,
    /// Overrides numerics.rank_tol.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// param=START:STOP:STEPS, endpoints included.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let flags = Flags {
        param: args.param,
        output: args.output,
        fs_delta: args.fs_delta,
        rank_tol: args.rank_tol,
        sweep: args.sweep,
    };
    let outcome = cli::run(args.command.into(), &args.config, &flags);
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.text) {
                eprintln!("qfikit: cannot write {}: {e}", path.display());
                return ExitCode::from(cli::EXIT_VALIDATION as u8);
            }
        }
        None => print!("{}", outcome.text),
    }
    if outcome.exit_code != cli::EXIT_OK {
        eprintln!("qfikit: {} exited with status {}", args.command.to_possible_value().map_or("command".into(), |v| v.get_name().to_string()), outcome.exit_code);
    }
    ExitCode::from(outcome.exit_code as u8)
}
