use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rhf2d::cli::{exit_code, run, Command};
use rhf2d::io::RunConfig;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Atom,
    Kernel,
    Bands,
    Scf,
    Tb,
    Dirac,
    PhaseScan,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Atom => Command::Atom,
            Cmd::Kernel => Command::Kernel,
            Cmd::Bands => Command::Bands,
            Cmd::Scf => Command::Scf,
            Cmd::Tb => Command::Tb,
            Cmd::Dirac => Command::Dirac,
            Cmd::PhaseScan => Command::PhaseScan,
        }
    }
}

/// Plane-wave reduced Hartree-Fock and tight-binding tools for 2D lattices.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML configuration; defaults apply to omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let config = match &args.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let result = config.and_then(|c| run(args.command.into(), &c)).and_then(|files| files.write(&args.out).map(|_| files));
    match result {
        Ok(files) => {
            for (name, _) in &files.files {
                println!("{}", args.out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
