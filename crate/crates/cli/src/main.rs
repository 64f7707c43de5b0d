use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grating_cli::{output_dir, run, write_error_record, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "grating",
    version,
    about = "Scattering by periodic Dirichlet curves with local perturbations"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration (optional for `verify`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Uniform mesh refinements applied after meshing.
    #[arg(long, global = true, default_value_t = 0)]
    refine: usize,
    /// Seed for sampled point sets (defaults to one derived from the config hash).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Plane-wave solve on the periodic cell
    Solve,
    /// Scan the Brillouin zone for propagative wave numbers
    Scan,
    /// Green's function symmetry and lateral profile
    Green,
    /// Locally perturbed problem, or a comparison of two geometries
    Perturbed,
    /// Eigenvalue counting, the echelle counterexample or a uniqueness experiment
    Inverse,
    /// Run the acceptance suite
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Scan => Command::Scan,
            Cmd::Green => Command::Green,
            Cmd::Perturbed => Command::Perturbed,
            Cmd::Inverse => Command::Inverse,
            Cmd::Verify => Command::Verify,
        }
    }
}

fn load(command: Command, path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None if command == Command::Verify => Ok(RunConfig::parse("[profile]\nspec = \"flat\"\n")?),
        None => Err(CliError::Config(format!(
            "`{}` needs --config",
            command.name()
        ))),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    grating_core::init_deterministic();
    let command = Command::from(args.command);
    let ov = Overrides {
        out: args.out,
        refine: args.refine,
        seed: args.seed,
    };
    let config = load(command, args.config.as_ref());
    let result = config
        .as_ref()
        .map_err(|e| CliError::Config(e.to_string()))
        .and_then(|c| run(command, c, &ov));
    match result {
        Ok(outcome) => {
            for l in &outcome.summary {
                println!("{l}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error ({}): {e}", e.kind());
            let dir = output_dir(config.as_ref().ok(), &ov);
            match write_error_record(&dir, command.name(), &e) {
                Ok(p) => eprintln!("error record: {}", p.display()),
                Err(io) => eprintln!("cannot write error record: {io}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
