use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ifslab::cli::{self, RunOverrides, EXIT_FAIL, EXIT_INVALID};

#[derive(Parser)]
#[command(name = "ifslab", version, about = "Stationary measures of iterated function systems")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Seed for every random stream; overrides the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for artifacts; overrides the spec.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Worker threads (outputs do not depend on it).
    #[arg(long, global = true, env = "IFSLAB_THREADS")]
    threads: Option<usize>,

    /// Atom budget for stationary solves.
    #[arg(long, global = true)]
    atoms: Option<usize>,

    /// Target error for stationary solves.
    #[arg(long, global = true)]
    target_error: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write its artifacts.
    Run { spec: PathBuf },
    /// Check a model or experiment file and list every violation.
    Validate { file: PathBuf },
    /// Run a short built-in suite.
    Selftest,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set thread count: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    }
    let overrides = RunOverrides {
        seed: args.seed,
        out_dir: args.out_dir.clone(),
        atoms: args.atoms,
        target_error: args.target_error,
    };
    let code = match args.command {
        Command::Run { spec } => run(&spec, &overrides),
        Command::Validate { file } => validate(&file),
        Command::Selftest => selftest(&overrides),
    };
    ExitCode::from(code as u8)
}

fn run(spec: &std::path::Path, overrides: &RunOverrides) -> i32 {
    match cli::run_spec_file(spec, overrides) {
        Ok(out) => {
            let s = &out.summary;
            for c in &s.checks {
                println!(
                    "{:<12} {}  measured={:e} bound={:e} slack={:e}",
                    c.verdict.as_str(),
                    c.name,
                    c.measured,
                    c.bound,
                    c.slack
                );
            }
            if let Some(e) = &s.error {
                println!("error: {e}");
            }
            println!("{} {} -> {}", s.verdict, s.kind, out.out_dir.display());
            out.exit_code()
        }
        Err(e) => {
            println!("{}", e.to_json_string());
            EXIT_INVALID
        }
    }
}

fn validate(file: &std::path::Path) -> i32 {
    match cli::validate_config(file) {
        Ok(d) if d.is_empty() => {
            println!("{}: ok", file.display());
            0
        }
        Ok(d) => {
            for x in &d {
                println!("{}: {x}", file.display());
            }
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_INVALID
        }
    }
}

fn selftest(overrides: &RunOverrides) -> i32 {
    let root = overrides
        .out_dir
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join(format!("ifslab-selftest-{}", std::process::id())));
    let mut code = 0;
    for spec in cli::selftest_specs() {
        let kind = spec.experiment.kind();
        let o = RunOverrides {
            out_dir: Some(root.join(kind)),
            seed: Some(overrides.seed.unwrap_or(1)),
            ..Default::default()
        };
        match cli::run_spec(spec, &root, &o) {
            Ok(out) => {
                println!("{} {kind}", out.summary.verdict);
                code = code.max(out.exit_code());
            }
            Err(e) => {
                println!("FAIL {kind}: {}", e.message);
                code = EXIT_FAIL;
            }
        }
    }
    println!("artifacts in {}", root.display());
    code
}
