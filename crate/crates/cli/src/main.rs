use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netred::artifact::ArtifactFile;
use netred::report::{self, CheckOptions, CommandError};
use netred::selftest;
use netred::simulate::Method;

#[derive(Parser)]
#[command(name = "netred", version, about = "Structure-preserving reduction of monotone reaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady states, stability and monotonicity of a model.
    Check {
        model: PathBuf,
        /// Random Newton starts in addition to the initial state.
        #[arg(long, default_value_t = 20)]
        starts: usize,
        /// Random states for the orthant analysis.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Reduce every variant of a configuration and write a JSON artifact.
    Reduce {
        #[arg(short, long)]
        config: PathBuf,
        /// Output file; JSON goes to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check a JSON artifact from its stored matrices.
    Verify { artifact: PathBuf },
    /// Simulate one method and write the trajectory as CSV.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        method: Method,
        /// Variant for reduction/truncation; defaults to the first one.
        #[arg(long)]
        variant: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Simulate several methods and tabulate output errors against the full model.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated subset of full,reduction,truncation,qssa.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Directory for per-method output error traces.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run the seeded randomized self-test suites.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
}

fn write(path: &Path, text: &str) -> Result<(), CommandError> {
    std::fs::write(path, text).map_err(|e| CommandError::Parse(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Check { model, starts, samples, seed } => {
            let m = report::load_model(&model)?;
            let r = report::check_model(&m, &CheckOptions { starts, samples, seed, ..CheckOptions::default() })?;
            println!("{r}");
        }
        Command::Reduce { config, output } => {
            let (cfg, model) = report::load_config(&config)?;
            let file = report::reduce_all(&model, &cfg)?;
            for v in &file.variants {
                eprintln!("variant {}: {} -> {} states", v.variant, v.species.len(), v.a_t.len());
                for r in &v.regions {
                    let tail: f64 = r.sigma[r.keep..].iter().sum();
                    eprintln!("  region {}: sigma {:?}, removed tail {tail:.6e}", r.name, r.sigma);
                }
                let hinf = v.hinf_error.map_or("n/a".to_string(), |e| format!("{e:.6e}"));
                eprintln!(
                    "  error bound {:.6e}, H-inf error {hinf}, reduced Metzler {}, Hurwitz {}",
                    v.error_bound, v.reduced_metzler, v.reduced_hurwitz
                );
                for w in &v.warnings {
                    eprintln!("  warning: {w}");
                }
            }
            let json = serde_json::to_string_pretty(&file).expect("artifact serializes");
            match output {
                Some(p) => write(&p, &json)?,
                None => println!("{json}"),
            }
        }
        Command::Verify { artifact } => {
            let text = std::fs::read_to_string(&artifact)
                .map_err(|e| CommandError::Parse(format!("{}: {e}", artifact.display())))?;
            let file: ArtifactFile = serde_json::from_str(&text)
                .map_err(|e| CommandError::Parse(format!("{}: {e}", artifact.display())))?;
            let mut ok = true;
            for v in &file.variants {
                let check = v.verify().map_err(|e| CommandError::Parse(format!("variant {}: {e}", v.variant)))?;
                ok &= check.passed();
                println!(
                    "{} variant {}: certificate {}, bi-orthogonality {:.2e}, projection {:.2e}",
                    if check.passed() { "PASS" } else { "FAIL" },
                    v.variant,
                    if check.certificate.passed { "ok" } else { "failed" },
                    check.biorthogonality,
                    check.projection_residual
                );
            }
            if !ok {
                return Err(CommandError::Reduction("artifact failed verification".into()));
            }
        }
        Command::Simulate { config, method, variant, output } => {
            let (cfg, model) = report::load_config(&config)?;
            let traj = report::run_method(&model, &cfg, method, variant.as_deref())?;
            eprintln!(
                "{method}: {} points, {} steps ({} rejected), {:.6} s",
                traj.times.len(),
                traj.stats.accepted,
                traj.stats.rejected,
                traj.wall_seconds
            );
            write(&output, &traj.to_csv(&model.species_names()))?;
        }
        Command::Compare { config, output, methods, traces } => {
            let (cfg, model) = report::load_config(&config)?;
            let rep = report::compare(&model, &cfg, methods.as_deref())?;
            write(&output, &rep.to_csv())?;
            if let Some(dir) = traces {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CommandError::Parse(format!("{}: {e}", dir.display())))?;
                for (label, trace) in &rep.traces {
                    let path = dir.join(format!("{}.csv", label.replace(':', "_")));
                    write(&path, &report::trace_csv(&rep.reference.times, trace))?;
                }
            }
            print!("{}", rep.to_csv());
            let failures = rep.failures();
            if !failures.is_empty() {
                for f in &failures {
                    eprintln!("error: {f}");
                }
                return Err(CommandError::Simulation(format!("{} method(s) failed", failures.len())));
            }
        }
        Command::Selftest { seed, cases } => {
            let results = selftest::run_all(seed, cases);
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(CommandError::Analysis(format!("{failed} suite(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
