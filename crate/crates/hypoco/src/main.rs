use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hypoco::config::{parse_config_with, parse_range, RunConfig};
use hypoco::container::Container;
use hypoco::pipeline::{self, bound_status, CliError, EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK};
use hypoco::report::{sweep_csv, to_json, BoundJson, SweepRow};

#[derive(Parser)]
#[command(
    name = "hypoco",
    version,
    about = "Resolvent bounds for hypocoercive kinetic generators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Largest admissible basis dimension.
    #[arg(long, global = true, env = "HYPOCO_MAX_DIM")]
    max_dim: Option<usize>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured model.
    #[arg(long)]
    model: Option<String>,
    /// Friction value or `a:b:logN` range, overriding the config.
    #[arg(long)]
    gamma: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble basis and operators into a HYPO1 bundle.
    Assemble {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the structural identities and the splitting.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Abstract and model bounds against the exact resolvent norm.
    Bound {
        #[arg(long, required_unless_present = "ops")]
        config: Option<PathBuf>,
        /// Bundle written by `assemble`, used instead of a config.
        #[arg(long, conflicts_with = "config")]
        ops: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Poincaré, growth and kinetic constants.
    Constants {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Randomized lemma and proposition checks.
    Lemmas {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        suite: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Bound reports over a friction (and ε) grid as CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// ε values as `a:b:logN` (Adaptive Langevin).
        #[arg(long)]
        epsilon_range: Option<String>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Everything above in one JSON document.
    Report {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        suite: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(
    path: &Path,
    model: &Option<String>,
    gamma: &Option<String>,
    max_dim: Option<usize>,
) -> Result<RunConfig, CliError> {
    let mut overrides = Vec::new();
    if let Some(m) = model {
        overrides.push(("model", m.clone()));
    }
    if let Some(g) = gamma {
        overrides.push(("gamma", g.clone()));
    }
    if let Some(n) = max_dim {
        overrides.push(("max_dim", n.to_string()));
    }
    Ok(parse_config_with(path, &overrides)?)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let max_dim = cli.max_dim;
    match cli.command {
        Command::Assemble { run, out } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            let bundle = pipeline::assemble(&cfg)?;
            fs::write(&out, bundle.to_bytes())?;
            let dim = bundle.operator("A")?.nrows;
            println!("wrote {} ({} unknowns)", out.display(), dim);
            Ok(EXIT_OK)
        }
        Command::Verify { run, json } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            let v = pipeline::verify(&cfg)?;
            println!("{:<24} {:>12}", "identity", "residual");
            for r in &v.residuals {
                println!("{:<24} {:>12.3e}", r.identity, r.residual);
            }
            println!(
                "s = {} (analytic {}), a = {}",
                v.s_numeric, v.s_analytic, v.a
            );
            if let Some(path) = json {
                fs::write(path, to_json(&v))?;
            }
            Ok(EXIT_OK)
        }
        Command::Bound {
            config,
            ops,
            model,
            gamma,
            json,
        } => {
            let cfg = match (config, ops) {
                (Some(path), _) => load(&path, &model, &gamma, max_dim)?,
                (None, Some(path)) => {
                    let bundle = Container::read_from(&mut fs::File::open(path)?)?;
                    pipeline::config_from_bundle(&bundle)?
                }
                (None, None) => unreachable!("clap requires one of --config/--ops"),
            };
            let reports = pipeline::sweep(&cfg, &cfg.gamma, &[])?;
            let rows: Vec<BoundJson> = reports.iter().map(BoundJson::from).collect();
            let text = if rows.len() == 1 {
                to_json(&rows[0])
            } else {
                to_json(&rows)
            };
            emit(&text, json.as_deref())?;
            Ok(bound_status(&reports))
        }
        Command::Constants { run, json } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            emit(&to_json(&pipeline::constants(&cfg)?), json.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Lemmas {
            run,
            seed,
            suite,
            json,
        } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            let report = pipeline::lemmas(&cfg, seed.unwrap_or(cfg.seed), suite)?;
            emit(&to_json(&report), json.as_deref())?;
            Ok(if report.passed {
                EXIT_OK
            } else {
                EXIT_INVARIANT
            })
        }
        Command::Sweep {
            run,
            epsilon_range,
            csv,
        } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            let eps = match epsilon_range {
                Some(r) => parse_range(&r).map_err(|e| CliError {
                    code: EXIT_CONFIG,
                    message: format!("--epsilon-range: {e}"),
                })?,
                None => Vec::new(),
            };
            let reports = pipeline::sweep(&cfg, &cfg.gamma, &eps)?;
            let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
            emit(&sweep_csv(&rows), csv.as_deref())?;
            Ok(bound_status(&reports))
        }
        Command::Report {
            run,
            seed,
            suite,
            out,
        } => {
            let cfg = load(&run.config, &run.model, &run.gamma, max_dim)?;
            let report = pipeline::full_report(&cfg, seed.unwrap_or(cfg.seed), suite)?;
            let out = out.or_else(|| cfg.outputs.as_ref().map(|d| d.join("report.json")));
            emit(&to_json(&report), out.as_deref())?;
            let bounds_converged = report.bounds.iter().all(|b| b.converged);
            let sound = report
                .bounds
                .iter()
                .all(|b| !b.converged || b.margin >= 1.0);
            Ok(if !(report.lemmas.passed && sound) {
                EXIT_INVARIANT
            } else if !bounds_converged {
                hypoco::EXIT_NUMERICAL
            } else {
                EXIT_OK
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
