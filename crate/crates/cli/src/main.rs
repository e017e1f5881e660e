use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rrmber::complexity::{count_ops, Algorithm, Complexity};
use rrmber::config::{preset, ExperimentConfig, PRESETS};
use rrmber::harness::{run_experiment, Execution, ExperimentResult};
use rrmber::validation;

const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

/// Reduced-rank MBER detection experiments.
#[derive(Debug, Parser)]
#[command(name = "rrmber", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or a preset.
    Run {
        /// TOML configuration file.
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Start from a named preset instead of a file.
        #[arg(long, value_name = "NAME", conflicts_with = "config")]
        preset: Option<String>,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Run a named preset.
    Preset {
        /// One of fig2, fig3, fig4, fig5, fading (fig6), ci, high-load, snr-ci.
        name: String,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Print per-symbol operation counts of every receiver.
    Complexity {
        #[arg(long, default_value_t = 32)]
        m: usize,
        #[arg(long, default_value_t = 6)]
        d: usize,
        /// Print CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Run the built-in invariant checks.
    Validate,
}

#[derive(Debug, Args)]
struct RunOptions {
    /// Override a configuration key, e.g. `--set snr_db=10` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of Monte-Carlo runs per grid point.
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; `.csv` and `.json` files are written next to it.
    /// Without it the CSV goes to standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run Monte-Carlo runs on one thread.
    #[arg(long)]
    serial: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<rrmber::Error> for Failure {
    fn from(e: rrmber::Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, preset: name, options } => {
            let base = match (config, name) {
                (Some(path), _) => {
                    let text = fs::read_to_string(&path).map_err(|e| io_failure(&path, e))?;
                    ExperimentConfig::from_toml(&text)?
                }
                (None, Some(name)) => preset(&name)?,
                (None, None) => {
                    return Err(Failure {
                        code: EXIT_CONFIG,
                        message: format!("`run` needs --config PATH or --preset NAME ({})", PRESETS.join(", ")),
                    })
                }
            };
            run(base, options)
        }
        Command::Preset { name, options } => run(preset(&name)?, options),
        Command::Complexity { m, d, csv } => complexity(m, d, csv),
        Command::Validate => validate(),
    }
}

fn run(mut config: ExperimentConfig, options: RunOptions) -> Result<(), Failure> {
    let mut applied = Vec::new();
    for item in &options.overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| Failure {
            code: EXIT_CONFIG,
            message: format!("override {item:?} is not of the form KEY=VALUE"),
        })?;
        config.apply_override(key.trim(), value.trim())?;
        applied.push(format!("{}={}", key.trim(), value.trim()));
    }
    if let Some(runs) = options.runs {
        config.apply_override("monte_carlo_runs", &runs.to_string())?;
        applied.push(format!("monte_carlo_runs={runs}"));
    }
    if let Some(seed) = options.seed {
        config.base_seed = seed;
        applied.push(format!("base_seed={seed}"));
    }
    config.validate()?;
    if options.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }

    let execution = if options.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let mut result = run_experiment(&config, execution)?;
    result.overrides = applied;
    summarize(&result);

    match options.out {
        Some(out) => {
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            }
            let csv_path = out.with_extension("csv");
            let json_path = out.with_extension("json");
            let file = File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
            result.write_csv(BufWriter::new(file))?;
            let file = File::create(&json_path).map_err(|e| io_failure(&json_path, e))?;
            let mut writer = BufWriter::new(file);
            result.write_json(&mut writer)?;
            writer.flush().map_err(|e| io_failure(&json_path, e))?;
            eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
        }
        None => result.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

/// Terminal-window BER of every receiver at every grid point, on stderr.
fn summarize(result: &ExperimentResult) {
    let config = &result.config;
    let points = config.points();
    eprintln!(
        "{} runs per point, terminal window {} symbols",
        config.monte_carlo_runs, config.window
    );
    for (g, point) in points.iter().enumerate() {
        if let Some(x) = point {
            eprintln!("{} = {x}", config.sweep.axis_name());
        }
        for (k, spec) in config.receivers.iter().enumerate() {
            let stats = result.terminal_ber(g, k);
            eprintln!("  {:<22} {:.5} ± {:.5}", spec.label(), stats.mean, stats.std_error);
        }
    }
}

fn complexity(m: usize, d: usize, csv: bool) -> Result<(), Failure> {
    let rows = Algorithm::ALL
        .iter()
        .map(|&alg| Ok((alg, count_ops(alg, m, d)?)))
        .collect::<Result<Vec<_>, rrmber::Error>>()?;
    let cells = |c: &Complexity| match c {
        Complexity::Counts {
            multiplications,
            additions,
        } => (multiplications.to_string(), additions.to_string()),
        Complexity::CubicInM => ("O(M^3)".to_string(), "O(M^3)".to_string()),
    };
    let mut out = io::stdout().lock();
    let result = if csv {
        writeln!(out, "algorithm,m,d,multiplications,additions").and_then(|_| {
            rows.iter().try_for_each(|(alg, c)| {
                let (mul, add) = cells(c);
                writeln!(out, "{alg},{m},{d},{mul},{add}")
            })
        })
    } else {
        writeln!(out, "M = {m}, D = {d}")
            .and_then(|_| writeln!(out, "{:<16} {:>16} {:>12}", "algorithm", "multiplications", "additions"))
            .and_then(|_| {
                rows.iter().try_for_each(|(alg, c)| {
                    let (mul, add) = cells(c);
                    writeln!(out, "{:<16} {:>16} {:>12}", alg.label(), mul, add)
                })
            })
    };
    result.map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn validate() -> Result<(), Failure> {
    let checks = validation::run_all();
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("{failed} of {} checks failed", checks.len()),
        })
    }
}
