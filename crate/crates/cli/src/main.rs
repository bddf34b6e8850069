use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use jetgen::dsl::{parse_map, MapProgram, SearchBox};
use jetgen::gdsm::{cusp_count_experiment, CuspExperiment};
use jetgen::harness::{run_experiment, summarize_path, worker_pool, write_report, ExperimentConfig, ReportFormat};
use jetgen::maps::LinearMap;
use jetgen::singular::{analyze_point, find_singular_points, tb_symbol, Tolerances};

/// Jets, singularities and generic linear perturbation experiments.
#[derive(Debug, Parser)]
#[command(name = "jetgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a map definition parses and compiles.
    Parse(MapArg),
    /// Classify the germ of a map at a point.
    Classify {
        #[command(flatten)]
        map: MapArg,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Find and classify singular points inside a box.
    Singular {
        #[command(flatten)]
        map: MapArg,
        /// Bounds `lo0,hi0,lo1,hi1,...`.
        #[arg(long = "box", allow_hyphen_values = true)]
        bbox: String,
        /// Grid cells per axis.
        #[arg(long, default_value_t = 32)]
        grid: usize,
        /// Print JSON instead of one line per point.
        #[arg(long)]
        json: bool,
    },
    /// Thom-Boardman symbol of a map at a point.
    Tb {
        #[command(flatten)]
        map: MapArg,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        /// Jet order used for the iterated kernel computation.
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Count cusps of distance-squared mappings with random central points.
    GdsmCusps {
        /// Rows separated by `;`, entries by `,`, e.g. `1,2;3,1`.
        #[arg(long = "A", allow_hyphen_values = true)]
        a: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 48)]
        grid: usize,
        #[command(flatten)]
        failures: AllowFailures,
    },
    /// Run experiments described by config files.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Inspect written reports.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `csv` or `json`; taken from the extension of `--out` when omitted.
        #[arg(long)]
        format: Option<ReportFormat>,
        #[command(flatten)]
        failures: AllowFailures,
    },
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    Summarize { path: PathBuf },
}

#[derive(Debug, Args)]
struct MapArg {
    /// A file containing a map definition, or the definition itself.
    map: String,
}

#[derive(Debug, Args)]
struct AllowFailures {
    /// Exit successfully as long as at most this many samples fail.
    #[arg(long, default_value_t = 0)]
    allow_failures: usize,
}

enum Outcome {
    Ok,
    Failures,
}

fn load_map(arg: &MapArg) -> Result<MapProgram> {
    let path = Path::new(&arg.map);
    let src = if path.is_file() {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        arg.map.clone()
    };
    Ok(parse_map(&src)?)
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("`{t}` is not a number")))
        .collect()
}

fn parse_box(text: &str) -> Result<SearchBox> {
    let v = numbers(text)?;
    if v.is_empty() || v.len() % 2 != 0 {
        bail!("--box needs lo,hi pairs, got {} numbers", v.len());
    }
    let (lo, hi) = v.chunks(2).map(|c| (c[0], c[1])).unzip();
    Ok(SearchBox::new(lo, hi)?)
}

fn parse_matrix(text: &str) -> Result<LinearMap> {
    let rows: Vec<Vec<f64>> = text.split(';').map(numbers).collect::<Result<_>>()?;
    Ok(LinearMap::from_rows(&rows)?)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.9}")).collect();
    format!("({})", parts.join(", "))
}

fn gate(failures: usize, allowed: usize) -> Outcome {
    if failures > allowed {
        Outcome::Failures
    } else {
        Outcome::Ok
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let tol = Tolerances::default();
    match cli.command {
        Command::Parse(m) => {
            let g = load_map(&m)?;
            println!("ok: R^{} -> R^{}", g.n_in(), g.n_out());
            println!("{g}");
        }
        Command::Classify { map, at } => {
            let g = load_map(&map)?;
            let sp = analyze_point(&g, &numbers(&at)?, &tol)?;
            println!(
                "{} corank={} tb={} margin={:.3e}",
                sp.classification, sp.corank, sp.tb_symbol, sp.margin
            );
        }
        Command::Singular { map, bbox, grid, json } => {
            let g = load_map(&map)?;
            let bbox = parse_box(&bbox)?;
            let pool = worker_pool()?;
            let search = pool.install(|| find_singular_points(&g, &bbox, grid, &tol))?;
            if json {
                println!("{}", serde_json::to_string_pretty(&search)?);
            } else {
                for sp in &search.points {
                    println!(
                        "{} {} corank={} tb={} margin={:.3e}",
                        fmt_point(&sp.location),
                        sp.classification,
                        sp.corank,
                        sp.tb_symbol,
                        sp.margin
                    );
                }
                println!("{} singular points", search.points.len());
            }
        }
        Command::Tb { map, at, order } => {
            let g = load_map(&map)?;
            println!("{}", tb_symbol(&g, &numbers(&at)?, order, &tol)?);
        }
        Command::GdsmCusps {
            a,
            samples,
            seed,
            sigma,
            grid,
            failures,
        } => {
            let cfg = CuspExperiment {
                n_samples: samples,
                seed,
                sigma,
                grid,
                ..CuspExperiment::default()
            };
            let a = parse_matrix(&a)?;
            let pool = worker_pool()?;
            let results = pool.install(|| cusp_count_experiment(&a, &cfg))?;
            let mut failed = 0;
            for s in &results {
                failed += usize::from(!s.pass);
                println!(
                    "sample {:>4}: cusps={} cross_caps={} points={} folds_elsewhere={} pass={}",
                    s.sample_index,
                    s.cusp_count,
                    s.cross_cap_count,
                    s.points.len(),
                    s.fold_only_elsewhere,
                    s.pass
                );
            }
            println!("{failed} of {} samples failed", results.len());
            return Ok(gate(failed, failures.allow_failures));
        }
        Command::Experiment(ExperimentCommand::Run {
            config,
            out,
            format,
            failures,
        }) => {
            let format = match format {
                Some(f) => f,
                None => ReportFormat::from_path(&out)
                    .ok_or_else(|| anyhow!("cannot tell the report format of {}; pass --format", out.display()))?,
            };
            let cfg = ExperimentConfig::from_path(&config)?;
            let start = Instant::now();
            let report = run_experiment(&cfg)?;
            let elapsed = start.elapsed();
            write_report(&report, &out, format)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for s in report.samples.iter().filter(|s| !s.pass) {
                eprintln!("sample {} failed: {}", s.sample_index, s.failures.join("; "));
            }
            println!(
                "{}: {} samples, {} failures, {:.2}s, report written to {}",
                cfg.kind,
                report.aggregate.n_samples,
                report.aggregate.failures,
                elapsed.as_secs_f64(),
                out.display()
            );
            return Ok(gate(report.aggregate.failures, failures.allow_failures));
        }
        Command::Report(ReportCommand::Summarize { path }) => {
            let summary = summarize_path(&path)?;
            print!("{summary}");
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failures) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
