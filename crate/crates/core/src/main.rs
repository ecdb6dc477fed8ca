use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use canfield::acceptance::verify_all;
use canfield::config::{parse_grid, ConfigFile};
use canfield::dsl::{catalog_defaults, catalog_entries};
use canfield::report::{emit, parse_suites, run, InputRef, OutputFormat, RunConfig, RunError, DEFAULT_SEED};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "CANFIELD_OUT";
const OUT_FALLBACK: &str = "canfield-out";

#[derive(Parser)]
#[command(name = "canfield", version, about = "Extrinsic geometry checks for the canonical vector field of a submanifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one immersion: a definition file or `catalog:NAME[:k=v,...]`.
    Analyze(AnalyzeArgs),
    /// Catalog operations.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run the full verification suite and write acceptance.json.
    VerifyAll {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List entries with their parameters and defaults.
    List,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Definition file or `catalog:NAME[:k=v,...]` (vector values separated by `;`).
    input: Option<String>,
    /// Suites to run, repeatable or comma-separated; `all` selects every suite.
    #[arg(long = "suite", value_name = "S")]
    suites: Vec<String>,
    /// Grid counts per chart axis, e.g. `16,16`.
    #[arg(long, value_name = "N,...")]
    grid: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "fd-tol")]
    fd_tol: Option<f64>,
    /// Cross-check exact jets against finite differences.
    #[arg(long = "fd-check")]
    fd_check: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// `key = value` file supplying defaults for the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn out_dir(flag: Option<PathBuf>, from_config: Option<PathBuf>) -> PathBuf {
    flag.or(from_config)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(OUT_FALLBACK))
}

fn build_config(args: AnalyzeArgs) -> Result<RunConfig, String> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ConfigFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let input = match args.input {
        Some(s) => s.parse::<InputRef>()?,
        None => file.input.ok_or("no input given (argument or `input` in the config file)")?,
    };
    let mut cfg = RunConfig::new(input);
    if !args.suites.is_empty() {
        cfg.suites = parse_suites(&args.suites.join(","))?;
    } else if let Some(s) = file.suites {
        cfg.suites = s;
    }
    cfg.grid = match args.grid {
        Some(g) => Some(parse_grid(&g)?),
        None => file.grid,
    };
    if let Some(t) = args.tol.or(file.tol) {
        cfg.tol = t;
    }
    if let Some(t) = args.fd_tol.or(file.fd_tol) {
        cfg.fd_tol = t;
    }
    cfg.fd_check = args.fd_check || file.fd_check.unwrap_or(false);
    cfg.seed = args.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    cfg.format = args.format.or(file.format).unwrap_or(OutputFormat::Json);
    cfg.out_dir = out_dir(args.out, file.out);
    Ok(cfg)
}

fn analyze(args: AnalyzeArgs) -> ExitCode {
    let cfg = match build_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (report, set) = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            match &e {
                RunError::Input(_) => eprintln!("error: {}: {e}", cfg.input),
                _ => eprintln!("error: {e}"),
            }
            return ExitCode::from(2);
        }
    };
    match emit(&report, &set.points, cfg.format, &cfg.out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", cfg.out_dir.display());
            return ExitCode::from(2);
        }
    }
    for a in report.assertions.iter().filter(|a| !a.pass) {
        println!("FAIL  {}/{}: {:.3e} > {:.1e}", a.suite.name(), a.name, a.value, a.tolerance);
    }
    let total = report.assertions.len();
    let failed = report.assertions.iter().filter(|a| !a.pass).count();
    println!("{} of {total} assertions passed", total - failed);
    ExitCode::from(report.exit_code() as u8)
}

fn list_catalog() -> ExitCode {
    for e in catalog_entries() {
        let defaults = catalog_defaults(e.name).unwrap_or_default();
        let params: Vec<String> = defaults
            .iter()
            .map(|(k, v)| {
                let v = serde_json::to_string(v).unwrap_or_default();
                if e.required.contains(&k.as_str()) {
                    format!("{k}* (e.g. {v})")
                } else {
                    format!("{k}={v}")
                }
            })
            .collect();
        println!("{:<15} {}", e.name, e.summary);
        if !params.is_empty() {
            println!("{:<15} params: {}", "", params.join(", "));
        }
    }
    println!("\n* required; give parameters as catalog:NAME:k=v,... with vectors as a;b;c");
    ExitCode::SUCCESS
}

fn write_acceptance(dir: &Path, json: &str, reports: &std::collections::BTreeMap<String, String>) -> std::io::Result<()> {
    fs::create_dir_all(dir.join("reports"))?;
    fs::write(dir.join("acceptance.json"), json)?;
    for (label, r) in reports {
        fs::write(dir.join("reports").join(format!("{label}.json")), r)?;
    }
    Ok(())
}

fn verify(seed: u64, out: Option<PathBuf>) -> ExitCode {
    let (report, reports) = match verify_all(seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for c in &report.criteria {
        println!("{}", c.line());
        for m in c.failures() {
            println!("      {}", m.describe());
        }
    }
    let dir = out_dir(out, None);
    if let Err(e) = write_acceptance(&dir, &report.to_json(), &reports) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    println!("wrote {}", dir.join("acceptance.json").display());
    if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Catalog { action: CatalogAction::List } => list_catalog(),
        Command::VerifyAll { seed, out } => verify(seed, out),
    }
}
