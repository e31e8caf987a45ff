use clap::{Parser, Subcommand};
use smoothsec_cli::scenario::parse_grid_override;
use smoothsec_cli::{execute, list_catalog, load, scenario_hash, write_artifacts, CliError, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smoothsec", version, about = "Smooth continuous sections and homotopies from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, timings.json and CSV samples.
    Run {
        config: PathBuf,
        /// Output directory; beats the scenario's output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base grid resolution, optionally followed by the time resolution: `N` or `N,M`.
        #[arg(long, value_parser = parse_grid_override)]
        grid_override: Option<(usize, Option<usize>)>,
        /// Order of the finite-difference smoothness certificate.
        #[arg(long)]
        certify_order: Option<usize>,
        /// Root for output directories when neither --out nor output.dir is set.
        #[arg(long, env = "SMOOTHSEC_OUT_DIR", default_value = "smoothsec-out")]
        out_root: PathBuf,
    },
    /// Print the catalog of manifolds, bundles, sections, tube widths and homotopies.
    ListCatalog,
}

fn run(config: PathBuf, out: Option<PathBuf>, grid: Option<(usize, Option<usize>)>, order: Option<usize>, root: PathBuf) -> Result<i32, CliError> {
    let loaded = load(&config)?;
    let mut scenario = loaded.scenario;
    scenario.apply(&Overrides { grid_space: grid.map(|g| g.0), grid_time: grid.and_then(|g| g.1), certify_order: order });
    let built = scenario.build()?;
    let dir = out.or_else(|| scenario.output.dir.clone()).unwrap_or_else(|| root.join(&scenario.name));
    let output = execute(&built, &scenario_hash(&loaded.text));
    write_artifacts(&dir, &output)?;
    let r = &output.report;
    for c in &r.certificates {
        println!("{:<24} {:<5} {:e}", c.name, if c.certificate.passed { "pass" } else { "FAIL" }, c.certificate.worst_value);
    }
    if let Some(e) = &r.error {
        eprintln!("error: {e}");
    }
    println!("status: {:?}, artifacts in {}", r.status, dir.display());
    Ok(r.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListCatalog => {
            print!("{}", list_catalog());
            0
        }
        Command::Run { config, out, grid_override, certify_order, out_root } => {
            match run(config, out, grid_override, certify_order, out_root) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
