//! `qoptics`: scenario runner for the collective quantum-optics toolkit.

mod config;
mod error;
mod figures;
mod scenarios;
mod svg;
mod sweep;
mod table;

use std::path::PathBuf;
use std::time::Instant;

use clap::{ Parser, Subcommand };

use config::{ parse_tol_override, ScenarioConfig, Tolerances };
use error::{ CliError, CliResult };
use scenarios::{ compute_run, PointContext, RunArtifacts };
use table::ResultTable;

#[derive(Parser)]
#[command(name = "qoptics", version, about = "driven-dissipative quantum optics scenario runner")]
struct Cli {
    /// Override the RNG seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override integrator tolerances, e.g. `rtol=1e-8,atol=1e-11`.
    #[arg(long, global = true)]
    tol_override: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario from a TOML config file.
    Run { config: PathBuf },
    /// Render a built-in figure preset.
    Figure { preset: String },
    /// Run a parameter sweep from a TOML config file.
    Sweep {
        config: PathBuf,
        /// Worker threads (the output is identical for any count).
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

fn load_config(path: &PathBuf, cli: &Cli) -> CliResult<(ScenarioConfig, Tolerances)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read '{}': {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let tol_override = match &cli.tol_override {
        Some(text) => Some(parse_tol_override(text)?),
        None => None,
    };
    let tols = cfg.effective_tolerances(tol_override);
    Ok((cfg, tols))
}

fn provenance(cfg: &ScenarioConfig) -> Vec<(String, String)> {
    let (_, unit_line) = cfg.normalized_params();
    vec![
        ("config_hash".into(), cfg.hash()),
        ("library".into(), format!("qoptics {}", env!("CARGO_PKG_VERSION"))),
        ("seed".into(), cfg.seed.to_string()),
        ("units".into(), unit_line),
    ]
}

fn write_artifacts(
    artifacts: RunArtifacts,
    out_dir: &PathBuf,
    provenance: &[(String, String)],
) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)?;
    for (name, table) in artifacts.tables {
        let table = table.with_provenance(provenance);
        let path = out_dir.join(format!("{name}.csv"));
        table.write_csv(&path)?;
        eprintln!("wrote {}", path.display());
    }
    for (name, body) in artifacts.plots {
        let path = out_dir.join(format!("{name}.svg"));
        svg::write_svg(&path, &body)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let started = Instant::now();
    match &cli.command {
        Command::Run { config } => {
            let (cfg, tols) = load_config(config, cli)?;
            let mut ctx = PointContext::from_config(&cfg);
            ctx.tols = tols;
            let artifacts = compute_run(&ctx)?;
            write_artifacts(artifacts, &cli.out, &provenance(&cfg))?;
        }
        Command::Figure { preset } => {
            let artifacts = figures::render(preset)?;
            let meta = vec![
                ("figure".into(), preset.clone()),
                ("library".into(), format!("qoptics {}", env!("CARGO_PKG_VERSION"))),
            ];
            write_artifacts(artifacts, &cli.out, &meta)?;
        }
        Command::Sweep { config, workers } => {
            let (cfg, _) = load_config(config, cli)?;
            let table: ResultTable = sweep::run_sweep(&cfg, *workers)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("sweep.csv");
            table.with_provenance(&provenance(&cfg)).write_csv(&path)?;
            eprintln!("wrote {}", path.display());
        }
    }
    // Wall time goes to stderr only, keeping output files byte-reproducible.
    eprintln!("done in {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
