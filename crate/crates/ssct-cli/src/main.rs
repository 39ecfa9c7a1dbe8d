//! ssct: spectral simulator and phase-space diagnostics for Schrödinger
//! operators with potentials concentrated near a subspace.
//!
//! Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 guard
//! violation. Failures print a machine-readable line on stderr:
//!   ssct-error kind=<kind> code=<code> msg="..."

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssct_core::config::RawConfig;
use ssct_core::error::CoreError;
use ssct_core::frame::CoherentFrame;
use ssct_core::io;
use ssct_core::potential::DecayVerdict;
use ssct_core::region::PhaseSpaceRegion;
use ssct_core::scenario::{self, Scenario, PRESET_NAMES};
use ssct_core::selftest::{self, SelftestConfig};

#[derive(Parser)]
#[command(
    name = "ssct",
    about = "Spectral surface-scattering toolkit: propagation, phase-space POVMs, and scattering diagnostics",
    version
)]
struct Cli {
    /// Configuration file (flat key = value with [sections])
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default ssct_out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: SSCT_THREADS or all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the random-coupling seed in [potential]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the boundary-guard mass threshold in [run]
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Print the effective defaults (optionally for a named scenario preset) and exit
    #[arg(long, value_name = "PRESET", num_args = 0..=1, default_missing_value = "free")]
    dump_config: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured state and write snapshots plus a propagation manifest
    Propagate,
    /// Apply a region POVM to a snapshot
    Povm {
        /// Input wavefunction snapshot (.ssct)
        #[arg(long)]
        input: PathBuf,
        /// Region, e.g. "far:n=4,m=0.5", "strip:r=2", "tube:n=8,m=0.25", "all",
        /// "not:<region>", or unions joined with '|'
        #[arg(long)]
        region: String,
        /// Frame scale delta
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        /// Also materialize the windowed-transform coefficients: writes the
        /// full lattice CSV and the phase-plane heat maps (small lattices only)
        #[arg(long)]
        export_coefficients: bool,
    },
    /// Full classification report for the configured state
    Classify,
    /// Scenario operations
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Transverse short-range decay verdict for the configured potential
    CheckPotential,
    /// Run the phase-space property suite
    Selftest,
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Run a named preset or a scenario config file
    Run { target: String },
    /// List builtin scenario presets
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads.or_else(|| {
        std::env::var("SSCT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    }) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }

    if let Some(preset) = &cli.dump_config {
        return match Scenario::preset(preset) {
            Ok(s) => {
                print!("{}", s.dump());
                ExitCode::SUCCESS
            }
            Err(err) => fail(&err),
        };
    }

    let Some(command) = &cli.command else {
        eprintln!("ssct-error kind=usage code=2 msg=\"missing subcommand; try --help\"");
        return ExitCode::from(2);
    };

    match run(&cli, command) {
        Ok(code) => code,
        Err(err) => fail(&err),
    }
}

fn fail(err: &CoreError) -> ExitCode {
    let code = err.exit_code();
    eprintln!(
        "ssct-error kind={} code={} msg=\"{}\"",
        err.kind(),
        code,
        err
    );
    ExitCode::from(code as u8)
}

fn load_config(cli: &Cli) -> Result<RawConfig, CoreError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    apply_overrides(cli, &mut raw)?;
    Ok(raw)
}

fn apply_overrides(cli: &Cli, raw: &mut RawConfig) -> Result<(), CoreError> {
    if let Some(seed) = cli.seed {
        raw.merge_over(&RawConfig::parse(&format!("[potential]\nseed = {seed}\n"))?);
    }
    if let Some(tol) = cli.tol {
        raw.merge_over(&RawConfig::parse(&format!(
            "[run]\nboundary_guard = {tol}\n"
        ))?);
    }
    Ok(())
}

fn out_dir(cli: &Cli, leaf: &str) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("ssct_out").join(leaf))
}

fn run(cli: &Cli, command: &Command) -> Result<ExitCode, CoreError> {
    match command {
        Command::Propagate => {
            let raw = load_config(cli)?;
            let dir = out_dir(cli, "propagate");
            scenario::propagate_run(&raw, &dir)?;
            println!("propagation written to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Povm {
            input,
            region,
            delta,
            export_coefficients,
        } => {
            let psi = io::read_wavefunction(input)?;
            let region = PhaseSpaceRegion::parse(region)?;
            let frame = CoherentFrame::new(psi.grid().clone(), *delta)?;
            let out = ssct_core::povm::apply_povm(&frame, &region, &psi)?;
            let dir = out_dir(cli, "povm");
            std::fs::create_dir_all(&dir)?;
            io::write_wavefunction(&dir.join("povm_result.ssct"), &out)?;
            io::write_marginals(&dir, "povm_result", &out)?;
            if *export_coefficients {
                let field = ssct_core::povm::bargmann_transform(&frame, &psi)?;
                field.write_csv(&dir.join("coefficients.csv"))?;
                field.write_husimi_csv(&dir, "coefficients")?;
            }
            let mut manifest: Vec<String> = frame
                .manifest()
                .into_iter()
                .map(|(k, v)| format!("frame.{k} = {v}"))
                .collect();
            manifest.push(format!("region = {}", region.describe()));
            manifest.push(format!("input_norm = {}", io::fmt_f64(psi.norm())));
            manifest.push(format!("output_norm = {}", io::fmt_f64(out.norm())));
            std::fs::write(dir.join("manifest.txt"), manifest.join("\n") + "\n")?;
            println!(
                "|P psi| = {:.6e} (input norm {:.6e}); result in {}",
                out.norm(),
                psi.norm(),
                dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify => {
            let mut raw = load_config(cli)?;
            raw.merge_over(&RawConfig::parse("[plan]\nsteps = classify\n")?);
            let scenario = Scenario {
                name: "classify".into(),
                raw,
            };
            let dir = out_dir(cli, "classify");
            let outcome = scenario::run_scenario(&scenario, &dir)?;
            print_outcome(&outcome, &dir);
            Ok(exit_for(&outcome))
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for name in PRESET_NAMES {
                    println!("{name}");
                }
                Ok(ExitCode::SUCCESS)
            }
            ScenarioAction::Run { target } => {
                let mut scenario = if Path::new(target).exists() {
                    Scenario::from_file(Path::new(target))?
                } else {
                    Scenario::preset(target)?
                };
                apply_overrides(cli, &mut scenario.raw)?;
                let dir = out_dir(cli, &scenario.name);
                let outcome = scenario::run_scenario(&scenario, &dir)?;
                print_outcome(&outcome, &dir);
                Ok(exit_for(&outcome))
            }
        },
        Command::CheckPotential => {
            let raw = load_config(cli)?;
            let grid = scenario::build_grid(&raw)?;
            let potential = scenario::build_potential(&raw, &grid)?;
            let max_r = grid
                .perp_axes()
                .iter()
                .map(|a| 0.45 * a.length())
                .fold(f64::INFINITY, f64::min);
            let r_grid = raw.f64_list("check", "r_list", &log_spaced(0.5, max_r, 25))?;
            let report = ssct_core::potential::short_range_check(&potential, &r_grid)?;
            let dir = out_dir(cli, "check_potential");
            std::fs::create_dir_all(&dir)?;
            let mut csv =
                io::CsvWriter::create(&dir.join("potential_tail.csv"), &[], &["r", "tail"])?;
            for &(r, tail) in &report.samples {
                csv.row_f64(&[r, tail])?;
            }
            csv.finish()?;
            println!(
                "tail verdict: {} (L1 estimate {:.4e}{})",
                report.verdict.as_str(),
                report.l1_estimate,
                match report.fitted_exponent {
                    Some(e) => format!(", fitted exponent {e:.3}"),
                    None => String::new(),
                }
            );
            if grid.k() < 3 {
                println!("small-coupling criterion: void for k < 3 (needs (k-2)^2/2 > 0)");
            }
            Ok(if report.verdict == DecayVerdict::Integrable {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Selftest => {
            let raw = load_config(cli)?;
            let config = if raw.has_section("selftest") {
                let axes = raw.axes("selftest", "grid", &[(512, 200.0), (512, 200.0)])?;
                SelftestConfig {
                    grid: ssct_core::grid::make_grid(1, &axes[..1], &axes[1..])?,
                    deltas: raw.f64_list("selftest", "delta_list", &[1.0, 0.5, 0.25])?,
                    oracle_strides: None,
                }
            } else {
                SelftestConfig::reference()?
            };
            let results = selftest::run(&config)?;
            let mut all = true;
            for r in &results {
                println!(
                    "[{}] {} - {}",
                    if r.passed { "pass" } else { "FAIL" },
                    r.name,
                    r.details
                );
                all &= r.passed;
            }
            Ok(if all {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn print_outcome(outcome: &scenario::ScenarioOutcome, dir: &Path) {
    for check in &outcome.checks {
        println!(
            "[{}] {} - {}",
            if check.passed { "pass" } else { "FAIL" },
            check.name,
            check.details
        );
    }
    println!(
        "scenario '{}': {} ({} checks); report in {}",
        outcome.name,
        if outcome.passed() { "pass" } else { "FAIL" },
        outcome.checks.len(),
        dir.display()
    );
}

fn exit_for(outcome: &scenario::ScenarioOutcome) -> ExitCode {
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}
