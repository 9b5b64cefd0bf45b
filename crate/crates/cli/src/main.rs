//! Monte-Carlo harness CLI: run single-scenario simulations, parameter
//! sweeps, convergence traces, and the validation suite.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use star_swipt::BackendRegistry;
use star_swipt::oracle::{self, GridSpec};
use star_swipt::pipeline::{self, load_config, PipelineConfig};
use star_swipt::precoder::{fipsa, random_expansion, spca_precoders};
use star_swipt::presets;
use star_swipt::rates::RISProfile;
use star_swipt::scenario::{synthesize_channels, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "star-swipt",
    about = "Worst-case sum-secrecy-rate optimizer and Monte-Carlo harness \
             for a dual-sided-surface SWIPT downlink"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario + pipeline config file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured number of channel realizations at one parameter
    /// point and write records, aggregates, and plot data.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one config key over a list of values.
    Sweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// Swept key (one of: pt_db, nu, n_ris, n_tx, e_th, r_c_min).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Single-realization run that writes the per-iteration traces of every
    /// stage for convergence plots.
    Convergence {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run the validation suite (surrogate audit, grid-oracle cross-check,
    /// design certification) and print a report.
    Validate {
        /// Reduced sample counts and fewer oracle instances.
        #[arg(long)]
        quick: bool,
        /// Optional directory for the CSV reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_config(path: &Path) -> Result<(ScenarioConfig, PipelineConfig), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    load_config(&text).map_err(|e| format!("config file {}: {e}", path.display()))
}

fn run_simulate(common: &ConfigArgs, seed: Option<u64>) -> Result<bool, String> {
    let (mut sc, pc) = read_config(&common.config)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let registry = BackendRegistry::with_defaults();
    let res = pipeline::run_experiment(&sc, &pc, "pt_db", &[sc.pt_db], &registry)
        .map_err(|e| e.to_string())?;
    pipeline::write_outputs(&res, "pt_db", &common.out).map_err(|e| e.to_string())?;
    report_failures(&res);
    Ok(res.failures.is_empty())
}

fn run_sweep(common: &ConfigArgs, param: &str, values: &[f64]) -> Result<bool, String> {
    if values.is_empty() {
        return Err("at least one sweep value is required".to_string());
    }
    let (sc, pc) = read_config(&common.config)?;
    let registry = BackendRegistry::with_defaults();
    let res = pipeline::run_experiment(&sc, &pc, param, values, &registry)
        .map_err(|e| e.to_string())?;
    pipeline::write_outputs(&res, param, &common.out).map_err(|e| e.to_string())?;
    report_failures(&res);
    for a in &res.aggregates {
        println!(
            "{param} = {:>10.4}: mean r_sec {:.6} (std {:.6}) over {} ok / {} failed",
            a.sweep_value, a.mean_r_sec, a.std_r_sec, a.n_ok, a.n_failed
        );
    }
    Ok(res.failures.is_empty())
}

fn run_convergence(common: &ConfigArgs) -> Result<bool, String> {
    let (sc, pc) = read_config(&common.config)?;
    let registry = BackendRegistry::with_defaults();
    let ch = synthesize_channels(&sc).map_err(|e| e.to_string())?;
    let outcome = pipeline::alternate(&ch, &sc, &pc, &registry).map_err(|e| e.to_string())?;
    pipeline::write_traces(&outcome, &common.out).map_err(|e| e.to_string())?;
    println!(
        "converged after {} outer iterations; final r_sec {:.6}",
        outcome.converged_at, outcome.design.report.wcssr_bound
    );
    Ok(true)
}

fn report_failures(res: &pipeline::ExperimentResult) {
    for (v, r, e) in &res.failures {
        eprintln!("realization {r} at sweep value {v}: {e}");
    }
}

fn run_validate(quick: bool, out: Option<&Path>) -> Result<bool, String> {
    let registry = BackendRegistry::with_defaults();
    let mut all_ok = true;
    let audit_samples = if quick { 1000 } else { 10_000 };
    let n_tiny = if quick { 2 } else { 5 };
    let n_ball = if quick { 200 } else { 1000 };

    // 1. surrogate audit
    let audit = oracle::surrogate_audit(audit_samples, 2024);
    let audit_ok = audit.clean(1e-9);
    all_ok &= audit_ok;
    println!("== surrogate audit ({audit_samples} samples): {}", verdict(audit_ok));
    print!("{}", audit.table());

    // 2. grid-oracle cross-check at tiny scale
    let spec = GridSpec {
        n_ball,
        directions: if quick { 3 } else { 4 },
        splits: if quick { 3 } else { 4 },
        ..Default::default()
    };
    println!("== grid-oracle cross-check ({n_tiny} instances)");
    let mut grid_rows = Vec::new();
    for i in 0..n_tiny {
        let sc = presets::tiny_scenario(100 + i as u64);
        let pc = PipelineConfig {
            eval_samples: n_ball,
            ..Default::default()
        };
        let ch = synthesize_channels(&sc).map_err(|e| e.to_string())?;
        let grid = oracle::grid_search_tiny(&ch, &sc, &spec);
        let outcome = pipeline::alternate(&ch, &sc, &pc, &registry).map_err(|e| e.to_string())?;
        let ball = oracle::ball_samples(&ch, n_ball, 0xBA11);
        let sca = oracle::evaluate_design(
            &outcome.design.precoders,
            &outcome.design.profile,
            &ch,
            &ball,
        );
        let ok = !grid.feasible_found || sca.objective >= 0.9 * grid.objective;
        all_ok &= ok;
        println!(
            "   seed {:>4}: sca {:.6} vs grid {:.6} ({} points): {}",
            sc.seed,
            sca.objective,
            grid.objective,
            grid.evaluated,
            verdict(ok)
        );
        grid_rows.push(format!(
            "{},{:.9e},{:.9e},{}",
            sc.seed, sca.objective, grid.objective, grid.evaluated
        ));
    }

    // 3. certification of one full-scale optimized design
    let sc = presets::bench_scenario();
    let pc = PipelineConfig {
        eval_samples: 200,
        ..Default::default()
    };
    let ch = synthesize_channels(&sc).map_err(|e| e.to_string())?;
    let outcome = pipeline::alternate(&ch, &sc, &pc, &registry).map_err(|e| e.to_string())?;
    let cert = oracle::certify_design(
        &outcome.design.precoders,
        &outcome.design.profile,
        &ch,
        &sc,
        n_ball,
    );
    all_ok &= cert.pass();
    println!("== design certification: {}", verdict(cert.pass()));
    print!("{}", cert.table());

    // 4. end-to-end consistency: quick restoration+optimization pass
    let ris = RISProfile::uniform(sc.n_ris);
    let popts = pc.precoder_options();
    let init = random_expansion(&ch, &ris, &sc, 9).map_err(|e| e.to_string())?;
    let st = fipsa(&ch, &ris, &sc, &popts, &registry, "clarabel", init, None)
        .map_err(|e| e.to_string())?;
    let mono_ok = if st.feasible {
        let out = spca_precoders(&ch, &ris, &sc, &popts, &registry, "clarabel", &st)
            .map_err(|e| e.to_string())?;
        out.state
            .objective_history
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-6)
    } else {
        false
    };
    all_ok &= mono_ok;
    println!("== optimizer monotonicity spot check: {}", verdict(mono_ok));

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("audit.csv"), audit.csv()).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("certification.csv"), cert.csv()).map_err(|e| e.to_string())?;
        let mut grid_csv = String::from("seed,sca_objective,grid_objective,grid_points\n");
        for row in grid_rows {
            grid_csv.push_str(&row);
            grid_csv.push('\n');
        }
        std::fs::write(dir.join("grid_check.csv"), grid_csv).map_err(|e| e.to_string())?;
    }
    Ok(all_ok)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, seed } => run_simulate(common, *seed),
        Command::Sweep {
            common,
            param,
            values,
        } => run_sweep(common, param, values),
        Command::Convergence { common } => run_convergence(common),
        Command::Validate { quick, out } => run_validate(*quick, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
