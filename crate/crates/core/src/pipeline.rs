//! The alternating outer loop, the Monte-Carlo experiment harness, and the
//! file outputs behind the command-line interface.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use conic::BackendRegistry;
use rayon::prelude::*;

use crate::precoder::{
    self, fipsa, harmonized_expansion, random_expansion, spca_precoders, IterTrace,
    PrecoderOptions,
};
use crate::rates::{self, PrecoderSet, RISProfile, RateReport};
use crate::ris::{self, sequential_rank_one, RisOptions, RisTrace};
use crate::scenario::{self, synthesize_channels, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Precoder(#[from] precoder::PrecoderError),
    #[error(transparent)]
    Ris(#[from] ris::RisError),
    #[error(transparent)]
    Rates(#[from] rates::RatesError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("restoration could not reach feasibility at outer iteration {outer} (s = {s:.3e})")]
    Restoration { outer: usize, s: f64 },
    #[error("unknown sweep parameter `{0}`")]
    UnknownSweepKey(String),
    #[error("config: {0}")]
    Config(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Algorithm and harness parameters (config keys match field names).
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub n_realizations: usize,
    pub max_outer: usize,
    pub delta_outer: f64,
    pub delta_i: f64,
    pub delta_e: f64,
    pub delta_p: f64,
    pub n_max: usize,
    pub m_max: usize,
    pub delta0: f64,
    /// Conic solver backend name.
    pub backend: String,
    /// Ball samples for the exact evaluation of emitted designs.
    pub eval_samples: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_realizations: 100,
            max_outer: 10,
            delta_outer: 1e-2,
            delta_i: 1e-2,
            delta_e: 1e-3,
            delta_p: 1e-2,
            n_max: 30,
            m_max: 30,
            delta0: 0.1,
            backend: "clarabel".to_string(),
            eval_samples: 100,
        }
    }
}

impl PipelineConfig {
    pub fn apply_kv(
        &mut self,
        kv: &mut BTreeMap<String, String>,
    ) -> Result<(), scenario::ScenarioError> {
        fn take<T, F>(
            kv: &mut BTreeMap<String, String>,
            key: &str,
            slot: &mut T,
            parse: F,
        ) -> Result<(), scenario::ScenarioError>
        where
            F: Fn(&str) -> Option<T>,
        {
            if let Some(v) = kv.remove(key) {
                *slot = parse(v.trim()).ok_or_else(|| scenario::ScenarioError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                })?;
            }
            Ok(())
        }
        let f = |s: &str| s.parse::<f64>().ok();
        let u = |s: &str| s.parse::<usize>().ok();
        take(kv, "n_realizations", &mut self.n_realizations, u)?;
        take(kv, "max_outer", &mut self.max_outer, u)?;
        take(kv, "delta_outer", &mut self.delta_outer, f)?;
        take(kv, "delta_i", &mut self.delta_i, f)?;
        take(kv, "delta_e", &mut self.delta_e, f)?;
        take(kv, "delta_p", &mut self.delta_p, f)?;
        take(kv, "n_max", &mut self.n_max, u)?;
        take(kv, "m_max", &mut self.m_max, u)?;
        take(kv, "delta0", &mut self.delta0, f)?;
        take(kv, "eval_samples", &mut self.eval_samples, u)?;
        if let Some(v) = kv.remove("backend") {
            self.backend = v.trim().to_string();
        }
        Ok(())
    }

    pub fn precoder_options(&self) -> PrecoderOptions {
        PrecoderOptions {
            delta_i: self.delta_i,
            delta_e: self.delta_e,
            n_max: self.n_max,
            m_max: self.m_max,
            solve_tol: 1e-8,
        }
    }

    pub fn ris_options(&self) -> RisOptions {
        RisOptions {
            delta_p: self.delta_p,
            delta0: self.delta0,
            ..Default::default()
        }
    }
}

/// Parse a config file holding both scenario and pipeline keys. Every key
/// must be recognized by one of the two.
pub fn load_config(text: &str) -> Result<(ScenarioConfig, PipelineConfig), PipelineError> {
    let mut kv = scenario::parse_kv(text)?;
    let mut sc = ScenarioConfig::default();
    let mut pc = PipelineConfig::default();
    sc.apply_kv(&mut kv)?;
    pc.apply_kv(&mut kv)?;
    if let Some(key) = kv.keys().next() {
        return Err(scenario::ScenarioError::UnknownKey(key.clone()).into());
    }
    sc.validate()?;
    Ok((sc, pc))
}

/// One per-outer-iteration record of one realization.
#[derive(Clone, Debug)]
pub struct OuterRecord {
    pub sweep_value: f64,
    pub realization: usize,
    pub outer_iter: usize,
    pub r_sec: f64,
    pub sum_rate: f64,
    pub energy_worst: f64,
    pub feasible: bool,
    pub eps_ratio: f64,
    pub wall_ms: f64,
}

pub const RECORD_CSV_HEADER: &str =
    "sweep_value,realization,outer_iter,r_sec,sum_rate,energy_worst,feasible,eps_ratio,wall_ms";

impl OuterRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.9e},{},{},{:.9e},{:.9e},{:.9e},{},{:.9e},{:.9e}",
            self.sweep_value,
            self.realization,
            self.outer_iter,
            self.r_sec,
            self.sum_rate,
            self.energy_worst,
            u8::from(self.feasible),
            self.eps_ratio,
            self.wall_ms
        )
    }
}

/// Converged design of one realization.
#[derive(Clone, Debug)]
pub struct Design {
    pub precoders: PrecoderSet,
    pub profile: RISProfile,
    pub report: RateReport,
    /// Iteration counts of every surface-step call, in order.
    pub ris_iters: Vec<usize>,
    /// SPCA traces of every precoder-step call, in order.
    pub spca_traces: Vec<Vec<IterTrace>>,
    pub ris_traces: Vec<Vec<RisTrace>>,
}

/// Outcome of the alternating loop on one channel realization.
#[derive(Debug)]
pub struct AlternateOutcome {
    pub design: Design,
    pub records: Vec<OuterRecord>,
    pub converged_at: usize,
    /// Diagnostics from safeguarded steps (kept designs stay certified).
    pub notes: Vec<String>,
}

/// Alternate restoration, precoder SPCA, and the surface step until the
/// exact problem objective converges. A surface profile is only adopted if
/// the exact objective at the current precoders does not drop by more than
/// 1e-3; the reported objective is always the exact evaluation, never the
/// surrogate value.
pub fn alternate(
    ch: &scenario::ChannelSet,
    cfg: &ScenarioConfig,
    pc: &PipelineConfig,
    registry: &BackendRegistry,
) -> Result<AlternateOutcome, PipelineError> {
    const ADOPT_SLACK: f64 = 1e-3;
    let popts = pc.precoder_options();
    let ropts = pc.ris_options();
    let mut profile = RISProfile::uniform(cfg.n_ris);
    let mut exp = random_expansion(ch, &profile, cfg, cfg.seed ^ 0x5EED)?;
    let mut best: Option<(f64, Design)> = None;
    let mut records = Vec::new();
    let mut prev_obj = f64::NEG_INFINITY;
    let mut converged_at = pc.max_outer;
    let mut ris_iters = Vec::new();
    let mut spca_traces = Vec::new();
    let mut ris_traces = Vec::new();
    let mut notes = Vec::new();

    for outer in 0..pc.max_outer {
        let t0 = Instant::now();
        let mut fipsa_trace = Vec::new();
        let state = match fipsa(
            ch,
            &profile,
            cfg,
            &popts,
            registry,
            &pc.backend,
            exp.clone(),
            Some(&mut fipsa_trace),
        ) {
            Ok(s) => s,
            Err(e) if best.is_some() => {
                // a certified design exists; a restoration breakdown while
                // refining it ends the alternation instead of losing it
                notes.push(format!("outer {outer}: restoration stopped: {e}"));
                converged_at = outer;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if !state.feasible {
            if best.is_some() {
                // the adopted design stays valid; stop refining
                converged_at = outer;
                break;
            }
            return Err(PipelineError::Restoration { outer, s: state.s });
        }
        let out = match spca_precoders(ch, &profile, cfg, &popts, registry, &pc.backend, &state) {
            Ok(o) => o,
            Err(e) if best.is_some() => {
                notes.push(format!("outer {outer}: precoder step stopped: {e}"));
                converged_at = outer;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(b) = &out.breakdown {
            notes.push(format!("outer {outer}: {b}"));
        }
        let pre_report = rates::worst_case_secrecy(&out.precoders, &profile, ch, pc.eval_samples)?;

        let rout = sequential_rank_one(
            ch,
            &out.precoders,
            cfg.e_th,
            cfg.r_c_min,
            &ropts,
            registry,
            &pc.backend,
            &profile,
        )?;
        let new_report =
            rates::worst_case_secrecy(&out.precoders, &rout.profile, ch, pc.eval_samples)?;
        let adopted = new_report.wcssr_bound + ADOPT_SLACK >= pre_report.wcssr_bound;
        let report = if adopted {
            profile = rout.profile.clone();
            new_report
        } else {
            pre_report
        };
        ris_iters.push(rout.trace.len());
        spca_traces.push(out.trace.clone());
        ris_traces.push(rout.trace.clone());

        let obj = report.wcssr_bound;
        let sum_rate = report.r_c + report.r_k.iter().sum::<f64>();
        let energy_worst = report.q_j_min_sampled.iter().sum::<f64>();
        records.push(OuterRecord {
            sweep_value: f64::NAN,
            realization: 0,
            outer_iter: outer,
            r_sec: obj,
            sum_rate,
            energy_worst,
            feasible: true,
            eps_ratio: rout.eps_ratio,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });

        let candidate = Design {
            precoders: out.precoders.clone(),
            profile: profile.clone(),
            report,
            ris_iters: ris_iters.clone(),
            spca_traces: spca_traces.clone(),
            ris_traces: ris_traces.clone(),
        };
        if best.as_ref().is_none_or(|(b, _)| obj > *b) {
            best = Some((obj, candidate));
        }
        if (obj - prev_obj).abs() < pc.delta_outer {
            converged_at = outer + 1;
            break;
        }
        prev_obj = obj;
        exp = harmonized_expansion(&out.precoders, ch, &profile)?;
    }

    let (_, mut design) = best.expect("at least one outer iteration ran");
    design.ris_iters = ris_iters;
    design.spca_traces = spca_traces;
    design.ris_traces = ris_traces;

    // flat continuation so every realization carries exactly max_outer rows
    while records.len() < pc.max_outer {
        let mut last = records.last().expect("nonempty records").clone();
        last.outer_iter = records.len();
        last.wall_ms = 0.0;
        records.push(last);
    }
    Ok(AlternateOutcome {
        design,
        records,
        converged_at,
        notes,
    })
}

/// Per-realization result inside an experiment.
#[derive(Debug)]
pub enum RealizationResult {
    Done(Box<AlternateOutcome>),
    Failed { error: String },
}

/// Aggregate row over the realizations of one sweep value.
#[derive(Clone, Debug)]
pub struct Aggregate {
    pub sweep_value: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_r_sec: f64,
    pub std_r_sec: f64,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub mean_ris_iters: f64,
    pub mean_outer_iters: f64,
}

pub const AGGREGATE_CSV_HEADER: &str = "sweep_value,n_ok,n_failed,mean_r_sec,std_r_sec,\
mean_sum_rate,std_sum_rate,mean_ris_iters,mean_outer_iters";

impl Aggregate {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.9e},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.sweep_value,
            self.n_ok,
            self.n_failed,
            self.mean_r_sec,
            self.std_r_sec,
            self.mean_sum_rate,
            self.std_sum_rate,
            self.mean_ris_iters,
            self.mean_outer_iters
        )
    }
}

#[derive(Debug)]
pub struct ExperimentResult {
    pub records: Vec<OuterRecord>,
    pub aggregates: Vec<Aggregate>,
    pub designs: Vec<(f64, usize, Box<AlternateOutcome>)>,
    pub failures: Vec<(f64, usize, String)>,
}

/// Keys accepted by `run_experiment` as the swept parameter.
pub const SWEEP_KEYS: &[&str] = &["pt_db", "nu", "n_ris", "n_tx", "e_th", "r_c_min"];

fn apply_sweep(cfg: &ScenarioConfig, key: &str, value: f64) -> Result<ScenarioConfig, PipelineError> {
    let mut c = cfg.clone();
    match key {
        "pt_db" => c.pt_db = value,
        "nu" => c.nu = value,
        "n_ris" => c.n_ris = value as usize,
        "n_tx" => c.n_tx = value as usize,
        "e_th" => c.e_th = value,
        "r_c_min" => c.r_c_min = value,
        other => return Err(PipelineError::UnknownSweepKey(other.to_string())),
    }
    Ok(c)
}

/// Run `n_realizations` independent channel draws per sweep value, seeded as
/// `seed + realization index`, in parallel over a worker pool capped by the
/// `STAR_SWIPT_THREADS` environment variable. Failed realizations are
/// counted and reported, not fatal.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    pc: &PipelineConfig,
    sweep_key: &str,
    sweep_values: &[f64],
    registry: &BackendRegistry,
) -> Result<ExperimentResult, PipelineError> {
    let pool = worker_pool()?;
    let tasks: Vec<(f64, usize)> = sweep_values
        .iter()
        .flat_map(|&v| (0..pc.n_realizations).map(move |r| (v, r)))
        .collect();
    // validate the sweep key before spawning anything
    apply_sweep(cfg, sweep_key, *sweep_values.first().unwrap_or(&0.0))?;

    let results: Vec<(f64, usize, RealizationResult)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(value, r)| {
                let run = || -> Result<AlternateOutcome, PipelineError> {
                    let mut c = apply_sweep(cfg, sweep_key, value)?;
                    c.seed = cfg.seed + r as u64;
                    let ch = synthesize_channels(&c)?;
                    alternate(&ch, &c, pc, registry)
                };
                let res = match run() {
                    Ok(out) => RealizationResult::Done(Box::new(out)),
                    Err(e) => RealizationResult::Failed {
                        error: e.to_string(),
                    },
                };
                (value, r, res)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut designs = Vec::new();
    let mut failures = Vec::new();
    for (value, r, res) in results {
        match res {
            RealizationResult::Done(out) => {
                for rec in &out.records {
                    let mut rec = rec.clone();
                    rec.sweep_value = value;
                    rec.realization = r;
                    records.push(rec);
                }
                designs.push((value, r, out));
            }
            RealizationResult::Failed { error } => failures.push((value, r, error)),
        }
    }

    let aggregates = sweep_values
        .iter()
        .map(|&v| {
            let ok: Vec<&AlternateOutcome> = designs
                .iter()
                .filter(|(val, _, _)| *val == v)
                .map(|(_, _, d)| d.as_ref())
                .collect();
            let n_failed = failures.iter().filter(|(val, _, _)| *val == v).count();
            let finals: Vec<f64> = ok
                .iter()
                .map(|o| o.design.report.wcssr_bound)
                .collect();
            let sums: Vec<f64> = ok
                .iter()
                .map(|o| o.design.report.r_c + o.design.report.r_k.iter().sum::<f64>())
                .collect();
            let ris_iters: Vec<f64> = ok
                .iter()
                .map(|o| {
                    let it = &o.design.ris_iters;
                    if it.is_empty() {
                        0.0
                    } else {
                        it.iter().sum::<usize>() as f64 / it.len() as f64
                    }
                })
                .collect();
            let outers: Vec<f64> = ok.iter().map(|o| o.converged_at as f64).collect();
            Aggregate {
                sweep_value: v,
                n_ok: ok.len(),
                n_failed,
                mean_r_sec: mean(&finals),
                std_r_sec: std_dev(&finals),
                mean_sum_rate: mean(&sums),
                std_sum_rate: std_dev(&sums),
                mean_ris_iters: mean(&ris_iters),
                mean_outer_iters: mean(&outers),
            }
        })
        .collect();

    Ok(ExperimentResult {
        records,
        aggregates,
        designs,
        failures,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Build the rayon pool, honoring the `STAR_SWIPT_THREADS` cap.
pub fn worker_pool() -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("STAR_SWIPT_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| PipelineError::Config(format!("STAR_SWIPT_THREADS = {v}")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

/// Write the experiment outputs under `out_dir`: the per-iteration records,
/// the aggregate table, and two-column plot data (x, mean) with a companion
/// `_std` file.
pub fn write_outputs(
    result: &ExperimentResult,
    sweep_key: &str,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let records = out_dir.join("records.csv");
    let mut f = std::fs::File::create(&records).map_err(io_err(&records))?;
    writeln!(f, "{RECORD_CSV_HEADER}").map_err(io_err(&records))?;
    for r in &result.records {
        writeln!(f, "{}", r.csv_row()).map_err(io_err(&records))?;
    }

    let agg = out_dir.join("aggregate.csv");
    let mut f = std::fs::File::create(&agg).map_err(io_err(&agg))?;
    writeln!(f, "{AGGREGATE_CSV_HEADER}").map_err(io_err(&agg))?;
    for a in &result.aggregates {
        writeln!(f, "{}", a.csv_row()).map_err(io_err(&agg))?;
    }

    let plot = out_dir.join(format!("r_sec_vs_{sweep_key}.dat"));
    let mut f = std::fs::File::create(&plot).map_err(io_err(&plot))?;
    for a in &result.aggregates {
        writeln!(f, "{:.9e} {:.9e}", a.sweep_value, a.mean_r_sec).map_err(io_err(&plot))?;
    }
    let plot_std = out_dir.join(format!("r_sec_vs_{sweep_key}_std.dat"));
    let mut f = std::fs::File::create(&plot_std).map_err(io_err(&plot_std))?;
    for a in &result.aggregates {
        writeln!(f, "{:.9e} {:.9e}", a.sweep_value, a.std_r_sec).map_err(io_err(&plot_std))?;
    }

    if !result.failures.is_empty() {
        let fail = out_dir.join("failures.csv");
        let mut f = std::fs::File::create(&fail).map_err(io_err(&fail))?;
        writeln!(f, "sweep_value,realization,error").map_err(io_err(&fail))?;
        for (v, r, e) in &result.failures {
            writeln!(f, "{v:.9e},{r},{}", e.replace(',', ";")).map_err(io_err(&fail))?;
        }
    }
    Ok(())
}

/// Write the per-iteration traces of one realization (for convergence-style
/// plots): one file per outer iteration and stage.
pub fn write_traces(outcome: &AlternateOutcome, out_dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (outer, trace) in outcome.design.spca_traces.iter().enumerate() {
        let p = out_dir.join(format!("precoder_trace_outer{outer}.csv"));
        let mut f = std::fs::File::create(&p).map_err(io_err(&p))?;
        writeln!(f, "{}", IterTrace::csv_header()).map_err(io_err(&p))?;
        for t in trace {
            writeln!(f, "{}", t.csv_row()).map_err(io_err(&p))?;
        }
    }
    for (outer, trace) in outcome.design.ris_traces.iter().enumerate() {
        let p = out_dir.join(format!("surface_trace_outer{outer}.csv"));
        let mut f = std::fs::File::create(&p).map_err(io_err(&p))?;
        writeln!(f, "{}", RisTrace::csv_header()).map_err(io_err(&p))?;
        for t in trace {
            writeln!(f, "{}", t.csv_row()).map_err(io_err(&p))?;
        }
    }
    let p = out_dir.join("outer_trace.csv");
    let mut f = std::fs::File::create(&p).map_err(io_err(&p))?;
    writeln!(f, "{RECORD_CSV_HEADER}").map_err(io_err(&p))?;
    for r in &outcome.records {
        writeln!(f, "{}", r.csv_row()).map_err(io_err(&p))?;
    }
    Ok(())
}


#[cfg(test)]
mod debug_tiny {
    use super::*;
    use crate::precoder::{fipsa, spca_precoders};
    use crate::rates::RISProfile;

    #[test]
    #[ignore]
    fn debug_tiny_failure() {
        let sc = crate::presets::tiny_scenario(100);
        let pc = PipelineConfig {
            eval_samples: 200,
            ..Default::default()
        };
        let reg = BackendRegistry::with_defaults();
        let ch = synthesize_channels(&sc).unwrap();
        let popts = pc.precoder_options();
        let ropts = pc.ris_options();
        let mut profile = RISProfile::uniform(sc.n_ris);
        let mut exp = random_expansion(&ch, &profile, &sc, sc.seed ^ 0x5EED).unwrap();
        for outer in 0..6 {
            let mut tr = Vec::new();
            let st = match fipsa(&ch, &profile, &sc, &popts, &reg, "clarabel", exp.clone(), Some(&mut tr)) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("outer {outer}: FIPSA ERR {e}");
                    for t in tr { eprintln!("  fipsa {} s={:.3e} {:?}", t.iter, t.s, t.status); }
                    return;
                }
            };
            eprintln!("outer {outer}: fipsa s={:.3e} feasible={}", st.s, st.feasible);
            let out = match spca_precoders(&ch, &profile, &sc, &popts, &reg, "clarabel", &st) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("outer {outer}: SPCA ERR {e}");
                    return;
                }
            };
            eprintln!(
                "outer {outer}: spca r_sec={:.4} iters={} conv={}",
                out.state.r_sec, out.trace.len(), out.converged
            );
            let rout = sequential_rank_one(
                &ch, &out.precoders, sc.e_th, sc.r_c_min, &ropts, &reg, "clarabel", &profile,
            )
            .unwrap();
            eprintln!(
                "outer {outer}: ris iters={} eps={:.4} ok={}",
                rout.trace.len(), rout.eps_ratio, rout.rank_complete
            );
            let newrep = rates::worst_case_secrecy(&out.precoders, &rout.profile, &ch, 100).unwrap();
            let oldrep = rates::worst_case_secrecy(&out.precoders, &profile, &ch, 100).unwrap();
            eprintln!(
                "outer {outer}: obj old={:.4} new={:.4}",
                oldrep.wcssr_bound, newrep.wcssr_bound
            );
            if newrep.wcssr_bound + 1e-3 >= oldrep.wcssr_bound {
                profile = rout.profile.clone();
            }
            exp = crate::precoder::harmonized_expansion(&out.precoders, &ch, &profile).unwrap();
        }
    }
}
