//! Canned scenarios: the article-style default geometry is kept on
//! `ScenarioConfig::default()`; the presets here use a compact cell (same
//! channel model, shorter hops) so that noise-normalized SINRs land in a
//! numerically meaningful range for benchmarks and validation.

use crate::pipeline::PipelineConfig;
use crate::scenario::ScenarioConfig;

/// Compact benchmark scenario at full size (4 antennas, 10 elements, 2+2
/// users). Thresholds are scaled to the compact link budget.
pub fn bench_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_tx: 4,
        n_ris: 10,
        n_ir: 2,
        n_uer: 2,
        pt_db: 25.0,
        e_th: 0.1,
        r_c_min: 0.05,
        nu: 1e-4,
        bs_pos: [0.0, 0.0, 0.0],
        ris_pos: [5.0, 5.0, 10.0],
        ir_radius: 10.0,
        uer_radius: 10.0,
        los_exp: 2.0,
        nlos_exp: 3.5,
        lambda1: 9.61,
        lambda2: 0.16,
        rician_k: 0.0,
        seed: 1,
    }
}

/// Tiny instance for the exhaustive grid oracle: one information receiver,
/// one eavesdropper, two antennas, two elements.
pub fn tiny_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_tx: 2,
        n_ris: 2,
        n_ir: 1,
        n_uer: 1,
        pt_db: 20.0,
        e_th: 0.0,
        r_c_min: 0.01,
        nu: 1e-3,
        ris_pos: [2.0, 2.0, 4.0],
        ir_radius: 5.0,
        uer_radius: 5.0,
        seed,
        ..bench_scenario()
    }
}

/// Pipeline defaults used by the validation drivers.
pub fn bench_pipeline() -> PipelineConfig {
    PipelineConfig::default()
}
