//! Scenario configuration, node geometry, the elevation-dependent path-loss
//! model, random channel synthesis, and the bounded CSI-error model.
//!
//! Power units: receiver noise power is normalized to 1, so `pt_db` is the
//! total transmit power in dB relative to unit noise power
//! (`P_t = 10^(pt_db/10)` linear) and harvested-energy thresholds are in the
//! same noise-normalized units.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config value for `{key}` is malformed: {value}")]
    BadValue { key: String, value: String },
    #[error("path-loss domain error: distance {d} m is below the height {h} m")]
    PathLossDomain { d: f64, h: f64 },
}

/// Full scenario description. Field names double as the config-file keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Transmit antenna count at the BS.
    pub n_tx: usize,
    /// Surface element count.
    pub n_ris: usize,
    /// Information receiver count.
    pub n_ir: usize,
    /// Untrusted energy receiver count.
    pub n_uer: usize,
    /// Total transmit power in dB relative to unit noise power.
    pub pt_db: f64,
    /// Minimum sum harvested energy (linear, noise-normalized).
    pub e_th: f64,
    /// Common-rate threshold per user share (bits/s/Hz).
    pub r_c_min: f64,
    /// CSI uncertainty ball radius for the reflection-side users.
    pub nu: f64,
    pub bs_pos: [f64; 3],
    pub ris_pos: [f64; 3],
    /// Placement disc radius for information receivers (m).
    pub ir_radius: f64,
    /// Placement disc radius for untrusted energy receivers (m).
    pub uer_radius: f64,
    /// Line-of-sight path-loss exponent.
    pub los_exp: f64,
    /// Non-line-of-sight path-loss exponent (must exceed `los_exp`).
    pub nlos_exp: f64,
    /// Logistic blockage parameter (urban default 9.61).
    pub lambda1: f64,
    /// Logistic blockage parameter (urban default 0.16).
    pub lambda2: f64,
    /// Rician factor for the small-scale fading (0 = Rayleigh).
    pub rician_k: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_ris: 10,
            n_ir: 2,
            n_uer: 2,
            pt_db: 25.0,
            e_th: 0.0,
            r_c_min: 1.0,
            nu: 1e-4,
            bs_pos: [0.0, 0.0, 0.0],
            ris_pos: [400.0, 400.0, 150.0],
            ir_radius: 20.0,
            uer_radius: 20.0,
            los_exp: 2.0,
            nlos_exp: 3.5,
            lambda1: 9.61,
            lambda2: 0.16,
            rician_k: 0.0,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidConfig(m.to_string()));
        if self.n_tx < 1 || self.n_ris < 1 || self.n_ir < 1 || self.n_uer < 1 {
            return bad("n_tx, n_ris, n_ir, n_uer must all be >= 1");
        }
        if self.nu < 0.0 {
            return bad("nu must be >= 0");
        }
        if self.e_th < 0.0 {
            return bad("e_th must be >= 0");
        }
        if self.r_c_min < 0.0 {
            return bad("r_c_min must be >= 0");
        }
        if !(self.los_exp < self.nlos_exp) {
            return bad("los_exp must be strictly smaller than nlos_exp");
        }
        if self.ris_pos[2] <= self.bs_pos[2] {
            return bad("ris_pos height must exceed bs_pos height");
        }
        if self.ir_radius < 0.0 || self.uer_radius < 0.0 {
            return bad("placement radii must be >= 0");
        }
        Ok(())
    }

    /// Total transmit power in linear noise-normalized units.
    pub fn pt_linear(&self) -> f64 {
        10f64.powf(self.pt_db / 10.0)
    }

    /// Consume recognized keys from a parsed `key = value` map. Unrecognized
    /// keys are left in the map for the caller to reject or route elsewhere.
    pub fn apply_kv(&mut self, kv: &mut BTreeMap<String, String>) -> Result<(), ScenarioError> {
        fn take<T, F>(
            kv: &mut BTreeMap<String, String>,
            key: &str,
            slot: &mut T,
            parse: F,
        ) -> Result<(), ScenarioError>
        where
            F: Fn(&str) -> Option<T>,
        {
            if let Some(v) = kv.remove(key) {
                *slot = parse(v.trim()).ok_or_else(|| ScenarioError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                })?;
            }
            Ok(())
        }
        let f = |s: &str| s.parse::<f64>().ok();
        let u = |s: &str| s.parse::<usize>().ok();
        let u64p = |s: &str| s.parse::<u64>().ok();
        let pos = |s: &str| {
            let parts: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .ok()?;
            if parts.len() == 3 {
                Some([parts[0], parts[1], parts[2]])
            } else {
                None
            }
        };
        take(kv, "n_tx", &mut self.n_tx, u)?;
        take(kv, "n_ris", &mut self.n_ris, u)?;
        take(kv, "n_ir", &mut self.n_ir, u)?;
        take(kv, "n_uer", &mut self.n_uer, u)?;
        take(kv, "pt_db", &mut self.pt_db, f)?;
        take(kv, "e_th", &mut self.e_th, f)?;
        take(kv, "r_c_min", &mut self.r_c_min, f)?;
        take(kv, "nu", &mut self.nu, f)?;
        take(kv, "bs_pos", &mut self.bs_pos, pos)?;
        take(kv, "ris_pos", &mut self.ris_pos, pos)?;
        take(kv, "ir_radius", &mut self.ir_radius, f)?;
        take(kv, "uer_radius", &mut self.uer_radius, f)?;
        take(kv, "los_exp", &mut self.los_exp, f)?;
        take(kv, "nlos_exp", &mut self.nlos_exp, f)?;
        take(kv, "lambda1", &mut self.lambda1, f)?;
        take(kv, "lambda2", &mut self.lambda2, f)?;
        take(kv, "rician_k", &mut self.rician_k, f)?;
        take(kv, "seed", &mut self.seed, u64p)?;
        Ok(())
    }
}

/// Parse flat INI-style `key = value` lines. `#` and `;` start comments;
/// blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ScenarioError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find(['#', ';']) {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            ScenarioError::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Elevation-dependent path-loss exponent:
/// `α = (L − N)/(1 + λ1·exp(−λ2(φ − λ1))) + N` with `φ = (180/π)·asin(h/d)`
/// in degrees. Saturates to the LoS exponent overhead (φ = 90°) and toward
/// the NLoS exponent at grazing elevation; monotone nonincreasing in φ.
pub fn path_loss_exponent(
    d: f64,
    h_ris: f64,
    los_exp: f64,
    nlos_exp: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64, ScenarioError> {
    if !(d >= h_ris) || h_ris <= 0.0 {
        return Err(ScenarioError::PathLossDomain { d, h: h_ris });
    }
    let phi = (180.0 / PI) * (h_ris / d).asin();
    Ok((los_exp - nlos_exp) / (1.0 + lambda1 * (-lambda2 * (phi - lambda1)).exp()) + nlos_exp)
}

/// Channel realization: BS→RIS matrix plus per-user RIS-side vectors. The
/// reflection-side vectors are estimates; the true channel is
/// `g_r_hat + Δg` with `‖Δg‖₂ ≤ nu` and is never materialized here.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// BS→RIS channel, `n_ris × n_tx`.
    pub h: DMatrix<Complex64>,
    /// RIS→IR channel vectors (transmission side), length `n_ir`.
    pub g_t: Vec<DVector<Complex64>>,
    /// Estimated RIS→UER channel vectors (reflection side), length `n_uer`.
    pub g_r_hat: Vec<DVector<Complex64>>,
    /// Uncertainty ball radius.
    pub nu: f64,
}

impl ChannelSet {
    pub fn dims_match(&self, cfg: &ScenarioConfig) -> bool {
        self.h.nrows() == cfg.n_ris
            && self.h.ncols() == cfg.n_tx
            && self.g_t.len() == cfg.n_ir
            && self.g_r_hat.len() == cfg.n_uer
            && self.g_t.iter().all(|g| g.len() == cfg.n_ris)
            && self.g_r_hat.iter().all(|g| g.len() == cfg.n_ris)
    }
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on open-interval uniforms
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Unit-variance complex Gaussian entry scaled to power `gain`, plus an
/// optional deterministic line-of-sight part weighted by the Rician factor.
fn fading_entry(rng: &mut ChaCha8Rng, gain: f64, rician_k: f64) -> Complex64 {
    let scatter = Complex64::new(standard_normal(rng), standard_normal(rng))
        / Complex64::new(2f64.sqrt(), 0.0);
    if rician_k > 0.0 {
        let los = Complex64::new(1.0, 0.0);
        let w_los = (rician_k / (1.0 + rician_k)).sqrt();
        let w_sc = (1.0 / (1.0 + rician_k)).sqrt();
        (los * w_los + scatter * w_sc) * gain.sqrt()
    } else {
        scatter * gain.sqrt()
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Draw all channels for one realization. Deterministic given `cfg.seed`;
/// information receivers are placed on the transmission side, energy
/// receivers on the reflection side, each uniform on a ground-level disc
/// centred below the surface.
pub fn synthesize_channels(cfg: &ScenarioConfig) -> Result<ChannelSet, ScenarioError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.n_ris;

    // BS→RIS hop: elevation from the height difference
    let d_bs = dist(cfg.bs_pos, cfg.ris_pos);
    let h_diff = cfg.ris_pos[2] - cfg.bs_pos[2];
    let alpha_bs = path_loss_exponent(
        d_bs,
        h_diff,
        cfg.los_exp,
        cfg.nlos_exp,
        cfg.lambda1,
        cfg.lambda2,
    )?;
    let gain_bs = d_bs.powf(-alpha_bs);
    let mut h = DMatrix::<Complex64>::zeros(m, cfg.n_tx);
    for r in 0..m {
        for c in 0..cfg.n_tx {
            h[(r, c)] = fading_entry(&mut rng, gain_bs, cfg.rician_k);
        }
    }

    let draw_user = |radius: f64, rng: &mut ChaCha8Rng| -> Result<f64, ScenarioError> {
        let r = radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let user = [
            cfg.ris_pos[0] + r * phi.cos(),
            cfg.ris_pos[1] + r * phi.sin(),
            0.0,
        ];
        let d = dist(user, cfg.ris_pos);
        let alpha = path_loss_exponent(
            d,
            cfg.ris_pos[2],
            cfg.los_exp,
            cfg.nlos_exp,
            cfg.lambda1,
            cfg.lambda2,
        )?;
        Ok(d.powf(-alpha))
    };

    let mut g_t = Vec::with_capacity(cfg.n_ir);
    for _ in 0..cfg.n_ir {
        let gain = draw_user(cfg.ir_radius, &mut rng)?;
        g_t.push(DVector::from_fn(m, |_, _| {
            fading_entry(&mut rng, gain, cfg.rician_k)
        }));
    }
    let mut g_r_hat = Vec::with_capacity(cfg.n_uer);
    for _ in 0..cfg.n_uer {
        let gain = draw_user(cfg.uer_radius, &mut rng)?;
        g_r_hat.push(DVector::from_fn(m, |_, _| {
            fading_entry(&mut rng, gain, cfg.rician_k)
        }));
    }

    Ok(ChannelSet {
        h,
        g_t,
        g_r_hat,
        nu: cfg.nu,
    })
}

/// One uncertainty draw, uniform on the complex ball `‖Δg‖₂ ≤ nu` of the
/// same dimension as `g_hat`. Boundary points are reachable in distribution.
pub fn sample_uncertainty(g_hat: &DVector<Complex64>, nu: f64, seed: u64) -> DVector<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_uncertainty(g_hat.len(), nu, &mut rng)
}

/// Stream form of [`sample_uncertainty`] for Monte-Carlo loops.
pub fn draw_uncertainty(m: usize, nu: f64, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
    if nu == 0.0 {
        return DVector::zeros(m);
    }
    let mut dir = DVector::from_fn(m, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let norm = dir.norm();
    if norm == 0.0 {
        return DVector::zeros(m);
    }
    dir /= Complex64::new(norm, 0.0);
    // uniform radius in a 2m-dimensional real ball
    let u: f64 = rng.random();
    let radius = nu * u.powf(1.0 / (2.0 * m as f64));
    dir * Complex64::new(radius, 0.0)
}
