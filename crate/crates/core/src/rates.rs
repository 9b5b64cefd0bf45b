//! Exact (non-surrogate) evaluation of SINRs, rates, harvested energy, and
//! worst-case secrecy quantities for a given design. Used for reporting and
//! for feasibility certification of optimizer output.
//!
//! All logs are base 2 (bits/s/Hz); receiver noise power is 1; the energy
//! harvesting efficiency is fixed to 1.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::scenario::{draw_uncertainty, ChannelSet};
use crate::surrogates::{robust_abs_max, robust_sq_min};

#[derive(Debug, thiserror::Error)]
pub enum RatesError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid surface profile: {0}")]
    InvalidProfile(String),
}

/// Per-element transmission/reflection amplitudes (squared) and phases of the
/// surface. `beta_t[m] + beta_r[m] = 1` for every element.
#[derive(Clone, Debug, PartialEq)]
pub struct RISProfile {
    pub beta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_r: Vec<f64>,
}

impl RISProfile {
    /// Even power split, zero phases.
    pub fn uniform(m: usize) -> Self {
        Self {
            beta_t: vec![0.5; m],
            beta_r: vec![0.5; m],
            theta_t: vec![0.0; m],
            theta_r: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.beta_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_t.is_empty()
    }

    pub fn validate(&self) -> Result<(), RatesError> {
        let m = self.beta_t.len();
        if self.beta_r.len() != m || self.theta_t.len() != m || self.theta_r.len() != m {
            return Err(RatesError::InvalidProfile("length mismatch".into()));
        }
        for i in 0..m {
            let (bt, br) = (self.beta_t[i], self.beta_r[i]);
            if !(-1e-9..=1.0 + 1e-9).contains(&bt) || !(-1e-9..=1.0 + 1e-9).contains(&br) {
                return Err(RatesError::InvalidProfile(format!(
                    "beta out of [0,1] at element {i}: ({bt}, {br})"
                )));
            }
            if (bt + br - 1.0).abs() > 1e-9 {
                return Err(RatesError::InvalidProfile(format!(
                    "energy conservation violated at element {i}: {bt} + {br} != 1"
                )));
            }
        }
        Ok(())
    }

    /// Beamforming vector `u_p[m] = sqrt(beta_p[m])·exp(i·theta_p[m])`.
    pub fn u_t(&self) -> DVector<Complex64> {
        Self::u_of(&self.beta_t, &self.theta_t)
    }

    pub fn u_r(&self) -> DVector<Complex64> {
        Self::u_of(&self.beta_r, &self.theta_r)
    }

    fn u_of(beta: &[f64], theta: &[f64]) -> DVector<Complex64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().zip(theta).map(|(&b, &t)| {
                Complex64::from_polar(b.max(0.0).sqrt(), t)
            }),
        )
    }
}

/// Common, private, and energy precoders plus the common-rate shares.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub p_c: DVector<Complex64>,
    pub p_k: Vec<DVector<Complex64>>,
    pub f_j: Vec<DVector<Complex64>>,
    pub alpha: Vec<f64>,
}

impl PrecoderSet {
    pub fn zeros(n_tx: usize, k: usize, j: usize) -> Self {
        Self {
            p_c: DVector::zeros(n_tx),
            p_k: (0..k).map(|_| DVector::zeros(n_tx)).collect(),
            f_j: (0..j).map(|_| DVector::zeros(n_tx)).collect(),
            alpha: vec![1.0 / k as f64; k],
        }
    }

    pub fn total_power(&self) -> f64 {
        self.p_c.norm_squared()
            + self.p_k.iter().map(|p| p.norm_squared()).sum::<f64>()
            + self.f_j.iter().map(|f| f.norm_squared()).sum::<f64>()
    }

    /// All transmit vectors in stream order: common, privates, energy.
    pub fn streams(&self) -> Vec<&DVector<Complex64>> {
        let mut v = vec![&self.p_c];
        v.extend(self.p_k.iter());
        v.extend(self.f_j.iter());
        v
    }
}

/// Combined BS→surface→user channel `h = gᴴ Θ H` (row vector) for a user
/// with surface-side channel `g` and diagonal profile `theta_diag`.
pub fn combined_channel(
    g: &DVector<Complex64>,
    theta_diag: &DVector<Complex64>,
    h: &DMatrix<Complex64>,
) -> Result<RowDVector<Complex64>, RatesError> {
    let m = h.nrows();
    if g.len() != m || theta_diag.len() != m {
        return Err(RatesError::Dimension(format!(
            "g: {}, theta: {}, H rows: {m}",
            g.len(),
            theta_diag.len()
        )));
    }
    let mut out = RowDVector::zeros(h.ncols());
    for c in 0..h.ncols() {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..m {
            acc += g[r].conj() * theta_diag[r] * h[(r, c)];
        }
        out[c] = acc;
    }
    Ok(out)
}

fn gain(h_row: &RowDVector<Complex64>, p: &DVector<Complex64>) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..h_row.len() {
        acc += h_row[i] * p[i];
    }
    acc.norm_sqr()
}

/// SINRs at each information receiver: `(γ_common, γ_private)` per user.
/// The common-stream denominator carries all private and energy streams; the
/// private denominator excludes the user's own stream and the (already
/// cancelled) common stream.
pub fn ir_sinrs(pre: &PrecoderSet, h_t: &[RowDVector<Complex64>]) -> Vec<(f64, f64)> {
    h_t.iter()
        .enumerate()
        .map(|(k, h)| {
            let g_c = gain(h, &pre.p_c);
            let g_priv: Vec<f64> = pre.p_k.iter().map(|p| gain(h, p)).collect();
            let g_energy: f64 = pre.f_j.iter().map(|f| gain(h, f)).sum();
            let sum_priv: f64 = g_priv.iter().sum();
            let gamma_c = g_c / (sum_priv + g_energy + 1.0);
            let own = g_priv[k];
            let gamma_k = own / (sum_priv - own + g_energy + 1.0);
            (gamma_c, gamma_k)
        })
        .collect()
}

/// Eavesdropping SINRs at one reflection-side user with combined channel
/// `h_row`: `(γ_common, [γ_private_k])`. No successive cancellation: the
/// common stream interferes with private decoding.
pub fn uer_sinrs(pre: &PrecoderSet, h_row: &RowDVector<Complex64>) -> (f64, Vec<f64>) {
    let g_c = gain(h_row, &pre.p_c);
    let g_priv: Vec<f64> = pre.p_k.iter().map(|p| gain(h_row, p)).collect();
    let g_energy: f64 = pre.f_j.iter().map(|f| gain(h_row, f)).sum();
    let sum_priv: f64 = g_priv.iter().sum();
    let gamma_c = g_c / (sum_priv + g_energy + 1.0);
    let gamma_k = g_priv
        .iter()
        .map(|&own| own / (g_c + sum_priv - own + g_energy + 1.0))
        .collect();
    (gamma_c, gamma_k)
}

/// Total harvested energy at a reflection-side user (harvest efficiency 1):
/// sum of the powers of every stream.
pub fn harvested_energy(pre: &PrecoderSet, h_row: &RowDVector<Complex64>) -> f64 {
    pre.streams().iter().map(|s| gain(h_row, s)).sum()
}

pub fn rate(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

/// Exact secrecy evaluation of a design.
#[derive(Clone, Debug)]
pub struct RateReport {
    /// Common-stream rate at each IR.
    pub r_c_k: Vec<f64>,
    /// Common rate: `min_k r_c_k`.
    pub r_c: f64,
    /// Private rates.
    pub r_k: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Closed-form worst-case common-stream leakage per eavesdropper.
    pub leak_c_bound: Vec<f64>,
    /// Closed-form worst-case private leakage, indexed `[k][j]`.
    pub leak_k_bound: Vec<Vec<f64>>,
    /// Sampled worst-case leakages (same shapes).
    pub leak_c_sampled: Vec<f64>,
    pub leak_k_sampled: Vec<Vec<f64>>,
    /// Harvested energy per eavesdropper at the estimated channel.
    pub q_j: Vec<f64>,
    /// Sampled minimum harvested energy per eavesdropper.
    pub q_j_min_sampled: Vec<f64>,
    /// Per-IR secrecy totals under the closed-form (guaranteed) leakage.
    pub sec_total_bound: Vec<f64>,
    /// Per-IR secrecy totals under sampled leakage.
    pub sec_total_sampled: Vec<f64>,
    /// Worst-case sum-secrecy objective `min_k` of the guaranteed totals.
    pub wcssr_bound: f64,
    /// Same under sampled leakage (never below `wcssr_bound` up to noise).
    pub wcssr_sampled: f64,
    /// Set if any sampled leakage exceeded its closed-form bound.
    pub bound_violated: bool,
    /// Common stream undecodable at every eavesdropper (worst case).
    pub common_undecodable: bool,
}

fn clamp_pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Evaluate worst-case secrecy two ways: (a) closed-form conservative bounds
/// on the eavesdropper SINR terms, (b) `n_samples` draws in the ν-ball.
/// Route (a) is the guarantee; route (b) must never fall below it.
pub fn worst_case_secrecy(
    pre: &PrecoderSet,
    ris: &RISProfile,
    ch: &ChannelSet,
    n_samples: usize,
) -> Result<RateReport, RatesError> {
    ris.validate()?;
    let k_cnt = pre.p_k.len();
    let j_cnt = pre.f_j.len();
    if ch.g_t.is_empty() || ch.g_r_hat.len() != j_cnt {
        return Err(RatesError::Dimension(
            "channel/user count mismatch".to_string(),
        ));
    }

    let u_t = ris.u_t();
    let u_r = ris.u_r();
    let h_t: Vec<RowDVector<Complex64>> = ch
        .g_t
        .iter()
        .map(|g| combined_channel(g, &u_t, &ch.h))
        .collect::<Result<_, _>>()?;

    let sinrs = ir_sinrs(pre, &h_t);
    let r_c_k: Vec<f64> = sinrs.iter().map(|&(gc, _)| rate(gc)).collect();
    let r_k: Vec<f64> = sinrs.iter().map(|&(_, gk)| rate(gk)).collect();
    let r_c = r_c_k.iter().cloned().fold(f64::INFINITY, f64::min);

    // reflection-side effective streams u' = Θ_r H p, one per stream
    let b_r = {
        let mut b = ch.h.clone();
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                b[(r, c)] *= u_r[r];
            }
        }
        b
    };
    let streams: Vec<DVector<Complex64>> = pre.streams().iter().map(|p| &b_r * *p).collect();
    let s_c = &streams[0];
    let s_k = &streams[1..1 + k_cnt];
    let s_f = &streams[1 + k_cnt..];

    let mut leak_c_bound = Vec::with_capacity(j_cnt);
    let mut leak_k_bound = vec![Vec::with_capacity(j_cnt); k_cnt];
    for g_hat in &ch.g_r_hat {
        // guaranteed interference floor: clamped conservative minima
        let priv_floors: Vec<f64> = s_k
            .iter()
            .map(|s| clamp_pos(robust_sq_min(g_hat, s, ch.nu)))
            .collect();
        let energy_floor: f64 = s_f
            .iter()
            .map(|s| clamp_pos(robust_sq_min(g_hat, s, ch.nu)))
            .sum();
        let common_floor = clamp_pos(robust_sq_min(g_hat, s_c, ch.nu));
        let sum_priv: f64 = priv_floors.iter().sum();

        let num_c = robust_abs_max(g_hat, s_c, ch.nu).powi(2);
        leak_c_bound.push(rate(num_c / (sum_priv + energy_floor + 1.0)));
        for (k, floors) in leak_k_bound.iter_mut().enumerate() {
            let num_k = robust_abs_max(g_hat, &s_k[k], ch.nu).powi(2);
            let den = common_floor + (sum_priv - priv_floors[k]) + energy_floor + 1.0;
            floors.push(rate(num_k / den));
        }
    }

    // sampled route + sampled minimum harvested energy
    let mut leak_c_sampled = vec![0.0f64; j_cnt];
    let mut leak_k_sampled = vec![vec![0.0f64; j_cnt]; k_cnt];
    let mut q_j = Vec::with_capacity(j_cnt);
    let mut q_j_min_sampled = Vec::with_capacity(j_cnt);
    for (j, g_hat) in ch.g_r_hat.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ (j as u64));
        let h_hat = combined_channel(g_hat, &u_r, &ch.h)?;
        let (gc, gk) = uer_sinrs(pre, &h_hat);
        let mut max_c = rate(gc);
        let mut max_k: Vec<f64> = gk.iter().map(|&g| rate(g)).collect();
        let q_nominal = harvested_energy(pre, &h_hat);
        let mut q_min = q_nominal;
        for _ in 0..n_samples {
            let dg = draw_uncertainty(g_hat.len(), ch.nu, &mut rng);
            let g = g_hat + dg;
            let h_row = combined_channel(&g, &u_r, &ch.h)?;
            let (gc_s, gk_s) = uer_sinrs(pre, &h_row);
            max_c = max_c.max(rate(gc_s));
            for (k, &g) in gk_s.iter().enumerate() {
                max_k[k] = max_k[k].max(rate(g));
            }
            q_min = q_min.min(harvested_energy(pre, &h_row));
        }
        leak_c_sampled[j] = max_c;
        for k in 0..k_cnt {
            leak_k_sampled[k][j] = max_k[k];
        }
        q_j.push(q_nominal);
        q_j_min_sampled.push(q_min);
    }

    let max_over_j = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst_c_bound = max_over_j(&leak_c_bound);
    let worst_c_sampled = max_over_j(&leak_c_sampled);

    let sec_totals = |leak_c: f64, leak_k: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..k_cnt)
            .map(|k| {
                pre.alpha[k] * clamp_pos(r_c - leak_c) + clamp_pos(r_k[k] - leak_k(k))
            })
            .collect()
    };
    let sec_total_bound = sec_totals(worst_c_bound, &|k| max_over_j(&leak_k_bound[k]));
    let sec_total_sampled = sec_totals(worst_c_sampled, &|k| max_over_j(&leak_k_sampled[k]));

    let min_over_k = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9;
    let bound_violated = leak_c_sampled
        .iter()
        .zip(&leak_c_bound)
        .any(|(s, b)| s > &(b + tol))
        || leak_k_sampled
            .iter()
            .zip(&leak_k_bound)
            .any(|(sv, bv)| sv.iter().zip(bv).any(|(s, b)| s > &(b + tol)));

    Ok(RateReport {
        r_c_k,
        r_c,
        r_k,
        alpha: pre.alpha.clone(),
        leak_c_bound,
        leak_k_bound,
        leak_c_sampled,
        leak_k_sampled,
        q_j,
        q_j_min_sampled,
        wcssr_bound: min_over_k(&sec_total_bound),
        wcssr_sampled: min_over_k(&sec_total_sampled),
        sec_total_bound,
        sec_total_sampled,
        bound_violated,
        common_undecodable: worst_c_bound < r_c,
    })
}

impl RateReport {
    /// Stable CSV column order: r_c, then per-IR blocks (r_c_k, r_k, alpha,
    /// sec_bound, sec_sampled), then per-UER blocks (leak_c bound/sampled,
    /// q_j, q_j_min), then the two objectives and the flags.
    pub fn csv_header(k: usize, j: usize) -> String {
        let mut cols = vec!["r_c".to_string()];
        for i in 0..k {
            for name in ["r_c_k", "r_k", "alpha", "sec_bound", "sec_sampled"] {
                cols.push(format!("{name}{i}"));
            }
        }
        for i in 0..j {
            for name in ["leak_c_bound", "leak_c_sampled", "q", "q_min"] {
                cols.push(format!("{name}{i}"));
            }
        }
        cols.push("wcssr_bound".into());
        cols.push("wcssr_sampled".into());
        cols.push("bound_violated".into());
        cols.push("common_undecodable".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut f = vec![format!("{:.9e}", self.r_c)];
        for i in 0..self.r_k.len() {
            f.push(format!("{:.9e}", self.r_c_k[i]));
            f.push(format!("{:.9e}", self.r_k[i]));
            f.push(format!("{:.9e}", self.alpha[i]));
            f.push(format!("{:.9e}", self.sec_total_bound[i]));
            f.push(format!("{:.9e}", self.sec_total_sampled[i]));
        }
        for i in 0..self.q_j.len() {
            f.push(format!("{:.9e}", self.leak_c_bound[i]));
            f.push(format!("{:.9e}", self.leak_c_sampled[i]));
            f.push(format!("{:.9e}", self.q_j[i]));
            f.push(format!("{:.9e}", self.q_j_min_sampled[i]));
        }
        f.push(format!("{:.9e}", self.wcssr_bound));
        f.push(format!("{:.9e}", self.wcssr_sampled));
        f.push(format!("{}", u8::from(self.bound_violated)));
        f.push(format!("{}", u8::from(self.common_undecodable)));
        f.join(",")
    }
}
