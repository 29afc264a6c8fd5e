//! Design objectives and link-quality accounting: in-band-to-out-of-band
//! energy ratio, per-symbol SINR grids from the exact link operator,
//! achievable rate, and Monte-Carlo capacity averaging over channel
//! realizations.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, ChannelRealization};
use crate::equalization::{
    channel_spectrum_2d, link_operator, mmse_tinv_coeffs, mmse_tvar_coeffs, tx_power_map,
    zf_coeffs, EqualizerCoeffs, EqualizerKind,
};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBankParams, PrototypePulse};
use crate::transforms::fft_in_place;

/// SINR values are capped at this linear value so log2(1 + SINR) stays
/// finite in noiseless tests.
pub const SINR_CAP: f64 = 1e12;

/// In-band-to-out-of-band energy ratio (linear). The pulse DTFT is evaluated
/// on an oversampled grid from the time pulse windowed symmetrically around
/// its origin; the in-band integral runs over f in [0, B] with B = 1/(K T)
/// normalized (trapezoid rule, linear interpolation at the band edge).
pub fn ibob_ratio(pulse: &PrototypePulse, oversample: usize) -> Result<f64> {
    if oversample < 8 {
        return Err(Error::invalid(format!(
            "oversample factor must be at least 8, got {oversample}"
        )));
    }
    let params = pulse.params();
    let m = params.pulse_len;
    let energy = pulse.fd_energy();
    if energy <= 0.0 {
        return Err(Error::invalid("zero-energy pulse"));
    }
    let nfft = oversample * m;
    // principal time window centred on the pulse origin: [g(M/2..M), g(0..M/2)]
    let half = m / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for j in 0..m {
        buf[j] = pulse.td()[(j + m - half) % m];
    }
    fft_in_place(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let df = 1.0 / nfft as f64;
    let total: f64 = power.iter().sum::<f64>() * df;

    // in-band edge f = B = 1/K in units of the oversampled grid
    let edge = nfft as f64 / params.sub_channels as f64;
    let edge_floor = edge.floor() as usize;
    let frac = edge - edge_floor as f64;
    let mut inband = 0.5 * power[0];
    for j in 1..edge_floor {
        inband += power[j];
    }
    inband += 0.5 * power[edge_floor % nfft];
    inband *= df;
    if frac > 1e-12 {
        let p0 = power[edge_floor % nfft];
        let p1 = power[(edge_floor + 1) % nfft];
        let p_edge = p0 + frac * (p1 - p0);
        inband += 0.5 * (p0 + p_edge) * frac * df;
    }

    let out = total - inband;
    if out <= 0.0 {
        return Ok(SINR_CAP);
    }
    Ok(inband / out)
}

/// [`ibob_ratio`] in decibels.
pub fn ibob_db(pulse: &PrototypePulse, oversample: usize) -> Result<f64> {
    Ok(10.0 * ibob_ratio(pulse, oversample)?.log10())
}

/// Per-(sub-channel, symbol) power decomposition of one equalized link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkReport {
    pub params: FilterBankParams,
    pub equalizer: EqualizerKind,
    pub fd_normalized: f64,
    pub sigma2_n: f64,
    pub sigma2_a: f64,
    /// Linear SINR per (k, l), row-major K x L.
    pub sinr: Vec<f64>,
    pub useful_power: Vec<f64>,
    pub isi_power: Vec<f64>,
    pub ici_power: Vec<f64>,
    pub noise_power: Vec<f64>,
    /// Achievable rate for this realization, bits/s.
    pub rate_bps: f64,
}

/// Build the equalizer for one realization according to `kind`.
pub fn build_equalizer(
    pulse: &PrototypePulse,
    ch: &ChannelRealization,
    kind: EqualizerKind,
    sigma2_n: f64,
) -> Result<EqualizerCoeffs> {
    match kind {
        EqualizerKind::Zf => zf_coeffs(&ch.mean_fd_response()),
        EqualizerKind::MmseTinv => mmse_tinv_coeffs(&ch.mean_fd_response(), pulse, sigma2_n),
        EqualizerKind::MmseTvar => {
            let h2 = channel_spectrum_2d(ch);
            let power = tx_power_map(pulse);
            mmse_tvar_coeffs(&h2, &power, sigma2_n)
        }
    }
}

/// SINR grid from the exact link operator: useful power from the diagonal,
/// interference split into same-sub-channel (ISI) and cross-sub-channel
/// (ICI) parts, noise from the receive-chain norm.
pub fn sinr_grid(
    pulse: &PrototypePulse,
    ch: &ChannelRealization,
    eq: &EqualizerCoeffs,
    sigma2_n: f64,
    sigma2_a: f64,
) -> Result<LinkReport> {
    let params = pulse.params();
    let (k_n, l_n) = (params.sub_channels, params.block_len());
    let op = link_operator(pulse, ch, eq)?;
    let kl = k_n * l_n;
    let mut sinr = vec![0.0; kl];
    let mut useful = vec![0.0; kl];
    let mut isi = vec![0.0; kl];
    let mut ici = vec![0.0; kl];
    let mut noise = vec![0.0; kl];
    for row in 0..kl {
        let i_sub = row / l_n;
        let mut p_isi = 0.0;
        let mut p_ici = 0.0;
        for col in 0..kl {
            let p = op.transfer[row][col].norm_sqr() * sigma2_a;
            if col == row {
                useful[row] = p;
            } else if col / l_n == i_sub {
                p_isi += p;
            } else {
                p_ici += p;
            }
        }
        isi[row] = p_isi;
        ici[row] = p_ici;
        noise[row] = op.noise_gain[row] * sigma2_n;
        let denom = p_isi + p_ici + noise[row];
        sinr[row] = if denom > 0.0 {
            (useful[row] / denom).min(SINR_CAP)
        } else {
            SINR_CAP
        };
    }
    let rate = achievable_rate(&sinr, params);
    Ok(LinkReport {
        params: *params,
        equalizer: eq.kind,
        fd_normalized: ch.fd_normalized,
        sigma2_n,
        sigma2_a,
        sinr,
        useful_power: useful,
        isi_power: isi,
        ici_power: ici,
        noise_power: noise,
        rate_bps: rate,
    })
}

/// Achievable rate (1 / ((M + mu) T)) sum log2(1 + SINR) in bits/s.
pub fn achievable_rate(sinr: &[f64], params: &FilterBankParams) -> f64 {
    let bits: f64 = sinr.iter().map(|&s| (1.0 + s.max(0.0)).log2()).sum();
    bits / (params.segment_len() as f64 * params.sampling_period)
}

/// Physical-layer preset for link simulations: 20 MHz sampling, 8-sample CP,
/// 5-tap exponential channel with normalized delay spread 2, 40 dB SNR and
/// design Doppler f_D T = 2e-4, per-tone time-variant MMSE.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimPreset {
    pub sampling_period: f64,
    pub cp_len: usize,
    pub tap_count: usize,
    pub delay_spread: f64,
    pub snr_db: f64,
    pub fd_normalized: f64,
    pub sigma2_a: f64,
    pub n_realizations: usize,
    pub equalizer: EqualizerKind,
}

impl Default for SimPreset {
    fn default() -> Self {
        Self {
            sampling_period: 5e-8,
            cp_len: 8,
            tap_count: 5,
            delay_spread: 2.0,
            snr_db: 40.0,
            fd_normalized: 2e-4,
            sigma2_a: 1.0,
            n_realizations: 200,
            equalizer: EqualizerKind::MmseTvar,
        }
    }
}

impl SimPreset {
    pub fn sigma2_n(&self) -> f64 {
        self.sigma2_a * 10f64.powf(-self.snr_db / 10.0)
    }

    /// Apply the preset's CP and sampling period to bank parameters.
    pub fn apply(&self, params: &FilterBankParams) -> Result<FilterBankParams> {
        (*params)
            .with_cp(self.cp_len)?
            .with_sampling_period(self.sampling_period)
    }
}

/// Monte-Carlo capacity statistics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CapacityStats {
    pub mean_rate_bps: f64,
    pub std_rate_bps: f64,
    pub n_realizations: usize,
}

/// Rate of one channel realization under the preset.
pub fn realization_rate(
    pulse: &PrototypePulse,
    preset: &SimPreset,
    realization_seed: u64,
) -> Result<f64> {
    let params = preset.apply(pulse.params())?;
    let pulse = PrototypePulse::from_fd(params, pulse.fd().to_vec())?;
    let ch = draw_channel(
        preset.tap_count,
        preset.delay_spread,
        preset.fd_normalized,
        params.pulse_len,
        params.cp_len,
        realization_seed,
    )?;
    let eq = build_equalizer(&pulse, &ch, preset.equalizer, preset.sigma2_n())?;
    let report = sinr_grid(&pulse, &ch, &eq, preset.sigma2_n(), preset.sigma2_a)?;
    Ok(report.rate_bps)
}

fn realization_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Monte-Carlo mean and standard deviation of the achievable rate over
/// independent channel realizations; deterministic per seed and independent
/// of the worker count.
pub fn average_capacity(
    pulse: &PrototypePulse,
    preset: &SimPreset,
    n_realizations: usize,
    seed: u64,
) -> Result<CapacityStats> {
    if n_realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let rates: Result<Vec<f64>> = (0..n_realizations)
        .into_par_iter()
        .map(|r| realization_rate(pulse, preset, realization_seed(seed, r)))
        .collect();
    let rates = rates?;
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / rates.len() as f64;
    Ok(CapacityStats {
        mean_rate_bps: mean,
        std_rate_bps: var.sqrt(),
        n_realizations,
    })
}

/// Mean per-entry linear SINR over realizations (used for rate/interference
/// trade-off comparisons).
pub fn average_sinr(
    pulse: &PrototypePulse,
    preset: &SimPreset,
    n_realizations: usize,
    seed: u64,
) -> Result<f64> {
    let params = preset.apply(pulse.params())?;
    let pulse = PrototypePulse::from_fd(params, pulse.fd().to_vec())?;
    let sums: Result<Vec<f64>> = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let ch = draw_channel(
                preset.tap_count,
                preset.delay_spread,
                preset.fd_normalized,
                params.pulse_len,
                params.cp_len,
                realization_seed(seed, r),
            )?;
            let eq = build_equalizer(&pulse, &ch, preset.equalizer, preset.sigma2_n())?;
            let rep = sinr_grid(&pulse, &ch, &eq, preset.sigma2_n(), preset.sigma2_a)?;
            Ok(rep.sinr.iter().sum::<f64>() / rep.sinr.len() as f64)
        })
        .collect();
    let sums = sums?;
    Ok(sums.iter().sum::<f64>() / sums.len() as f64)
}

/// Capacity objective for pulse design: mean achievable rate over a fixed
/// batch of channel realizations (same seeds across optimizer iterations,
/// so the objective is deterministic and smooth in the pulse).
pub fn fixed_batch_capacity_objective(
    preset: SimPreset,
    batch_size: usize,
    seed: u64,
) -> impl Fn(&PrototypePulse) -> f64 + Sync {
    move |pulse: &PrototypePulse| {
        let mut acc = 0.0;
        for r in 0..batch_size {
            match realization_rate(pulse, &preset, realization_seed(seed, r)) {
                Ok(rate) => acc += rate,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        acc / batch_size as f64
    }
}

/// IBOB objective (dB) for pulse design.
pub fn ibob_objective(oversample: usize) -> impl Fn(&PrototypePulse) -> f64 + Sync {
    move |pulse: &PrototypePulse| ibob_db(pulse, oversample).unwrap_or(f64::NEG_INFINITY)
}
