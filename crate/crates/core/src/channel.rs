//! Time-variant dispersive medium simulation.
//!
//! Taps are mutually independent zero-mean complex Gaussian processes with an
//! exponential power-delay profile and isotropic-scattering Doppler
//! statistics: tap l has variance Omega_l and autocorrelation
//! Omega_l * J0(2 pi f_D n). Processes are synthesized by frequency-domain
//! spectrum shaping: white complex Gaussian samples weighted by the square
//! root of the U-shaped Doppler spectrum on a fine grid, inverse transformed,
//! and windowed to the requested segment. The two diverging edge bins are
//! clipped to their inner neighbours.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::ifft_in_place;

/// One realization of the time-variant channel over a CP + block segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// taps[s][n]: tap s at segment sample n (n covers CP and block).
    pub taps: Vec<Vec<Complex64>>,
    /// Cyclic-prefix part of the segment, in samples.
    pub cp_len: usize,
    /// Doppler frequency normalized to the sampling rate (f_D * T).
    pub fd_normalized: f64,
    /// Normalized delay spread of the exponential profile.
    pub gamma: f64,
    /// Per-tap average powers Omega_l (summing to one).
    pub tap_powers: Vec<f64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    pub fn segment_len(&self) -> usize {
        self.taps[0].len()
    }

    pub fn block_len(&self) -> usize {
        self.segment_len() - self.cp_len
    }

    /// Tap values over the block part only (CP samples dropped).
    pub fn block_tap(&self, s: usize) -> &[Complex64] {
        &self.taps[s][self.cp_len..]
    }

    /// True when every tap is constant over the segment.
    pub fn is_time_invariant(&self, tol: f64) -> bool {
        self.taps.iter().all(|row| {
            let first = row[0];
            row.iter().all(|&v| (v - first).norm() <= tol)
        })
    }

    /// M-point spectrum of the time-averaged (block) taps: the equivalent
    /// filter G_eq(q) a one-tap equalizer sees.
    pub fn mean_fd_response(&self) -> Vec<Complex64> {
        let m = self.block_len();
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        for (s, tap) in self.taps.iter().enumerate() {
            let avg = tap[self.cp_len..].iter().sum::<Complex64>() / m as f64;
            padded[s % m] += avg;
        }
        crate::transforms::dft(&padded, m).expect("mean response dft")
    }
}

/// Additive circular white Gaussian noise description.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { sigma2: 0.0, seed: 0 }
    }
}

/// Exponential power-delay profile Omega_l = Omega_0 e^{-l/gamma}, normalized
/// to unit total power.
pub fn exponential_profile(p_taps: usize, gamma: f64) -> Result<Vec<f64>> {
    if p_taps == 0 {
        return Err(Error::invalid("need at least one tap"));
    }
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("delay spread must be positive, got {gamma}")));
    }
    let raw: Vec<f64> = (0..p_taps).map(|l| (-(l as f64) / gamma).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Spectrum-shaping grid size: fine enough to resolve the Doppler band and
/// cover the segment without wrap correlation.
fn shaping_fft_len(n_samples: usize, fd: f64) -> usize {
    let by_segment = 8 * n_samples;
    let by_band = (48.0 / fd).ceil() as usize;
    let want = by_segment.max(by_band).max(4096);
    let mut n = 4096usize;
    while n < want && n < (1 << 20) {
        n <<= 1;
    }
    n
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draw one Clarke-correlated channel realization covering
/// `block_len + cp_len` samples. Deterministic per seed; taps use derived
/// per-tap seeds so the tap count does not reshuffle the sequence.
pub fn draw_channel(
    p_taps: usize,
    gamma: f64,
    fd_normalized: f64,
    block_len: usize,
    cp_len: usize,
    seed: u64,
) -> Result<ChannelRealization> {
    if fd_normalized < 0.0 || !fd_normalized.is_finite() {
        return Err(Error::invalid(format!(
            "normalized Doppler must be nonnegative, got {fd_normalized}"
        )));
    }
    if block_len == 0 {
        return Err(Error::invalid("block length must be positive"));
    }
    let tap_powers = exponential_profile(p_taps, gamma)?;
    let n_samples = block_len + cp_len;
    let mut taps = Vec::with_capacity(p_taps);

    for (s, &omega) in tap_powers.iter().enumerate() {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed.wrapping_add((s as u64).wrapping_mul(0xA24B_AED4_963E_E407)));
        let scale = omega.sqrt();
        if fd_normalized == 0.0 {
            let v = complex_gaussian(&mut rng) * scale;
            taps.push(vec![v; n_samples]);
            continue;
        }
        let nfft = shaping_fft_len(n_samples, fd_normalized);
        // Jakes spectrum S(v) = 1 / (pi fd sqrt(1 - (v/fd)^2)) on |v| < fd
        let mut weights = vec![0.0f64; nfft];
        let mut last_inband = 0usize;
        for k in 0..nfft {
            let v = if k <= nfft / 2 {
                k as f64 / nfft as f64
            } else {
                k as f64 / nfft as f64 - 1.0
            };
            let r = v / fd_normalized;
            if r.abs() < 1.0 {
                weights[k] = 1.0 / (std::f64::consts::PI * fd_normalized * (1.0 - r * r).sqrt());
                if k <= nfft / 2 {
                    last_inband = k;
                }
            }
        }
        // clip the two edge bins (where the spectrum diverges) to their
        // inner neighbours
        if last_inband >= 2 {
            let inner = weights[last_inband - 1];
            weights[last_inband] = weights[last_inband].min(inner);
            weights[nfft - last_inband] = weights[nfft - last_inband].min(inner);
        }
        let total: f64 = weights.iter().sum();
        let norm = nfft as f64 / total; // unit process power
        let mut spec: Vec<Complex64> = weights
            .iter()
            .map(|&w| {
                if w > 0.0 {
                    complex_gaussian(&mut rng) * (w * norm).sqrt()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        ifft_in_place(&mut spec);
        // ifft normalizes by 1/nfft; sqrt(nfft) restores E|c|^2 = 1
        let gain = (nfft as f64).sqrt();
        taps.push(
            spec[..n_samples]
                .iter()
                .map(|&c| c * gain * scale)
                .collect(),
        );
    }

    Ok(ChannelRealization {
        taps,
        cp_len,
        fd_normalized,
        gamma,
        tap_powers,
        seed,
    })
}

/// Apply the time-variant channel to one CP + block segment and add white
/// noise: y(j) = sum_s alpha_s(j) x(j - s) + w(j), with zero pre-segment
/// history (the CP isolates blocks).
pub fn apply_channel(
    x_segment: &[Complex64],
    ch: &ChannelRealization,
    noise: &NoiseSpec,
) -> Result<Vec<Complex64>> {
    let n = ch.segment_len();
    if x_segment.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: x_segment.len(),
        });
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (s, tap) in ch.taps.iter().enumerate() {
        for j in s..n {
            y[j] += tap[j] * x_segment[j - s];
        }
    }
    if noise.sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let scale = noise.sigma2.sqrt();
        for v in &mut y {
            *v += complex_gaussian(&mut rng) * scale;
        }
    }
    Ok(y)
}

/// Theoretical tap autocorrelation Omega * J0(2 pi f_D n) at the given lags.
pub fn expected_clarke_autocorrelation(omega: f64, fd_normalized: f64, lags: &[usize]) -> Vec<f64> {
    lags.iter()
        .map(|&n| omega * libm::j0(2.0 * std::f64::consts::PI * fd_normalized * n as f64))
        .collect()
}
