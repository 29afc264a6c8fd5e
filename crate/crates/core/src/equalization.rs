//! Frequency-domain one-tap equalization and interference extraction.
//!
//! For time-invariant media the block spectrum factors as
//! Y(q) = G_eq(q) X(q) and a single coefficient per bin restores the signal
//! (zero-forcing) or trades residual bias against noise (MMSE). For
//! time-variant media the two-dimensional tap spectrum H2 mixes bins,
//! Y(q) = sum_p X(p) H2(p, q-p); the stored H2 absorbs the 1/M of the
//! inverse transform so this relation holds exactly under the crate DFT
//! convention. A per-tone MMSE treating the inter-carrier leakage as noise
//! is provided, and the full linear map from symbols to analysis outputs can
//! be extracted by impulse probing for interference accounting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelRealization, NoiseSpec};
use crate::error::{Error, Result};
use crate::filterbank::{add_cp, analyze_spectrum, remove_cp, PrototypePulse};
use crate::transforms::{fft_in_place, ifft_in_place};

/// Equalizer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EqualizerKind {
    Zf,
    MmseTinv,
    MmseTvar,
}

/// Per-bin equalizer coefficients C(q).
#[derive(Debug, Clone)]
pub struct EqualizerCoeffs {
    pub kind: EqualizerKind,
    pub coeffs: Vec<Complex64>,
}

/// Two-dimensional tap spectrum of one channel realization (block part),
/// normalized so that Y(q) = sum_p X(p) h2[p][(q-p) mod M].
#[derive(Debug, Clone)]
pub struct ChannelSpectrum2D {
    pub h2: Vec<Vec<Complex64>>,
}

impl ChannelSpectrum2D {
    pub fn size(&self) -> usize {
        self.h2.len()
    }

    /// The time-averaged per-bin response D(q) = H2(q, 0).
    pub fn diagonal_response(&self) -> Vec<Complex64> {
        self.h2.iter().map(|row| row[0]).collect()
    }
}

/// Zero-forcing coefficients C(q) = 1 / G_eq(q).
pub fn zf_coeffs(g_eq: &[Complex64]) -> Result<EqualizerCoeffs> {
    for (bin, v) in g_eq.iter().enumerate() {
        if v.norm() == 0.0 {
            return Err(Error::SingularChannel {
                bin,
                magnitude: v.norm(),
            });
        }
    }
    Ok(EqualizerCoeffs {
        kind: EqualizerKind::Zf,
        coeffs: g_eq.iter().map(|v| v.inv()).collect(),
    })
}

/// Per-bin transmit power map of the synthesis bank, normalized per unit
/// symbol variance and block row: P(q) = E|X(q)|^2 / (sigma_a^2 L)
/// = sum_k |G((q - kQ) mod M)|^2.
///
/// Computed by probing the synthesis operator with unit impulses rather than
/// by index bookkeeping; a unit test pins the closed form.
pub fn tx_power_map(pulse: &PrototypePulse) -> Vec<f64> {
    let params = pulse.params();
    let (k_n, m) = (params.sub_channels, params.pulse_len);
    let q = params.bins_per_subchannel();
    // impulse on (k, l): X(q) = G((q - kQ)) e^{-i 2 pi q l / L}; magnitudes
    // are l-independent, so summing the modulated pulse power over k gives
    // the exact per-unit-variance column-norm sum
    let mut acc = vec![0.0f64; m];
    for k in 0..k_n {
        for qq in 0..m {
            let src = (qq + m - (k * q) % m) % m;
            acc[qq] += pulse.fd()[src].norm_sqr();
        }
    }
    acc
}

/// Paper-form time-invariant MMSE:
/// C(q) = G_eq*(q) / (|G_eq(q)|^2 + sigma_n^2 / P(q)), with C(q) = 0 on bins
/// the bank puts no energy on. P(q) is the modulated-bank power at bin q
/// ([`tx_power_map`]); for a frequency-confined pulse it equals |G(q')|^2 of
/// the sub-channel owning the bin.
pub fn mmse_tinv_coeffs(
    g_eq: &[Complex64],
    pulse: &PrototypePulse,
    sigma2_n: f64,
) -> Result<EqualizerCoeffs> {
    if g_eq.len() != pulse.params().pulse_len {
        return Err(Error::SizeMismatch {
            expected: pulse.params().pulse_len,
            got: g_eq.len(),
        });
    }
    let power = tx_power_map(pulse);
    let coeffs = g_eq
        .iter()
        .zip(&power)
        .map(|(g, &p)| {
            if p <= 1e-12 {
                Complex64::new(0.0, 0.0)
            } else {
                g.conj() / (g.norm_sqr() + sigma2_n / p)
            }
        })
        .collect();
    Ok(EqualizerCoeffs {
        kind: EqualizerKind::MmseTinv,
        coeffs,
    })
}

/// Two-dimensional M-point DFT of the block-part taps, with the inverse
/// transform's 1/M absorbed: h2[p][nu] = (1/M) sum_s e^{-i2pi sp/M} A_s(nu),
/// A_s = DFT_n of tap s over the block.
pub fn channel_spectrum_2d(ch: &ChannelRealization) -> ChannelSpectrum2D {
    let m = ch.block_len();
    // A_s(nu) for each tap
    let specs: Vec<Vec<Complex64>> = (0..ch.tap_count())
        .map(|s| {
            let mut buf = ch.block_tap(s).to_vec();
            fft_in_place(&mut buf);
            buf
        })
        .collect();
    let h2 = (0..m)
        .map(|p| {
            let mut row = vec![Complex64::new(0.0, 0.0); m];
            for (s, spec) in specs.iter().enumerate() {
                let w = Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * ((s % m) * p) as f64 / m as f64,
                );
                for nu in 0..m {
                    row[nu] += w * spec[nu];
                }
            }
            let scale = 1.0 / m as f64;
            for v in &mut row {
                *v *= scale;
            }
            row
        })
        .collect();
    ChannelSpectrum2D { h2 }
}

/// Per-tone MMSE for time-variant media, treating inter-carrier leakage as
/// noise:
/// C(q) = D*(q) P(q) / (|D(q)|^2 P(q) + sum_{p != q} P(p) |H2(p, q-p)|^2 + sigma_n^2),
/// with D(q) = H2(q, 0) and P the normalized transmit power map. Reduces
/// exactly to [`mmse_tinv_coeffs`] on time-invariant channels.
pub fn mmse_tvar_coeffs(
    h2: &ChannelSpectrum2D,
    tx_power: &[f64],
    sigma2_n: f64,
) -> Result<EqualizerCoeffs> {
    let m = h2.size();
    if tx_power.len() != m {
        return Err(Error::SizeMismatch {
            expected: m,
            got: tx_power.len(),
        });
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
    for qq in 0..m {
        let p_q = tx_power[qq];
        if p_q <= 1e-12 {
            continue;
        }
        let d = h2.h2[qq][0];
        let mut ici = 0.0;
        for nu in 1..m {
            let p = (qq + m - nu) % m;
            ici += tx_power[p] * h2.h2[p][nu].norm_sqr();
        }
        let denom = d.norm_sqr() * p_q + ici + sigma2_n;
        if denom > 0.0 {
            coeffs[qq] = d.conj() * p_q / denom;
        }
    }
    Ok(EqualizerCoeffs {
        kind: EqualizerKind::MmseTvar,
        coeffs,
    })
}

/// Receive one already-CP-stripped block through equalizer, matched filter
/// and analysis bank.
pub fn equalized_analyze(
    y_block: &[Complex64],
    pulse: &PrototypePulse,
    eq: &EqualizerCoeffs,
) -> Result<Vec<Complex64>> {
    let params = pulse.params();
    if y_block.len() != params.pulse_len {
        return Err(Error::SizeMismatch {
            expected: params.pulse_len,
            got: y_block.len(),
        });
    }
    if eq.coeffs.len() != params.pulse_len {
        return Err(Error::SizeMismatch {
            expected: params.pulse_len,
            got: eq.coeffs.len(),
        });
    }
    let mut spec = y_block.to_vec();
    fft_in_place(&mut spec);
    for (s, c) in spec.iter_mut().zip(&eq.coeffs) {
        *s *= c;
    }
    let rx = pulse.matched_rx();
    Ok(analyze_spectrum(&spec, params, rx.fd()))
}

/// Full linear map of the noiseless link plus the noise gain of the receive
/// chain.
pub struct LinkOperator {
    /// transfer[out][in]: coefficient of input symbol `in = k*L + l` in
    /// output sample `out = i*L + m`.
    pub transfer: Vec<Vec<Complex64>>,
    /// Squared norm of the receive chain applied to unit-variance white
    /// noise, per output (i, m): multiply by sigma_n^2 for the noise power.
    pub noise_gain: Vec<f64>,
}

/// Extract the dense (KL x KL) operator by unit-impulse probes through
/// synthesize -> CP -> channel (noiseless) -> CP removal -> equalizer ->
/// matched filter -> analysis, and the noise gains by probing the receive
/// chain across all M spectrum bins.
pub fn link_operator(
    pulse: &PrototypePulse,
    ch: &ChannelRealization,
    eq: &EqualizerCoeffs,
) -> Result<LinkOperator> {
    let params = pulse.params();
    let (k_n, l_n, m) = (params.sub_channels, params.block_len(), params.pulse_len);
    let q = params.bins_per_subchannel();
    if ch.block_len() != m {
        return Err(Error::SizeMismatch {
            expected: m,
            got: ch.block_len(),
        });
    }
    let mu = ch.cp_len;
    if mu + 1 < ch.tap_count() {
        return Err(Error::PreconditionViolation(format!(
            "cyclic prefix {mu} shorter than channel memory {}",
            ch.tap_count() - 1
        )));
    }
    let rx = pulse.matched_rx();
    let kl = k_n * l_n;
    let mut transfer = vec![vec![Complex64::new(0.0, 0.0); kl]; kl];

    // time-domain impulse responses x_{k,0}; the (k,l) probe is its cyclic
    // shift by lN samples
    for k in 0..k_n {
        let mut base_spec = vec![Complex64::new(0.0, 0.0); m];
        for qq in 0..m {
            base_spec[(qq + k * q) % m] = pulse.fd()[qq];
        }
        let mut base = base_spec;
        ifft_in_place(&mut base);
        for l in 0..l_n {
            // impulse at (k, l) is the (k, 0) response shifted by lN samples
            // and rotated by the sub-carrier phase at the symbol position
            let shift = l * params.interp_factor;
            let rot = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * ((k * q * l) % l_n) as f64 / l_n as f64,
            );
            let x: Vec<Complex64> = (0..m)
                .map(|n| base[(n + m - shift) % m] * rot)
                .collect();
            let x_cp = add_cp(&x, mu)?;
            let y_cp = apply_channel(&x_cp, ch, &NoiseSpec::none())?;
            let y = remove_cp(&y_cp, mu)?;
            let z = equalized_analyze(&y, pulse, eq)?;
            let col = k * l_n + l;
            for (row, &v) in z.iter().enumerate() {
                transfer[row][col] = v;
            }
        }
    }

    // noise gains: one-hot probes of the receive chain in the frequency
    // domain; white time-domain noise of unit variance has E|N(q)|^2 = M
    let mut noise_gain = vec![0.0f64; kl];
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    for qq in 0..m {
        spec[qq] = eq.coeffs[qq];
        let z = analyze_spectrum(&spec, params, rx.fd());
        spec[qq] = Complex64::new(0.0, 0.0);
        for (row, v) in z.iter().enumerate() {
            noise_gain[row] += v.norm_sqr();
        }
    }
    for v in &mut noise_gain {
        *v *= m as f64;
    }

    Ok(LinkOperator {
        transfer,
        noise_gain,
    })
}

/// Interference coefficients: the full symbol-to-output map of the noiseless
/// equalized link (diagonal = useful gains, off-diagonal = residual ISI/ICI).
pub fn interference_coefficients(
    pulse: &PrototypePulse,
    ch: &ChannelRealization,
    eq: &EqualizerCoeffs,
) -> Result<Vec<Vec<Complex64>>> {
    Ok(link_operator(pulse, ch, eq)?.transfer)
}
