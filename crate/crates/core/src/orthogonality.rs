//! Orthogonality and perfect-reconstruction verification.
//!
//! A CB-FMT bank with matched receive filters is orthogonal iff the cyclic
//! cross-convolution functions between modulated pulses vanish off the main
//! diagonal and the auto-convolution sampled on the symbol grid is a Kronecker
//! delta. This module provides the time-domain check, the equivalent
//! frequency-domain bin conditions, the matrix reformulation (with its gcd
//! reduction to N_s = gcd(Q, L) independent sub-systems), the critically
//! sampled circulant criterion, a constructor for random orthogonal pulses,
//! the two pulse-reuse transformations, and the equivalent-filter condition
//! for time-invariant media.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{FilterBankParams, PrototypePulse};
use crate::transforms::{cyclic_convolve, cyclic_shift, fft_in_place, idft, ifft_in_place, wrap};

/// Default residual tolerance for orthogonality checks. Double-precision DFT
/// round-off stays below ~1e-12 at the block sizes used here.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Result of an orthogonality check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthReport {
    pub is_orthogonal: bool,
    /// max_{p,k} | R^{(k,k)}(p) - 1 |
    pub max_isi_residual: f64,
    /// max_{p,k != 0} | R^{(k,0)}(p) |
    pub max_ici_residual: f64,
    pub tolerance: f64,
}

impl OrthReport {
    fn from_residuals(isi: f64, ici: f64, tolerance: f64) -> Self {
        OrthReport {
            is_orthogonal: isi <= tolerance && ici <= tolerance,
            max_isi_residual: isi,
            max_ici_residual: ici,
            tolerance,
        }
    }
}

/// One length-N sub-band vector of the pulse spectrum partition:
/// element i is G(p + iL).
pub fn subband_vector(pulse: &PrototypePulse, p: usize) -> Vec<Complex64> {
    let params = pulse.params();
    let (l_n, n_f, m) = (
        params.block_len(),
        params.interp_factor,
        params.pulse_len,
    );
    assert!(p < l_n, "sub-band index {p} out of range (L = {l_n})");
    (0..n_f).map(|i| pulse.fd()[(p + i * l_n) % m]).collect()
}

/// Column source indices of the orthogonality matrices:
/// c(p,j) = (p + jQ) mod L and d(p,j) = (p + jQ - c) / L.
#[inline]
pub fn column_indices(params: &FilterBankParams, p: usize, j: usize) -> (usize, usize) {
    let q = params.bins_per_subchannel();
    let l_n = params.block_len();
    let t = p + j * q;
    let c = t % l_n;
    let d = (t - c) / l_n;
    (c, d)
}

/// One K-column orthogonality matrix, stored column-major; column j is
/// tau^{d(p,j)} of sub-band vector c(p,j), scaled by 1/sqrt(N).
#[derive(Debug, Clone)]
pub struct OrthMatrix {
    pub p: usize,
    pub rows: usize,
    pub cols: usize,
    cols_data: Vec<Vec<Complex64>>,
}

impl OrthMatrix {
    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.cols_data[j]
    }

    /// Hermitian inner product column(j)^H . column(i).
    pub fn col_dot(&self, j: usize, i: usize) -> Complex64 {
        self.cols_data[j]
            .iter()
            .zip(&self.cols_data[i])
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// max |H^H H - I| over all entries.
    pub fn gram_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.cols {
            for i in j..self.cols {
                let dot = self.col_dot(j, i);
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - Complex64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    /// The K x K Gram matrix H^H H, row-major.
    pub fn gram(&self) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.cols * self.cols];
        for j in 0..self.cols {
            for i in 0..self.cols {
                g[j * self.cols + i] = self.col_dot(j, i);
            }
        }
        g
    }
}

/// Build the N_s orthogonality matrices for p in [0, N_s).
pub fn build_orth_matrices(pulse: &PrototypePulse) -> Vec<OrthMatrix> {
    let params = pulse.params();
    let (k_n, n_f) = (params.sub_channels, params.interp_factor);
    let n_s = params.subsystem_count();
    let scale = 1.0 / (n_f as f64).sqrt();
    let l_n = params.block_len();
    let vs: Vec<Vec<Complex64>> = (0..l_n).map(|p| subband_vector(pulse, p)).collect();
    (0..n_s)
        .map(|p| {
            let cols_data = (0..k_n)
                .map(|j| {
                    let (c, d) = column_indices(params, p, j);
                    let mut col = cyclic_shift(&vs[c], d as i64);
                    for x in &mut col {
                        *x *= scale;
                    }
                    col
                })
                .collect();
            OrthMatrix {
                p,
                rows: n_f,
                cols: k_n,
                cols_data,
            }
        })
        .collect()
}

/// Cyclic cross-convolution function r^{(k,i)}(mN) = [g^(k) (x) h^(i)](mN),
/// m in [0, L). `rx` defaults to the matched prototype when `None`.
pub fn ccf_time(
    tx: &PrototypePulse,
    rx: Option<&PrototypePulse>,
    k: usize,
    i: usize,
) -> Result<Vec<Complex64>> {
    let params = tx.params();
    let (k_n, n_f, m) = (params.sub_channels, params.interp_factor, params.pulse_len);
    if k >= k_n || i >= k_n {
        return Err(Error::invalid(format!(
            "sub-channel indices ({k},{i}) out of range (K = {k_n})"
        )));
    }
    let matched;
    let rx = match rx {
        Some(r) => r,
        None => {
            matched = tx.matched_rx();
            &matched
        }
    };
    let modulate = |td: &[Complex64], c: usize| -> Vec<Complex64> {
        td.iter()
            .enumerate()
            .map(|(n, &g)| {
                g * Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (n * c) as f64 / k_n as f64,
                )
            })
            .collect()
    };
    let gk = modulate(tx.td(), k);
    let hi = modulate(rx.td(), i);
    let full = cyclic_convolve(&gk, &hi)?;
    Ok((0..params.block_len()).map(|mm| full[(mm * n_f) % m]).collect())
}

/// Frequency-domain CCF: the L-point DFT of [`ccf_time`], computed directly
/// from the bin products of the modulated spectra,
/// R(p) = (1/N) sum_s G((p + sL - kQ)) H((p + sL - iQ)).
///
/// Modulating by sub-carrier k shifts the spectrum up by kQ under the crate
/// DFT convention, hence the negative shifts inside the aliasing sum.
pub fn ccf_freq(
    tx: &PrototypePulse,
    rx: Option<&PrototypePulse>,
    k: usize,
    i: usize,
) -> Result<Vec<Complex64>> {
    let params = tx.params();
    let (k_n, n_f, m) = (params.sub_channels, params.interp_factor, params.pulse_len);
    if k >= k_n || i >= k_n {
        return Err(Error::invalid(format!(
            "sub-channel indices ({k},{i}) out of range (K = {k_n})"
        )));
    }
    let matched;
    let rx = match rx {
        Some(r) => r,
        None => {
            matched = tx.matched_rx();
            &matched
        }
    };
    let l_n = params.block_len();
    let q = params.bins_per_subchannel();
    let g = tx.fd();
    let h = rx.fd();
    let scale = 1.0 / n_f as f64;
    Ok((0..l_n)
        .map(|p| {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n_f {
                let base = (p + s * l_n) as isize;
                let gi = wrap(base - (k * q) as isize, m);
                let hi_ = wrap(base - (i * q) as isize, m);
                acc += g[gi] * h[hi_];
            }
            acc * scale
        })
        .collect())
}

/// Generalized Nyquist criterion check in the frequency domain: the in-band
/// power sums must equal one for every (p, k) and the reduced two-variable
/// cross products must all vanish.
pub fn check_gnc(pulse: &PrototypePulse, tolerance: f64) -> OrthReport {
    let params = pulse.params();
    let (k_n, n_f, m) = (params.sub_channels, params.interp_factor, params.pulse_len);
    let l_n = params.block_len();
    let q = params.bins_per_subchannel();
    let g = pulse.fd();

    let mut isi = 0.0f64;
    for k in 0..k_n {
        for p in 0..l_n {
            let mut acc = 0.0;
            for s in 0..n_f {
                acc += g[(p + s * l_n + k * q) % m].norm_sqr();
            }
            isi = isi.max((acc / n_f as f64 - 1.0).abs());
        }
    }

    let mut ici = 0.0f64;
    for k in 1..k_n {
        for p in 0..l_n {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n_f {
                let base = p + s * l_n;
                acc += g[base % m] * g[(base + k * q) % m].conj();
            }
            ici = ici.max((acc / n_f as f64).norm());
        }
    }

    OrthReport::from_residuals(isi, ici, tolerance)
}

/// Full double-indexed form of the no-ICI condition (all k != i pairs).
/// Equivalent to the reduced form used in [`check_gnc`]; exposed so the
/// equivalence can be asserted.
pub fn ici_residual_full(pulse: &PrototypePulse) -> f64 {
    let params = pulse.params();
    let (k_n, n_f, m) = (params.sub_channels, params.interp_factor, params.pulse_len);
    let l_n = params.block_len();
    let q = params.bins_per_subchannel();
    let g = pulse.fd();
    let mut worst = 0.0f64;
    for k in 0..k_n {
        for i in 0..k_n {
            if i == k {
                continue;
            }
            for p in 0..l_n {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..n_f {
                    let base = p + s * l_n;
                    acc += g[(base + k * q) % m] * g[(base + i * q) % m].conj();
                }
                worst = worst.max((acc / n_f as f64).norm());
            }
        }
    }
    worst
}

/// Matrix-form orthogonality: every H_ort matrix must have orthonormal
/// columns. The report reuses the ISI/ICI split (diagonal vs off-diagonal
/// Gram entries).
pub fn check_matrix_orthogonality(pulse: &PrototypePulse, tolerance: f64) -> OrthReport {
    let mats = build_orth_matrices(pulse);
    let mut isi = 0.0f64;
    let mut ici = 0.0f64;
    for mat in &mats {
        for j in 0..mat.cols {
            for i in j..mat.cols {
                let dot = mat.col_dot(j, i);
                if i == j {
                    isi = isi.max((dot.re - 1.0).abs().max(dot.im.abs()));
                } else {
                    ici = ici.max(dot.norm());
                }
            }
        }
    }
    OrthReport::from_residuals(isi, ici, tolerance)
}

/// Critically sampled circulant criterion: all sub-band vectors must have
/// unit-modulus unitary-DFT spectra, |DFT_N(v_p)(i)| = sqrt(N) for all i.
pub fn check_critically_sampled(pulse: &PrototypePulse, tolerance: f64) -> Result<bool> {
    let params = pulse.params();
    if !params.is_critically_sampled() {
        return Err(Error::invalid(format!(
            "criterion requires K == N, got K = {}, N = {}",
            params.sub_channels, params.interp_factor
        )));
    }
    let n_f = params.interp_factor;
    let root_n = (n_f as f64).sqrt();
    for p in 0..params.block_len() {
        let mut v = subband_vector(pulse, p);
        fft_in_place(&mut v);
        for x in &v {
            if (x.norm() - root_n).abs() > tolerance * root_n {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Construct a random orthogonal pulse: one random circulant-orthogonal
/// generator per gcd class, shared by every sub-band vector in the class.
/// The column shifts produced by the index maps are then distinct, so the
/// selected K columns stay orthonormal for any K <= N.
pub fn random_orthogonal_pulse(params: &FilterBankParams, seed: u64) -> PrototypePulse {
    let (n_f, m) = (params.interp_factor, params.pulse_len);
    let l_n = params.block_len();
    let n_s = params.subsystem_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_n = (n_f as f64).sqrt();
    let mut fd = vec![Complex64::new(0.0, 0.0); m];
    for class in 0..n_s {
        let spectrum: Vec<Complex64> = (0..n_f)
            .map(|_| Complex64::from_polar(root_n, rng.gen::<f64>() * 2.0 * std::f64::consts::PI))
            .collect();
        let w = idft(&spectrum, n_f).expect("class generator idft");
        for p in (class..l_n).step_by(n_s) {
            for i in 0..n_f {
                fd[(p + i * l_n) % m] = w[i];
            }
        }
    }
    PrototypePulse::from_fd(*params, fd).expect("random orthogonal pulse")
}

fn require_confined(pulse: &PrototypePulse) -> Result<()> {
    if !pulse.is_freq_confined(1e-10) {
        return Err(Error::PreconditionViolation(
            "pulse is not frequency-confined to its first Q bins".into(),
        ));
    }
    Ok(())
}

/// Filter length variation: scale (K, N, M) by alpha1, keeping the confined
/// spectrum and zero-padding the rest. Requires a frequency-confined input;
/// alpha1 may be rational as long as all scaled parameters are integers.
pub fn extend_pulse_length(pulse: &PrototypePulse, alpha1: f64) -> Result<PrototypePulse> {
    require_confined(pulse)?;
    if !(alpha1 > 0.0) || !alpha1.is_finite() {
        return Err(Error::invalid(format!("alpha1 must be positive, got {alpha1}")));
    }
    let params = pulse.params();
    let scaled = |v: usize| -> Result<usize> {
        let x = v as f64 * alpha1;
        let r = x.round();
        if (x - r).abs() > 1e-9 || r < 1.0 {
            return Err(Error::invalid(format!(
                "alpha1 = {alpha1} does not scale {v} to an integer"
            )));
        }
        Ok(r as usize)
    };
    let new_params = FilterBankParams::new(
        scaled(params.sub_channels)?,
        scaled(params.interp_factor)?,
        scaled(params.pulse_len)?,
    )?;
    let q = params.bins_per_subchannel();
    let gain = alpha1.sqrt();
    let mut fd = vec![Complex64::new(0.0, 0.0); new_params.pulse_len];
    for i in 0..q.min(params.pulse_len) {
        fd[i] = pulse.fd()[i] * gain;
    }
    PrototypePulse::from_fd(new_params, fd)
}

/// Constant filter length: multiply K and N by an integer alpha2 (which must
/// divide Q), sub-sampling the confined spectrum in frequency.
pub fn resample_pulse(pulse: &PrototypePulse, alpha2: usize) -> Result<PrototypePulse> {
    require_confined(pulse)?;
    if alpha2 == 0 {
        return Err(Error::invalid("alpha2 must be a positive integer"));
    }
    let params = pulse.params();
    let q = params.bins_per_subchannel();
    if q % alpha2 != 0 {
        return Err(Error::invalid(format!(
            "alpha2 = {alpha2} does not divide Q = {q}"
        )));
    }
    let new_params = FilterBankParams::new(
        params.sub_channels * alpha2,
        params.interp_factor * alpha2,
        params.pulse_len,
    )?;
    let gain = (alpha2 as f64).sqrt();
    let mut fd = vec![Complex64::new(0.0, 0.0); params.pulse_len];
    for i in 0..q / alpha2 {
        fd[i] = pulse.fd()[alpha2 * i] * gain;
    }
    PrototypePulse::from_fd(new_params, fd)
}

/// Equivalent-filter orthogonality: true iff the cyclic autocorrelation
/// c = g_eq (x) g_eq,-^* is a Kronecker delta.
///
/// The delta must hold at every lag, not only on the symbol grid mN: an
/// off-grid correlation couples with the off-grid tails of the pulse ACF and
/// still destroys orthogonality (the two-tap example below shows this even
/// though its grid samples all vanish). Equivalently, |G_eq(q)| must be 1 on
/// every bin, i.e. the equivalent filter is allpass.
pub fn check_equivalent_filter_orthogonality(
    g_eq: &[Complex64],
    params: &FilterBankParams,
    tolerance: f64,
) -> bool {
    let m = params.pulse_len;
    let mut padded = vec![Complex64::new(0.0, 0.0); m];
    for (i, &v) in g_eq.iter().take(m).enumerate() {
        padded[i] = v;
    }
    // c = g_eq (x) g_eq,-^* : in frequency |G_eq(q)|^2
    let mut spec = padded;
    fft_in_place(&mut spec);
    for x in &mut spec {
        *x = Complex64::new(x.norm_sqr(), 0.0);
    }
    ifft_in_place(&mut spec);
    let c = spec;
    if (c[0] - Complex64::new(1.0, 0.0)).norm() > tolerance {
        return false;
    }
    (1..m).all(|n| c[n].norm() <= tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::FilterBankParams;
    use crate::pulse_design::rrc_pulse;
    use crate::transforms::dft;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_pulse(params: &FilterBankParams, seed: u64) -> PrototypePulse {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fd: Vec<Complex64> = (0..params.pulse_len)
            .map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
            .collect();
        PrototypePulse::from_fd(*params, fd).unwrap()
    }

    /// Brute-force Eq.-(9)-style double sum for the CCF.
    fn ccf_oracle(tx: &PrototypePulse, rx: &PrototypePulse, k: usize, i: usize) -> Vec<Complex64> {
        let params = tx.params();
        let (k_n, n_f, m) = (params.sub_channels, params.interp_factor, params.pulse_len);
        let g = tx.td();
        let h = rx.td();
        (0..params.block_len())
            .map(|mm| {
                let n = mm * n_f;
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..m {
                    let b = wrap(n as isize - a as isize, m);
                    let wg = Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * (a * k) as f64 / k_n as f64,
                    );
                    let wh = Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * (b * i) as f64 / k_n as f64,
                    );
                    acc += g[a] * wg * h[b] * wh;
                }
                acc
            })
            .collect()
    }

    #[test]
    fn ccf_of_orthogonal_pulse_is_delta_or_zero() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        for k in 0..4 {
            for i in 0..4 {
                let r = ccf_time(&pulse, None, k, i).unwrap();
                for (m, v) in r.iter().enumerate() {
                    let want = if k == i && m == 0 { 1.0 } else { 0.0 };
                    assert!(
                        (v - Complex64::new(want, 0.0)).norm() < 1e-10,
                        "ccf({k},{i})[{m}] = {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn ccf_time_matches_brute_force_oracle() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let tx = random_pulse(&params, 5);
        let rx = random_pulse(&params, 6);
        for (k, i) in [(0, 0), (1, 3), (2, 1)] {
            let got = ccf_time(&tx, Some(&rx), k, i).unwrap();
            let want = ccf_oracle(&tx, &rx, k, i);
            let err = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "ccf({k},{i}) err {err}");
        }
    }

    #[test]
    fn ccf_freq_is_dft_of_ccf_time() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let tx = random_pulse(&params, 7);
        let rx = random_pulse(&params, 8);
        for (k, i) in [(0, 2), (3, 1), (2, 2)] {
            let t = ccf_time(&tx, Some(&rx), k, i).unwrap();
            let t_spec = dft(&t, t.len()).unwrap();
            let f = ccf_freq(&tx, Some(&rx), k, i).unwrap();
            let err = t_spec
                .iter()
                .zip(&f)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "dft(ccf_time) != ccf_freq for ({k},{i}): {err}");
        }
    }

    #[test]
    fn ccf_freq_flat_for_matched_orthogonal() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let acf = ccf_freq(&pulse, None, 3, 3).unwrap();
        for v in &acf {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
        let ccf = ccf_freq(&pulse, None, 3, 5).unwrap();
        for v in &ccf {
            assert!(v.norm() < 1e-10);
        }
    }

    #[test]
    fn gnc_accepts_rrc_and_rejects_perturbation() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        assert!(check_gnc(&pulse, 1e-8).is_orthogonal);

        let mut fd = pulse.fd().to_vec();
        // scale one active coefficient by 1.01
        let idx = fd
            .iter()
            .position(|c| c.norm() > 0.5)
            .expect("active coefficient");
        fd[idx] *= 1.01;
        let bad = PrototypePulse::from_fd(params, fd).unwrap();
        let rep = check_gnc(&bad, 1e-8);
        assert!(!rep.is_orthogonal);
        assert!(rep.max_isi_residual > 1e-8);
    }

    #[test]
    fn rectangular_pulse_orthogonal_when_critically_sampled() {
        let params = FilterBankParams::new(8, 8, 360).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        assert!(check_gnc(&pulse, 1e-10).is_orthogonal);
        assert!(check_critically_sampled(&pulse, 1e-8).unwrap());

        let mut fd = pulse.fd().to_vec();
        fd[3] *= 1.01;
        let bad = PrototypePulse::from_fd(params, fd).unwrap();
        let rep = check_gnc(&bad, 1e-8);
        assert!(!rep.is_orthogonal);
        assert!((rep.max_isi_residual - 0.0201).abs() < 1e-6);
    }

    #[test]
    fn orth_matrix_shapes_and_distinct_vectors() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let mats = build_orth_matrices(&pulse);
        assert_eq!(mats.len(), 15); // gcd(45, 30)
        for mat in &mats {
            assert_eq!(mat.rows, 12);
            assert_eq!(mat.cols, 8);
        }
        // each matrix involves exactly L / N_s distinct sub-band vectors
        let want_distinct = params.block_len() / params.subsystem_count();
        for p in 0..params.subsystem_count() {
            let mut cs: Vec<usize> = (0..params.sub_channels)
                .map(|j| column_indices(&params, p, j).0)
                .collect();
            cs.sort_unstable();
            cs.dedup();
            assert_eq!(cs.len(), want_distinct);
            for c in cs {
                assert_eq!(c % params.subsystem_count(), p);
            }
        }
    }

    #[test]
    fn critically_sampled_matrices_are_circulant() {
        let params = FilterBankParams::new(6, 6, 36).unwrap();
        let pulse = random_orthogonal_pulse(&params, 3);
        for mat in build_orth_matrices(&pulse) {
            let c0 = mat.column(0).to_vec();
            for j in 1..mat.cols {
                let want = cyclic_shift(&c0, j as i64);
                let err = mat
                    .column(j)
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-12, "column {j} is not tau^{j} of column 0");
            }
        }
    }

    #[test]
    fn matrix_check_agrees_with_gnc_on_random_pulses() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        for seed in 0..100 {
            let pulse = if seed % 3 == 0 {
                random_orthogonal_pulse(&params, seed)
            } else {
                random_pulse(&params, seed)
            };
            let a = check_gnc(&pulse, 1e-8).is_orthogonal;
            let b = check_matrix_orthogonality(&pulse, 1e-8).is_orthogonal;
            assert_eq!(a, b, "checkers disagree at seed {seed}");
        }
    }

    #[test]
    fn eq14_and_eq15_residuals_agree() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        for seed in 0..20 {
            let pulse = random_pulse(&params, 1000 + seed);
            let reduced = check_gnc(&pulse, 1e-8).max_ici_residual;
            let full = ici_residual_full(&pulse);
            assert!(
                (reduced - full).abs() < 1e-12,
                "reduced {reduced} vs full {full}"
            );
        }
    }

    #[test]
    fn redundant_matrices_have_permuted_grams() {
        // matrices at p and p + b*N_s are column permutations with a common
        // extra shift, so their Gram matrices match under a cyclic column
        // relabeling
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let pulse = random_pulse(&params, 17);
        let l_n = params.block_len();
        let n_s = params.subsystem_count();
        let k_n = params.sub_channels;
        // build matrices for all p in [0, L)
        let vs: Vec<Vec<Complex64>> = (0..l_n).map(|p| subband_vector(&pulse, p)).collect();
        let build_at = |p: usize| -> OrthMatrix {
            let scale = 1.0 / (params.interp_factor as f64).sqrt();
            let cols_data = (0..k_n)
                .map(|j| {
                    let (c, d) = column_indices(&params, p, j);
                    let mut col = cyclic_shift(&vs[c], d as i64);
                    for x in &mut col {
                        *x *= scale;
                    }
                    col
                })
                .collect();
            OrthMatrix {
                p,
                rows: params.interp_factor,
                cols: k_n,
                cols_data,
            }
        };
        for p in 0..n_s {
            for b in 1..(l_n / n_s) {
                let g1 = build_at(p).gram();
                let g2 = build_at(p + b * n_s).gram();
                let found = (0..k_n).any(|shift| {
                    (0..k_n * k_n).all(|idx| {
                        let (r, c) = (idx / k_n, idx % k_n);
                        let (r2, c2) = ((r + shift) % k_n, (c + shift) % k_n);
                        (g1[r2 * k_n + c2] - g2[r * k_n + c]).norm() < 1e-10
                    })
                });
                assert!(found, "no cyclic relabeling matches Gram at p={p}, b={b}");
            }
        }
    }

    #[test]
    fn critically_sampled_examples() {
        let params = FilterBankParams::new(4, 4, 16).unwrap();
        // constant sub-band vectors: DFT is N*delta, not unit modulus
        let mut fd = vec![Complex64::new(0.0, 0.0); 16];
        for p in 0..4 {
            for i in 0..4 {
                fd[p + 4 * i] = Complex64::new(1.0, 0.0);
            }
        }
        let flat = PrototypePulse::from_fd(params, fd).unwrap();
        assert!(!check_critically_sampled(&flat, 1e-8).unwrap());

        // single nonzero entry of magnitude sqrt(N): flat unit-modulus DFT
        let rect = rrc_pulse(&params).unwrap();
        assert!(check_critically_sampled(&rect, 1e-8).unwrap());

        // construction from random phases
        let rand_orth = random_orthogonal_pulse(&params, 11);
        assert!(check_critically_sampled(&rand_orth, 1e-8).unwrap());

        let over = FilterBankParams::new(4, 6, 24).unwrap();
        assert!(check_critically_sampled(&random_pulse(&over, 1), 1e-8).is_err());
    }

    #[test]
    fn random_orthogonal_pulse_contract() {
        for (k, n, m) in [(8usize, 8usize, 360usize), (8, 12, 360), (4, 6, 24)] {
            let params = FilterBankParams::new(k, n, m).unwrap();
            let a = random_orthogonal_pulse(&params, 1);
            let b = random_orthogonal_pulse(&params, 2);
            let rep = check_gnc(&a, 1e-10);
            assert!(
                rep.is_orthogonal,
                "seed 1 not orthogonal for ({k},{n},{m}): isi {} ici {}",
                rep.max_isi_residual, rep.max_ici_residual
            );
            assert!(check_gnc(&b, 1e-10).is_orthogonal);
            // two seeds give distinct pulses (infinitude witness)
            let diff = a
                .fd()
                .iter()
                .zip(b.fd())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(diff > 1e-3, "seeds 1 and 2 produced the same pulse");
        }
    }

    #[test]
    fn extend_pulse_length_examples() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let mother = rrc_pulse(&params).unwrap();
        assert!(mother.is_freq_confined(1e-10));

        let same = extend_pulse_length(&mother, 1.0).unwrap();
        assert_eq!(same.fd(), mother.fd());

        let ext = extend_pulse_length(&mother, 3.0).unwrap();
        assert_eq!(ext.params().sub_channels, 24);
        assert_eq!(ext.params().interp_factor, 36);
        assert_eq!(ext.params().pulse_len, 1080);
        assert!(check_gnc(&ext, 1e-8).is_orthogonal);
        // energy scales by alpha1
        assert!((ext.fd_energy() - 3.0 * mother.fd_energy()).abs() < 1e-8);

        // non-integer scaling rejected
        assert!(extend_pulse_length(&mother, 1.1).is_err());
        // non-confined input rejected
        let bad = random_orthogonal_pulse(&params, 9);
        assert!(matches!(
            extend_pulse_length(&bad, 3.0),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn resample_pulse_examples() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let mother = rrc_pulse(&params).unwrap();

        let same = resample_pulse(&mother, 1).unwrap();
        assert_eq!(same.fd(), mother.fd());

        let rs = resample_pulse(&mother, 3).unwrap();
        assert_eq!(rs.params().sub_channels, 24);
        assert_eq!(rs.params().interp_factor, 36);
        assert_eq!(rs.params().pulse_len, 360);
        assert!(check_gnc(&rs, 1e-8).is_orthogonal);
        let nonzero = rs.fd().iter().filter(|c| c.norm() > 1e-12).count();
        assert!(nonzero <= rs.params().bins_per_subchannel());

        assert!(resample_pulse(&mother, 7).is_err()); // 7 does not divide 45
    }

    #[test]
    fn equivalent_filter_orthogonality_examples() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let delta = vec![Complex64::new(1.0, 0.0)];
        assert!(check_equivalent_filter_orthogonality(&delta, &params, 1e-10));

        // pure delay inside the CP budget
        let mut delayed = vec![Complex64::new(0.0, 0.0); 3];
        delayed[2] = Complex64::new(1.0, 0.0);
        assert!(check_equivalent_filter_orthogonality(&delayed, &params, 1e-10));

        // two-tap filter: unit energy, but the lag-1 correlation is 0.4; the
        // brute-force cyclic autocorrelation confirms c is not a delta
        let s = 1.25f64.sqrt();
        let two_tap = vec![Complex64::new(1.0 / s, 0.0), Complex64::new(0.5 / s, 0.0)];
        let m = params.pulse_len;
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        padded[0] = two_tap[0];
        padded[1] = two_tap[1];
        let mut worst_off = 0.0f64;
        for lag in 1..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..m {
                acc += padded[a] * padded[wrap(a as isize - lag as isize, m)].conj();
            }
            worst_off = worst_off.max(acc.norm());
        }
        assert!(worst_off > 0.3, "oracle: two-tap autocorrelation has mass off zero");
        assert!(!check_equivalent_filter_orthogonality(&two_tap, &params, 1e-10));

        // energy violation fails on the lag-0 condition
        let unnorm = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)];
        assert!(!check_equivalent_filter_orthogonality(&unnorm, &params, 1e-10));
    }
}
