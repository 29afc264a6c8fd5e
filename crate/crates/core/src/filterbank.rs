//! CB-FMT synthesis and analysis filter banks.
//!
//! The transmitter maps a K x L block of QAM symbols onto one M-sample block
//! (M = L*N) by cyclically convolving each upsampled sub-channel stream with
//! the prototype pulse and modulating it to its sub-carrier:
//!
//! ```text
//! x(n) = sum_k sum_l a_k(lN) g((n - lN) mod M) e^{+i 2 pi n k / K}
//! ```
//!
//! The receiver demodulates, cyclically filters with the analysis prototype
//! and downsamples by N. Both directions have an exact frequency-domain fast
//! path (per-sub-channel L-point DFT, pulse weighting on M bins, one M-point
//! transform) that this module uses; the direct sums are kept as reference
//! implementations for verification.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::transforms::{self, fft_in_place, gcd, ifft_in_place, wrap};

/// Filter-bank dimensioning: K sub-channels, interpolation factor N >= K,
/// pulse length M divisible by both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBankParams {
    /// Number of sub-channels (K).
    pub sub_channels: usize,
    /// Interpolation factor (N). Critically sampled when N == K.
    pub interp_factor: usize,
    /// Prototype pulse length in samples (M).
    pub pulse_len: usize,
    /// Cyclic-prefix length in samples (mu), 0 <= mu < M.
    pub cp_len: usize,
    /// Sampling period in seconds (T).
    pub sampling_period: f64,
}

impl FilterBankParams {
    pub fn new(sub_channels: usize, interp_factor: usize, pulse_len: usize) -> Result<Self> {
        if sub_channels < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 sub-channels, got {sub_channels}"
            )));
        }
        if interp_factor < sub_channels {
            return Err(Error::invalid(format!(
                "interpolation factor {interp_factor} must be >= sub-channel count {sub_channels}"
            )));
        }
        if pulse_len == 0 || pulse_len % interp_factor != 0 || pulse_len % sub_channels != 0 {
            return Err(Error::invalid(format!(
                "pulse length {pulse_len} must be divisible by {interp_factor} and {sub_channels}"
            )));
        }
        Ok(Self {
            sub_channels,
            interp_factor,
            pulse_len,
            cp_len: 0,
            sampling_period: 1.0,
        })
    }

    pub fn with_cp(mut self, cp_len: usize) -> Result<Self> {
        if cp_len >= self.pulse_len {
            return Err(Error::invalid(format!(
                "cyclic prefix {cp_len} must be shorter than the block ({})",
                self.pulse_len
            )));
        }
        self.cp_len = cp_len;
        Ok(self)
    }

    pub fn with_sampling_period(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("sampling period must be positive, got {t}")));
        }
        self.sampling_period = t;
        Ok(self)
    }

    /// Block size L = M/N: data symbols per sub-channel per block.
    #[inline]
    pub fn block_len(&self) -> usize {
        self.pulse_len / self.interp_factor
    }

    /// Q = M/K: frequency-domain coefficients owned by each sub-channel.
    #[inline]
    pub fn bins_per_subchannel(&self) -> usize {
        self.pulse_len / self.sub_channels
    }

    /// N_s = gcd(Q, L): number of independent orthogonality sub-systems.
    #[inline]
    pub fn subsystem_count(&self) -> usize {
        gcd(self.bins_per_subchannel(), self.block_len())
    }

    #[inline]
    pub fn is_critically_sampled(&self) -> bool {
        self.sub_channels == self.interp_factor
    }

    /// Total samples per transmitted segment (block plus cyclic prefix).
    #[inline]
    pub fn segment_len(&self) -> usize {
        self.pulse_len + self.cp_len
    }
}

/// QAM constellations with unit average symbol energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    /// All points of the constellation, normalized to unit average energy.
    pub fn points(self) -> Vec<Complex64> {
        let levels: &[f64] = match self {
            Constellation::Qpsk => &[-1.0, 1.0],
            Constellation::Qam16 => &[-3.0, -1.0, 1.0, 3.0],
            Constellation::Qam64 => &[-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0],
        };
        let norm = match self {
            Constellation::Qpsk => (2.0f64).sqrt(),
            Constellation::Qam16 => (10.0f64).sqrt(),
            Constellation::Qam64 => (42.0f64).sqrt(),
        };
        let mut out = Vec::with_capacity(levels.len() * levels.len());
        for &re in levels {
            for &im in levels {
                out.push(Complex64::new(re / norm, im / norm));
            }
        }
        out
    }
}

/// One K x L block of data symbols, stored row-major by sub-channel.
#[derive(Debug, Clone)]
pub struct SymbolBlock {
    pub params: FilterBankParams,
    pub constellation: Constellation,
    /// sigma_a^2, the average symbol energy.
    pub symbol_variance: f64,
    data: Vec<Complex64>,
}

impl SymbolBlock {
    pub fn new(params: FilterBankParams, constellation: Constellation, data: Vec<Complex64>) -> Result<Self> {
        let want = params.sub_channels * params.block_len();
        if data.len() != want {
            return Err(Error::SizeMismatch {
                expected: want,
                got: data.len(),
            });
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("symbol block contains non-finite entries"));
        }
        Ok(Self {
            params,
            constellation,
            symbol_variance: 1.0,
            data,
        })
    }

    pub fn zeros(params: FilterBankParams) -> Self {
        let n = params.sub_channels * params.block_len();
        Self {
            params,
            constellation: Constellation::Qpsk,
            symbol_variance: 1.0,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Random block with i.i.d. symbols drawn from the constellation.
    pub fn random(params: FilterBankParams, constellation: Constellation, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = constellation.points();
        let n = params.sub_channels * params.block_len();
        let data = (0..n).map(|_| points[rng.gen_range(0..points.len())]).collect();
        Self {
            params,
            constellation,
            symbol_variance: 1.0,
            data,
        }
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.params.block_len() + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, v: Complex64) {
        self.data[k * self.params.block_len() + l] = v;
    }

    /// Row for sub-channel k (L symbols).
    pub fn row(&self, k: usize) -> &[Complex64] {
        let l = self.params.block_len();
        &self.data[k * l..(k + 1) * l]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Prototype pulse held in both domains: G = dft(g), kept in sync.
#[derive(Debug, Clone)]
pub struct PrototypePulse {
    params: FilterBankParams,
    fd: Vec<Complex64>,
    td: Vec<Complex64>,
}

impl PrototypePulse {
    /// Build from frequency-domain coefficients G(i), i in [0, M).
    pub fn from_fd(params: FilterBankParams, fd: Vec<Complex64>) -> Result<Self> {
        if fd.len() != params.pulse_len {
            return Err(Error::SizeMismatch {
                expected: params.pulse_len,
                got: fd.len(),
            });
        }
        if fd.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("pulse coefficients contain non-finite entries"));
        }
        let td = transforms::idft(&fd, fd.len())?;
        Ok(Self { params, fd, td })
    }

    #[inline]
    pub fn params(&self) -> &FilterBankParams {
        &self.params
    }

    /// Frequency-domain coefficients G(i).
    #[inline]
    pub fn fd(&self) -> &[Complex64] {
        &self.fd
    }

    /// Time-domain coefficients g(n) = idft(G)(n).
    #[inline]
    pub fn td(&self) -> &[Complex64] {
        &self.td
    }

    /// Total pulse energy sum |G(i)|^2.
    pub fn fd_energy(&self) -> f64 {
        self.fd.iter().map(|c| c.norm_sqr()).sum()
    }

    /// True when all energy beyond the first Q bins is negligible
    /// (max_{i >= Q} |G(i)| <= tol * max |G|).
    pub fn is_freq_confined(&self, tol: f64) -> bool {
        let q = self.params.bins_per_subchannel();
        let peak = self.fd.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return false;
        }
        self.fd[q..].iter().all(|c| c.norm() <= tol * peak)
    }

    /// Matched receiver prototype h(n) = g*(-n), i.e. H(q) = G*(q).
    pub fn matched_rx(&self) -> PrototypePulse {
        let fd: Vec<Complex64> = self.fd.iter().map(|c| c.conj()).collect();
        // conjugate spectrum is always a valid pulse; rebuild td directly
        let td = transforms::idft(&fd, fd.len()).expect("matched pulse idft");
        PrototypePulse {
            params: self.params,
            fd,
            td,
        }
    }
}

fn check_shared_params(a: &FilterBankParams, b: &FilterBankParams) -> Result<()> {
    if a.sub_channels != b.sub_channels
        || a.interp_factor != b.interp_factor
        || a.pulse_len != b.pulse_len
    {
        return Err(Error::invalid(
            "symbol block and pulse have different filter-bank parameters",
        ));
    }
    Ok(())
}

/// Transmit-side frequency spectrum of one block: the fast synthesis path up
/// to (but not including) the final M-point inverse transform.
pub(crate) fn synthesize_spectrum(block: &SymbolBlock, pulse: &PrototypePulse) -> Vec<Complex64> {
    let p = &pulse.params;
    let (k_n, l_n, m) = (p.sub_channels, p.block_len(), p.pulse_len);
    let q = p.bins_per_subchannel();
    let g = pulse.fd();
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    let mut row = vec![Complex64::new(0.0, 0.0); l_n];
    for k in 0..k_n {
        row.copy_from_slice(block.row(k));
        fft_in_place(&mut row);
        // bin (qq) receives A_k(qq mod L) * G(qq), then the whole product is
        // shifted by kQ bins (sub-carrier modulation)
        for qq in 0..m {
            let dst = (qq + k * q) % m;
            spec[dst] += row[qq % l_n] * g[qq];
        }
    }
    spec
}

/// Fast synthesis through the frequency domain.
pub fn synthesize(block: &SymbolBlock, pulse: &PrototypePulse) -> Result<Vec<Complex64>> {
    check_shared_params(&block.params, &pulse.params)?;
    let mut spec = synthesize_spectrum(block, pulse);
    ifft_in_place(&mut spec);
    Ok(spec)
}

/// Reference synthesis: the direct double sum. O(M K L); for tests and
/// cross-validation of the fast path.
pub fn synthesize_direct(block: &SymbolBlock, pulse: &PrototypePulse) -> Result<Vec<Complex64>> {
    check_shared_params(&block.params, &pulse.params)?;
    let p = &pulse.params;
    let (k_n, l_n, m, n_f) = (p.sub_channels, p.block_len(), p.pulse_len, p.interp_factor);
    let g = pulse.td();
    let mut x = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..k_n {
            let w = Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * (n * k) as f64 / k_n as f64,
            );
            let mut sub = Complex64::new(0.0, 0.0);
            for l in 0..l_n {
                sub += block.get(k, l) * g[wrap(n as isize - (l * n_f) as isize, m)];
            }
            acc += sub * w;
        }
        x[n] = acc;
    }
    Ok(x)
}

/// Receive-side fast path from an already-computed (and possibly equalized)
/// block spectrum to the K x L analysis output.
pub(crate) fn analyze_spectrum(
    spec: &[Complex64],
    params: &FilterBankParams,
    rx_fd: &[Complex64],
) -> Vec<Complex64> {
    let (k_n, l_n, m, n_f) = (
        params.sub_channels,
        params.block_len(),
        params.pulse_len,
        params.interp_factor,
    );
    let q = params.bins_per_subchannel();
    let mut out = vec![Complex64::new(0.0, 0.0); k_n * l_n];
    let mut folded = vec![Complex64::new(0.0, 0.0); l_n];
    for i in 0..k_n {
        for x in folded.iter_mut() {
            *x = Complex64::new(0.0, 0.0);
        }
        // U(qq) = Y((qq + iQ)) H(qq), aliased onto L bins and scaled by 1/N
        for s in 0..n_f {
            for p in 0..l_n {
                let qq = p + s * l_n;
                folded[p] += spec[(qq + i * q) % m] * rx_fd[qq];
            }
        }
        let scale = 1.0 / n_f as f64;
        for x in folded.iter_mut() {
            *x *= scale;
        }
        ifft_in_place(&mut folded);
        out[i * l_n..(i + 1) * l_n].copy_from_slice(&folded);
    }
    out
}

/// Analysis filter bank with the matched prototype H(q) = G*(q).
/// Returns the K x L output grid flattened row-major (sub-channel major).
pub fn analyze(y: &[Complex64], pulse: &PrototypePulse) -> Result<Vec<Complex64>> {
    let rx = pulse.matched_rx();
    analyze_with_rx(y, pulse.params(), &rx)
}

/// Analysis with an explicit receiver prototype (biorthogonal checks and
/// equivalent-filter scenarios).
pub fn analyze_with_rx(
    y: &[Complex64],
    params: &FilterBankParams,
    rx_pulse: &PrototypePulse,
) -> Result<Vec<Complex64>> {
    if y.len() != params.pulse_len {
        return Err(Error::SizeMismatch {
            expected: params.pulse_len,
            got: y.len(),
        });
    }
    check_shared_params(params, rx_pulse.params())?;
    let mut spec = y.to_vec();
    fft_in_place(&mut spec);
    Ok(analyze_spectrum(&spec, params, rx_pulse.fd()))
}

/// Reference analysis: direct evaluation of the receiver double sum.
pub fn analyze_direct(
    y: &[Complex64],
    params: &FilterBankParams,
    rx_pulse: &PrototypePulse,
) -> Result<Vec<Complex64>> {
    if y.len() != params.pulse_len {
        return Err(Error::SizeMismatch {
            expected: params.pulse_len,
            got: y.len(),
        });
    }
    let (k_n, l_n, m, n_f) = (
        params.sub_channels,
        params.block_len(),
        params.pulse_len,
        params.interp_factor,
    );
    let h = rx_pulse.td();
    let mut out = vec![Complex64::new(0.0, 0.0); k_n * l_n];
    for i in 0..k_n {
        for mm in 0..l_n {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..m {
                let w = Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (l * i) as f64 / k_n as f64,
                );
                acc += y[l] * w * h[wrap((mm * n_f) as isize - l as isize, m)];
            }
            out[i * l_n + mm] = acc;
        }
    }
    Ok(out)
}

/// Prepend the last `mu` samples of `x` as a cyclic prefix.
pub fn add_cp(x: &[Complex64], mu: usize) -> Result<Vec<Complex64>> {
    if mu >= x.len() {
        return Err(Error::invalid(format!(
            "cyclic prefix {mu} must be shorter than the block ({})",
            x.len()
        )));
    }
    let mut out = Vec::with_capacity(x.len() + mu);
    out.extend_from_slice(&x[x.len() - mu..]);
    out.extend_from_slice(x);
    Ok(out)
}

/// Drop the cyclic prefix; exact inverse of [`add_cp`].
pub fn remove_cp(x: &[Complex64], mu: usize) -> Result<Vec<Complex64>> {
    if mu >= x.len() {
        return Err(Error::invalid(format!(
            "cannot remove prefix {mu} from segment of {} samples",
            x.len()
        )));
    }
    Ok(x[mu..].to_vec())
}

/// Transmission rate R = K L / ((M + mu) T) in symbols per second.
pub fn transmission_rate(params: &FilterBankParams) -> f64 {
    let kl = (params.sub_channels * params.block_len()) as f64;
    kl / (params.segment_len() as f64 * params.sampling_period)
}

// ---------------------------------------------------------------------------
// Pulse file format
// ---------------------------------------------------------------------------

/// On-disk pulse description. Coefficient values round-trip exactly through
/// JSON (shortest-exact float encoding).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseFile {
    #[serde(rename = "K")]
    pub sub_channels: usize,
    #[serde(rename = "N")]
    pub interp_factor: usize,
    #[serde(rename = "M")]
    pub pulse_len: usize,
    pub g_re: Vec<f64>,
    pub g_im: Vec<f64>,
    pub metadata: PulseMetadata,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PulseMetadata {
    pub designer: String,
    pub metric: String,
    pub seed: u64,
}

impl PulseFile {
    pub fn from_pulse(pulse: &PrototypePulse, metadata: PulseMetadata) -> Self {
        Self {
            sub_channels: pulse.params().sub_channels,
            interp_factor: pulse.params().interp_factor,
            pulse_len: pulse.params().pulse_len,
            g_re: pulse.fd().iter().map(|c| c.re).collect(),
            g_im: pulse.fd().iter().map(|c| c.im).collect(),
            metadata,
        }
    }

    pub fn into_pulse(&self) -> Result<PrototypePulse> {
        if self.g_re.len() != self.pulse_len || self.g_im.len() != self.pulse_len {
            return Err(Error::PulseFile(format!(
                "coefficient arrays have {}/{} entries, expected {}",
                self.g_re.len(),
                self.g_im.len(),
                self.pulse_len
            )));
        }
        let params = FilterBankParams::new(self.sub_channels, self.interp_factor, self.pulse_len)?;
        let fd = self
            .g_re
            .iter()
            .zip(&self.g_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        PrototypePulse::from_fd(params, fd)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::PulseFile(format!("serialize: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::PulseFile(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse_design::rrc_pulse;

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn params_validation() {
        assert!(FilterBankParams::new(8, 12, 360).is_ok());
        assert!(FilterBankParams::new(1, 12, 360).is_err()); // K < 2
        assert!(FilterBankParams::new(12, 8, 360).is_err()); // N < K
        assert!(FilterBankParams::new(8, 12, 361).is_err()); // M not divisible
        let p = FilterBankParams::new(8, 12, 360).unwrap();
        assert_eq!(p.block_len(), 30);
        assert_eq!(p.bins_per_subchannel(), 45);
        assert_eq!(p.subsystem_count(), 15);
        assert!(p.with_cp(360).is_err());
    }

    #[test]
    fn single_symbol_synthesis_is_pulse() {
        let params = FilterBankParams::new(4, 4, 16).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let mut block = SymbolBlock::zeros(params);
        block.set(0, 0, Complex64::new(1.0, 0.0));
        let x = synthesize(&block, &pulse).unwrap();
        assert!(max_abs_diff(&x, pulse.td()) < 1e-12);
    }

    #[test]
    fn single_symbol_on_subchannel_k_is_modulated_pulse() {
        let params = FilterBankParams::new(4, 4, 16).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let k = 2;
        let mut block = SymbolBlock::zeros(params);
        block.set(k, 0, Complex64::new(1.0, 0.0));
        let x = synthesize(&block, &pulse).unwrap();
        let want: Vec<Complex64> = pulse
            .td()
            .iter()
            .enumerate()
            .map(|(n, &g)| {
                g * Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (n * k) as f64 / 4.0,
                )
            })
            .collect();
        assert!(max_abs_diff(&x, &want) < 1e-12);
    }

    #[test]
    fn fast_synthesis_matches_direct_sum() {
        let params = FilterBankParams::new(4, 4, 16).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let block = SymbolBlock::random(params, Constellation::Qam16, 7);
        let xf = synthesize(&block, &pulse).unwrap();
        let xd = synthesize_direct(&block, &pulse).unwrap();
        assert!(max_abs_diff(&xf, &xd) < 1e-11);
    }

    #[test]
    fn fast_analysis_matches_direct_sum() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let block = SymbolBlock::random(params, Constellation::Qpsk, 9);
        let y = synthesize(&block, &pulse).unwrap();
        let rx = pulse.matched_rx();
        let zf = analyze_with_rx(&y, &params, &rx).unwrap();
        let zd = analyze_direct(&y, &params, &rx).unwrap();
        assert!(max_abs_diff(&zf, &zd) < 1e-11);
    }

    #[test]
    fn roundtrip_is_identity_for_orthogonal_pulse() {
        for (k, n, m) in [(4usize, 4usize, 16usize), (4, 6, 24), (8, 12, 360)] {
            let params = FilterBankParams::new(k, n, m).unwrap();
            let pulse = rrc_pulse(&params).unwrap();
            let block = SymbolBlock::random(params, Constellation::Qam64, 11);
            let y = synthesize(&block, &pulse).unwrap();
            let z = analyze(&y, &pulse).unwrap();
            assert!(
                max_abs_diff(&z, block.as_slice()) < 1e-9,
                "roundtrip failed for ({k},{n},{m})"
            );
        }
    }

    #[test]
    fn analyze_of_zero_is_zero() {
        let params = FilterBankParams::new(4, 4, 16).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let z = analyze(&vec![Complex64::new(0.0, 0.0); 16], &pulse).unwrap();
        assert!(z.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn synthesis_is_linear() {
        let params = FilterBankParams::new(4, 6, 24).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let a = SymbolBlock::random(params, Constellation::Qpsk, 1);
        let b = SymbolBlock::random(params, Constellation::Qpsk, 2);
        let (ca, cb) = (Complex64::new(0.3, -1.1), Complex64::new(-2.0, 0.4));
        let mixed_data: Vec<Complex64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        let mixed = SymbolBlock::new(params, Constellation::Qpsk, mixed_data).unwrap();
        let xm = synthesize(&mixed, &pulse).unwrap();
        let xa = synthesize(&a, &pulse).unwrap();
        let xb = synthesize(&b, &pulse).unwrap();
        let want: Vec<Complex64> = xa.iter().zip(&xb).map(|(x, y)| ca * x + cb * y).collect();
        assert!(max_abs_diff(&xm, &want) < 1e-11);
    }

    #[test]
    fn cp_roundtrip_and_example() {
        let x: Vec<Complex64> = (1..=4).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let with = add_cp(&x, 2).unwrap();
        let want: Vec<Complex64> = [3.0, 4.0, 1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&r| Complex64::new(r, 0.0))
            .collect();
        assert_eq!(with, want);
        assert_eq!(remove_cp(&with, 2).unwrap(), x);
        assert_eq!(add_cp(&x, 0).unwrap(), x);
        assert!(add_cp(&x, 4).is_err());
    }

    #[test]
    fn transmission_rate_examples() {
        let p = FilterBankParams::new(8, 8, 360).unwrap();
        assert!((transmission_rate(&p) - 1.0).abs() < 1e-12);

        let p = FilterBankParams::new(8, 12, 360)
            .unwrap()
            .with_cp(8)
            .unwrap()
            .with_sampling_period(5e-8)
            .unwrap();
        let want = 240.0 / (368.0 * 5e-8);
        assert!((transmission_rate(&p) - want).abs() < 1e-3);

        // R(mu)/R(0) = M/(M+mu)
        let p0 = FilterBankParams::new(8, 8, 360).unwrap();
        let p1 = p0.with_cp(359).unwrap();
        let ratio = transmission_rate(&p1) / transmission_rate(&p0);
        assert!((ratio - 360.0 / 719.0).abs() < 1e-12);
    }

    #[test]
    fn pulse_file_roundtrip() {
        let params = FilterBankParams::new(8, 12, 360).unwrap();
        let pulse = rrc_pulse(&params).unwrap();
        let pf = PulseFile::from_pulse(
            &pulse,
            PulseMetadata {
                designer: "builtin".into(),
                metric: "rrc".into(),
                seed: 0,
            },
        );
        let dir = std::env::temp_dir().join("cbfmt_pulse_file_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rrc.json");
        pf.save(&path).unwrap();
        let loaded = PulseFile::load(&path).unwrap();
        let back = loaded.into_pulse().unwrap();
        assert_eq!(back.fd(), pulse.fd(), "coefficients must round-trip exactly");
    }

    #[test]
    fn unit_qam_energy() {
        for c in [Constellation::Qpsk, Constellation::Qam16, Constellation::Qam64] {
            let pts = c.points();
            let e: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{c:?} energy {e}");
        }
    }
}
