//! Small-scale spectral and modular-arithmetic primitives.
//!
//! Conventions used throughout the crate:
//!
//! ```text
//! forward DFT:  X(q) = sum_n x(n) e^{-i 2 pi n q / size}      (unnormalized)
//! inverse DFT:  x(n) = (1/size) sum_q X(q) e^{+i 2 pi n q / size}
//! ```
//!
//! With this kernel sign the sub-carrier modulation factor e^{+i 2 pi n k / K}
//! is an inverse-kernel multiplication, so modulating a signal by sub-carrier
//! `k` shifts its spectrum by `+kQ` bins. Every module relies on this single
//! convention; do not introduce a second one.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

thread_local! {
    static FFT_CACHE: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    planner: Option<FftPlanner<f64>>,
    forward: HashMap<usize, Arc<dyn rustfft::Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn rustfft::Fft<f64>>>,
}

fn run_fft(buf: &mut [Complex64], forward: bool) {
    let n = buf.len();
    FFT_CACHE.with(|c| {
        let mut cache = c.borrow_mut();
        let planner = cache.planner.get_or_insert_with(FftPlanner::new);
        let plan = if forward {
            planner.plan_fft_forward(n)
        } else {
            planner.plan_fft_inverse(n)
        };
        let map = if forward {
            &mut cache.forward
        } else {
            &mut cache.inverse
        };
        let plan = map.entry(n).or_insert(plan).clone();
        plan.process(buf);
    });
}

/// Forward DFT with the e^{-i2pi nq/size} kernel. `size` must equal `v.len()`.
pub fn dft(v: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(Error::invalid("dft of empty vector"));
    }
    if v.len() != size {
        return Err(Error::SizeMismatch {
            expected: size,
            got: v.len(),
        });
    }
    let mut buf = v.to_vec();
    run_fft(&mut buf, true);
    Ok(buf)
}

/// Inverse DFT, normalized by 1/size so that `idft(dft(v)) == v`.
pub fn idft(v: &[Complex64], size: usize) -> Result<Vec<Complex64>> {
    if v.is_empty() {
        return Err(Error::invalid("idft of empty vector"));
    }
    if v.len() != size {
        return Err(Error::SizeMismatch {
            expected: size,
            got: v.len(),
        });
    }
    let mut buf = v.to_vec();
    run_fft(&mut buf, false);
    let scale = 1.0 / size as f64;
    for x in &mut buf {
        *x *= scale;
    }
    Ok(buf)
}

/// In-place unchecked forward transform for hot paths.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    run_fft(buf, true);
}

/// In-place unchecked inverse transform (normalized) for hot paths.
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    let scale = 1.0 / buf.len() as f64;
    run_fft(buf, false);
    for x in buf.iter_mut() {
        *x *= scale;
    }
}

/// Cyclic convolution out(n) = sum_m x(m) y((n-m) mod M).
///
/// Computed in the frequency domain; equals the direct double sum to
/// round-off for the sizes used in this crate.
pub fn cyclic_convolve(x: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::invalid("cyclic_convolve of empty vectors"));
    }
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut fx = x.to_vec();
    let mut fy = y.to_vec();
    fft_in_place(&mut fx);
    fft_in_place(&mut fy);
    for (a, b) in fx.iter_mut().zip(&fy) {
        *a *= b;
    }
    ifft_in_place(&mut fx);
    Ok(fx)
}

/// Nonnegative residue of `a` modulo `b`: result in [0, b), also for negative `a`.
pub fn mod_index(a: i64, b: i64) -> Result<i64> {
    if b <= 0 {
        return Err(Error::invalid(format!("modulus must be positive, got {b}")));
    }
    Ok(a.rem_euclid(b))
}

/// Unchecked wrap helper for index arithmetic on buffers of length `m`.
#[inline]
pub(crate) fn wrap(a: isize, m: usize) -> usize {
    a.rem_euclid(m as isize) as usize
}

/// Vector cyclic shift: element i of the output is element (i+a) mod N of the input.
pub fn cyclic_shift(v: &[Complex64], a: i64) -> Vec<Complex64> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|i| v[wrap(i as isize + a as isize, n)])
        .collect()
}

/// Greatest common divisor.
pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;
    use proptest::prelude::{prop_assert, proptest};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn randv(n: usize, seed: u64) -> Vec<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    /// O(n^2) direct-sum DFT oracle.
    fn dft_oracle(v: &[C]) -> Vec<C> {
        let n = v.len();
        (0..n)
            .map(|q| {
                (0..n)
                    .map(|m| {
                        let ph = -2.0 * std::f64::consts::PI * (m * q) as f64 / n as f64;
                        v[m] * C::from_polar(1.0, ph)
                    })
                    .sum()
            })
            .collect()
    }

    /// O(n^2) direct cyclic-convolution oracle.
    fn conv_oracle(x: &[C], y: &[C]) -> Vec<C> {
        let m = x.len();
        (0..m)
            .map(|n| {
                (0..m)
                    .map(|k| x[k] * y[wrap(n as isize - k as isize, m)])
                    .sum()
            })
            .collect()
    }

    fn max_abs_diff(a: &[C], b: &[C]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dft_of_constant_is_impulse() {
        let v = vec![C::new(1.0, 0.0); 4];
        let out = dft(&v, 4).unwrap();
        assert!((out[0] - C::new(4.0, 0.0)).norm() < 1e-12);
        for q in 1..4 {
            assert!(out[q].norm() < 1e-12, "bin {q} not zero: {}", out[q]);
        }
    }

    #[test]
    fn dft_of_impulse_is_flat() {
        let mut v = vec![C::new(0.0, 0.0); 4];
        v[0] = C::new(1.0, 0.0);
        let out = dft(&v, 4).unwrap();
        for q in 0..4 {
            assert!((out[q] - C::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_matches_direct_sum_oracle() {
        let v = randv(8, 1);
        let want = dft_oracle(&v);
        let got = dft(&v, 8).unwrap();
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn dft_size_mismatch_is_error() {
        let v = randv(8, 2);
        assert!(matches!(dft(&v, 9), Err(Error::SizeMismatch { .. })));
        assert!(matches!(idft(&v, 7), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn convolve_with_delta_is_identity() {
        let x = randv(12, 3);
        let mut delta = vec![C::new(0.0, 0.0); 12];
        delta[0] = C::new(1.0, 0.0);
        let out = cyclic_convolve(&x, &delta).unwrap();
        assert!(max_abs_diff(&out, &x) < 1e-12);
    }

    #[test]
    fn convolve_with_shifted_delta_shifts() {
        let x: Vec<C> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&r| C::new(r, 0.0))
            .collect();
        let mut d1 = vec![C::new(0.0, 0.0); 4];
        d1[1] = C::new(1.0, 0.0); // delta(n-1)
        let out = cyclic_convolve(&x, &d1).unwrap();
        let want: Vec<C> = [4.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|&r| C::new(r, 0.0))
            .collect();
        assert!(max_abs_diff(&out, &want) < 1e-12);
    }

    #[test]
    fn convolve_matches_double_sum_oracle() {
        let x = randv(12, 4);
        let y = randv(12, 5);
        let got = cyclic_convolve(&x, &y).unwrap();
        let want = conv_oracle(&x, &y);
        assert!(max_abs_diff(&got, &want) < 1e-12);
    }

    #[test]
    fn mod_index_examples() {
        assert_eq!(mod_index(45, 30).unwrap(), 15);
        assert_eq!(mod_index(-1, 8).unwrap(), 7);
        assert_eq!(mod_index(30, 30).unwrap(), 0);
        assert!(mod_index(5, 0).is_err());
        assert!(mod_index(5, -3).is_err());
    }

    #[test]
    fn cyclic_shift_examples() {
        let v: Vec<C> = (0..4).map(|i| C::new(i as f64, 0.0)).collect();
        assert_eq!(cyclic_shift(&v, 0), v);
        let s1 = cyclic_shift(&v, 1);
        let want: Vec<C> = [1.0, 2.0, 3.0, 0.0]
            .iter()
            .map(|&r| C::new(r, 0.0))
            .collect();
        assert!(max_abs_diff(&s1, &want) < 1e-15);
        assert_eq!(cyclic_shift(&v, 4), v);
        assert_eq!(cyclic_shift(&v, -4), v);
    }

    #[test]
    fn conv_commutative_and_associative() {
        for seed in 0..6u64 {
            let n = 4 + (seed as usize % 13);
            let x = randv(n, 100 + seed);
            let y = randv(n, 200 + seed);
            let z = randv(n, 300 + seed);
            let xy = cyclic_convolve(&x, &y).unwrap();
            let yx = cyclic_convolve(&y, &x).unwrap();
            assert!(max_abs_diff(&xy, &yx) < 1e-11);
            let xy_z = cyclic_convolve(&xy, &z).unwrap();
            let yz = cyclic_convolve(&y, &z).unwrap();
            let x_yz = cyclic_convolve(&x, &yz).unwrap();
            assert!(max_abs_diff(&xy_z, &x_yz) < 1e-11);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_and_parseval(n in 1usize..48, seed in 0u64..1000) {
            let v = randv(n, seed);
            let spec = dft(&v, n).unwrap();
            let back = idft(&spec, n).unwrap();
            let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-30);
            prop_assert!(max_abs_diff(&back, &v) < 1e-12 * scale.max(1.0));

            let e_time: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            let e_freq: f64 = spec.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
            prop_assert!((e_time - e_freq).abs() <= 1e-10 * e_time.max(1e-30));
        }

        #[test]
        fn shift_theorem(n in 2usize..32, a in -40i64..40, seed in 0u64..500) {
            let v = randv(n, seed);
            let shifted = cyclic_shift(&v, a);
            let s1 = dft(&shifted, n).unwrap();
            let s0 = dft(&v, n).unwrap();
            // element i of tau^a{v} is v((i+a)): spectrum picks up e^{+i2pi a q / n}
            for q in 0..n {
                let ph = 2.0 * std::f64::consts::PI * a as f64 * q as f64 / n as f64;
                let want = s0[q] * Complex64::from_polar(1.0, ph);
                prop_assert!((s1[q] - want).norm() < 1e-11 * (1.0 + want.norm()));
            }
        }
    }
}
