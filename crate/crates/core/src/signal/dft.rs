use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Magnitude spectrum `|X_k|`, `k = 0..T`, of a real signal.
///
/// Power-of-two lengths go through an iterative radix-2 FFT; other lengths
/// use the direct DFT, which is cheap at the window sizes used here.
pub fn dft_magnitude(signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::Contract("dft of an empty signal".into()));
    }
    if let Some(index) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::MalformedInput {
            index,
            reason: "non-finite value in dft input".into(),
        });
    }
    let spectrum = if signal.len().is_power_of_two() {
        fft_radix2(signal)
    } else {
        direct_dft(signal)
    };
    Ok(spectrum.iter().map(|c| c.norm()).collect())
}

fn direct_dft(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    // twiddle[j] = exp(-2 pi i j / n); k*t is reduced mod n to keep angles small
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
        .collect();
    (0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .map(|(t, &x)| twiddle[(k * t) % n] * x)
                .sum()
        })
        .collect()
}

fn fft_radix2(signal: &[f64]) -> Vec<Complex64> {
    let n = signal.len();
    let bits = n.trailing_zeros();
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for (i, &x) in signal.iter().enumerate() {
        let j = if bits == 0 {
            0
        } else {
            i.reverse_bits() >> (usize::BITS - bits)
        };
        buf[j] = Complex64::new(x, 0.0);
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = Complex64::from_polar(1.0, -2.0 * PI / len as f64);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..half {
                let even = buf[start + k];
                let odd = buf[start + k + half] * w;
                buf[start + k] = even + odd;
                buf[start + k + half] = even - odd;
                w *= step;
            }
        }
        len <<= 1;
    }
    buf
}
