//! Complex FFT used by the MFCC front end and the phase vocoder.
//!
//! Power-of-two sizes use an iterative radix-2 transform; other sizes fall
//! back to a direct DFT.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    pub fn from_polar(mag: f64, phase: f64) -> Self {
        Complex::new(mag * libm::cos(phase), mag * libm::sin(phase))
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn arg(self) -> f64 {
        libm::atan2(self.im, self.re)
    }

    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// A planned transform of fixed size.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT size must be positive");
        let twiddles = (0..n)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Fft { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward transform in place: `X[k] = sum x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex]) {
        assert_eq!(buf.len(), self.n);
        if self.n.is_power_of_two() {
            self.radix2(buf, false);
        } else {
            self.direct(buf, false);
        }
    }

    /// Unnormalized inverse transform in place.
    pub fn inverse(&self, buf: &mut [Complex]) {
        assert_eq!(buf.len(), self.n);
        if self.n.is_power_of_two() {
            self.radix2(buf, true);
        } else {
            self.direct(buf, true);
        }
    }

    fn twiddle(&self, idx: usize, inverse: bool) -> Complex {
        let w = self.twiddles[idx % self.n];
        if inverse {
            Complex::new(w.re, -w.im)
        } else {
            w
        }
    }

    fn radix2(&self, buf: &mut [Complex], inverse: bool) {
        let n = self.n;
        let bits = n.trailing_zeros();
        if bits > 0 {
            for i in 0..n {
                let j = i.reverse_bits() >> (usize::BITS - bits);
                if j > i {
                    buf.swap(i, j);
                }
            }
        }
        let mut len = 2;
        while len <= n {
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let w = self.twiddle(k * stride, inverse);
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2].mul(w);
                    buf[start + k] = Complex::new(a.re + b.re, a.im + b.im);
                    buf[start + k + len / 2] = Complex::new(a.re - b.re, a.im - b.im);
                }
            }
            len <<= 1;
        }
    }

    fn direct(&self, buf: &mut [Complex], inverse: bool) {
        let n = self.n;
        let input = buf.to_vec();
        for (k, out) in buf.iter_mut().enumerate() {
            let mut acc = Complex::ZERO;
            for (j, x) in input.iter().enumerate() {
                let w = self.twiddle((k * j) % n, inverse);
                let p = x.mul(w);
                acc.re += p.re;
                acc.im += p.im;
            }
            *out = acc;
        }
    }
}

/// Transform a real frame and return bins `0..=n/2`.
pub fn real_spectrum(fft: &Fft, frame: &[f64]) -> Vec<Complex> {
    let mut buf: Vec<Complex> = frame.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(fft.len(), Complex::ZERO);
    fft.forward(&mut buf);
    buf.truncate(fft.len() / 2 + 1);
    buf
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Reflect-pad `x` by `pad` samples on both sides, mirroring about the end
/// samples without repeating them. Pads longer than the signal keep folding.
pub fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; 2 * pad];
    }
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in 0..n + 2 * pad {
        let pos = i as isize - pad as isize;
        out.push(x[reflect_index(pos, n)]);
    }
    out
}

fn reflect_index(pos: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = pos.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::ZERO;
                for (j, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    acc.re += v.re * libm::cos(a) - v.im * libm::sin(a);
                    acc.im += v.re * libm::sin(a) + v.im * libm::cos(a);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft() {
        for &n in &[1usize, 2, 8, 64, 12, 30] {
            let x: Vec<Complex> = (0..n)
                .map(|i| Complex::new(libm::sin(i as f64 * 0.37), libm::cos(i as f64 * 1.3)))
                .collect();
            let mut y = x.clone();
            Fft::new(n).forward(&mut y);
            for (a, b) in y.iter().zip(naive(&x)) {
                assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let n = 256;
        let fft = Fft::new(n);
        let x: Vec<Complex> = (0..n).map(|i| Complex::new(i as f64 % 7.0, 0.0)).collect();
        let mut y = x.clone();
        fft.forward(&mut y);
        fft.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a.re / n as f64 - b.re).abs() < 1e-9);
        }
    }

    #[test]
    fn reflect_padding() {
        assert_eq!(reflect_pad(&[1.0, 2.0, 3.0], 2), vec![3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
        // Longer than the signal: keeps folding.
        assert_eq!(reflect_pad(&[1.0, 2.0], 3), vec![2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0]);
        assert_eq!(reflect_pad(&[5.0], 2), vec![5.0; 5]);
    }
}
