//! Discrete Fourier and cosine transforms.
//!
//! The DFT is unnormalized in the forward direction and scaled by `1/n` in
//! the inverse. The DCT is the orthonormal type-II transform with the
//! orthonormal type-III as its inverse. Both run in `O(n * sum of prime
//! factors)` via a mixed-radix FFT, falling back to direct summation for
//! prime lengths.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self { re: r * math::cos(theta), im: r * math::sin(theta) }
    }

    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: f64) -> Self {
        Self { re: self.re * s, im: self.im * s }
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Precomputed twiddles for transforms of one length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    /// `exp(-2πi t / n)` for `t` in `0..n`.
    twiddles: Vec<Complex>,
}

fn smallest_factor(n: usize) -> usize {
    if n % 2 == 0 {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return p;
        }
        p += 2;
    }
    n
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let twiddles = (0..n)
            .map(|t| Complex::from_polar(1.0, -2.0 * PI * t as f64 / n as f64))
            .collect();
        Self { n, twiddles }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform `X_k = Σ x_j exp(-2πi jk/n)`.
    pub fn forward(&self, x: &[Complex]) -> Vec<Complex> {
        assert_eq!(x.len(), self.n, "input length does not match the plan");
        let mut out = vec![Complex::ZERO; self.n];
        self.recurse(x, 0, 1, self.n, &mut out);
        out
    }

    /// Inverse transform, scaled by `1/n`.
    pub fn inverse(&self, spectrum: &[Complex]) -> Vec<Complex> {
        let conj: Vec<Complex> = spectrum.iter().map(|c| c.conj()).collect();
        let scale = 1.0 / self.n as f64;
        self.forward(&conj).into_iter().map(|c| c.conj().scale(scale)).collect()
    }

    /// Transform of `x[offset + stride * j]`, `j < n`, written into `out`.
    fn recurse(&self, x: &[Complex], offset: usize, stride: usize, n: usize, out: &mut [Complex]) {
        if n == 1 {
            out[0] = x[offset];
            return;
        }
        // Twiddle for exp(-2πi t / n) at this level.
        let tw = |t: usize| self.twiddles[(t % n) * (self.n / n)];
        let p = smallest_factor(n);
        if p == n {
            for (k, o) in out.iter_mut().enumerate().take(n) {
                let mut acc = Complex::ZERO;
                for j in 0..n {
                    acc = acc + x[offset + stride * j] * tw(j * k);
                }
                *o = acc;
            }
            return;
        }
        let m = n / p;
        let mut sub = vec![Complex::ZERO; n];
        for r in 0..p {
            self.recurse(x, offset + stride * r, stride * p, m, &mut sub[r * m..(r + 1) * m]);
        }
        for k in 0..m {
            for q in 0..p {
                let idx = k + q * m;
                let mut acc = sub[k];
                for r in 1..p {
                    acc = acc + sub[r * m + k] * tw(r * idx);
                }
                out[idx] = acc;
            }
        }
    }
}

/// Unnormalized DFT of a complex sequence.
pub fn dft(x: &[Complex]) -> Vec<Complex> {
    FftPlan::new(x.len()).forward(x)
}

/// Unnormalized DFT of a real sequence.
pub fn dft_real(x: &[f64]) -> Vec<Complex> {
    let c: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    dft(&c)
}

/// Inverse DFT with `1/n` scaling.
pub fn idft(spectrum: &[Complex]) -> Vec<Complex> {
    FftPlan::new(spectrum.len()).inverse(spectrum)
}

/// Orthonormal DCT-II / DCT-III of one length, computed through a
/// same-length FFT of the even/odd reordered input.
#[derive(Clone, Debug)]
pub struct DctPlan {
    fft: FftPlan,
    /// `exp(-iπk / 2n)`.
    phase: Vec<Complex>,
    scale0: f64,
    scale: f64,
}

impl DctPlan {
    pub fn new(n: usize) -> Self {
        let phase = (0..n)
            .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Self {
            fft: FftPlan::new(n),
            phase,
            scale0: math::sqrt(1.0 / n as f64),
            scale: math::sqrt(2.0 / n as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    fn alpha(&self, k: usize) -> f64 {
        if k == 0 {
            self.scale0
        } else {
            self.scale
        }
    }

    /// `C_k = α_k Σ_i x_i cos(π (2i + 1) k / 2n)`.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n, "input length does not match the plan");
        let mut v = vec![Complex::ZERO; n];
        for i in 0..n.div_ceil(2) {
            v[i].re = x[2 * i];
        }
        for i in 0..n / 2 {
            v[n - 1 - i].re = x[2 * i + 1];
        }
        let spectrum = self.fft.forward(&v);
        (0..n).map(|k| (spectrum[k] * self.phase[k]).re * self.alpha(k)).collect()
    }

    /// Inverse of [`DctPlan::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(coeffs.len(), n, "input length does not match the plan");
        let y = |k: usize| if k < n { coeffs[k] / self.alpha(k) } else { 0.0 };
        let spectrum: Vec<Complex> = (0..n)
            .map(|k| self.phase[k].conj() * Complex::new(y(k), -y(n - k)))
            .collect();
        let v = self.fft.inverse(&spectrum);
        let mut x = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            x[2 * i] = v[i].re;
        }
        for i in 0..n / 2 {
            x[2 * i + 1] = v[n - 1 - i].re;
        }
        x
    }
}

/// Orthonormal DCT-II.
pub fn dct(x: &[f64]) -> Vec<f64> {
    DctPlan::new(x.len()).forward(x)
}

/// Orthonormal DCT-III, the inverse of [`dct`].
pub fn idct(coeffs: &[f64]) -> Vec<f64> {
    DctPlan::new(coeffs.len()).inverse(coeffs)
}
