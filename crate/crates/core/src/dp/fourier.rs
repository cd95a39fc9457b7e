//! Fourier perturbation (FPA) and its DCT/Gaussian variant with κ chosen by
//! the exponential mechanism (EFPAG).
//!
//! Both calibrate their noise on the unnormalized transform: FPA adds
//! Laplace noise to DFT coefficients, EFPAG adds Gaussian noise to DCT-II
//! coefficients `Σ x_i cos(π(2i+1)k/2n)`. The DCT is evaluated in its
//! orthonormal form, so EFPAG's noise is rescaled accordingly.

use alloc::vec::Vec;

use rand::Rng;

use super::noise::{self, Polar};
use super::transform::{Complex, DctPlan, FftPlan};
use super::NOISE_FLOOR;
use crate::math;
use crate::{Error, Result};

/// Whether DFT index `j` of a length-`n` spectrum is kept when `kappa`
/// low frequencies are retained. Negative frequencies mirror positive ones,
/// so the reconstruction stays real.
#[inline]
pub fn fpa_kept(j: usize, n: usize, kappa: usize) -> bool {
    j.min(n - j) < kappa
}

/// Low-pass reconstruction of `row` keeping `kappa` frequencies, no noise.
pub fn truncate_dft(row: &[f64], kappa: usize) -> Vec<f64> {
    let plan = FftPlan::new(row.len());
    let mut rng = crate::seed::rng(0);
    fpa_row(row, &plan, kappa, 0.0, &mut rng)
}

pub(crate) fn fpa_row<R: Rng + ?Sized>(
    row: &[f64],
    plan: &FftPlan,
    kappa: usize,
    scale: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = row.len();
    let input: Vec<Complex> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut spec = plan.forward(&input);
    for j in 0..n {
        if !fpa_kept(j, n, kappa) {
            spec[j] = Complex::ZERO;
        }
    }
    if scale >= NOISE_FLOOR {
        // Noise the representatives 0..=n/2 and mirror it onto the
        // conjugate half.
        for j in 0..=n / 2 {
            if !fpa_kept(j, n, kappa) {
                continue;
            }
            let d = Complex::new(noise::laplace(scale, rng), noise::laplace(scale, rng));
            spec[j] = spec[j] + d;
            let mirror = (n - j) % n;
            if mirror != j {
                spec[mirror] = spec[j].conj();
            }
        }
    }
    plan.inverse(&spec).into_iter().map(|c| c.re).collect()
}

/// Probabilities of choosing each candidate under the exponential
/// mechanism, `p_i ∝ exp(ε s_i / 2Δ)`.
pub fn exponential_probabilities(scores: &[f64], epsilon: f64, sensitivity: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no candidates".into()));
    }
    if !(epsilon > 0.0) || !(sensitivity > 0.0) {
        return Err(Error::InvalidMechanism(alloc::format!(
            "exponential mechanism needs positive epsilon and sensitivity, got {epsilon} and {sensitivity}"
        )));
    }
    let logits: Vec<f64> = scores.iter().map(|s| epsilon * s / (2.0 * sensitivity)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| math::exp(l - max)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Draws one candidate index from [`exponential_probabilities`].
pub fn exponential_select<R: Rng + ?Sized>(
    scores: &[f64],
    epsilon: f64,
    sensitivity: f64,
    rng: &mut R,
) -> Result<usize> {
    let p = exponential_probabilities(scores, epsilon, sensitivity)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(p.len() - 1)
}

/// Standard deviation, on orthonormal DCT coefficient `k` of a length-`n`
/// series, of Gaussian noise with deviation `sigma` added to the
/// unnormalized DCT-II coefficient.
#[inline]
pub fn efpag_noise_std(k: usize, n: usize, sigma: f64) -> f64 {
    let alpha = if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
    sigma * math::sqrt(alpha)
}

/// Scores of κ = 1..=cap: minus the expected root-sum-squared
/// reconstruction error of keeping κ coefficients and noising each with
/// [`efpag_noise_std`].
pub fn efpag_scores(coeffs: &[f64], cap: usize, sigma: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut tail = alloc::vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + coeffs[k] * coeffs[k];
    }
    let mut noise = 0.0;
    (1..=cap.min(n))
        .map(|k| {
            let s = efpag_noise_std(k - 1, n, sigma);
            noise += s * s;
            -math::sqrt(tail[k] + noise)
        })
        .collect()
}

/// Keeps the first `kappa` orthonormal DCT coefficients of `row`.
pub fn truncate_dct(row: &[f64], kappa: usize) -> Vec<f64> {
    let plan = DctPlan::new(row.len());
    let mut c = plan.forward(row);
    for v in c.iter_mut().skip(kappa) {
        *v = 0.0;
    }
    plan.inverse(&c)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn efpag_row<R: Rng + ?Sized>(
    row: &[f64],
    plan: &DctPlan,
    cap: usize,
    eps_select: f64,
    l2: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut c = plan.forward(row);
    let scores = efpag_scores(&c, cap, sigma);
    let kappa = if l2 > 0.0 {
        exponential_select(&scores, eps_select, l2, rng)? + 1
    } else {
        // Zero sensitivity: any choice is private, take the best.
        scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(1, |(i, _)| i + 1)
    };
    let n = c.len();
    let mut polar = Polar::new();
    for (k, v) in c.iter_mut().enumerate() {
        if k >= kappa {
            *v = 0.0;
        } else if sigma >= NOISE_FLOOR {
            *v += polar.sample(efpag_noise_std(k, n, sigma), rng);
        }
    }
    Ok(plan.inverse(&c))
}
