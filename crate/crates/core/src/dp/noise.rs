//! Seeded Laplace and Gaussian samplers.

use rand::Rng;

use crate::math;
use crate::{Error, Result};

/// Inverse-CDF Laplace transform of a uniform `u` in `(-1/2, 1/2)`:
/// `x = -b * sign(u) * ln(1 - 2|u|)`.
#[inline]
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    let mag = -scale * math::ln(1.0 - 2.0 * math::abs(u));
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

#[inline]
pub(crate) fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    loop {
        let u = rng.gen::<f64>() - 0.5;
        // u = -0.5 maps to an infinite draw.
        if u > -0.5 {
            return laplace_from_uniform(scale, u);
        }
    }
}

/// One Laplace(0, `scale`) draw.
pub fn laplace_sample<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NonPositiveScale(scale));
    }
    Ok(laplace(scale, rng))
}

/// Standard normal draws by the polar method, caching the second variate.
#[derive(Debug, Default, Clone)]
pub struct Polar {
    spare: Option<f64>,
}

impl Polar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn standard<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * rng.gen::<f64>() - 1.0;
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = math::sqrt(-2.0 * math::ln(s) / s);
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) -> f64 {
        sigma * self.standard(rng)
    }
}

/// One Normal(0, `sigma`²) draw.
pub fn gaussian_sample<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveScale(sigma));
    }
    Ok(Polar::new().sample(sigma, rng))
}

/// Gaussian-mechanism standard deviation at the bound
/// `sqrt(2 ln(2/δ)) / ε * Δ₂`.
pub fn gaussian_sigma(epsilon: f64, delta: f64, l2: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidMechanism(alloc::format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidMechanism(alloc::format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(math::sqrt(2.0 * math::ln(2.0 / delta)) / epsilon * l2)
}
