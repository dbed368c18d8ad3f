//! Interference-fringe visibility from an analyzer phase sweep.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::error::{Error, Result};
use crate::numeric::{invert, solve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: Estimate,
    /// Phase of the fringe maximum, radians in `[0, 2π)`.
    pub phase_offset: Estimate,
    pub mean_level: Estimate,
    /// Set when the fringe amplitude is indistinguishable from zero, so that
    /// `phase_offset` carries no information.
    pub phase_unidentifiable: bool,
    pub residual_rms: f64,
}

/// Least-squares fit of `N(θ) = N₀·(1 + V·cos(θ − θ₀))`.
///
/// The model is linear in `(N₀, N₀V cos θ₀, N₀V sin θ₀)`, so it is solved directly and
/// the uncertainties follow from the parameter covariance.
pub fn visibility_fit(sweep: &[(f64, f64)]) -> Result<VisibilityFit> {
    if sweep.len() < 6 {
        return Err(Error::invalid(format!(
            "visibility fit needs at least 6 phase points, got {}",
            sweep.len()
        )));
    }
    let lo = sweep.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = sweep.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= PI {
        return Err(Error::invalid("phase points must span more than π"));
    }
    let mut ata = vec![vec![0.0; 3]; 3];
    let mut atb = vec![0.0; 3];
    for &(theta, n) in sweep {
        let row = [1.0, theta.cos(), theta.sin()];
        for i in 0..3 {
            atb[i] += row[i] * n;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let p = solve(ata.clone(), atb).ok_or_else(|| Error::Fit {
        msg: "degenerate phase sampling".into(),
        residual: f64::NAN,
    })?;
    let (n0, c, s) = (p[0], p[1], p[2]);
    let ss: f64 = sweep
        .iter()
        .map(|&(t, n)| (n - n0 - c * t.cos() - s * t.sin()).powi(2))
        .sum();
    let dof = (sweep.len() - 3).max(1) as f64;
    let residual_var = ss / dof;
    let cov = invert(&ata).ok_or_else(|| Error::Fit {
        msg: "singular normal equations".into(),
        residual: ss.sqrt(),
    })?;
    let cov: Vec<Vec<f64>> = cov
        .iter()
        .map(|r| r.iter().map(|x| x * residual_var).collect())
        .collect();
    if n0 <= 0.0 {
        return Err(Error::Fit {
            msg: "non-positive mean level".into(),
            residual: ss.sqrt(),
        });
    }
    let amp = c.hypot(s);
    let v = amp / n0;
    let theta0 = s.atan2(c).rem_euclid(2.0 * PI);

    // Gradients for first-order propagation.
    let (dv, dt) = if amp > 0.0 {
        (
            [-amp / (n0 * n0), c / (amp * n0), s / (amp * n0)],
            [0.0, -s / (amp * amp), c / (amp * amp)],
        )
    } else {
        ([0.0; 3], [0.0; 3])
    };
    let quad = |g: &[f64; 3]| -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += g[i] * cov[i][j] * g[j];
            }
        }
        acc.max(0.0).sqrt()
    };
    let sigma_amp = quad(&[0.0, if amp > 0.0 { c / amp } else { 1.0 }, if amp > 0.0 { s / amp } else { 0.0 }]);
    let scale = n0.abs().max(1e-300);
    let unidentifiable = amp <= 1e-9 * scale || amp < 2.0 * sigma_amp;
    let v = if amp <= 1e-9 * scale { 0.0 } else { v.min(1.0) };
    Ok(VisibilityFit {
        visibility: Estimate::new(v, quad(&dv)),
        phase_offset: Estimate::new(if unidentifiable && v == 0.0 { 0.0 } else { theta0 }, quad(&dt)),
        mean_level: Estimate::new(n0, cov[0][0].max(0.0).sqrt()),
        phase_unidentifiable: unidentifiable,
        residual_rms: (ss / sweep.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
    }

    #[test]
    fn perfect_sinusoid() {
        let pts: Vec<(f64, f64)> = grid(16)
            .into_iter()
            .map(|t| (t, 100.0 * (1.0 + (t - 0.7).cos())))
            .collect();
        let fit = visibility_fit(&pts).unwrap();
        assert!((fit.visibility.value - 1.0).abs() < 1e-6);
        assert!((fit.phase_offset.value - 0.7).abs() < 1e-9);
        assert!((fit.mean_level.value - 100.0).abs() < 1e-9);
        assert!(!fit.phase_unidentifiable);
    }

    #[test]
    fn constant_data() {
        let pts: Vec<(f64, f64)> = grid(12).into_iter().map(|t| (t, 42.0)).collect();
        let fit = visibility_fit(&pts).unwrap();
        assert!(fit.visibility.value.abs() < 1e-12);
        assert!(fit.phase_unidentifiable);
    }

    #[test]
    fn input_validation() {
        let few: Vec<(f64, f64)> = grid(5).into_iter().map(|t| (t, 1.0 + t.cos())).collect();
        assert!(visibility_fit(&few).is_err());
        let narrow: Vec<(f64, f64)> = (0..10).map(|k| (k as f64 * 0.3, 1.0)).collect();
        assert!(visibility_fit(&narrow).is_err());
    }

    #[test]
    fn poisson_noise_within_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = grid(24)
            .into_iter()
            .map(|t| {
                let mean = 400.0 * (1.0 + 0.8 * (t - 1.0).cos());
                (t, Poisson::new(mean).unwrap().sample(&mut rng))
            })
            .collect();
        let fit = visibility_fit(&pts).unwrap();
        assert!(fit.visibility.deviation_sigmas(0.8) < 4.0, "{:?}", fit.visibility);
        assert!(fit.visibility.sigma > 0.0);
    }
}
