//! Normalized cross-correlation `g²₁₂(δt)` from a coincidence histogram.

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::detection::CoincidenceHistogram;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct G2Options {
    /// Spacing of the accidental reference peaks (pump repetition period), ps.
    pub rep_period_ps: f64,
    pub peak_halfwidth_ps: f64,
    /// Reference peaks at `δt + n·rep_period` for `n ∈ [n_min, n_max] \ {0}`.
    pub n_min: i64,
    pub n_max: i64,
}

impl Default for G2Options {
    fn default() -> Self {
        Self {
            rep_period_ps: 12_500.0,
            peak_halfwidth_ps: 500.0,
            n_min: -5,
            n_max: 5,
        }
    }
}

/// `g² = R(δt) / ⟨R(δt + n·T)⟩ₙ` with `σ = g·√(1/R + 1/ΣRₙ)`.
///
/// When `R(δt) = 0` the relative error is undefined; the uncertainty of a single count,
/// `1/⟨Rₙ⟩`, is reported instead.
pub fn g2_cross(h: &CoincidenceHistogram, dt_ps: f64, opts: &G2Options) -> Result<Estimate> {
    if opts.n_min > opts.n_max {
        return Err(Error::invalid("empty reference range"));
    }
    let refs: Vec<i64> = (opts.n_min..=opts.n_max).filter(|&n| n != 0).collect();
    if refs.is_empty() {
        return Err(Error::invalid("reference range must contain n ≠ 0"));
    }
    let r = h.coincidence_rate(dt_ps, opts.peak_halfwidth_ps)? as f64;
    let mut sum_ref = 0.0;
    for &n in &refs {
        sum_ref += h.coincidence_rate(dt_ps + n as f64 * opts.rep_period_ps, opts.peak_halfwidth_ps)? as f64;
    }
    if sum_ref == 0.0 {
        return Err(Error::UndefinedEstimate(format!(
            "no accidental reference counts around δt = {dt_ps} ps"
        )));
    }
    let mean_ref = sum_ref / refs.len() as f64;
    let g = r / mean_ref;
    let sigma = if r > 0.0 {
        g * (1.0 / r + 1.0 / sum_ref).sqrt()
    } else {
        1.0 / mean_ref
    };
    Ok(Estimate::new(g, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(signal: u64, background: u64) -> CoincidenceHistogram {
        let mut h = CoincidenceHistogram::new(80, 100_000).unwrap();
        for n in -5..=5i64 {
            let dt = 26_000 + n * 12_500;
            let c = if n == 0 { signal } else { background };
            for _ in 0..c {
                h.add(dt);
            }
        }
        h
    }

    #[test]
    fn ratio_by_construction() {
        let g = g2_cross(&synthetic(300, 10), 26_000.0, &G2Options::default()).unwrap();
        assert!((g.value - 30.0).abs() < 1e-12);
        let expected = 30.0 * (1.0 / 300.0 + 1.0 / 100.0f64).sqrt();
        assert!((g.sigma - expected).abs() < 1e-12);
    }

    #[test]
    fn no_reference_counts_is_undefined() {
        let err = g2_cross(&synthetic(5, 0), 26_000.0, &G2Options::default()).unwrap_err();
        assert!(matches!(err, Error::UndefinedEstimate(_)));
    }

    #[test]
    fn reference_peaks_must_lie_in_span() {
        let h = synthetic(5, 5);
        let opts = G2Options {
            n_max: 7,
            ..G2Options::default()
        };
        assert!(matches!(g2_cross(&h, 26_000.0, &opts), Err(Error::InvalidArgument(_))));
        let only_zero = G2Options {
            n_min: 0,
            n_max: 0,
            ..G2Options::default()
        };
        assert!(g2_cross(&h, 26_000.0, &only_zero).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn invariant_under_count_scaling(signal in 0u64..500, bg in 1u64..50, k in 2u64..20) {
            let h = synthetic(signal, bg);
            let a = g2_cross(&h, 26_000.0, &G2Options::default()).unwrap();
            let b = g2_cross(&h.scaled(k), 26_000.0, &G2Options::default()).unwrap();
            prop_assert!((a.value - b.value).abs() <= 1e-12 * a.value.max(1.0));
            if signal > 0 {
                prop_assert!(b.sigma < a.sigma);
            }
        }
    }
}
