//! Monte-Carlo error propagation through the tomography reconstruction.
//!
//! Each trial resamples every measured probability from a Gaussian with the row's σ,
//! truncated to `[0, 1]`, reruns the MLE and evaluates the metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{entanglement_of_formation, concurrence, fidelity, fidelity_with_pure, purity};
use super::tomography::{tomography_mle, MleOptions, TomographyInput};
use super::Estimate;
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Ket};
use crate::numeric::mean_std;

pub const MIN_TRIALS: usize = 100;
/// Fraction of failed trials above which the whole estimate is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FidelityPhiPlus,
    Purity,
    Concurrence,
    EntanglementOfFormation,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::FidelityPhiPlus,
        Metric::Purity,
        Metric::Concurrence,
        Metric::EntanglementOfFormation,
    ];

    pub fn evaluate(self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            Metric::FidelityPhiPlus => Ok(fidelity_with_pure(rho, &Ket::phi_plus())),
            Metric::Purity => Ok(purity(rho)),
            Metric::Concurrence => concurrence(rho),
            Metric::EntanglementOfFormation => entanglement_of_formation(rho),
        }
    }
}

/// Sample mean and standard deviation of each metric over the successful trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub fidelity_phi_plus: Estimate,
    pub purity: Estimate,
    pub concurrence: Estimate,
    pub entanglement_of_formation: Estimate,
}

impl MetricSummary {
    pub fn get(&self, metric: Metric) -> Estimate {
        match metric {
            Metric::FidelityPhiPlus => self.fidelity_phi_plus,
            Metric::Purity => self.purity,
            Metric::Concurrence => self.concurrence,
            Metric::EntanglementOfFormation => self.entanglement_of_formation,
        }
    }

    fn from_samples(samples: &[[f64; 4]]) -> Self {
        let stat = |k: usize| {
            let xs: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let (m, s) = mean_std(&xs);
            Estimate::new(m, s)
        };
        Self {
            fidelity_phi_plus: stat(0),
            purity: stat(1),
            concurrence: stat(2),
            entanglement_of_formation: stat(3),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub trials: usize,
    pub seed: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0x4d43,
        }
    }
}

fn truncated_gaussian(rng: &mut ChaCha8Rng, mean: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sigma).expect("positive sigma");
    for _ in 0..1000 {
        let x = normal.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    rng.random_range(0.0..=1.0)
}

/// One resampled copy of the measured probabilities.
pub fn resample(input: &TomographyInput, rng: &mut ChaCha8Rng) -> TomographyInput {
    let mut out = input.clone();
    for row in out.rows.iter_mut() {
        row.probability = truncated_gaussian(rng, row.probability, row.sigma);
    }
    out
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn metric_values(rho: &DensityMatrix) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (o, m) in out.iter_mut().zip(Metric::ALL) {
        *o = m.evaluate(rho)?;
    }
    Ok(out)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!(
            "Monte-Carlo needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

fn check_failures(failures: usize, trials: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_FRACTION * trials as f64 {
        return Err(Error::Estimation {
            msg: format!("{failures} of {trials} Monte-Carlo trials failed"),
            residual: f64::NAN,
        });
    }
    Ok(())
}

/// Mean and standard deviation of every metric under resampling of `input`.
pub fn monte_carlo_metrics(
    input: &TomographyInput,
    mle: &MleOptions,
    mc: &MonteCarloOptions,
) -> Result<MetricSummary> {
    check_trials(mc.trials)?;
    let results: Vec<Result<[f64; 4]>> = (0..mc.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(mc.seed, k);
            let sample = resample(input, &mut rng);
            let rho = tomography_mle(&sample, mle)?.rho;
            metric_values(&rho)
        })
        .collect();
    let ok: Vec<[f64; 4]> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    check_failures(mc.trials - ok.len(), mc.trials)?;
    Ok(MetricSummary::from_samples(&ok))
}

/// Mean and standard deviation of a single metric.
pub fn monte_carlo_uncertainty(
    input: &TomographyInput,
    metric: Metric,
    mle: &MleOptions,
    mc: &MonteCarloOptions,
) -> Result<Estimate> {
    Ok(monte_carlo_metrics(input, mle, mc)?.get(metric))
}

/// Joint resampling of two independent data sets, adding the fidelity between the two
/// reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub first: MetricSummary,
    pub second: MetricSummary,
    pub mutual_fidelity: Estimate,
}

pub fn monte_carlo_pair(
    first: &TomographyInput,
    second: &TomographyInput,
    mle: &MleOptions,
    mc: &MonteCarloOptions,
) -> Result<PairSummary> {
    check_trials(mc.trials)?;
    let results: Vec<Result<([f64; 4], [f64; 4], f64)>> = (0..mc.trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(mc.seed, k);
            let s1 = resample(first, &mut rng);
            let s2 = resample(second, &mut rng);
            let r1 = tomography_mle(&s1, mle)?.rho;
            let r2 = tomography_mle(&s2, mle)?.rho;
            Ok((metric_values(&r1)?, metric_values(&r2)?, fidelity(&r1, &r2)?))
        })
        .collect();
    let ok: Vec<_> = results.into_iter().filter_map(|r| r.ok()).collect();
    check_failures(mc.trials - ok.len(), mc.trials)?;
    let a: Vec<[f64; 4]> = ok.iter().map(|r| r.0).collect();
    let b: Vec<[f64; 4]> = ok.iter().map(|r| r.1).collect();
    let f: Vec<f64> = ok.iter().map(|r| r.2).collect();
    let (fm, fs) = mean_std(&f);
    Ok(PairSummary {
        first: MetricSummary::from_samples(&a),
        second: MetricSummary::from_samples(&b),
        mutual_fidelity: Estimate::new(fm, fs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::tomography::pauli_product_settings;

    fn werner_input(sigma: f64) -> TomographyInput {
        let w = DensityMatrix::werner(0.8).unwrap();
        TomographyInput::from_state(&w, &pauli_product_settings(), sigma)
    }

    fn fast_mle() -> MleOptions {
        MleOptions {
            starts: 3,
            ..MleOptions::default()
        }
    }

    #[test]
    fn zero_sigma_gives_zero_spread() {
        let mc = MonteCarloOptions { trials: 100, seed: 1 };
        let s = monte_carlo_metrics(&werner_input(0.0), &fast_mle(), &mc).unwrap();
        for m in Metric::ALL {
            assert!(s.get(m).sigma < 1e-6, "{m:?}: {:?}", s.get(m));
        }
    }

    #[test]
    fn spread_grows_with_input_sigma() {
        let mc = MonteCarloOptions { trials: 100, seed: 2 };
        let small = monte_carlo_uncertainty(&werner_input(0.01), Metric::Purity, &fast_mle(), &mc).unwrap();
        let large = monte_carlo_uncertainty(&werner_input(0.02), Metric::Purity, &fast_mle(), &mc).unwrap();
        assert!(large.sigma > small.sigma, "{small:?} vs {large:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let mc = MonteCarloOptions { trials: 100, seed: 3 };
        let a = monte_carlo_metrics(&werner_input(0.01), &fast_mle(), &mc).unwrap();
        let b = monte_carlo_metrics(&werner_input(0.01), &fast_mle(), &mc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_trials_rejected() {
        let mc = MonteCarloOptions { trials: 10, seed: 3 };
        assert!(monte_carlo_metrics(&werner_input(0.01), &fast_mle(), &mc).is_err());
    }

    #[test]
    fn resampling_stays_in_unit_interval() {
        let mut input = werner_input(0.5);
        input.rows[0].probability = 0.0;
        let mut rng = trial_rng(9, 0);
        for _ in 0..200 {
            let s = resample(&input, &mut rng);
            assert!(s.rows.iter().all(|r| (0.0..=1.0).contains(&r.probability)));
        }
    }
}
