//! Maximum-likelihood two-qubit state reconstruction from joint projector probabilities.
//!
//! The state is parameterized as `ρ = T†T / Tr(T†T)` with T lower triangular
//! (see [`density_from_params`]), so every candidate is a valid density matrix.
//! The negative log-likelihood is minimized by BFGS from several random starts.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    density_from_params, gram_of_factor, joint_projector, lower_triangular_factor, CMatrix,
    DensityMatrix, ProjectorSetting, C64, DENSITY_PARAMS,
};

/// One measured joint projector `P(a) ⊗ P(b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographyRow {
    pub setting_a: ProjectorSetting,
    pub setting_b: ProjectorSetting,
    pub probability: f64,
    pub sigma: f64,
    /// Number of trials behind `probability`; only used by the Poisson likelihood.
    pub trials: Option<f64>,
}

/// How measured probabilities relate to `Tr(ρ·Π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Probabilities are conditional on the measurement basis: the four outcomes of a
    /// complete product basis sum to one, so the model is `Tr(ρ·Π)` directly.
    #[default]
    PerBasis,
    /// Model is `scale · Tr(ρ·Π)`.
    Scaled(f64),
}

impl Normalization {
    fn factor(self) -> f64 {
        match self {
            Normalization::PerBasis => 1.0,
            Normalization::Scaled(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyInput {
    pub rows: Vec<TomographyRow>,
    pub normalization: Normalization,
}

impl TomographyInput {
    pub fn new(rows: Vec<TomographyRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.probability) {
                return Err(Error::invalid(format!(
                    "row {i}: probability {} outside [0, 1]",
                    r.probability
                )));
            }
            if !(r.sigma >= 0.0) {
                return Err(Error::invalid(format!("row {i}: negative sigma {}", r.sigma)));
            }
        }
        Ok(Self {
            rows,
            normalization: Normalization::PerBasis,
        })
    }

    /// Exact model probabilities of `rho` for the given settings (sigma set to `sigma`).
    pub fn from_state(
        rho: &DensityMatrix,
        settings: &[(ProjectorSetting, ProjectorSetting)],
        sigma: f64,
    ) -> Self {
        let rows = settings
            .iter()
            .map(|&(a, b)| TomographyRow {
                setting_a: a,
                setting_b: b,
                probability: rho.expectation(&joint_projector(a, b)).clamp(0.0, 1.0),
                sigma,
                trials: None,
            })
            .collect();
        Self {
            rows,
            normalization: Normalization::PerBasis,
        }
    }

    /// Reads the `setting_a,setting_b,probability,sigma` CSV format. Lines starting with
    /// `#` are comments.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        crate::error::require_content(text, origin)?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let expected = ["setting_a", "setting_b", "probability", "sigma"];
        if headers.len() < 4 || headers.iter().take(4).ne(expected.iter().copied()) {
            return Err(parse_err(
                1,
                format!("expected header `{}`", expected.join(",")),
            ));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() < 4 {
                return Err(parse_err(line, format!("expected 4 fields, got {}", rec.len())));
            }
            let setting = |i: usize| -> Result<ProjectorSetting> {
                rec[i].parse().map_err(|e: Error| parse_err(line, e.to_string()))
            };
            let number = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("`{}` is not a number", &rec[i])))
            };
            let row = TomographyRow {
                setting_a: setting(0)?,
                setting_b: setting(1)?,
                probability: number(2)?,
                sigma: number(3)?,
                trials: if rec.len() > 4 && !rec[4].is_empty() {
                    Some(number(4)?)
                } else {
                    None
                },
            };
            if !(0.0..=1.0).contains(&row.probability) || !(row.sigma >= 0.0) {
                return Err(parse_err(line, "probability must be in [0,1] and sigma ≥ 0".into()));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(origin.to_string()));
        }
        Ok(Self {
            rows,
            normalization: Normalization::PerBasis,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting_a,setting_b,probability,sigma\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.setting_a, r.setting_b, r.probability, r.sigma
            ));
        }
        out
    }
}

/// Likelihood used for the fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Gaussian residuals with equal weight for every row.
    #[default]
    Uniform,
    /// Gaussian residuals weighted by `1/σᵢ²`.
    SigmaWeighted,
    /// Poisson counts `nᵢ = pᵢ·Nᵢ` with `Nᵢ` taken from each row's `trials`.
    Poisson,
}

#[derive(Clone, Debug)]
pub struct MleOptions {
    pub likelihood: Likelihood,
    pub starts: usize,
    pub seed: u64,
    /// Stop when the objective changes by less than this between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            likelihood: Likelihood::Uniform,
            starts: 20,
            seed: 0x5eed,
            tolerance: 1e-10,
            max_iterations: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub rho: DensityMatrix,
    /// Final negative log-likelihood (up to constants).
    pub residual: f64,
    pub params: [f64; DENSITY_PARAMS],
    pub converged_starts: usize,
}

/// `Re Tr(ρ Πᵢ)` for all rows as a dense linear map on `(Re ρ, Im ρ)`.
struct Design {
    /// Row-major, `rows × 32`.
    coeffs: Vec<f64>,
    projectors: Vec<CMatrix>,
    rows: usize,
}

impl Design {
    fn new(input: &TomographyInput) -> Self {
        let scale = input.normalization.factor();
        let projectors: Vec<CMatrix> = input
            .rows
            .iter()
            .map(|r| joint_projector(r.setting_a, r.setting_b).scale_re(scale))
            .collect();
        let mut coeffs = Vec::with_capacity(projectors.len() * 32);
        for p in &projectors {
            // Re Tr(ρΠ) = Σ_jk Re ρ_jk Re Π_kj − Im ρ_jk Im Π_kj
            for j in 0..4 {
                for k in 0..4 {
                    coeffs.push(p[(k, j)].re);
                }
            }
            for j in 0..4 {
                for k in 0..4 {
                    coeffs.push(-p[(k, j)].im);
                }
            }
        }
        Self {
            coeffs,
            rows: projectors.len(),
            projectors,
        }
    }

    fn predict(&self, rho: &CMatrix, out: &mut [f64]) {
        let data = rho.as_slice();
        let mut x = [0.0; 32];
        for (i, z) in data.iter().enumerate() {
            x[i] = z.re;
            x[16 + i] = z.im;
        }
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &self.coeffs[i * 32..(i + 1) * 32];
            *o = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
    }
}

const GAUGE_WEIGHT: f64 = 1e-3;
const MIN_PROB: f64 = 1e-12;

/// Negative log-likelihood over the Cholesky parameters.
pub(crate) struct Objective<'a> {
    design: Design,
    input: &'a TomographyInput,
    weights: Vec<f64>,
    likelihood: Likelihood,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(input: &'a TomographyInput, likelihood: Likelihood) -> Result<Self> {
        let weights = match likelihood {
            Likelihood::Uniform => vec![1.0; input.rows.len()],
            Likelihood::SigmaWeighted => input
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    if r.sigma > 0.0 {
                        Ok(1.0 / (r.sigma * r.sigma))
                    } else {
                        Err(Error::invalid(format!(
                            "row {i}: sigma must be positive for sigma-weighted fitting"
                        )))
                    }
                })
                .collect::<Result<_>>()?,
            Likelihood::Poisson => input
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    r.trials.filter(|&n| n > 0.0).ok_or_else(|| {
                        Error::invalid(format!("row {i}: Poisson likelihood needs a trial count"))
                    })
                })
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            design: Design::new(input),
            input,
            weights,
            likelihood,
        })
    }

    /// Returns the objective and, for each row, its derivative with respect to the model probability.
    fn value_and_residuals(&self, model: &[f64], dm: &mut [f64]) -> f64 {
        let mut f = 0.0;
        for (i, row) in self.input.rows.iter().enumerate() {
            let w = self.weights[i];
            let m = model[i];
            match self.likelihood {
                Likelihood::Uniform | Likelihood::SigmaWeighted => {
                    let r = m - row.probability;
                    f += 0.5 * w * r * r;
                    dm[i] = w * r;
                }
                Likelihood::Poisson => {
                    let counts = row.probability * w;
                    let m = m.max(MIN_PROB);
                    f += w * m - counts * (w * m).ln();
                    dm[i] = w - counts / m;
                }
            }
        }
        f
    }

    #[cfg(test)]
    fn value(&self, t: &[f64; DENSITY_PARAMS]) -> f64 {
        let mut g = [0.0; DENSITY_PARAMS];
        self.value_grad(t, &mut g, false)
    }

    /// Objective value; fills `grad` when `want_grad` is set.
    pub(crate) fn value_grad(
        &self,
        t: &[f64; DENSITY_PARAMS],
        grad: &mut [f64; DENSITY_PARAMS],
        want_grad: bool,
    ) -> f64 {
        let gram = gram_of_factor(t);
        let tr = gram.trace().re;
        let norm2: f64 = t.iter().map(|x| x * x).sum();
        let gauge = GAUGE_WEIGHT * (norm2 - 1.0).powi(2);
        if !(tr > 1e-300) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::INFINITY;
        }
        let rho = gram.scale_re(1.0 / tr);
        let n = self.design.rows;
        let mut model = vec![0.0; n];
        let mut dm = vec![0.0; n];
        self.design.predict(&rho, &mut model);
        let f = self.value_and_residuals(&model, &mut dm) + gauge;
        if !want_grad {
            return f;
        }
        // Q = Σ dmᵢ Πᵢ ; Q̃ = (Q − Tr(ρQ)·I)/Tr(G) ; ∂f/∂T_ij = 2·(Q̃ T†)_ji
        let mut q = CMatrix::zeros(4);
        for (w, p) in dm.iter().zip(&self.design.projectors) {
            if *w != 0.0 {
                q = &q + &p.scale_re(*w);
            }
        }
        let c = rho.trace_product_re(&q);
        let mut qt = q;
        for i in 0..4 {
            qt[(i, i)] -= C64::new(c, 0.0);
        }
        let qt = qt.scale_re(1.0 / tr);
        let factor = lower_triangular_factor(t);
        let m = &qt * &factor.adjoint();
        for i in 0..4 {
            grad[i] = 2.0 * m[(i, i)].re;
        }
        let mut k = 4;
        for i in 1..4 {
            for j in 0..i {
                let z = m[(j, i)];
                grad[k] = 2.0 * z.re;
                grad[k + 1] = -2.0 * z.im;
                k += 2;
            }
        }
        let gscale = 4.0 * GAUGE_WEIGHT * (norm2 - 1.0);
        for (g, x) in grad.iter_mut().zip(t) {
            *g += gscale * x;
        }
        f
    }
}

struct LocalResult {
    params: [f64; DENSITY_PARAMS],
    value: f64,
    converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking.
fn bfgs(obj: &Objective, start: [f64; DENSITY_PARAMS], tol: f64, max_iter: usize) -> LocalResult {
    const N: usize = DENSITY_PARAMS;
    let mut x = start;
    let mut g = [0.0; N];
    let mut f = obj.value_grad(&x, &mut g, true);
    let mut h = vec![[0.0; N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut converged = false;
    let mut small_steps = 0;
    for _ in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-12 {
            converged = true;
            break;
        }
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            // Lost descent direction; restart from steepest descent.
            for (i, row) in h.iter_mut().enumerate() {
                *row = [0.0; N];
                row[i] = 1.0;
            }
            for i in 0..N {
                d[i] = -g[i];
            }
            slope = -gnorm * gnorm;
        }
        let mut step = 1.0;
        let mut x_new = x;
        let mut g_new = [0.0; N];
        let mut f_new;
        loop {
            for i in 0..N {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = obj.value_grad(&x_new, &mut g_new, true);
            if f_new <= f + 1e-4 * step * slope || step < 1e-16 {
                break;
            }
            step *= 0.5;
        }
        if !(f_new <= f) {
            converged = (f - f_new).abs() < tol;
            break;
        }
        let s: Vec<f64> = (0..N).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..N).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..N).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..N {
                for j in 0..N {
                    h[i][j] += (1.0 + yhy * rho) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let change = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        if change < tol {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    LocalResult {
        params: x,
        value: f,
        converged,
    }
}

fn random_start(rng: &mut ChaCha8Rng) -> [f64; DENSITY_PARAMS] {
    let mut t = [0.0; DENSITY_PARAMS];
    for x in t.iter_mut() {
        *x = StandardNormal.sample(rng);
    }
    let norm = dot(&t, &t).sqrt();
    t.iter_mut().for_each(|x| *x /= norm);
    t
}

/// Maximum-likelihood density matrix for the measured joint probabilities.
pub fn tomography_mle(input: &TomographyInput, opts: &MleOptions) -> Result<MleResult> {
    if input.rows.len() < 16 {
        return Err(Error::invalid(format!(
            "tomography needs at least 16 joint projectors, got {}",
            input.rows.len()
        )));
    }
    let obj = Objective::new(input, opts.likelihood)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<LocalResult> = None;
    let mut converged_starts = 0;
    for k in 0..opts.starts.max(1) {
        let start = if k == 0 {
            // maximally mixed state
            let mut t = [0.0; DENSITY_PARAMS];
            t[..4].copy_from_slice(&[0.5; 4]);
            t
        } else {
            random_start(&mut rng)
        };
        let local = bfgs(&obj, start, opts.tolerance, opts.max_iterations);
        if local.converged {
            converged_starts += 1;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                (local.converged && !b.converged)
                    || (local.converged == b.converged && local.value < b.value)
            }
        };
        if better {
            best = Some(local);
        }
    }
    let best = best.expect("at least one start");
    if converged_starts == 0 {
        return Err(Error::Estimation {
            msg: format!("no MLE start converged within {} iterations", opts.max_iterations),
            residual: best.value,
        });
    }
    let rho = density_from_params(&best.params)?;
    Ok(MleResult {
        residual: best.value - GAUGE_WEIGHT * (dot(&best.params, &best.params) - 1.0).powi(2),
        rho,
        params: best.params,
        converged_starts,
    })
}

/// The 36 product projectors built from the six Pauli eigenstates on each qubit.
pub fn pauli_product_settings() -> Vec<(ProjectorSetting, ProjectorSetting)> {
    use ProjectorSetting::*;
    let single = [Z, ZMinus, X, XMinus, Y, YMinus];
    single
        .iter()
        .flat_map(|&a| single.iter().map(move |&b| (a, b)))
        .collect()
}
