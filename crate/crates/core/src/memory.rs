//! Phenomenological atomic-frequency-comb (AFC) memory.
//!
//! A comb is an optical-depth profile made of Gaussian teeth on a flat background.
//! From it follow the recall efficiency of the primary echo, the echo delays (Fourier
//! analysis of the transmission profile), and the per-photon outcome probabilities
//! used by the event simulator.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::detection::{MemoryOutcome, Origin, PhotonEvent};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::numeric::solve;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Storage time `τ = 1/Δ` in ns for a tooth spacing in MHz.
pub fn storage_time_ns(delta_mhz: f64) -> f64 {
    1e3 / delta_mhz
}

/// Tooth spacing in MHz for a storage time in ns.
pub fn tooth_spacing_mhz(storage_ns: f64) -> f64 {
    1e3 / storage_ns
}

/// Recall efficiency of the primary echo,
/// `(d₁/F)² · e^{−d₁/F} · e^{−7/F²} · e^{−d₀}`.
pub fn device_efficiency(d0: f64, d1: f64, finesse: f64) -> f64 {
    let r = d1 / finesse;
    r * r * (-r).exp() * (-7.0 / (finesse * finesse)).exp() * (-d0).exp()
}

/// Parameters of a Gaussian-tooth comb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombParams {
    pub delta_mhz: f64,
    pub finesse: f64,
    pub d0: f64,
    pub d1: f64,
    pub bandwidth_ghz: f64,
    pub grid_step_mhz: f64,
    /// Relative height modulation of alternate teeth: heights `d₁·(1 ± m)`.
    #[serde(default)]
    pub modulation: f64,
}

impl CombParams {
    pub fn build(&self) -> Result<CombSpectrum> {
        build_comb_modulated(
            self.delta_mhz,
            self.finesse,
            self.d0,
            self.d1,
            self.bandwidth_ghz,
            self.grid_step_mhz,
            self.modulation,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombSpectrum {
    pub detuning_mhz: Vec<f64>,
    pub optical_depth: Vec<f64>,
    pub bandwidth_ghz: f64,
    pub delta_mhz: f64,
    pub d0: f64,
    pub d1: f64,
    pub finesse: f64,
    pub modulation: f64,
}

impl CombSpectrum {
    pub fn storage_time_ns(&self) -> f64 {
        storage_time_ns(self.delta_mhz)
    }

    pub fn teeth(&self) -> usize {
        (self.bandwidth_ghz * 1e3 / self.delta_mhz + 1e-6).floor() as usize
    }

    pub fn mean_optical_depth(&self) -> f64 {
        self.optical_depth.iter().sum::<f64>() / self.optical_depth.len() as f64
    }

    pub fn device_efficiency(&self) -> f64 {
        device_efficiency(self.d0, self.d1, self.finesse)
    }

    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.detuning_mhz
            .iter()
            .copied()
            .zip(self.optical_depth.iter().copied())
            .collect()
    }

    /// `detuning_MHz,optical_depth` CSV.
    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.samples())
    }
}

pub fn samples_to_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("detuning_MHz,optical_depth\n");
    for (x, y) in samples {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn write_comb_csv(samples: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(samples_to_csv(samples).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_comb_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_comb_csv(&text, &path.display().to_string())
}

pub fn parse_comb_csv(text: &str, origin: &str) -> Result<Vec<(f64, f64)>> {
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
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.iter().ne(["detuning_MHz", "optical_depth"]) {
        return Err(parse_err(1, "expected header `detuning_MHz,optical_depth`".into()));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let x: f64 = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad detuning `{}`", &rec[0])))?;
        let y: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad optical depth `{}`", &rec[1])))?;
        out.push((x, y));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(origin.to_string()));
    }
    Ok(out)
}

/// Comb with teeth of height `d₁` and FWHM `Δ/F` at every positive multiple of `Δ`
/// inside a `[0, bandwidth)` detuning grid.
pub fn build_comb(
    delta_mhz: f64,
    finesse: f64,
    d0: f64,
    d1: f64,
    bandwidth_ghz: f64,
    grid_step_mhz: f64,
) -> Result<CombSpectrum> {
    build_comb_modulated(delta_mhz, finesse, d0, d1, bandwidth_ghz, grid_step_mhz, 0.0)
}

/// As [`build_comb`], with odd teeth of height `d₁(1 − m)` and even teeth `d₁(1 + m)`.
pub fn build_comb_modulated(
    delta_mhz: f64,
    finesse: f64,
    d0: f64,
    d1: f64,
    bandwidth_ghz: f64,
    grid_step_mhz: f64,
    modulation: f64,
) -> Result<CombSpectrum> {
    if !(delta_mhz > 0.0) || !(finesse > 1.0) {
        return Err(Error::invalid("comb needs Δ > 0 and F > 1"));
    }
    if !(d0 >= 0.0) || !(d1 >= 0.0) {
        return Err(Error::invalid("optical depths must be non-negative"));
    }
    if !(0.0..=1.0).contains(&modulation) {
        return Err(Error::invalid("tooth modulation must be in [0, 1]"));
    }
    let bandwidth_mhz = bandwidth_ghz * 1e3;
    if !(bandwidth_mhz >= delta_mhz) {
        return Err(Error::invalid("bandwidth must cover at least one tooth spacing"));
    }
    let max_step = delta_mhz / (4.0 * finesse);
    if !(grid_step_mhz > 0.0) || grid_step_mhz > max_step * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "grid step {grid_step_mhz} MHz cannot resolve teeth of width {:.4} MHz (need ≤ {max_step:.4} MHz)",
            delta_mhz / finesse
        )));
    }
    let n = (bandwidth_mhz / grid_step_mhz).round() as usize;
    let detuning: Vec<f64> = (0..n).map(|j| j as f64 * grid_step_mhz).collect();
    let teeth = (bandwidth_mhz / delta_mhz + 1e-6).floor() as i64;
    let od = comb_profile(&detuning, delta_mhz, finesse, d0, d1, modulation, teeth);
    Ok(CombSpectrum {
        detuning_mhz: detuning,
        optical_depth: od,
        bandwidth_ghz,
        delta_mhz,
        d0,
        d1,
        finesse,
        modulation,
    })
}

fn comb_profile(
    detuning: &[f64],
    delta: f64,
    finesse: f64,
    d0: f64,
    d1: f64,
    modulation: f64,
    teeth: i64,
) -> Vec<f64> {
    let sigma = delta / finesse / FWHM_PER_SIGMA;
    let reach = 8.0 * sigma;
    detuning
        .iter()
        .map(|&nu| {
            let lo = (((nu - reach) / delta).floor() as i64).max(1);
            let hi = (((nu + reach) / delta).ceil() as i64).min(teeth);
            let mut od = d0;
            for k in lo..=hi {
                let x = (nu - k as f64 * delta) / sigma;
                let h = if k % 2 == 0 { 1.0 + modulation } else { 1.0 - modulation };
                od += d1 * h * (-0.5 * x * x).exp();
            }
            od
        })
        .collect()
}

/// One echo of the memory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub delay_ns: f64,
    /// Fourier magnitude relative to the strongest echo.
    pub magnitude: f64,
    /// Squared relative magnitude; recall probabilities scale with it.
    pub amplitude: f64,
}

/// Default relative magnitude below which Fourier peaks are not reported.
pub const ECHO_THRESHOLD: f64 = 0.05;

/// Echo delays from the Fourier transform of the transmission `e^{−OD}`.
///
/// The profile is mean-subtracted and transformed over the full grid; time bins are
/// `1/bandwidth` wide. Local maxima whose magnitude exceeds `threshold` times the
/// largest one are returned, ordered by delay, with sub-bin parabolic refinement.
pub fn echo_response(comb: &CombSpectrum, threshold: f64) -> Vec<Echo> {
    let step = comb.detuning_mhz.get(1).map(|x| x - comb.detuning_mhz[0]).unwrap_or(1.0);
    echo_response_samples(&comb.optical_depth, step, threshold)
}

pub(crate) fn echo_response_samples(optical_depth: &[f64], step_mhz: f64, threshold: f64) -> Vec<Echo> {
    let n = optical_depth.len();
    if n < 4 {
        return Vec::new();
    }
    let transmission: Vec<f64> = optical_depth.iter().map(|d| (-d).exp()).collect();
    let mean = transmission.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = transmission.iter().map(|t| C64::new(t - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().take(n / 2 + 1).map(|z| z.norm()).collect();
    let max = mag.iter().skip(1).cloned().fold(0.0, f64::max);
    if max <= 1e-12 * n as f64 {
        return Vec::new();
    }
    let bin_ns = 1e3 / (n as f64 * step_mhz);
    let mut echoes = Vec::new();
    for k in 2..mag.len().saturating_sub(1) {
        let m = mag[k];
        if m < threshold * max || m < mag[k - 1] || m <= mag[k + 1] {
            continue;
        }
        let (a, b, c) = (mag[k - 1], m, mag[k + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let rel = m / max;
        echoes.push(Echo {
            delay_ns: (k as f64 + shift.clamp(-0.5, 0.5)) * bin_ns,
            magnitude: rel,
            amplitude: rel * rel,
        });
    }
    echoes
}

/// [`echo_response`] for a measured spectrum on a uniform detuning grid.
pub fn echo_response_from_samples(samples: &[(f64, f64)], threshold: f64) -> Result<Vec<Echo>> {
    if samples.len() < 4 {
        return Err(Error::invalid("echo analysis needs at least 4 samples"));
    }
    let step = samples[1].0 - samples[0].0;
    let uniform = samples
        .windows(2)
        .all(|w| ((w[1].0 - w[0].0) - step).abs() <= 1e-6 * step.abs().max(1e-12));
    if !(step > 0.0) || !uniform {
        return Err(Error::invalid("echo analysis needs a uniform, increasing detuning grid"));
    }
    let od: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(echo_response_samples(&od, step, threshold))
}

/// `delay_ns,amplitude,magnitude`
pub fn echoes_to_csv(echoes: &[Echo]) -> String {
    let mut out = String::from("delay_ns,amplitude,magnitude\n");
    for e in echoes {
        out += &format!("{},{},{}\n", e.delay_ns, e.amplitude, e.magnitude);
    }
    out
}

pub fn parse_echoes_csv(text: &str, origin: &str) -> Result<Vec<Echo>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<Echo>()
        .map(|r| {
            r.map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Fitted comb parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombFit {
    pub d0: f64,
    pub d1: f64,
    pub finesse: f64,
    pub delta_mhz: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of the Gaussian-tooth model to `(detuning MHz, optical depth)`
/// samples (Levenberg–Marquardt on `d₀, d₁, F, Δ`).
pub fn fit_comb(samples: &[(f64, f64)]) -> Result<CombFit> {
    if samples.len() < 20 {
        return Err(Error::invalid("comb fit needs at least 20 samples"));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("comb samples must be strictly increasing in detuning"));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let x_max = *x.last().expect("non-empty");
    let init = initial_guess(&x, &y)?;
    let model = |p: &[f64; 4]| -> Vec<f64> {
        let teeth = ((x_max + 0.5 * p[3]) / p[3]).floor() as i64;
        comb_profile(&x, p[3], p[2], p[0], p[1], 0.0, teeth)
    };
    let cost = |p: &[f64; 4]| -> f64 {
        model(p).iter().zip(&y).map(|(m, v)| (m - v).powi(2)).sum()
    };
    let mut p = init;
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        let base = model(&p);
        let r: Vec<f64> = base.iter().zip(&y).map(|(m, v)| m - v).collect();
        let mut jac = vec![vec![0.0; x.len()]; 4];
        for (i, col) in jac.iter_mut().enumerate() {
            let h = 1e-6 * p[i].abs().max(1e-3);
            let mut pp = p;
            let mut pm = p;
            pp[i] += h;
            pm[i] -= h;
            let (fp, fm) = (model(&pp), model(&pm));
            for j in 0..x.len() {
                col[j] = (fp[j] - fm[j]) / (2.0 * h);
            }
        }
        let mut jtj = vec![vec![0.0; 4]; 4];
        let mut jtr = vec![0.0; 4];
        for a in 0..4 {
            jtr[a] = jac[a].iter().zip(&r).map(|(u, v)| u * v).sum();
            for b in 0..4 {
                jtj[a][b] = jac[a].iter().zip(&jac[b]).map(|(u, v)| u * v).sum();
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve(m, jtr.iter().map(|v| -v).collect()) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = p;
            for a in 0..4 {
                q[a] += step[a];
            }
            q[0] = q[0].max(0.0);
            q[1] = q[1].max(0.0);
            q[2] = q[2].max(1.0 + 1e-6);
            q[3] = q[3].max(1e-6);
            let cq = cost(&q);
            if cq < c {
                let rel = (c - cq) / c.max(1e-300);
                p = q;
                c = cq;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            converged = true;
        }
        if converged {
            break;
        }
    }
    let rms = (c / x.len() as f64).sqrt();
    if !converged {
        return Err(Error::Fit {
            msg: "comb fit did not converge".into(),
            residual: rms,
        });
    }
    Ok(CombFit {
        d0: p[0],
        d1: p[1],
        finesse: p[2],
        delta_mhz: p[3],
        residual_rms: rms,
    })
}

/// Starting point from the teeth visible above half height.
fn initial_guess(x: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[sorted.len() / 20];
    let hi = sorted[sorted.len() - 1 - sorted.len() / 200];
    let span = hi - lo;
    let flat = Error::Fit {
        msg: "no comb structure found (flat spectrum)".into(),
        residual: f64::NAN,
    };
    if !(span > 1e-6 * hi.abs().max(1.0)) {
        return Err(flat);
    }
    let half = lo + 0.5 * span;
    // Contiguous runs above half height are teeth; track their centroids and widths.
    let mut centers = Vec::new();
    let mut widths = Vec::new();
    let mut j = 0;
    while j < y.len() {
        if y[j] > half {
            let start = j;
            let (mut sw, mut swx) = (0.0, 0.0);
            while j < y.len() && y[j] > half {
                let w = y[j] - half;
                sw += w;
                swx += w * x[j];
                j += 1;
            }
            if start > 0 && j < y.len() {
                centers.push(swx / sw);
                widths.push(x[j - 1] - x[start] + (x[1] - x[0]));
            }
        } else {
            j += 1;
        }
    }
    if centers.len() < 5 {
        return Err(Error::Fit {
            msg: format!("only {} comb teeth visible, need at least 5", centers.len()),
            residual: f64::NAN,
        });
    }
    let mut diffs: Vec<f64> = centers.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(f64::total_cmp);
    let mut delta = diffs[diffs.len() / 2];
    // Refine against tooth indices: center_i ≈ k_i·Δ.
    for _ in 0..3 {
        let (mut skk, mut skc) = (0.0, 0.0);
        for c in &centers {
            let k = (c / delta).round();
            skk += k * k;
            skc += k * c;
        }
        if skk > 0.0 {
            delta = skc / skk;
        }
    }
    widths.sort_by(f64::total_cmp);
    let width = widths[widths.len() / 2];
    let finesse = (delta / width).max(1.1);
    Ok([lo.max(0.0), span, finesse, delta])
}

/// Preparation timing of a memory, used to convert per-cycle rates into the rates an
/// experiment with dead time for comb preparation would observe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DutyCycle {
    pub burn_ms: f64,
    pub wait_ms: f64,
    pub storage_ms: f64,
}

impl DutyCycle {
    pub fn total_ms(&self) -> f64 {
        self.burn_ms + self.wait_ms + self.storage_ms
    }

    pub fn fraction(&self) -> f64 {
        self.storage_ms / self.total_ms()
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.burn_ms >= 0.0 && self.wait_ms >= 0.0 && self.storage_ms > 0.0) {
            return Err(Error::config(key, "durations must be ≥ 0 with positive storage time"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    pub comb: CombParams,
    pub coupling_efficiency: f64,
    #[serde(default = "default_echo_threshold")]
    pub echo_threshold: f64,
    pub duty_cycle: Option<DutyCycle>,
}

fn default_echo_threshold() -> f64 {
    ECHO_THRESHOLD
}

/// One way out of the memory for a photon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallChannel {
    pub delay_ps: i64,
    pub probability: f64,
    /// False for the primary echo at `1/Δ`.
    pub spurious: bool,
}

/// Outcome probabilities of a configured memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub transmit: f64,
    pub recalls: Vec<RecallChannel>,
    pub lost: f64,
    pub device_efficiency: f64,
    pub coupling_efficiency: f64,
}

impl MemoryModel {
    pub fn from_config(cfg: &MemoryConfig, key: &str) -> Result<Self> {
        let comb = cfg
            .comb
            .build()
            .map_err(|e| Error::config(format!("{key}.comb"), e.to_string()))?;
        let eta_c = cfg.coupling_efficiency;
        if !(0.0..=1.0).contains(&eta_c) {
            return Err(Error::config(format!("{key}.coupling_efficiency"), "must be in [0, 1]"));
        }
        if !(cfg.echo_threshold > 0.0 && cfg.echo_threshold <= 1.0) {
            return Err(Error::config(format!("{key}.echo_threshold"), "must be in (0, 1]"));
        }
        if let Some(d) = &cfg.duty_cycle {
            d.validate(&format!("{key}.duty_cycle"))?;
        }
        let echoes = echo_response(&comb, cfg.echo_threshold);
        let tau = comb.storage_time_ns();
        let primary = echoes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.delay_ns - tau).abs().total_cmp(&(b.1.delay_ns - tau).abs()))
            .map(|(i, e)| (i, *e));
        let eta_dev = comb.device_efficiency();
        let mut recalls = vec![RecallChannel {
            delay_ps: (tau * 1e3).round() as i64,
            probability: eta_dev * eta_c,
            spurious: false,
        }];
        if let Some((pi, p)) = primary {
            for (i, e) in echoes.iter().enumerate() {
                if i == pi {
                    continue;
                }
                recalls.push(RecallChannel {
                    delay_ps: (e.delay_ns * 1e3).round() as i64,
                    probability: eta_dev * (e.amplitude / p.amplitude) * eta_c,
                    spurious: true,
                });
            }
        }
        let transmit = (-comb.mean_optical_depth()).exp() * eta_c;
        Self::new(transmit, recalls, eta_dev, eta_c, key)
    }

    pub fn new(
        transmit: f64,
        recalls: Vec<RecallChannel>,
        device_efficiency: f64,
        coupling_efficiency: f64,
        key: &str,
    ) -> Result<Self> {
        let total = transmit + recalls.iter().map(|r| r.probability).sum::<f64>();
        if transmit < 0.0 || recalls.iter().any(|r| r.probability < 0.0) {
            return Err(Error::config(key, "outcome probabilities must be non-negative"));
        }
        if total > 1.0 + 1e-12 {
            return Err(Error::config(
                key,
                format!("transmission and recall probabilities sum to {total:.6} > 1"),
            ));
        }
        Ok(Self {
            transmit,
            recalls,
            lost: (1.0 - total).max(0.0),
            device_efficiency,
            coupling_efficiency,
        })
    }

    /// Probabilities in outcome order: transmitted, each recall, lost.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut p = vec![self.transmit];
        p.extend(self.recalls.iter().map(|r| r.probability));
        p.push(self.lost);
        p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MemoryOutcome {
        let mut u: f64 = rng.random();
        if u < self.transmit {
            return MemoryOutcome::Transmitted;
        }
        u -= self.transmit;
        for (k, r) in self.recalls.iter().enumerate() {
            if u < r.probability {
                return MemoryOutcome::Recalled(k);
            }
            u -= r.probability;
        }
        MemoryOutcome::Lost
    }
}

/// Passes a photon through the memory: transmitted (time unchanged), recalled by echo
/// `k` (delayed), or lost. The shared state travels with surviving photons.
pub fn apply_memory<R: Rng + ?Sized>(event: &PhotonEvent, model: &MemoryModel, rng: &mut R) -> PhotonEvent {
    let mut out = event.clone();
    let outcome = model.sample(rng);
    if let MemoryOutcome::Recalled(k) = outcome {
        let r = model.recalls[k];
        out.time_ps += r.delay_ps;
        if r.spurious {
            out.origin = Origin::SpuriousEcho;
        }
    }
    if outcome == MemoryOutcome::Lost {
        out.joint_state = None;
    }
    out.memory_outcome = Some(outcome);
    out
}

/// Contribution of the teeth to the frequency-averaged optical depth.
pub fn mean_tooth_optical_depth(d1: f64, finesse: f64) -> f64 {
    d1 / finesse * (PI / (4.0 * std::f64::consts::LN_2)).sqrt()
}
