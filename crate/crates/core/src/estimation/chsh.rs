//! CHSH correlation coefficients and the S parameter.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::error::{Error, Result};
use crate::linalg::{projector, tensor_product, CMatrix, DensityMatrix, Port, ProjectorSetting};

/// Analyzer settings for the two qubits; each defines the ±1 observable `P(s) − P(−s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshSettings {
    pub a: ProjectorSetting,
    pub a_prime: ProjectorSetting,
    pub b: ProjectorSetting,
    pub b_prime: ProjectorSetting,
}

impl Default for ChshSettings {
    /// `a = σ_x`, `a′ = σ_y`, `b = (σ_x+σ_y)/√2`, `b′ = (σ_x−σ_y)/√2`.
    fn default() -> Self {
        Self {
            a: ProjectorSetting::X,
            a_prime: ProjectorSetting::Y,
            b: ProjectorSetting::x_plus_y(Port::Plus),
            b_prime: ProjectorSetting::x_minus_y(Port::Plus),
        }
    }
}

impl ChshSettings {
    /// Interferometer phases `(α, α′, β, β′)`.
    pub fn phases(&self) -> Result<[f64; 4]> {
        let phase = |s: ProjectorSetting| {
            s.as_phase()
                .map(|(theta, port)| if port == Port::Plus { theta } else { theta + std::f64::consts::PI })
                .ok_or_else(|| Error::invalid(format!("setting {s} has no interferometer phase")))
        };
        Ok([phase(self.a)?, phase(self.a_prime)?, phase(self.b)?, phase(self.b_prime)?])
    }

    pub fn pair(&self, slot: Slot) -> (ProjectorSetting, ProjectorSetting) {
        match slot {
            Slot::AB => (self.a, self.b),
            Slot::ABPrime => (self.a, self.b_prime),
            Slot::APrimeB => (self.a_prime, self.b),
            Slot::APrimeBPrime => (self.a_prime, self.b_prime),
        }
    }
}

/// `P(s) − P(−s)`
pub fn observable(s: ProjectorSetting) -> CMatrix {
    &projector(s) - &projector(s.negated())
}

/// Born-rule correlation `Tr(ρ A⊗B)`.
pub fn born_correlation(rho: &DensityMatrix, a: ProjectorSetting, b: ProjectorSetting) -> Result<f64> {
    let op = tensor_product(&observable(a), &observable(b))?;
    Ok(rho.expectation(&op))
}

/// One of the four setting combinations entering S.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    #[serde(rename = "ab")]
    AB,
    #[serde(rename = "ab'")]
    ABPrime,
    #[serde(rename = "a'b")]
    APrimeB,
    #[serde(rename = "a'b'")]
    APrimeBPrime,
}

/// The slot that enters S with a minus sign.
pub type MinusSlot = Slot;

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::AB, Slot::ABPrime, Slot::APrimeB, Slot::APrimeBPrime];
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::AB => "ab",
            Slot::ABPrime => "ab'",
            Slot::APrimeB => "a'b",
            Slot::APrimeBPrime => "a'b'",
        })
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "ab" => Slot::AB,
            "ab'" => Slot::ABPrime,
            "a'b" => Slot::APrimeB,
            "a'b'" => Slot::APrimeBPrime,
            other => return Err(Error::invalid(format!("unknown setting pair `{other}`"))),
        })
    }
}

/// The four measured correlation coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshCorrelations {
    pub ab: Estimate,
    pub ab_prime: Estimate,
    pub a_prime_b: Estimate,
    pub a_prime_b_prime: Estimate,
}

impl ChshCorrelations {
    pub fn get(&self, slot: Slot) -> Estimate {
        match slot {
            Slot::AB => self.ab,
            Slot::ABPrime => self.ab_prime,
            Slot::APrimeB => self.a_prime_b,
            Slot::APrimeBPrime => self.a_prime_b_prime,
        }
    }

    pub fn from_fn(mut f: impl FnMut(Slot) -> Estimate) -> Self {
        Self {
            ab: f(Slot::AB),
            ab_prime: f(Slot::ABPrime),
            a_prime_b: f(Slot::APrimeB),
            a_prime_b_prime: f(Slot::APrimeBPrime),
        }
    }

    /// Exact correlations of `rho` for the given settings (zero uncertainty).
    pub fn born(rho: &DensityMatrix, settings: &ChshSettings) -> Result<Self> {
        let mut out = [Estimate::new(0.0, 0.0); 4];
        for (o, slot) in out.iter_mut().zip(Slot::ALL) {
            let (a, b) = settings.pair(slot);
            o.value = born_correlation(rho, a, b)?;
        }
        Ok(Self::from_fn(|s| out[s as usize]))
    }
}

/// `S = |Σ E − 2·E_minus|`, uncertainty by quadrature.
pub fn chsh_s(corr: &ChshCorrelations, minus: MinusSlot) -> Estimate {
    let mut total = 0.0;
    let mut var = 0.0;
    for slot in Slot::ALL {
        let e = corr.get(slot);
        total += if slot == minus { -e.value } else { e.value };
        var += e.sigma * e.sigma;
    }
    Estimate::new(total.abs(), var.sqrt())
}

/// The slot assignment with the largest |S|, for data where the sign wiring is not known.
pub fn chsh_s_max(corr: &ChshCorrelations) -> (Estimate, MinusSlot) {
    Slot::ALL
        .iter()
        .map(|&slot| (chsh_s(corr, slot), slot))
        .fold(None, |best: Option<(Estimate, Slot)>, cur| match best {
            Some(b) if b.0.value >= cur.0.value => Some(b),
            _ => Some(cur),
        })
        .expect("four slots")
}

/// The slot that carries the minus sign for the given settings: the one whose ideal
/// `|φ⁺⟩` correlation is negative when the others are positive. With the default
/// settings that is `a′b`.
pub fn minus_slot_for(settings: &ChshSettings, pump_phase: f64) -> Result<MinusSlot> {
    let [a, ap, b, bp] = settings.phases()?;
    let e = |x: f64, y: f64| (x + y - 2.0 * pump_phase).cos();
    let values = [e(a, b), e(a, bp), e(ap, b), e(ap, bp)];
    let corr = ChshCorrelations::from_fn(|s| Estimate::new(values[s as usize], 0.0));
    Ok(chsh_s_max(&corr).1)
}

/// `E = (C(a,b) − C(a,−b)) / (C(a,b) + C(a,−b))` with binomial uncertainty `√((1−E²)/n)`.
pub fn correlation_coefficient(same: f64, opposite: f64) -> Result<Estimate> {
    if same < 0.0 || opposite < 0.0 {
        return Err(Error::invalid("coincidence counts must be non-negative"));
    }
    let n = same + opposite;
    if n <= 0.0 {
        return Err(Error::UndefinedEstimate(
            "correlation coefficient with zero total coincidences".into(),
        ));
    }
    let e = (same - opposite) / n;
    Ok(Estimate::new(e, ((1.0 - e * e).max(0.0) / n).sqrt()))
}

/// Reads `state,setting_pair,correlation,sigma` rows; returns one entry per state in file
/// order. Every state must list all four setting pairs exactly once.
pub fn read_chsh_csv(path: &Path) -> Result<Vec<(String, ChshCorrelations)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chsh_csv(&text, &path.display().to_string())
}

pub fn parse_chsh_csv(text: &str, origin: &str) -> Result<Vec<(String, ChshCorrelations)>> {
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
    let expected = ["state", "setting_pair", "correlation", "sigma"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(parse_err(1, format!("expected header `{}`", expected.join(","))));
    }
    let mut states: Vec<(String, [Option<Estimate>; 4])> = Vec::new();
    let mut last_line = 1;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        last_line = line;
        let slot: Slot = rec[1].parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let number = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("`{}` is not a number", &rec[i])))
        };
        let value = number(2)?;
        let sigma = number(3)?;
        if !(-1.0..=1.0).contains(&value) || !(sigma >= 0.0) {
            return Err(parse_err(line, "correlation must be in [-1,1] and sigma ≥ 0".into()));
        }
        let idx = match states.iter().position(|(s, _)| s == &rec[0]) {
            Some(i) => i,
            None => {
                states.push((rec[0].to_string(), [None; 4]));
                states.len() - 1
            }
        };
        let entry = &mut states[idx].1[slot as usize];
        if entry.is_some() {
            return Err(parse_err(line, format!("duplicate {slot} row for state `{}`", &rec[0])));
        }
        *entry = Some(Estimate::new(value, sigma));
    }
    if states.is_empty() {
        return Err(Error::EmptyInput(origin.to_string()));
    }
    states
        .into_iter()
        .map(|(name, slots)| {
            if let Some(missing) = Slot::ALL.iter().find(|s| slots[**s as usize].is_none()) {
                return Err(parse_err(
                    last_line,
                    format!("state `{name}` is missing the {missing} correlation"),
                ));
            }
            let corr = ChshCorrelations::from_fn(|s| slots[s as usize].expect("checked"));
            Ok((name, corr))
        })
        .collect()
}

/// Ideal `|φ⁺⟩` correlation `cos(α + β − 2φ_p)` for interferometer phases.
pub fn ideal_phi_plus_correlation(alpha: f64, beta: f64, pump_phase: f64) -> f64 {
    (alpha + beta - 2.0 * pump_phase).cos()
}

/// Phases at which the default settings are realized, for simulations: `(α, α′, β, β′)`.
pub fn default_phases() -> [f64; 4] {
    [0.0, FRAC_PI_2, FRAC_PI_2 / 2.0, -FRAC_PI_2 / 2.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{density_from_params, Ket, DENSITY_PARAMS};
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn corr(values: [f64; 4]) -> ChshCorrelations {
        ChshCorrelations::from_fn(|s| Estimate::new(values[s as usize], 0.01))
    }

    #[test]
    fn tsirelson_value_for_phi_plus() {
        let rho = DensityMatrix::pure(&Ket::phi_plus());
        let settings = ChshSettings::default();
        let c = ChshCorrelations::born(&rho, &settings).unwrap();
        let s = chsh_s(&c, minus_slot_for(&settings, 0.0).unwrap());
        assert!((s.value - 2.0 * SQRT_2).abs() < 1e-12);
        assert!((c.ab.value - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((c.a_prime_b.value + 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn default_settings_put_minus_on_a_prime_b() {
        assert_eq!(minus_slot_for(&ChshSettings::default(), 0.0).unwrap(), Slot::APrimeB);
        let [a, ap, b, bp] = default_phases();
        let phases = ChshSettings::default().phases().unwrap();
        for (x, y) in [a, ap, b, bp].iter().zip(phases) {
            assert!(((x - y).rem_euclid(std::f64::consts::TAU)).min((y - x).rem_euclid(std::f64::consts::TAU)) < 1e-12);
        }
    }

    #[test]
    fn born_correlation_matches_cosine_law() {
        let rho = DensityMatrix::pure(&Ket::phi_plus());
        for i in 0..8 {
            for j in 0..8 {
                let (al, be) = (i as f64 * 0.7, j as f64 * 0.45);
                let e = born_correlation(
                    &rho,
                    ProjectorSetting::phase(al, Port::Plus),
                    ProjectorSetting::phase(be, Port::Plus),
                )
                .unwrap();
                assert!((e - ideal_phi_plus_correlation(al, be, 0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_arithmetic() {
        let c = corr([0.6059, 0.6439, -0.6156, 0.6540]);
        let s = chsh_s(&c, Slot::APrimeB);
        assert!((s.value - 2.5194).abs() < 1e-12);
        assert!((s.sigma - 0.02).abs() < 1e-12);
        assert_eq!(chsh_s_max(&c).1, Slot::APrimeB);
    }

    #[test]
    fn correlation_coefficient_cases() {
        assert_eq!(correlation_coefficient(10.0, 10.0).unwrap().value, 0.0);
        let e = correlation_coefficient(10.0, 0.0).unwrap();
        assert_eq!((e.value, e.sigma), (1.0, 0.0));
        assert!(matches!(correlation_coefficient(0.0, 0.0), Err(Error::UndefinedEstimate(_))));
        let e = correlation_coefficient(75.0, 25.0).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);
        assert!((e.sigma - (0.75f64 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_parsing() {
        let text = "state,setting_pair,correlation,sigma\n\
                    in,ab,0.6,0.01\nin,ab',0.6,0.01\nin,a'b,-0.6,0.01\nin,a'b',0.6,0.01\n";
        let parsed = parse_chsh_csv(text, "t").unwrap();
        assert_eq!(parsed.len(), 1);
        assert!((chsh_s(&parsed[0].1, Slot::APrimeB).value - 2.4).abs() < 1e-12);

        let missing = "state,setting_pair,correlation,sigma\nin,ab,0.6,0.01\n";
        assert!(matches!(parse_chsh_csv(missing, "t"), Err(Error::Parse { .. })));
        let bad = "state,setting_pair,correlation,sigma\nin,ab,0.6,0.01\nin,xx,0.6,0.01\n";
        assert!(matches!(parse_chsh_csv(bad, "t"), Err(Error::Parse { line: 3, .. })));
        let empty = "state,setting_pair,correlation,sigma\n";
        assert!(matches!(parse_chsh_csv(empty, "t"), Err(Error::EmptyInput(_))));
    }

    fn random_state() -> impl Strategy<Value = DensityMatrix> {
        proptest::array::uniform16(-1.0f64..1.0)
            .prop_filter("nonzero", |t| t.iter().any(|x| x.abs() > 1e-3))
            .prop_map(|t: [f64; DENSITY_PARAMS]| density_from_params(&t).unwrap())
    }

    fn random_qubit() -> impl Strategy<Value = Ket> {
        (0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU).prop_map(|(th, ph)| {
            Ket::new(vec![
                crate::linalg::C64::new((th / 2.0).cos(), 0.0),
                crate::linalg::C64::from_polar((th / 2.0).sin(), ph),
            ])
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn born_s_never_exceeds_tsirelson(rho in random_state()) {
            let c = ChshCorrelations::born(&rho, &ChshSettings::default()).unwrap();
            for slot in Slot::ALL {
                prop_assert!(chsh_s(&c, slot).value <= 2.0 * SQRT_2 + 1e-9);
            }
        }

        #[test]
        fn product_states_respect_local_bound(a in random_qubit(), b in random_qubit()) {
            let rho = DensityMatrix::pure(&Ket::product(&a, &b).unwrap());
            let c = ChshCorrelations::born(&rho, &ChshSettings::default()).unwrap();
            prop_assert!(chsh_s_max(&c).0.value <= 2.0 + 1e-9);
        }
    }
}
