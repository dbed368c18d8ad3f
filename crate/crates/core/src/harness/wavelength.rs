//! Memory efficiency versus the wavelength pair selected from the source.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthRow {
    pub lambda_signal_nm: f64,
    pub lambda_idler_nm: f64,
    pub eta_tm: f64,
    pub eta_er: f64,
    /// Product column as printed alongside the measurement, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_product: Option<f64>,
}

impl WavelengthRow {
    /// Joint storage efficiency `η_Tm·η_Er`.
    pub fn product(&self) -> f64 {
        self.eta_tm * self.eta_er
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavelengthEfficiencyTable {
    pub rows: Vec<WavelengthRow>,
}

/// A row whose printed product differs from `η_Tm·η_Er`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductDiscrepancy {
    pub row: usize,
    pub computed: f64,
    pub published: f64,
    pub ratio: f64,
}

impl WavelengthEfficiencyTable {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Columns `lambda_signal_nm,lambda_idler_nm,eta_tm,eta_er` with optional
    /// `product` (checked against `η_Tm·η_Er` to 1e-6) and `published_product`;
    /// `#` lines are comments.
    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        crate::error::require_content(text, origin)?;
        #[derive(Deserialize)]
        struct Record {
            lambda_signal_nm: f64,
            lambda_idler_nm: f64,
            eta_tm: f64,
            eta_er: f64,
            #[serde(default)]
            product: Option<f64>,
            #[serde(default)]
            published_product: Option<f64>,
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.deserialize::<Record>() {
            let rec = rec.map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rows.len() + 1;
            let err = |msg: &str| Error::Parse {
                path: origin.to_string(),
                line,
                msg: format!("data row {line}: {msg}"),
            };
            if !(0.0..=1.0).contains(&rec.eta_tm) || !(0.0..=1.0).contains(&rec.eta_er) {
                return Err(err("efficiencies must be in [0, 1]"));
            }
            if rec.product.is_some_and(|p| (p - rec.eta_tm * rec.eta_er).abs() > 1e-6) {
                return Err(err("product differs from eta_tm*eta_er"));
            }
            rows.push(WavelengthRow {
                lambda_signal_nm: rec.lambda_signal_nm,
                lambda_idler_nm: rec.lambda_idler_nm,
                eta_tm: rec.eta_tm,
                eta_er: rec.eta_er,
                published_product: rec.published_product,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(origin.to_string()));
        }
        Ok(Self { rows })
    }

    /// CSV with the computed product next to the printed one.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda_signal_nm,lambda_idler_nm,eta_tm,eta_er,product,published_product\n");
        for r in &self.rows {
            let published = r.published_product.map(|p| p.to_string()).unwrap_or_default();
            out += &format!(
                "{},{},{},{},{},{}\n",
                r.lambda_signal_nm,
                r.lambda_idler_nm,
                r.eta_tm,
                r.eta_er,
                r.product(),
                published
            );
        }
        out
    }

    /// Rows whose printed product deviates from `η_Tm·η_Er` by more than `tolerance`.
    pub fn discrepancies(&self, tolerance: f64) -> Vec<ProductDiscrepancy> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(row, r)| {
                let published = r.published_product?;
                let computed = r.product();
                ((published - computed).abs() > tolerance).then(|| ProductDiscrepancy {
                    row,
                    computed,
                    published,
                    ratio: published / computed,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_reports_discrepancy() {
        let text = "# c\nlambda_signal_nm,lambda_idler_nm,eta_tm,eta_er,published_product\n794.7,1535.8,0.02,0.005,0.0002\n794.6,1565.3,0.015,0.005,0.000075\n";
        let t = WavelengthEfficiencyTable::parse_csv(text, "t").unwrap();
        assert_eq!(t.rows.len(), 2);
        let d = t.discrepancies(1e-6);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].row, 0);
        assert!((d[0].ratio - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_malformed() {
        assert!(matches!(
            WavelengthEfficiencyTable::parse_csv("lambda_signal_nm,lambda_idler_nm,eta_tm,eta_er\n", "t"),
            Err(Error::EmptyInput(_))
        ));
        let bad = "lambda_signal_nm,lambda_idler_nm,eta_tm,eta_er\n1,2,x,0.1\n";
        assert!(matches!(WavelengthEfficiencyTable::parse_csv(bad, "t"), Err(Error::Parse { line: 2, .. })));
        let bad = "lambda_signal_nm,lambda_idler_nm,eta_tm,eta_er,product\n1,2,0.1,0.1,0.02\n";
        assert!(WavelengthEfficiencyTable::parse_csv(bad, "t").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn product_invariant_and_round_trip(
            rows in proptest::collection::vec((700.0..900.0f64, 1400.0..1600.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 1..8)
        ) {
            let t = WavelengthEfficiencyTable {
                rows: rows.iter().map(|&(s, i, a, b)| WavelengthRow {
                    lambda_signal_nm: s,
                    lambda_idler_nm: i,
                    eta_tm: a,
                    eta_er: b,
                    published_product: None,
                }).collect(),
            };
            let csv = t.to_csv();
            for (line, r) in csv.lines().skip(1).zip(&t.rows) {
                let p: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
                prop_assert!((p - r.eta_tm * r.eta_er).abs() <= 1e-6);
            }
            let back = WavelengthEfficiencyTable::parse_csv(&csv, "t").unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
