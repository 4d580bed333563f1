use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mcnemar::{mcnemar_exact, Better, PairedOutcomes};
use crate::error::Result;

/// Errors after one training epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochErrors {
    pub epoch: usize,
    pub train_error: f64,
    pub test_error: f64,
}

const CURVE_HEADER: [&str; 3] = ["epoch", "train_error", "test_error"];

pub fn write_error_curve_csv(history: &[EpochErrors], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CURVE_HEADER)?;
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_error_curve_csv(path: &Path) -> Result<Vec<EpochErrors>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<EpochErrors>, _>>()?;
    Ok(rows)
}

pub fn write_error_curve_json(history: &[EpochErrors], path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(history)?)?;
    Ok(())
}

pub fn read_error_curve_json(path: &Path) -> Result<Vec<EpochErrors>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// One pairwise McNemar comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarRow {
    pub model_a: String,
    pub model_b: String,
    pub n01: u64,
    pub n10: u64,
    pub p_value: f64,
    #[serde(rename = "significant_at_0.05")]
    pub significant: bool,
    /// `first` when model A made fewer discordant errors, `second` for B.
    pub direction: Better,
}

impl McNemarRow {
    pub fn new(model_a: &str, model_b: &str, outcomes: &PairedOutcomes) -> Self {
        let p = mcnemar_exact(outcomes);
        McNemarRow {
            model_a: model_a.to_string(),
            model_b: model_b.to_string(),
            n01: outcomes.n01,
            n10: outcomes.n10,
            p_value: p,
            significant: p < 0.05,
            direction: outcomes.better(),
        }
    }
}

pub fn write_mcnemar_csv(rows: &[McNemarRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_curve_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_error_curve_csv(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "epoch,train_error,test_error\n");
        assert!(read_error_curve_csv(&p).unwrap().is_empty());
    }

    #[test]
    fn curve_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let h: Vec<EpochErrors> = (0..3)
            .map(|e| EpochErrors {
                epoch: e,
                train_error: 0.1 / (e + 1) as f64,
                test_error: 1.0 / 3.0 + e as f64,
            })
            .collect();
        let p = dir.path().join("c.csv");
        write_error_curve_csv(&h, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 4);
        assert_eq!(read_error_curve_csv(&p).unwrap(), h);
        let j = dir.path().join("c.json");
        write_error_curve_json(&h, &j).unwrap();
        assert_eq!(read_error_curve_json(&j).unwrap(), h);
    }

    #[test]
    fn mcnemar_table_columns() {
        let dir = tempfile::tempdir().unwrap();
        let o = PairedOutcomes { n00: 3, n01: 1, n10: 9, n11: 87 };
        let row = McNemarRow::new("a", "b", &o);
        assert!(row.significant);
        assert_eq!(row.direction, Better::Second);
        let p = dir.path().join("m.csv");
        write_mcnemar_csv(&[row], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("model_a,model_b,n01,n10,p_value,significant_at_0.05,direction\n"));
        assert!(text.contains(",true,second"));
    }
}
