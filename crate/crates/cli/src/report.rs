//! CSV report rows and the JSON run summary.

use serde::{Deserialize, Serialize};

use semcert_core::pipeline::{CertificationResult, Verdict};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowVerdict {
    Certified,
    Abstain,
    NotCertified,
}

impl From<Verdict> for RowVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Certified => RowVerdict::Certified,
            Verdict::Abstain => RowVerdict::Abstain,
            Verdict::NotCertified => RowVerdict::NotCertified,
        }
    }
}

/// One evaluated sample. `elapsed` stays empty unless timing is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub label: usize,
    pub predicted: Option<usize>,
    pub verdict: RowVerdict,
    pub p_a_lower: f64,
    pub radius: Option<f64>,
    pub sqrt_m: Option<f64>,
    pub samples_used: u64,
    pub elapsed: Option<f64>,
}

impl ReportRow {
    pub fn from_result(index: usize, label: usize, r: &CertificationResult) -> Self {
        Self {
            index,
            label,
            predicted: r.predicted_class,
            verdict: r.verdict.into(),
            p_a_lower: r.p_a_lower,
            radius: r.radius.as_ref().map(|v| v.value),
            sqrt_m: r.aliasing.as_ref().map(|a| a.sqrt_m),
            samples_used: r.samples_used,
            elapsed: r.elapsed,
        }
    }
}

pub fn write_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn read_csv(bytes: &[u8]) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub timestamp_unix: u64,
    pub samples: usize,
    pub certified: usize,
    pub not_certified: usize,
    pub abstain: usize,
    /// Fraction certified with the correct class.
    pub robust_accuracy: f64,
    /// Fraction whose smoothed prediction equals the label.
    pub clean_accuracy: f64,
    /// Worst-case error probability over all anchors of one sample, when anchors are used.
    pub joint_alpha: Option<f64>,
    pub total_elapsed: Option<f64>,
}

impl Summary {
    pub fn new(config: &RunConfig, rows: &[ReportRow], clean_correct: usize, joint_alpha: Option<f64>) -> Self {
        let count = |v: RowVerdict| rows.iter().filter(|r| r.verdict == v).count();
        let robust = rows.iter().filter(|r| r.verdict == RowVerdict::Certified && r.predicted == Some(r.label)).count();
        let n = rows.len().max(1) as f64;
        let timestamp_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let total_elapsed = if config.record_timing { Some(rows.iter().filter_map(|r| r.elapsed).sum()) } else { None };
        Self {
            config: config.clone(),
            timestamp_unix,
            samples: rows.len(),
            certified: count(RowVerdict::Certified),
            not_certified: count(RowVerdict::NotCertified),
            abstain: count(RowVerdict::Abstain),
            robust_accuracy: robust as f64 / n,
            clean_accuracy: clean_correct as f64 / n,
            joint_alpha,
            total_elapsed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row_strategy() -> impl Strategy<Value = ReportRow> {
        (
            any::<u32>(),
            0usize..10,
            proptest::option::of(0usize..10),
            prop_oneof![Just(RowVerdict::Certified), Just(RowVerdict::Abstain), Just(RowVerdict::NotCertified)],
            0.0f64..1.0,
            proptest::option::of(0.0f64..1e6),
            proptest::option::of(any::<f64>().prop_filter("finite", |v| v.is_finite())),
            any::<u64>(),
            proptest::option::of(0.0f64..100.0),
        )
            .prop_map(|(i, label, predicted, verdict, p, radius, sqrt_m, samples_used, elapsed)| ReportRow {
                index: i as usize,
                label,
                predicted,
                verdict,
                p_a_lower: p,
                radius,
                sqrt_m,
                samples_used,
                elapsed,
            })
    }

    proptest! {
        #[test]
        fn csv_rows_round_trip(rows in proptest::collection::vec(row_strategy(), 0..20)) {
            let bytes = write_csv(&rows).unwrap();
            prop_assert_eq!(read_csv(&bytes).unwrap(), rows);
        }
    }

    #[test]
    fn header_and_empty_fields() {
        let row = ReportRow {
            index: 3,
            label: 1,
            predicted: None,
            verdict: RowVerdict::Abstain,
            p_a_lower: 0.25,
            radius: None,
            sqrt_m: None,
            samples_used: 10,
            elapsed: None,
        };
        let s = String::from_utf8(write_csv(&[row]).unwrap()).unwrap();
        assert_eq!(
            s,
            "index,label,predicted,verdict,p_a_lower,radius,sqrt_m,samples_used,elapsed\n3,1,,abstain,0.25,,,10,\n"
        );
    }
}
