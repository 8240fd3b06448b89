//! Result rows and their serialized forms: a CSV error curve (one row per
//! seed per checkpoint) and a JSON summary of per-checkpoint medians and
//! interquartile ranges. Numbers are written with Rust's shortest
//! round-trip formatting, so equal runs produce byte-equal files and the
//! summary is exactly recomputable from the CSV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "seed,n,l2_error,max_weight_median,effective_size_median,wall_ms";

/// One scored checkpoint of one seed's stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRow {
    pub seed: u64,
    pub n: usize,
    pub l2_error: f64,
    /// Median over grid queries of the largest coefficient.
    pub max_weight_median: f64,
    /// Median over grid queries of `1/Σw²`.
    pub effective_size_median: f64,
    /// Kept at zero in emitted files so reruns are byte-comparable; real
    /// timings go to stderr.
    pub wall_ms: u64,
}

pub fn curve_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.n, r.l2_error, r.max_weight_median, r.effective_size_median, r.wall_ms
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "curve CSV must start with {CSV_HEADER:?}, got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "curve CSV row {} has {} fields, expected 6",
                i + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| Error::Config(format!("curve CSV row {}: bad {what}", i + 2));
        rows.push(CurveRow {
            seed: fields[0].parse().map_err(|_| bad("seed"))?,
            n: fields[1].parse().map_err(|_| bad("n"))?,
            l2_error: fields[2].parse().map_err(|_| bad("l2_error"))?,
            max_weight_median: fields[3].parse().map_err(|_| bad("max_weight_median"))?,
            effective_size_median: fields[4].parse().map_err(|_| bad("effective_size_median"))?,
            wall_ms: fields[5].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    Ok(rows)
}

/// Median of the sorted order statistics; the two central values are
/// averaged for even lengths. Panics on empty input.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `(q1, median, q3)` using hinges: quartiles are medians of the lower and
/// upper halves, excluding the central element for odd lengths.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    assert!(!values.is_empty(), "quartiles of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let med = median(&v);
    if n == 1 {
        return (v[0], med, v[0]);
    }
    (median(&v[..n / 2]), med, median(&v[n.div_ceil(2)..]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub median: f64,
    pub iqr: f64,
}

fn summarize_metric(values: &[f64]) -> MetricSummary {
    let (q1, med, q3) = quartiles(values);
    MetricSummary { median: med, iqr: q3 - q1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub n: usize,
    pub runs: usize,
    pub l2_error: MetricSummary,
    pub max_weight_median: MetricSummary,
    pub effective_size_median: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub checkpoints: Vec<CheckpointSummary>,
}

/// Aggregates rows by checkpoint, ascending in `n`.
pub fn summarize(rows: &[CurveRow]) -> RunSummary {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let checkpoints = ns
        .into_iter()
        .map(|n| {
            let at: Vec<&CurveRow> = rows.iter().filter(|r| r.n == n).collect();
            let col = |f: fn(&CurveRow) -> f64| -> Vec<f64> { at.iter().map(|r| f(r)).collect() };
            CheckpointSummary {
                n,
                runs: at.len(),
                l2_error: summarize_metric(&col(|r| r.l2_error)),
                max_weight_median: summarize_metric(&col(|r| r.max_weight_median)),
                effective_size_median: summarize_metric(&col(|r| r.effective_size_median)),
            }
        })
        .collect();
    RunSummary { schema_version: super::config::SCHEMA_VERSION, checkpoints }
}

pub fn summary_to_json(summary: &RunSummary) -> Result<String> {
    let mut s = serde_json::to_string_pretty(summary)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, n: usize, err: f64) -> CurveRow {
        CurveRow {
            seed,
            n,
            l2_error: err,
            max_weight_median: err / 2.0,
            effective_size_median: 3.0 * err,
            wall_ms: 0,
        }
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn quartiles_use_half_medians() {
        let (q1, med, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((q1, med, q3), (1.5, 2.5, 3.5));
        // Odd length drops the central element from both halves.
        let (q1, med, q3) = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!((q1, med, q3), (1.5, 3.0, 4.5));
        let (q1, med, q3) = quartiles(&[2.0]);
        assert_eq!((q1, med, q3), (2.0, 2.0, 2.0));
    }

    #[test]
    fn csv_round_trips_exact_bits() {
        let rows = vec![
            row(1, 64, 0.125),
            row(1, 256, 0.1 + 0.2),
            row(2, 64, 1.0 / 3.0),
            row(2, 256, f64::MIN_POSITIVE),
        ];
        let text = curve_to_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.l2_error.to_bits(), b.l2_error.to_bits());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn csv_rejects_malformed_input() {
        assert!(parse_csv("nope\n1,2,3,4,5,6\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\nx,2,0.1,0.2,3.0,0\n")).is_err());
    }

    #[test]
    fn summary_matches_hand_computation() {
        let rows = vec![row(1, 64, 0.4), row(2, 64, 0.2), row(3, 64, 0.3), row(1, 256, 0.1)];
        let s = summarize(&rows);
        assert_eq!(s.checkpoints.len(), 2);
        let c64 = &s.checkpoints[0];
        assert_eq!((c64.n, c64.runs), (64, 3));
        assert_eq!(c64.l2_error.median, 0.3);
        // Hinges of {0.2, 0.3, 0.4} are 0.2 and 0.4.
        assert!((c64.l2_error.iqr - 0.2).abs() < 1e-15);
        assert_eq!(s.checkpoints[1].runs, 1);
        assert_eq!(s.checkpoints[1].l2_error.iqr, 0.0);
    }

    #[test]
    fn summary_recomputable_from_csv() {
        let rows: Vec<CurveRow> = (0..7)
            .flat_map(|s| [row(s, 10, 0.1 * (s as f64 + 1.0).sin().abs()), row(s, 20, 0.7 / (s + 1) as f64)])
            .collect();
        let text = curve_to_csv(&rows);
        let reparsed = parse_csv(&text).unwrap();
        assert_eq!(summarize(&reparsed), summarize(&rows));
    }

    #[test]
    fn summary_json_round_trips() {
        let s = summarize(&[row(1, 64, 0.25), row(2, 64, 0.5)]);
        let text = summary_to_json(&s).unwrap();
        let back: RunSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
