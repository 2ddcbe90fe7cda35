//! Text and JSON rendering of reports.

use serde::{Deserialize, Serialize};

use super::run::ExperimentReport;
use super::sweep::SweepTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

/// `count / total` rounded half-up to two decimals, computed exactly.
pub fn proportion_2dp(count: usize, total: usize) -> String {
    if total == 0 {
        return "0.00".to_string();
    }
    let (c, t) = (count as u128, total as u128);
    let hundredths = (200 * c + t) / (2 * t);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Rounds a non-negative value half-up to two decimals, working on its
/// shortest decimal representation so `0.005` gives `0.01`.
pub fn format_proportion(value: f64) -> String {
    if !value.is_finite() || value <= 0.0 {
        return "0.00".to_string();
    }
    let repr = format!("{value}");
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    digits.push(frac.first().copied().unwrap_or(0));
    digits.push(frac.get(1).copied().unwrap_or(0));
    if frac.get(2).copied().unwrap_or(0) >= 5 {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - 2;
    let int: String = digits[..split].iter().map(|d| char::from(b'0' + d)).collect();
    let int = int.trim_start_matches('0');
    format!(
        "{}.{}{}",
        if int.is_empty() { "0" } else { int },
        digits[split],
        digits[split + 1]
    )
}

const HEADER: &str = "Dataset       k   PI   PA correct";

fn row(name: &str, k: usize, r: &ExperimentReport) -> String {
    let pi = proportion_2dp(r.incomplete, r.total);
    let pa = proportion_2dp(r.ambiguous, r.total);
    let correct = proportion_2dp(r.single_turn_correct, r.total);
    format!("{name:<12} {k:>2} {pi:>4} {pa:>4} {correct}")
}

/// Renders one report as a Dataset/k/PI/PA/correct table with k = 1.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => format!("{HEADER}\n{}\n", row(&report.dataset, 1, report)),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

pub fn emit_sweep(table: &SweepTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => {
            let mut out = format!("{HEADER}\n");
            for (i, r) in table.rows.iter().enumerate() {
                let name = if i == 0 { table.dataset.as_str() } else { "" };
                out.push_str(&row(name, r.k, &r.report));
                out.push('\n');
            }
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(table).expect("sweep serializes");
            s.push('\n');
            s
        }
    }
}
