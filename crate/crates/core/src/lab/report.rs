//! Experiment reports and their CSV, JSON and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::FamilyTag;

use super::family::NIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Declared discretization budget: changing the grid resolution should
    /// move the column by less than this.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub n: NIndex,
    pub values: Vec<f64>,
    /// Wall-clock seconds; kept out of serialized output so that reports are
    /// reproducible byte for byte.
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// Convergence verdict for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnFlag {
    pub column: String,
    /// Value at the largest finite `n`.
    pub final_value: f64,
    /// No value along the dyadic subsequence of `n` exceeds 1.1 times the
    /// running minimum.
    pub dyadic_stable: bool,
    /// `final_value < threshold`, when the caller supplied a threshold.
    pub below_threshold: Option<bool>,
    /// False when the report does not assert convergence of this column.
    pub asserted: bool,
}

impl ColumnFlag {
    /// Stable along dyadic `n` and, if a threshold was given, below it.
    pub fn converged(&self) -> bool {
        self.dyadic_stable && self.below_threshold.unwrap_or(true)
    }
}

/// A named pass/fail check with the value it is based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub family: FamilyTag,
    pub grid_size: usize,
    pub interval: (f64, f64),
    pub tol: f64,
    pub slack: f64,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub flags: Vec<ColumnFlag>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub thresholds: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of column `name` in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn value(&self, n: NIndex, name: &str) -> Option<f64> {
        let k = self.column_index(name)?;
        self.rows.iter().find(|r| r.n == n).map(|r| r.values[k])
    }

    pub fn flag(&self, name: &str) -> Option<&ColumnFlag> {
        self.flags.iter().find(|f| f.column == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn finite_rows(&self) -> impl Iterator<Item = (u64, &Row)> {
        self.rows.iter().filter_map(|r| r.n.finite().map(|n| (n, r)))
    }

    /// Recompute the per-column flags from the rows.
    pub fn compute_flags(&mut self) {
        let finite: Vec<(u64, &Row)> = self.finite_rows().collect();
        let ns: Vec<u64> = finite.iter().map(|(n, _)| *n).collect();
        self.flags = self
            .columns
            .iter()
            .enumerate()
            .map(|(k, col)| {
                let values: Vec<f64> = finite.iter().map(|(_, r)| r.values[k]).collect();
                let final_value = values.last().copied().unwrap_or(0.0);
                ColumnFlag {
                    column: col.name.clone(),
                    final_value,
                    dyadic_stable: dyadic_stable(&ns, &values),
                    below_threshold: self.thresholds.get(&col.name).map(|&t| final_value < t),
                    asserted: true,
                }
            })
            .collect();
    }

    /// One row per `n`; the first column is `n`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("n")
            .chain(self.columns.iter().map(|c| c.name.as_str()))
            .collect();
        w.write_record(&header).map_err(csv_error)?;
        for row in &self.rows {
            let record: Vec<String> = std::iter::once(row.n.to_string())
                .chain(row.values.iter().map(|v| format_number(*v)))
                .collect();
            w.write_record(&record).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Static line plot of every column against `n` on log-log axes. Zero
    /// values are clamped to the smallest positive value in the plot.
    pub fn to_svg(&self) -> String {
        const W: f64 = 720.0;
        const H: f64 = 420.0;
        const PAD: f64 = 56.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
        ];
        let points: Vec<(f64, &Row)> = self
            .finite_rows()
            .map(|(n, r)| ((n as f64).log10(), r))
            .collect();
        let positive = points
            .iter()
            .flat_map(|(_, r)| r.values.iter().copied())
            .filter(|v| *v > 0.0 && v.is_finite());
        let floor = positive.clone().fold(f64::INFINITY, f64::min);
        let ceil = positive.fold(0.0, f64::max);
        let (ylo, yhi) = if floor.is_finite() && ceil > 0.0 {
            (floor.log10(), ceil.log10().max(floor.log10() + 1e-9))
        } else {
            (0.0, 1.0)
        };
        let (xlo, xhi) = match (points.first(), points.last()) {
            (Some(a), Some(b)) if b.0 > a.0 => (a.0, b.0),
            (Some(a), _) => (a.0 - 0.5, a.0 + 0.5),
            _ => (0.0, 1.0),
        };
        let sx = |x: f64| PAD + (x - xlo) / (xhi - xlo) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - ylo) / (yhi - ylo) * (H - 2.0 * PAD);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{PAD}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{} ({})</text>",
            escape(&self.experiment),
            escape(&self.family.name)
        );
        let _ = writeln!(
            out,
            "<path d=\"M{PAD} {top} V{bottom} H{right}\" stroke=\"black\" fill=\"none\"/>",
            top = PAD,
            bottom = H - PAD,
            right = W - PAD
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">log10 n</text>",
            W / 2.0,
            H - 16.0
        );
        let _ = writeln!(
            out,
            "<text x=\"8\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">log10 value [{ylo:.2}, {yhi:.2}]</text>",
            PAD - 12.0
        );
        for (k, col) in self.columns.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let path: Vec<String> = points
                .iter()
                .map(|(x, r)| {
                    let v = r.values[k];
                    let y = if v > 0.0 && v.is_finite() { v.log10() } else { ylo };
                    format!("{:.2},{:.2}", sx(*x), sy(y.clamp(ylo, yhi)))
                })
                .collect();
            if !path.is_empty() {
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>",
                    path.join(" ")
                );
            }
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                W - PAD - 150.0,
                PAD + 14.0 * k as f64,
                escape(&col.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Shortest round-trip decimal form.
pub fn format_number(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

/// Greedy dyadic subsequence of increasing `ns`: start at the smallest and
/// repeatedly take the next `n` at least twice the previous one.
pub fn dyadic_subsequence(ns: &[u64]) -> Vec<usize> {
    let mut picked = Vec::new();
    let mut last: Option<u64> = None;
    for (k, &n) in ns.iter().enumerate() {
        if last.map_or(true, |l| n >= l.saturating_mul(2)) {
            picked.push(k);
            last = Some(n);
        }
    }
    picked
}

/// No value along the dyadic subsequence exceeds 1.1 times the running
/// minimum of the values before it.
pub fn dyadic_stable(ns: &[u64], values: &[f64]) -> bool {
    let mut running = f64::INFINITY;
    for k in dyadic_subsequence(ns) {
        let v = values[k];
        if v > 1.1 * running {
            return false;
        }
        running = running.min(v);
    }
    true
}

/// Spearman rank correlation (average ranks for ties). Zero when either
/// sequence is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0;
            for &i in &idx[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
