use serde::Serialize;

use super::{AnalysisError, LabelMatrix};
use crate::exec::Execution;

/// Phi coefficient of two binary columns, from their 2×2 contingency
/// counts. `None` when either column is constant.
pub fn phi(a: &[bool], b: &[bool]) -> Result<Option<f64>, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    let (mut n11, mut n10, mut n01, mut n00) = (0u64, 0u64, 0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (true, true) => n11 += 1,
            (true, false) => n10 += 1,
            (false, true) => n01 += 1,
            (false, false) => n00 += 1,
        }
    }
    let (a1, a0, b1, b0) = (n11 + n10, n01 + n00, n11 + n01, n10 + n00);
    if a1 == 0 || a0 == 0 || b1 == 0 || b0 == 0 {
        return Ok(None);
    }
    let num = (n11 * n00) as f64 - (n10 * n01) as f64;
    let den = ((a1 * a0) as f64).sqrt() * ((b1 * b0) as f64).sqrt();
    Ok(Some((num / den).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// Row-major; `None` (JSON `null`) where undefined.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        self.values[i][j]
    }
}

pub fn correlate(m: &LabelMatrix) -> CorrelationMatrix {
    correlate_with(m, Execution::default())
}

/// Pairwise phi over all column pairs. Each unordered pair is computed once
/// and mirrored, so the result is symmetric whatever the execution mode.
pub fn correlate_with(m: &LabelMatrix, exec: Execution) -> CorrelationMatrix {
    let k = m.columns.len();
    let columns: Vec<Vec<bool>> = (0..k).map(|j| m.column(j)).collect();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let cells = exec.map(&pairs, |&(i, j)| {
        let v = phi(&columns[i], &columns[j]).expect("columns share the row count");
        if i == j { v.map(|_| 1.0) } else { v }
    });
    let mut values = vec![vec![None; k]; k];
    for (&(i, j), v) in pairs.iter().zip(cells) {
        values[i][j] = v;
        values[j][i] = v;
    }
    CorrelationMatrix { labels: m.columns.clone(), values }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub sp1: String,
    pub sp2: String,
    pub cc_large: f64,
    pub cc_small: f64,
    pub avg_cc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub threshold: f64,
    pub rows: Vec<PairRow>,
}

/// Property pairs whose mean correlation across the two matrices strictly
/// exceeds `threshold`, highest first.
pub fn report_pairs(large: &CorrelationMatrix, small: &CorrelationMatrix, threshold: f64) -> Result<PairReport, AnalysisError> {
    if large.labels != small.labels {
        return Err(AnalysisError::LabelMismatch);
    }
    let k = large.labels.len();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (Some(cl), Some(cs)) = (large.values[i][j], small.values[i][j]) else { continue };
            let avg_cc = (cl + cs) / 2.0;
            if avg_cc > threshold {
                let (a, b) = (&large.labels[i], &large.labels[j]);
                let (sp1, sp2) = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                rows.push(PairRow { sp1, sp2, cc_large: cl, cc_small: cs, avg_cc });
            }
        }
    }
    rows.sort_by(|x, y| y.avg_cc.total_cmp(&x.avg_cc).then_with(|| (&x.sp1, &x.sp2).cmp(&(&y.sp1, &y.sp2))));
    Ok(PairReport { threshold, rows })
}
