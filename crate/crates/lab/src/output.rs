//! CSV tables and plain-text artifacts.

use std::fmt::Write as _;
use std::path::Path;

use wgangp_core::diagnostics::{Histogram, TrackPoint};
use wgangp_core::gan::MetricsRow;

use crate::error::LabError;

pub const METRICS_HEADER: &str = "iter,critic_loss,gen_loss,w_estimate,gp_mean_norm,gp_msd,seconds";
pub const SURFACE_HEADER: &str = "x,y,value";
pub const GRADNORMS_HEADER: &str = "iter,layer,norm";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";
pub const TRACK_HEADER: &str = "iter,train,validation,gap";

/// Scientific notation with 17 significant digits, enough to round-trip any
/// finite `f64`; locale-free.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV table whose first line is a provenance comment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(comment: &str, header: &str) -> Self {
        debug_assert!(comment.starts_with('#'));
        Table { text: format!("{comment}\n{header}\n") }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn metrics_table(comment: &str, rows: &[MetricsRow]) -> Table {
    let mut t = Table::new(comment, METRICS_HEADER);
    for r in rows {
        t.row(&[
            r.iteration.to_string(),
            num(r.critic_loss),
            num(r.gen_loss),
            num(r.w_estimate),
            num(r.gp_mean_norm),
            num(r.gp_msd),
            num(r.seconds),
        ]);
    }
    t
}

pub fn surface_table(comment: &str, values: &[[f64; 3]]) -> Table {
    let mut t = Table::new(comment, SURFACE_HEADER);
    for v in values {
        t.row(&[num(v[0]), num(v[1]), num(v[2])]);
    }
    t
}

pub fn histogram_table(comment: &str, h: &Histogram) -> Table {
    let mut t = Table::new(comment, HISTOGRAM_HEADER);
    for (i, c) in h.counts.iter().enumerate() {
        t.row(&[num(h.edges[i]), num(h.edges[i + 1]), c.to_string()]);
    }
    t
}

pub fn track_table(comment: &str, points: &[TrackPoint]) -> Table {
    let mut t = Table::new(comment, TRACK_HEADER);
    for p in points {
        t.row(&[p.iteration.to_string(), num(p.train), num(p.validation), num(p.gap())]);
    }
    t
}

/// `(iteration, per-layer norms)` pairs as long-format rows.
pub fn gradnorms_table(comment: &str, series: &[(usize, Vec<f64>)]) -> Table {
    let mut t = Table::new(comment, GRADNORMS_HEADER);
    for (it, norms) in series {
        for (l, n) in norms.iter().enumerate() {
            t.row(&[it.to_string(), l.to_string(), num(*n)]);
        }
    }
    t
}

/// The comment line followed by one sample per line.
pub fn samples_text(comment: &str, samples: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{comment}");
    for line in samples {
        let _ = writeln!(s, "{line}");
    }
    s
}

/// Skips the leading comment lines of an artifact.
pub fn strip_comments(text: &str) -> impl Iterator<Item = &str> {
    text.lines().skip_while(|l| l.starts_with('#'))
}

/// Parses a numeric CSV body (after the comment) into header and rows.
pub fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = strip_comments(text);
    let header = lines.next().ok_or("missing header")?.split(',').map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, l) in lines.enumerate() {
        let row = l
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|_| format!("row {}: bad number `{c}`", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", i + 1, row.len(), header.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write(path: &Path, contents: &str) -> Result<(), LabError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| LabError::io(path, e))
}
