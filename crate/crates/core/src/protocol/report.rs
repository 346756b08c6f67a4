//! Stability accounting, CSV writers and the R^2 box-plot figure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::RepetitionRecord;
use crate::error::{Error, Result};

/// Repetition-count thresholds as fractions of the number of repetitions.
pub const STABILITY_FRACTIONS: [f64; 6] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub method: String,
    pub repetitions: usize,
    /// Features selected in at least `ceil(f * R)` repetitions, one entry per
    /// [`STABILITY_FRACTIONS`] value.
    pub counts: Vec<usize>,
    pub at_least_once: usize,
    /// Features selected in `1..=max(1, round(R / 6))` repetitions.
    pub noise: usize,
    pub average_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
}

/// Upper bound of the noise band for `r` repetitions.
pub fn noise_limit(r: usize) -> usize {
    ((r as f64 / 6.0).round() as usize).max(1)
}

pub fn stability_row(method: &str, sets: &[Vec<usize>]) -> Result<StabilityRow> {
    if sets.is_empty() {
        return Err(Error::invalid("stability needs at least one repetition"));
    }
    let r = sets.len();
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for set in sets {
        let mut unique = set.clone();
        unique.sort_unstable();
        unique.dedup();
        total += unique.len();
        for j in unique {
            *freq.entry(j).or_default() += 1;
        }
    }
    let counts = STABILITY_FRACTIONS
        .iter()
        .map(|&f| {
            let need = ((f * r as f64 - 1e-9).ceil() as usize).max(1);
            freq.values().filter(|&&c| c >= need).count()
        })
        .collect();
    let limit = noise_limit(r);
    Ok(StabilityRow {
        method: method.to_string(),
        repetitions: r,
        counts,
        at_least_once: freq.len(),
        noise: freq.values().filter(|&&c| c <= limit).count(),
        average_size: total as f64 / r as f64,
    })
}

/// One row per method, in order of first appearance.
pub fn stability_table(records: &[RepetitionRecord]) -> Result<StabilityTable> {
    if records.is_empty() {
        return Err(Error::invalid("no records"));
    }
    let rows = group(records)
        .into_iter()
        .map(|(method, recs)| {
            let sets: Vec<Vec<usize>> = recs.iter().map(|r| r.selected.clone()).collect();
            stability_row(method, &sets)
        })
        .collect::<Result<_>>()?;
    Ok(StabilityTable { rows })
}

fn group(records: &[RepetitionRecord]) -> Vec<(&str, Vec<&RepetitionRecord>)> {
    let mut out: Vec<(&str, Vec<&RepetitionRecord>)> = Vec::new();
    for r in records {
        match out.iter_mut().find(|(m, _)| *m == r.method) {
            Some((_, v)) => v.push(r),
            None => out.push((&r.method, vec![r])),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub repetitions: usize,
    pub failed: usize,
    pub mean_n_selected: f64,
    pub mean_oob_r2: Option<f64>,
    pub mean_test_r2: Option<f64>,
    pub mean_baseline_r2: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(records: &[RepetitionRecord]) -> Vec<MethodSummary> {
    group(records)
        .into_iter()
        .map(|(method, recs)| MethodSummary {
            method: method.to_string(),
            repetitions: recs.len(),
            failed: recs.iter().filter(|r| r.error.is_some()).count(),
            mean_n_selected: recs.iter().map(|r| r.n_selected as f64).sum::<f64>() / recs.len() as f64,
            mean_oob_r2: mean_of(recs.iter().map(|r| r.oob_r2)),
            mean_test_r2: mean_of(recs.iter().map(|r| r.test_r2)),
            mean_baseline_r2: mean_of(recs.iter().map(|r| r.baseline_r2)),
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV `repetition,method,n_selected,oob_r2,test_r2,seconds`. Failed cells
/// leave the R^2 fields empty. With `include_timing` off the seconds column
/// is written as 0 so that output depends on the inputs only.
pub fn write_records_csv<W: Write>(records: &[RepetitionRecord], writer: W, include_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["repetition", "method", "n_selected", "oob_r2", "test_r2", "seconds"])?;
    for r in records {
        let seconds = if include_timing { r.seconds } else { 0.0 };
        w.write_record([
            r.repetition.to_string(),
            r.method.clone(),
            r.n_selected.to_string(),
            cell(r.oob_r2),
            cell(r.test_r2),
            seconds.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records csv>", e))?;
    Ok(())
}

/// CSV `repetition,method,n_selected,ols_test_r2`.
pub fn write_baseline_csv<W: Write>(records: &[RepetitionRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["repetition", "method", "n_selected", "ols_test_r2"])?;
    for r in records {
        w.write_record([
            r.repetition.to_string(),
            r.method.clone(),
            r.n_selected.to_string(),
            cell(r.baseline_r2),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<baseline csv>", e))?;
    Ok(())
}

/// CSV `method,1.0,0.9,0.8,0.7,0.6,0.5,ge1,noise,average`.
pub fn write_stability_csv<W: Write>(table: &StabilityTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["method".to_string()];
    header.extend(STABILITY_FRACTIONS.iter().map(|f| format!("{f:.1}")));
    header.extend(["ge1", "noise", "average"].map(String::from));
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.method.clone()];
        rec.extend(row.counts.iter().map(|c| c.to_string()));
        rec.push(row.at_least_once.to_string());
        rec.push(row.noise.to_string());
        rec.push(format!("{:.2}", row.average_size));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<stability csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    /// Printed in the corner when present.
    pub timestamp: Option<String>,
}

/// Type-7 quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Box plots of held-out and out-of-bag R^2 per method, a dashed line at the
/// mean least-squares baseline, and the mean selected-set size under each
/// method. Whiskers span the minimum and maximum.
pub fn render_svg(records: &[RepetitionRecord], opts: &PlotOptions) -> String {
    const LEFT: f64 = 70.0;
    const TOP: f64 = 60.0;
    const PLOT_H: f64 = 320.0;
    const SLOT: f64 = 80.0;
    let groups = group(records);
    let width = LEFT + SLOT * groups.len().max(1) as f64 + 40.0;
    let height = TOP + PLOT_H + 130.0;

    let all: Vec<f64> = records
        .iter()
        .flat_map(|r| [r.test_r2, r.oob_r2, r.baseline_r2])
        .flatten()
        .collect();
    let lowest = all.iter().copied().fold(0.0f64, f64::min).max(-2.0);
    let y_lo = (lowest * 5.0).floor() / 5.0;
    let y_hi = 1.0;
    let y = |v: f64| TOP + (y_hi - v.clamp(y_lo, y_hi)) / (y_hi - y_lo) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{LEFT}" y="24" font-size="14">{}</text>"#, escape(&opts.title));
    if let Some(ts) = &opts.timestamp {
        let _ = writeln!(s, r##"<text x="{:.0}" y="24" text-anchor="end" fill="#666">{}</text>"##, width - 10.0, escape(ts));
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="36" width="10" height="10" fill="#4c72b0"/><text x="{}" y="45">test R²</text><rect x="{}" y="36" width="10" height="10" fill="#dd8452"/><text x="{}" y="45">OOB R²</text><line x1="{}" y1="41" x2="{}" y2="41" stroke="#c44e52" stroke-dasharray="4 3"/><text x="{}" y="45">OLS baseline</text>"##,
        LEFT + 14.0,
        LEFT + 80.0,
        LEFT + 94.0,
        LEFT + 160.0,
        LEFT + 180.0,
        LEFT + 184.0
    );

    let mut tick = y_lo;
    while tick <= y_hi + 1e-9 {
        let ty = y(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#ddd"/><text x="{:.0}" y="{:.2}" text-anchor="end">{tick:.1}</text>"##,
            width - 40.0,
            LEFT - 6.0,
            ty + 4.0
        );
        tick += 0.2;
    }
    let _ = writeln!(s, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="black"/>"#, TOP + PLOT_H);

    for (i, (method, recs)) in groups.iter().enumerate() {
        let cx = LEFT + SLOT * (i as f64 + 0.5);
        for (values, dx, colour) in [
            (recs.iter().filter_map(|r| r.test_r2).collect::<Vec<_>>(), -16.0, "#4c72b0"),
            (recs.iter().filter_map(|r| r.oob_r2).collect::<Vec<_>>(), 2.0, "#dd8452"),
        ] {
            if values.is_empty() {
                continue;
            }
            let mut v = values;
            v.sort_by(f64::total_cmp);
            let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
            let x0 = cx + dx;
            let xm = x0 + 7.0;
            let _ = writeln!(
                s,
                r#"<line x1="{xm:.2}" y1="{:.2}" x2="{xm:.2}" y2="{:.2}" stroke="{colour}"/><rect x="{x0:.2}" y="{:.2}" width="14" height="{:.2}" fill="{colour}" fill-opacity="0.5" stroke="{colour}"/><line x1="{x0:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
                y(v[0]),
                y(v[v.len() - 1]),
                y(q3),
                (y(q1) - y(q3)).max(0.5),
                y(med),
                x0 + 14.0,
                y(med)
            );
        }
        let mean_size = recs.iter().map(|r| r.n_selected as f64).sum::<f64>() / recs.len() as f64;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{mean_size:.1}</text><text x="{cx:.2}" y="{:.2}" text-anchor="end" transform="rotate(-40 {cx:.2} {:.2})">{}</text>"#,
            TOP + PLOT_H + 18.0,
            TOP + PLOT_H + 36.0,
            TOP + PLOT_H + 36.0,
            escape(method)
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.0}" y="{:.2}" text-anchor="end" fill="#666">avg size</text>"##,
        LEFT - 6.0,
        TOP + PLOT_H + 18.0
    );

    let baseline: Vec<f64> = records.iter().filter_map(|r| r.baseline_r2).collect();
    if !baseline.is_empty() {
        let by = y(baseline.iter().sum::<f64>() / baseline.len() as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{by:.2}" x2="{:.2}" y2="{by:.2}" stroke="#c44e52" stroke-dasharray="4 3"/>"##,
            width - 40.0
        );
    }
    s.push_str("</svg>\n");
    s
}
