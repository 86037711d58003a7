use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::shrinkfit::FitState;
use crate::Result;

use super::config::{Method, SweepKind};
use super::sweep::{Diagnostics, PerUeRecord, SweepRecord};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let mut wr = writer(BufWriter::new(File::create(path)?));
    if rows.is_empty() {
        wr.write_record(header)?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 10] = [
    "method",
    "sweep_kind",
    "sweep_value",
    "trials",
    "symbol_errors",
    "total_symbols",
    "ser",
    "mean_alpha",
    "mean_iterations",
    "wallclock_s",
];

pub fn write_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    write_rows(records, &SWEEP_HEADER, path)
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn write_per_ue(rows: &[PerUeRecord], path: &Path) -> Result<()> {
    write_rows(rows, &["method", "sweep_value", "ue", "symbol_errors", "total_symbols", "ser"], path)
}

pub fn write_diagnostics(rows: &[Diagnostics], path: &Path) -> Result<()> {
    write_rows(
        rows,
        &["sweep_value", "method", "failed_trials", "resampled_trials", "clamp_events"],
        path,
    )
}

/// One row per iteration: `sweep_value,trial,iteration,alpha,epsilon,beta_used`.
pub fn write_trace(traces: &[(f64, u64, FitState)], path: &Path) -> Result<()> {
    let mut wr = writer(BufWriter::new(File::create(path)?));
    wr.write_record(["sweep_value", "trial", "iteration", "alpha", "epsilon", "beta_used"])?;
    for (value, trial, st) in traces {
        for i in 0..st.alphas.len() {
            wr.write_record([
                value.to_string(),
                trial.to_string(),
                (i + 1).to_string(),
                st.alphas[i].to_string(),
                st.eps[i].to_string(),
                st.betas[i].to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

const COLORS: [&str; 5] = ["#c0399f", "#d62728", "#1f5fd6", "#2ca02c", "#000000"];

/// Log-scale SER versus sweep value, one polyline per method.
pub fn render_svg(records: &[SweepRecord]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let xs: Vec<f64> = records.iter().map(|r| r.sweep_value).collect();
    let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (xmin, xmax) = if xmin.is_finite() && xmax > xmin { (xmin, xmax) } else { (xmin.min(0.0), xmin.max(0.0) + 1.0) };
    let min_pos = records
        .iter()
        .map(|r| r.ser)
        .filter(|s| *s > 0.0)
        .fold(1.0f64, f64::min);
    let dec_lo = min_pos.log10().floor().min(-1.0);
    let floor = 10f64.powf(dec_lo);
    let px = |x: f64| left + (x - xmin) / (xmax - xmin) * pw;
    let py = |s: f64| {
        let l = s.max(floor).log10();
        top + (0.0 - l) / (0.0 - dec_lo) * ph
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"##
    );
    let _ = writeln!(svg, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let mut d = dec_lo as i32;
    while d <= 0 {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        d += 1;
    }
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in &ticks {
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"##,
            px(*x),
            top + ph + 18.0
        );
    }
    let xlabel = match records.first().map(|r| r.sweep_kind) {
        Some(SweepKind::PilotLen) => "pilot length",
        _ => "UE transmit power [dBm]",
    };
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text><text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle">SER</text>"##,
        left + pw / 2.0,
        h - 10.0,
        top + ph / 2.0,
        top + ph / 2.0
    );

    let mut legend_y = top + 10.0;
    for m in Method::ALL {
        let mut pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.method == m && r.ser.is_finite())
            .map(|r| (r.sweep_value, r.ser))
            .collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let color = COLORS[m.index()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, s)| format!("{:.2},{:.2}", px(x), py(s)))
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="method-{m}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
            coords.join(" ")
        );
        let lx = left + pw + 12.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{lx}" y1="{legend_y}" x2="{:.1}" y2="{legend_y}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"##,
            lx + 20.0,
            lx + 26.0,
            legend_y + 4.0,
            m.label()
        );
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg_plot(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let records = read_csv(csv_path)?;
    std::fs::write(svg_path, render_svg(&records))?;
    Ok(())
}
