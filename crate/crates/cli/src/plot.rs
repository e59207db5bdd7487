use std::path::Path;

use anyhow::{bail, Context};
use plotters::prelude::*;
use rbm_levy::experiments::{ResultTable, Row};

struct Chart {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    /// Plot log10 of both coordinates.
    log: bool,
    series: Vec<(String, Vec<(f64, f64)>)>,
}

fn push(series: &mut Vec<(String, Vec<(f64, f64)>)>, label: String, pt: (f64, f64)) {
    match series.iter_mut().find(|s| s.0 == label) {
        Some(s) => s.1.push(pt),
        None => series.push((label, vec![pt])),
    }
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v}"))
}

fn chart(table: &ResultTable) -> anyhow::Result<Chart> {
    let Some(first) = table.rows.first() else {
        bail!("result table is empty")
    };
    let experiment = first.experiment.clone();
    let summary = |r: &Row| r.seed.is_none();
    let mut series = Vec::new();
    let (x_label, y_label, log) = match experiment.as_str() {
        "rate_sweep" => {
            for r in table.rows.iter().filter(|r| summary(r)) {
                if let (Some(k), Some(e)) = (r.kappa, r.e1) {
                    push(
                        &mut series,
                        format!("a={} N={} T={}", fmt(r.a), r.n.unwrap_or(0), fmt(r.t)),
                        (k, e),
                    );
                }
            }
            ("log10 kappa", "log10 mean E1", true)
        }
        "long_time" => {
            for r in table.rows.iter().filter(|r| summary(r)) {
                if let (Some(t), Some(e)) = (r.t, r.e1) {
                    push(
                        &mut series,
                        format!(
                            "a={} N={} kappa={}",
                            fmt(r.a),
                            r.n.unwrap_or(0),
                            fmt(r.kappa)
                        ),
                        (t, e),
                    );
                }
            }
            ("log10 T", "log10 mean E1", true)
        }
        "cost_bench" => {
            for r in table.rows.iter().filter(|r| summary(r)) {
                if let (Some(n), Some(w), Some(m)) = (r.n, r.wall_clock, &r.mode) {
                    push(&mut series, m.clone(), (n as f64, w));
                }
            }
            ("log10 N", "log10 wall clock [s]", true)
        }
        "cucker_smale" => {
            for r in table.rows.iter().filter(|r| !summary(r)) {
                if let (Some(t), Some(dv), Some(m), Some(s)) = (r.t, r.dv, &r.mode, r.seed) {
                    push(&mut series, format!("{m} seed {s:x}"), (t, dv));
                }
            }
            ("t", "velocity diameter", false)
        }
        other => bail!("no chart for experiment `{other}`"),
    };
    if log {
        for s in &mut series {
            s.1.retain(|p| p.0 > 0.0 && p.1 > 0.0);
            for p in &mut s.1 {
                *p = (p.0.log10(), p.1.log10());
            }
        }
    }
    series.retain(|s| !s.1.is_empty());
    if series.is_empty() {
        bail!("no plottable rows in {experiment} table");
    }
    Ok(Chart {
        title: experiment,
        x_label,
        y_label,
        log,
        series,
    })
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad)..(hi + pad)
}

pub fn render(table: &ResultTable, out: &Path) -> anyhow::Result<()> {
    let chart = chart(table)?;
    let pts = || chart.series.iter().flat_map(|s| s.1.iter());
    let (x0, x1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.0), a.1.max(p.0))
    });
    let (y0, y1) = pts().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.1), a.1.max(p.1))
    });

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let root = SVGBackend::new(out, (800, 600)).into_drawing_area();
    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        root.fill(&WHITE)?;
        let mut ctx = ChartBuilder::on(&root)
            .caption(&chart.title, ("sans-serif", 24))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(padded(x0, x1), padded(y0, y1))?;
        ctx.configure_mesh()
            .x_desc(chart.x_label)
            .y_desc(chart.y_label)
            .draw()?;
        let legend = chart.series.len() <= 12;
        for (k, (label, points)) in chart.series.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            if chart.log {
                ctx.draw_series(points.iter().map(|&p| Circle::new(p, 3, color.filled())))?;
            }
            let drawn = ctx.draw_series(LineSeries::new(
                points.iter().copied(),
                color.stroke_width(2),
            ))?;
            if legend {
                drawn.label(label.as_str()).legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
                });
            }
        }
        if legend {
            ctx.configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()?;
        }
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| anyhow::anyhow!("rendering {}: {e}", out.display()))
}
