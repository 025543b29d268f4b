//! SVG timing plots. Presentation only.

use std::path::Path;

use plotters::prelude::*;

use crate::bench::BenchmarkRecord;

type PlotResult = Result<(), Box<dyn std::error::Error>>;

fn series(records: &[BenchmarkRecord], pick: fn(&BenchmarkRecord) -> f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, pick(r))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn bounds(pts: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 * 1.1 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 * 1.1 + 1e-6;
    }
    (x0, x1, y0, y1)
}

/// Encode and cluster time against `n`, on linear or log-log axes.
pub fn timing_plot(path: &Path, records: &[BenchmarkRecord], loglog: bool) -> PlotResult {
    let enc = series(records, |r| r.t_encode_seconds);
    let clu = series(records, |r| r.t_cluster_seconds);
    let all: Vec<(f64, f64)> = enc.iter().chain(&clu).copied().collect();
    let (x0, x1, y0, y1) = bounds(&all);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let caption = if loglog { "time vs n (log-log)" } else { "time vs n" };
    let mut builder = ChartBuilder::on(&root);
    builder.caption(caption, ("sans-serif", 20)).margin(15).x_label_area_size(40).y_label_area_size(60);
    macro_rules! draw {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc("n").y_desc("seconds").draw()?;
            for (pts, colour, name) in [(&enc, RED, "encode"), (&clu, BLUE, "cluster")] {
                chart
                    .draw_series(LineSeries::new(pts.iter().copied(), colour.stroke_width(2)))?
                    .label(name)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], colour));
                chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, colour.filled())))?;
            }
            chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw()?;
        }};
    }
    if loglog {
        draw!(builder.build_cartesian_2d((x0 * 0.9..x1 * 1.1).log_scale(), (y0 * 0.8..y1 * 1.25).log_scale())?);
    } else {
        draw!(builder.build_cartesian_2d(0.0..x1 * 1.05, 0.0..y1 * 1.1)?);
    }
    root.present()?;
    Ok(())
}
