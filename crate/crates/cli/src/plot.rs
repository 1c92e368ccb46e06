use std::path::Path;

use plotters::prelude::*;

use crate::error::CliError;

/// Smallest value drawn on logarithmic axes; exact zeros are clamped to it.
const LOG_FLOOR: f64 = 1e-18;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(format!("plot: {e}"))
}

/// Lines `(label, points)` on one chart, optionally with a logarithmic y axis.
pub fn line_chart(path: &Path, title: &str, xlabel: &str, series: &[(&str, Vec<(f64, f64)>)], log_y: bool) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let pts = series.iter().flat_map(|(_, s)| s.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        let y = if log_y { y.abs().max(LOG_FLOOR) } else { y };
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, if log_y { LOG_FLOOR } else { 0.0 }, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        let pad = if log_y { y0 * 9.0 } else { y0.abs().max(1.0) * 0.1 };
        (y0, y1) = if log_y { (y0 / 10.0, y1 + pad) } else { (y0 - pad, y1 + pad) };
    }
    let colors = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    let mut builder = ChartBuilder::on(&root);
    builder.caption(title, ("sans-serif", 22)).margin(12).x_label_area_size(40).y_label_area_size(70);
    macro_rules! draw {
        ($chart:expr, $map:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc(xlabel).draw().map_err(plot_err)?;
            for (i, (label, s)) in series.iter().enumerate() {
                let c = colors[i % colors.len()];
                let data: Vec<(f64, f64)> = s.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| (x, $map(y))).collect();
                chart
                    .draw_series(LineSeries::new(data, c.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(*label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
            }
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
        }};
    }
    if log_y {
        draw!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale()).map_err(plot_err)?, |y: f64| y.abs().max(LOG_FLOOR));
    } else {
        draw!(builder.build_cartesian_2d(x0..x1, y0..y1).map_err(plot_err)?, |y: f64| y);
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
