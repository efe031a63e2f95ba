use std::path::Path;

use plotters::prelude::*;

use super::sweep::Aggregate;
use super::ExperimentError;

const COLORS: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

type Metric = fn(&Aggregate) -> (f64, f64);

/// Writes `accuracy.svg`, `f1.svg` and `disparity.svg` into `dir`: one line per
/// method with a band of one standard error.
pub fn plot_results(aggs: &[Aggregate], x_label: &str, dir: &Path) -> Result<(), ExperimentError> {
    let metrics: [(&str, &str, Metric); 3] = [
        ("accuracy", "accuracy", |a| (a.accuracy_mean, a.accuracy_se)),
        ("f1", "F1", |a| (a.f1_mean, a.f1_se)),
        ("disparity", "statistical disparity", |a| (a.disparity_mean, a.disparity_se)),
    ];
    for (file, label, get) in metrics {
        plot_metric(aggs, x_label, label, get, &dir.join(format!("{file}.svg")))
            .map_err(|e| ExperimentError::Plot(e.to_string()))?;
    }
    Ok(())
}

fn plot_metric(
    aggs: &[Aggregate],
    x_label: &str,
    y_label: &str,
    get: Metric,
    path: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut methods: Vec<&str> = Vec::new();
    for a in aggs {
        if !methods.contains(&a.method.as_str()) {
            methods.push(&a.method);
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for a in aggs {
        let (m, se) = get(a);
        x0 = x0.min(a.x);
        x1 = x1.max(a.x);
        y0 = y0.min(m - se);
        y1 = y1.max(m + se);
    }
    if !x0.is_finite() || !y0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.05;
        x1 += 0.05;
    }
    let pad = ((y1 - y0) * 0.1).max(0.01);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw()?;
    for (i, method) in methods.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64, f64)> = aggs
            .iter()
            .filter(|a| a.method == *method)
            .map(|a| {
                let (m, se) = get(a);
                (a.x, m, se)
            })
            .collect();
        let band: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(x, m, se)| (x, m + se))
            .chain(pts.iter().rev().map(|&(x, m, se)| (x, m - se)))
            .collect();
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))?;
        chart
            .draw_series(LineSeries::new(pts.iter().map(|&(x, m, _)| (x, m)), color.stroke_width(2)))?
            .label(*method)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
