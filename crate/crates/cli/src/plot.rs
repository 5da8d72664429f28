//! Two-panel SVG: mean test risk per strategy on the left, difference to
//! passive sampling with ±1 SEM bands on the right.

use std::path::Path;

use alrisk_core::experiment::{CurvePoint, DifferenceCurve};
use alrisk_core::{LearningCurve, Strategy};
use plotters::prelude::*;

const WIDTH: u32 = 1200;
const HEIGHT: u32 = 480;

pub fn color(strategy: Strategy) -> RGBColor {
    match strategy {
        Strategy::Passive => RGBColor(0x1f, 0x77, 0xb4),
        Strategy::Uncertainty => RGBColor(0xff, 0x7f, 0x0e),
        Strategy::LocalRiskBatch => RGBColor(0x2c, 0xa0, 0x2c),
        Strategy::Survey => RGBColor(0xd6, 0x27, 0x28),
    }
}

type Series<'a> = (Strategy, &'a [CurvePoint]);

/// Axis range padded by 5%, never degenerate.
fn span(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = if hi > lo {
        (hi - lo) * 0.05
    } else {
        lo.abs().max(1e-3) * 0.05
    };
    (lo - pad)..(hi + pad)
}

fn panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    title: &str,
    y_desc: &str,
    series: &[Series],
    bands: bool,
) -> Result<(), Box<dyn std::error::Error>>
where
    DB::ErrorType: 'static,
{
    let points = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        let x = p.labels_used as f64;
        let half = if bands { p.sem } else { 0.0 };
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(p.mean - half);
        y_hi = y_hi.max(p.mean + half);
    }
    if bands {
        y_lo = y_lo.min(0.0);
        y_hi = y_hi.max(0.0);
    }

    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(span(x_lo, x_hi), span(y_lo, y_hi))?;
    chart
        .configure_mesh()
        .x_desc("labels used")
        .y_desc(y_desc)
        .draw()?;

    if bands {
        let x = chart.x_range();
        chart.draw_series(LineSeries::new(
            [(x.start, 0.0), (x.end, 0.0)],
            BLACK.mix(0.4),
        ))?;
    }
    for &(strategy, pts) in series {
        let c = color(strategy);
        if bands {
            let upper = pts.iter().map(|p| (p.labels_used as f64, p.mean + p.sem));
            let lower = pts
                .iter()
                .rev()
                .map(|p| (p.labels_used as f64, p.mean - p.sem));
            chart.draw_series(std::iter::once(Polygon::new(
                upper.chain(lower).collect::<Vec<_>>(),
                c.mix(0.2).filled(),
            )))?;
        }
        chart
            .draw_series(LineSeries::new(
                pts.iter().map(|p| (p.labels_used as f64, p.mean)),
                c.stroke_width(2),
            ))?
            .label(strategy.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

pub fn render(
    curves: &[LearningCurve],
    diffs: &[DifferenceCurve],
    out: &Path,
) -> Result<(), Box<dyn std::error::Error>> {
    let with_diff = diffs.iter().any(|d| !d.points.is_empty());
    let width = if with_diff { WIDTH } else { WIDTH / 2 };
    let root = SVGBackend::new(out, (width, HEIGHT)).into_drawing_area();
    root.fill(&WHITE)?;
    let left: Vec<Series> = curves
        .iter()
        .map(|c| (c.strategy, c.points.as_slice()))
        .collect();
    if with_diff {
        let (l, r) = root.split_horizontally(width / 2);
        panel(&l, "average risk", "test risk", &left, false)?;
        let right: Vec<Series> = diffs
            .iter()
            .map(|d| (d.strategy, d.points.as_slice()))
            .collect();
        panel(
            &r,
            "difference vs passive",
            "risk - passive risk",
            &right,
            true,
        )?;
    } else {
        panel(&root, "average risk", "test risk", &left, false)?;
    }
    root.present()?;
    Ok(())
}
