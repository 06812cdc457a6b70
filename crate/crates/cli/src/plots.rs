//! SVG figures rendered into memory.

use plotters::prelude::*;

const WIDTH: u32 = 960;
const PANEL_HEIGHT: u32 = 240;
/// Longest polyline drawn per trace; longer traces are thinned uniformly.
const MAX_POINTS: usize = 4000;
const COLORS: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

pub struct Trace<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

pub struct Panel<'a> {
    pub y_label: &'a str,
    pub traces: Vec<Trace<'a>>,
}

/// Scatter cloud plus highlighted points on one pair of axes.
pub struct ScatterPanel<'a> {
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub cloud: Vec<(f64, f64)>,
    pub marked: Vec<(f64, f64)>,
}

type DrawResult<T> = Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Finite extent of `values`, padded by 5 % and widened when degenerate.
fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 1e-9 * lo.abs().max(1.0) {
        0.05 * span
    } else {
        0.05 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

fn thinned<'a>(x: &'a [f64], y: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
    let n = x.len().min(y.len());
    let stride = n.div_ceil(MAX_POINTS).max(1);
    (0..n)
        .step_by(stride)
        .map(move |k| (x[k], y[k]))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
}

/// Vertically stacked time-series panels sharing the x axis label.
pub fn stacked(title: &str, x_label: &str, panels: &[Panel]) -> DrawResult<String> {
    let mut svg = String::new();
    {
        let height = PANEL_HEIGHT * panels.len().max(1) as u32 + 40;
        let root = SVGBackend::with_string(&mut svg, (WIDTH, height)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let root = root.titled(title, ("sans-serif", 20)).map_err(err)?;
        let areas = root.split_evenly((panels.len().max(1), 1));
        for (area, panel) in areas.iter().zip(panels) {
            let (x0, x1) = extent(panel.traces.iter().flat_map(|t| t.x.iter()));
            let (y0, y1) = extent(panel.traces.iter().flat_map(|t| t.y.iter()));
            let mut chart = ChartBuilder::on(area)
                .margin(8)
                .x_label_area_size(30)
                .y_label_area_size(60)
                .build_cartesian_2d(x0..x1, y0..y1)
                .map_err(err)?;
            chart
                .configure_mesh()
                .x_desc(x_label)
                .y_desc(panel.y_label)
                .light_line_style(WHITE.mix(0.0))
                .draw()
                .map_err(err)?;
            for (k, t) in panel.traces.iter().enumerate() {
                let color = COLORS[k % COLORS.len()];
                chart
                    .draw_series(LineSeries::new(thinned(t.x, t.y), color.stroke_width(1)))
                    .map_err(err)?
                    .label(t.label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
            }
            if panel.traces.len() > 1 {
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(err)?;
            }
        }
        root.present().map_err(err)?;
    }
    Ok(svg)
}

/// Side-by-side scatter panels; marked points are drawn as red crosses.
pub fn scatter(title: &str, panels: &[ScatterPanel]) -> DrawResult<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, 360)).into_drawing_area();
        root.fill(&WHITE).map_err(err)?;
        let root = root.titled(title, ("sans-serif", 20)).map_err(err)?;
        let areas = root.split_evenly((1, panels.len().max(1)));
        for (area, panel) in areas.iter().zip(panels) {
            let all = || panel.cloud.iter().chain(&panel.marked);
            let (x0, x1) = extent(all().map(|p| &p.0));
            let (y0, y1) = extent(all().map(|p| &p.1));
            let mut chart = ChartBuilder::on(area)
                .margin(8)
                .x_label_area_size(30)
                .y_label_area_size(60)
                .build_cartesian_2d(x0..x1, y0..y1)
                .map_err(err)?;
            chart
                .configure_mesh()
                .x_desc(panel.x_label)
                .y_desc(panel.y_label)
                .light_line_style(WHITE.mix(0.0))
                .draw()
                .map_err(err)?;
            let finite = |p: &&(f64, f64)| p.0.is_finite() && p.1.is_finite();
            chart
                .draw_series(
                    panel
                        .cloud
                        .iter()
                        .filter(finite)
                        .map(|&p| Circle::new(p, 3, COLORS[0].filled())),
                )
                .map_err(err)?;
            chart
                .draw_series(
                    panel
                        .marked
                        .iter()
                        .filter(finite)
                        .map(|&p| Cross::new(p, 6, COLORS[1].stroke_width(2))),
                )
                .map_err(err)?;
        }
        root.present().map_err(err)?;
    }
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_handles_flat_and_empty_data() {
        assert_eq!(extent([].iter()), (-1.0, 1.0));
        let (lo, hi) = extent([2.0, 2.0].iter());
        assert!(lo < 2.0 && hi > 2.0);
        let (lo, hi) = extent([0.0, f64::NAN, 10.0, f64::INFINITY].iter());
        assert_eq!((lo, hi), (-0.5, 10.5));
    }

    #[test]
    fn long_traces_are_thinned() {
        let x: Vec<f64> = (0..12_001).map(|k| k as f64).collect();
        assert!(thinned(&x, &x).count() <= MAX_POINTS + 1);
    }

    #[test]
    fn renders_svg_text() {
        let t = [0.0, 1.0, 2.0];
        let svg = stacked(
            "demo",
            "t [s]",
            &[Panel {
                y_label: "P [pu]",
                traces: vec![Trace {
                    label: "gfl",
                    x: &t,
                    y: &t,
                }],
            }],
        )
        .unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("P [pu]"));
    }
}
