// SPDX-License-Identifier: MIT OR Apache-2.0

//! Convergence plots: `J(pi_t)` against `t`, one labeled series per run,
//! and when `r*` is known a second panel with the optimality gap
//! `r* - J(pi_t)` on a log scale.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

/// Gaps are clamped to this floor before taking logs.
pub const GAP_FLOOR: f64 = 1e-16;

const WIDTH: u32 = 800;
const PANEL_HEIGHT: u32 = 360;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(t, J)` pairs.
    pub points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

/// Renders the plot as an SVG document.
pub fn convergence_svg(series: &[Series], r_star: Option<f64>) -> Result<String> {
    let all = series.iter().flat_map(|s| s.points.iter());
    let t_max = all.clone().map(|p| p.0).fold(1.0, f64::max);
    let mut j_lo = all.clone().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut j_hi = all.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(r) = r_star {
        j_lo = j_lo.min(r);
        j_hi = j_hi.max(r);
    }
    let (j_lo, j_hi) = padded(j_lo, j_hi);
    let panels = if r_star.is_some() { 2 } else { 1 };

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, PANEL_HEIGHT * panels)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let areas = root.split_evenly((panels as usize, 1));

        let mut chart = ChartBuilder::on(&areas[0])
            .caption("expected reward J(pi_t)", ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(56)
            .build_cartesian_2d(0.0..t_max, j_lo..j_hi)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("iteration t")
            .y_desc("J")
            .draw()
            .map_err(plot_err)?;
        for (i, s) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        if let Some(r) = r_star {
            chart
                .draw_series(LineSeries::new([(0.0, r), (t_max, r)], BLACK.mix(0.5)))
                .map_err(plot_err)?
                .label("r*")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK.mix(0.5)));
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::LowerRight)
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;

        if let Some(r) = r_star {
            let gaps: Vec<Vec<(f64, f64)>> = series
                .iter()
                .map(|s| s.points.iter().map(|&(t, j)| (t, (r - j).max(GAP_FLOOR))).collect())
                .collect();
            let g_all = gaps.iter().flatten().map(|p| p.1);
            let g_lo = g_all.clone().fold(f64::INFINITY, f64::min);
            let g_hi = g_all.fold(f64::NEG_INFINITY, f64::max);
            let (g_lo, g_hi) = if g_lo.is_finite() && g_hi > g_lo {
                (g_lo / 2.0, g_hi * 2.0)
            } else {
                (GAP_FLOOR, 1.0)
            };
            let mut gap_chart = ChartBuilder::on(&areas[1])
                .caption("optimality gap r* - J(pi_t)", ("sans-serif", 18))
                .margin(12)
                .x_label_area_size(36)
                .y_label_area_size(56)
                .build_cartesian_2d(0.0..t_max, (g_lo..g_hi).log_scale())
                .map_err(plot_err)?;
            gap_chart
                .configure_mesh()
                .x_desc("iteration t")
                .y_desc("gap (log)")
                .y_label_formatter(&|v| format!("{v:.0e}"))
                .draw()
                .map_err(plot_err)?;
            for (i, (s, pts)) in series.iter().zip(gaps).enumerate() {
                let color = Palette99::pick(i).to_rgba();
                gap_chart
                    .draw_series(LineSeries::new(pts, color.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(s.label.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            }
            gap_chart
                .configure_series_labels()
                .position(SeriesLabelPosition::UpperRight)
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

pub fn write_convergence_svg(path: &Path, series: &[Series], r_star: Option<f64>) -> Result<()> {
    let svg = convergence_svg(series, r_star)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(label: &str, rate: f64) -> Series {
        Series {
            label: label.into(),
            points: (0..20).map(|t| (t as f64, 1.5 - (-(rate * t as f64)).exp())).collect(),
        }
    }

    #[test]
    fn two_series_are_labeled() {
        let svg = convergence_svg(&[series("grpo", 0.3), series("vspo", 0.6)], Some(1.5)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("\ngrpo\n</text>") && svg.contains("\nvspo\n</text>"));
        assert!(svg.contains("optimality gap"));
    }

    #[test]
    fn single_panel_without_r_star() {
        let svg = convergence_svg(&[series("run", 0.3)], None).unwrap();
        assert!(!svg.contains("optimality gap"));
    }

    #[test]
    fn empty_and_flat_inputs_render() {
        convergence_svg(&[], Some(1.0)).unwrap();
        let flat = Series { label: "flat".into(), points: vec![(0.0, 1.0), (1.0, 1.0)] };
        convergence_svg(&[flat], Some(1.0)).unwrap();
    }

    #[test]
    fn deterministic_bytes() {
        let s = [series("grpo", 0.3)];
        assert_eq!(convergence_svg(&s, Some(1.5)).unwrap(), convergence_svg(&s, Some(1.5)).unwrap());
    }
}
