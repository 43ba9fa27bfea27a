//! Minimal deterministic SVG line charts: metric mean vs IoV count, one
//! series per mechanism/bidder combination. No external renderer, so the
//! output is byte-stable across runs and platforms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use crate::metrics::MetricsRecord;

pub const PLOT_METRICS: [&str; 4] = ["reward", "sw", "budget", "latency"];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 620.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 430.0;
const TICKS: usize = 5;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn metric_label(metric: &str) -> &'static str {
    match metric {
        "reward" => "mean shared reward",
        "sw" => "mean social welfare",
        "budget" => "mean auctioneer budget",
        "latency" => "mean total latency",
        _ => "value",
    }
}

/// `{:.2}` with trailing zeros trimmed, so tick text stays compact and stable.
fn fmt_num(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn padded(min: f64, max: f64) -> (f64, f64) {
    if (max - min).abs() > 1e-12 {
        (min, max)
    } else {
        let pad = if max.abs() > 1e-12 { max.abs() * 0.1 } else { 1.0 };
        (min - pad, max + pad)
    }
}

/// Render one chart. Errors if `metric` is not in [`PLOT_METRICS`] or if
/// there is nothing to draw.
pub fn render_plot(records: &[MetricsRecord], metric: &str) -> Result<String, CliError> {
    if !PLOT_METRICS.contains(&metric) {
        return Err(CliError::Invalid {
            field: "metric",
            message: format!("unknown metric {metric:?}; expected one of {PLOT_METRICS:?}"),
        });
    }
    if records.is_empty() {
        return Err(CliError::EmptyRecords {
            metric: metric.to_string(),
        });
    }

    let mut series: BTreeMap<(&str, &str), Vec<(usize, f64)>> = BTreeMap::new();
    for record in records {
        let value = record.metric_mean(metric).expect("metric checked above");
        series
            .entry((record.mechanism.as_str(), record.bidder.as_str()))
            .or_default()
            .push((record.iov_count, value));
    }
    for points in series.values_mut() {
        points.sort_by_key(|&(iov, _)| iov);
    }

    let xs: Vec<f64> = records.iter().map(|r| r.iov_count as f64).collect();
    let ys: Vec<f64> = series.values().flatten().map(|&(_, v)| v).collect();
    let raw_min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let raw_max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x_min, x_max) = padded(raw_min(&xs), raw_max(&xs));
    let (y_min, y_max) = padded(raw_min(&ys), raw_max(&ys));
    let x_of = |v: f64| LEFT + (v - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let y_of = |v: f64| BOTTOM - (v - y_min) / (y_max - y_min) * (BOTTOM - TOP);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    )
    .unwrap();
    writeln!(w, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();
    writeln!(
        w,
        "<text x=\"{:.2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{} vs IoV count</text>",
        (LEFT + RIGHT) / 2.0,
        metric_label(metric)
    )
    .unwrap();

    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        let xp = x_of(xv);
        let yp = y_of(yv);
        writeln!(
            w,
            "<line x1=\"{xp:.2}\" y1=\"{BOTTOM}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#cccccc\"/>",
            BOTTOM + 5.0
        )
        .unwrap();
        writeln!(
            w,
            "<text x=\"{xp:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            BOTTOM + 18.0,
            fmt_num(xv)
        )
        .unwrap();
        writeln!(
            w,
            "<line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{LEFT}\" y2=\"{yp:.2}\" stroke=\"#cccccc\"/>",
            LEFT - 5.0
        )
        .unwrap();
        writeln!(
            w,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 8.0,
            yp + 4.0,
            fmt_num(yv)
        )
        .unwrap();
    }
    writeln!(
        w,
        "<line x1=\"{LEFT}\" y1=\"{BOTTOM}\" x2=\"{RIGHT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        w,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{BOTTOM}\" stroke=\"black\"/>"
    )
    .unwrap();
    writeln!(
        w,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">IoV count</text>",
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 40.0
    )
    .unwrap();
    writeln!(
        w,
        "<text x=\"18\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>",
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        metric_label(metric)
    )
    .unwrap();

    for (idx, ((mechanism, bidder), points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if points.len() > 1 {
            let coords: Vec<String> = points
                .iter()
                .map(|&(iov, v)| format!("{:.2},{:.2}", x_of(iov as f64), y_of(v)))
                .collect();
            writeln!(
                w,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                coords.join(" ")
            )
            .unwrap();
        }
        for &(iov, v) in points {
            writeln!(
                w,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>",
                x_of(iov as f64),
                y_of(v)
            )
            .unwrap();
        }
        let ly = TOP + 14.0 + 18.0 * idx as f64;
        writeln!(
            w,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>",
            RIGHT - 150.0,
            ly - 10.0
        )
        .unwrap();
        writeln!(
            w,
            "<text x=\"{:.2}\" y=\"{ly:.2}\">{mechanism}/{bidder}</text>",
            RIGHT - 134.0
        )
        .unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

pub fn emit_plot(path: &Path, records: &[MetricsRecord], metric: &str) -> Result<(), CliError> {
    let svg = render_plot(records, metric)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgemarket_core::mappo::BidderKind;
    use edgemarket_core::market::MechanismKind;

    fn record(
        iov: usize,
        mechanism: MechanismKind,
        bidder: BidderKind,
        value: f64,
    ) -> MetricsRecord {
        MetricsRecord {
            experiment: "exp".into(),
            iov_count: iov,
            mechanism,
            bidder,
            reward_mean: value,
            reward_std: 0.0,
            sw_mean: value * 2.0,
            sw_std: 0.0,
            budget_mean: 0.0,
            budget_std: 0.0,
            latency_mean: 0.5,
            latency_std: 0.0,
        }
    }

    #[test]
    fn single_point_series_draws_exactly_one_marker() {
        let records = [record(20, MechanismKind::McAfeeDouble, BidderKind::Truthful, 1.0)];
        let svg = render_plot(&records, "reward").unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn markers_and_lines_count_points_and_series() {
        let records = [
            record(20, MechanismKind::McAfeeDouble, BidderKind::Truthful, 1.0),
            record(40, MechanismKind::McAfeeDouble, BidderKind::Truthful, 2.0),
            record(20, MechanismKind::SecondPrice, BidderKind::Truthful, 3.0),
            record(40, MechanismKind::SecondPrice, BidderKind::Truthful, 4.0),
            record(60, MechanismKind::SecondPrice, BidderKind::Truthful, 5.0),
        ];
        let svg = render_plot(&records, "sw").unwrap();
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("mcafee/truthful"));
        assert!(svg.contains("second-price/truthful"));
    }

    #[test]
    fn rendering_is_byte_identical_across_calls() {
        let records = [
            record(20, MechanismKind::McAfeeDouble, BidderKind::Learned, 1.25),
            record(40, MechanismKind::RandomMatch, BidderKind::RandomBid, -0.75),
        ];
        for metric in PLOT_METRICS {
            let a = render_plot(&records, metric).unwrap();
            let b = render_plot(&records, metric).unwrap();
            assert_eq!(a, b);
        }
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        emit_plot(&p1, &records, "latency").unwrap();
        emit_plot(&p2, &records, "latency").unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn degenerate_domains_still_render() {
        let records = [
            record(20, MechanismKind::McAfeeDouble, BidderKind::Truthful, 0.0),
            record(20, MechanismKind::SecondPrice, BidderKind::Truthful, 0.0),
        ];
        let svg = render_plot(&records, "budget").unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
    }

    #[test]
    fn bad_inputs_error_out() {
        let records = [record(20, MechanismKind::McAfeeDouble, BidderKind::Truthful, 1.0)];
        assert!(matches!(
            render_plot(&records, "throughput"),
            Err(CliError::Invalid { field: "metric", .. })
        ));
        assert!(matches!(
            render_plot(&[], "reward"),
            Err(CliError::EmptyRecords { .. })
        ));
    }
}
