//! Flat CSV records summarizing one evaluation cell each.

use std::fmt::Write as _;
use std::path::Path;

use edgemarket_core::mappo::{BidderKind, EvalReport};
use edgemarket_core::market::MechanismKind;

use crate::error::CliError;

pub const METRICS_CSV_HEADER: &str = "experiment,iov_count,mechanism,bidder,\
reward_mean,reward_std,sw_mean,sw_std,budget_mean,budget_std,latency_mean,latency_std";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub experiment: String,
    pub iov_count: usize,
    pub mechanism: MechanismKind,
    pub bidder: BidderKind,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub sw_mean: f64,
    pub sw_std: f64,
    pub budget_mean: f64,
    pub budget_std: f64,
    pub latency_mean: f64,
    pub latency_std: f64,
}

impl MetricsRecord {
    pub fn from_report(
        experiment: &str,
        iov_count: usize,
        mechanism: MechanismKind,
        bidder: BidderKind,
        report: &EvalReport,
    ) -> Self {
        MetricsRecord {
            experiment: experiment.to_string(),
            iov_count,
            mechanism,
            bidder,
            reward_mean: report.reward.mean,
            reward_std: report.reward.std,
            sw_mean: report.social_welfare.mean,
            sw_std: report.social_welfare.std,
            budget_mean: report.budget.mean,
            budget_std: report.budget.std,
            latency_mean: report.latency.mean,
            latency_std: report.latency.std,
        }
    }

    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{}",
            self.experiment, self.iov_count, self.mechanism, self.bidder
        )
        .unwrap();
        for value in [
            self.reward_mean,
            self.reward_std,
            self.sw_mean,
            self.sw_std,
            self.budget_mean,
            self.budget_std,
            self.latency_mean,
            self.latency_std,
        ] {
            write!(row, ",{value}").unwrap();
        }
        row
    }

    /// The column written to plots for a metric name from [`crate::plot::PLOT_METRICS`].
    pub fn metric_mean(&self, metric: &str) -> Option<f64> {
        match metric {
            "reward" => Some(self.reward_mean),
            "sw" => Some(self.sw_mean),
            "budget" => Some(self.budget_mean),
            "latency" => Some(self.latency_mean),
            _ => None,
        }
    }
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<(), CliError> {
    let mut body = String::from(METRICS_CSV_HEADER);
    body.push('\n');
    for record in records {
        body.push_str(&record.csv_row());
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgemarket_core::mappo::Stat;

    fn sample() -> MetricsRecord {
        MetricsRecord {
            experiment: "exp".into(),
            iov_count: 20,
            mechanism: MechanismKind::McAfeeDouble,
            bidder: BidderKind::Truthful,
            reward_mean: 1.5,
            reward_std: 0.25,
            sw_mean: 2.0,
            sw_std: 0.0,
            budget_mean: -0.0,
            budget_std: 0.0,
            latency_mean: 0.125,
            latency_std: 0.0625,
        }
    }

    #[test]
    fn rows_match_the_header_shape() {
        let row = sample().csv_row();
        assert_eq!(
            row.split(',').count(),
            METRICS_CSV_HEADER.split(',').count()
        );
        assert_eq!(
            row,
            "exp,20,mcafee,truthful,1.5,0.25,2,0,-0,0,0.125,0.0625"
        );
    }

    #[test]
    fn from_report_copies_every_stat() {
        let stat = |mean, std| Stat { mean, std };
        let report = EvalReport {
            episodes: 4,
            reward: stat(1.0, 2.0),
            social_welfare: stat(3.0, 4.0),
            budget: stat(5.0, 6.0),
            latency: stat(7.0, 8.0),
        };
        let record = MetricsRecord::from_report(
            "demo",
            40,
            MechanismKind::SecondPrice,
            BidderKind::Learned,
            &report,
        );
        assert_eq!(record.metric_mean("reward"), Some(1.0));
        assert_eq!(record.metric_mean("sw"), Some(3.0));
        assert_eq!(record.metric_mean("budget"), Some(5.0));
        assert_eq!(record.metric_mean("latency"), Some(7.0));
        assert_eq!(record.metric_mean("throughput"), None);
        assert_eq!(record.reward_std, 2.0);
        assert_eq!(record.latency_std, 8.0);
    }

    #[test]
    fn file_round_trip_keeps_exact_float_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_metrics_csv(&path, &[sample(), sample()]).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], METRICS_CSV_HEADER);
        assert_eq!(lines[1], lines[2]);
        assert!(lines[1].starts_with("exp,20,mcafee,truthful,"));
    }
}
