use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentMode, Scheme};

/// One scheme at one layer count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub layers: usize,
    /// Hierarchical profile, or `[threshold]` for the single-code schemes.
    pub profile: Vec<usize>,
    /// Set when the configuration was infeasible for this row.
    pub skipped: Option<String>,
    pub trials: usize,
    pub mean_finish: Option<f64>,
    pub stderr_finish: Option<f64>,
    /// Max over layers of the per-layer expectations (harmonic sums).
    pub expected_exact: Option<f64>,
    pub expected_log: Option<f64>,
    pub decode_cost_serial: Option<f64>,
    pub decode_cost_parallel: Option<f64>,
    /// Profile the decode-cost columns were computed for, when it differs.
    pub cost_profile: Option<Vec<usize>>,
    pub mean_decode_serial_s: Option<f64>,
    pub mean_decode_parallel_s: Option<f64>,
    pub max_rel_error: Option<f64>,
    pub failures: usize,
}

impl ReportRow {
    pub(crate) fn new(scheme: Scheme, layers: usize, profile: Vec<usize>) -> Self {
        Self {
            scheme,
            layers,
            profile,
            skipped: None,
            trials: 0,
            mean_finish: None,
            stderr_finish: None,
            expected_exact: None,
            expected_log: None,
            decode_cost_serial: None,
            decode_cost_parallel: None,
            cost_profile: None,
            mean_decode_serial_s: None,
            mean_decode_parallel_s: None,
            max_rel_error: None,
            failures: 0,
        }
    }

    pub(crate) fn skipped(scheme: Scheme, layers: usize, reason: String) -> Self {
        let mut row = Self::new(scheme, layers, vec![]);
        row.skipped = Some(reason);
        row
    }

    fn statistics(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut push = |name, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, v));
            }
        };
        push("mean_finish", self.mean_finish);
        push("stderr_finish", self.stderr_finish);
        push("expected_exact", self.expected_exact);
        push("expected_log", self.expected_log);
        push("decode_cost_serial", self.decode_cost_serial);
        push("decode_cost_parallel", self.decode_cost_parallel);
        push("mean_decode_serial_s", self.mean_decode_serial_s);
        push("mean_decode_parallel_s", self.mean_decode_parallel_s);
        push("max_rel_error", self.max_rel_error);
        if self.trials > 0 {
            push("trials", Some(self.trials as f64));
            push("failures", Some(self.failures as f64));
        }
        out
    }
}

/// Paired per-trial finishing times (same timeline or straggler draw for
/// every scheme in the row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub layers: usize,
    pub hier: Option<f64>,
    pub plain: Option<f64>,
    pub sumrate: Option<f64>,
    pub stragglers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub rows: Vec<ReportRow>,
    pub trial_rows: Vec<TrialRow>,
    pub notes: Vec<String>,
}

fn join_profile(p: &[usize]) -> String {
    p.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl ExperimentReport {
    pub fn row(&self, scheme: Scheme, layers: usize) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.layers == layers)
    }

    fn header_comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }

    /// Long format: one line per scheme x layer count x statistic.
    pub fn to_csv(&self) -> String {
        let mut out = self.header_comment();
        out.push_str("scheme,layers,profile,statistic,value\n");
        for row in &self.rows {
            let profile = join_profile(&row.profile);
            if let Some(reason) = &row.skipped {
                writeln!(
                    out,
                    "{},{},{},skipped,\"{}\"",
                    row.scheme.name(),
                    row.layers,
                    profile,
                    reason.replace('"', "'")
                )
                .unwrap();
                continue;
            }
            for (name, v) in row.statistics() {
                writeln!(
                    out,
                    "{},{},{},{},{:?}",
                    row.scheme.name(),
                    row.layers,
                    profile,
                    name,
                    v
                )
                .unwrap();
            }
        }
        out
    }

    /// Paired per-trial columns for auditing scheme comparisons.
    pub fn trials_csv(&self) -> String {
        let mut out = self.header_comment();
        out.push_str("trial,layers,hier,plain,sumrate,stragglers\n");
        for t in &self.trial_rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t.trial,
                t.layers,
                opt(t.hier),
                opt(t.plain),
                opt(t.sumrate),
                t.stragglers.map(|s| s.to_string()).unwrap_or_default()
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut row = ReportRow::new(Scheme::Hier, 2, vec![14, 6]);
        row.mean_finish = Some(1.5);
        row.trials = 3;
        let report = ExperimentReport {
            mode: ExperimentMode::MonteCarlo,
            config_hash: "abcd".into(),
            seed: 9,
            trials: 3,
            rows: vec![row, ReportRow::skipped(Scheme::Plain, 4, "K > N".into())],
            trial_rows: vec![TrialRow {
                trial: 0,
                layers: 2,
                hier: Some(1.0),
                plain: None,
                sumrate: Some(0.5),
                stragglers: None,
            }],
            notes: vec![],
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config_hash=abcd seed=9");
        assert_eq!(lines[1], "scheme,layers,profile,statistic,value");
        assert_eq!(lines[2], "hier,2,14;6,mean_finish,1.5");
        assert!(lines.contains(&"plain,4,,skipped,\"K > N\""));
        assert_eq!(report.trials_csv().lines().nth(2).unwrap(), "0,2,1.0,,0.5,");
        let back: ExperimentReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
