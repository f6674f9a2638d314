use super::{FeatureType, ProbeResult, ProbingTask};
use crate::error::Result;
use crate::table::{Align, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReportRow {
    pub task: ProbingTask,
    /// Fraction in [0, 1].
    pub accuracy: f64,
    pub layer: usize,
    pub feature_type: FeatureType,
    /// Lowest accuracy among the rows of its feature type.
    pub worst: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeReportRow>,
}

pub const PROBE_REPORT_COLUMNS: [&str; 4] =
    ["Linguistic Feature", "Highest Accuracy", "Layer", "Feature Type"];

/// Best layer per task, in the fixed task order. Ties go to the lower
/// layer; tasks without results are left out.
pub fn probe_report(results: &[ProbeResult]) -> ProbeReport {
    let mut rows: Vec<ProbeReportRow> = Vec::new();
    for task in ProbingTask::ALL {
        let best = results
            .iter()
            .filter(|r| r.task == task)
            .min_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.layer.cmp(&b.layer)));
        if let Some(r) = best {
            rows.push(ProbeReportRow {
                task,
                accuracy: r.accuracy,
                layer: r.layer,
                feature_type: task.feature_type(),
                worst: false,
            });
        }
    }
    for ft in [FeatureType::Surface, FeatureType::Syntactic] {
        let worst = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.feature_type == ft)
            .min_by(|a, b| a.1.accuracy.total_cmp(&b.1.accuracy).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        if let Some(i) = worst {
            rows[i].worst = true;
        }
    }
    ProbeReport { rows }
}

impl ProbeReport {
    fn table(&self, mark_worst: bool) -> Table {
        Table {
            header: PROBE_REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            align: vec![Align::Left, Align::Right, Align::Right, Align::Left],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let mark = if mark_worst && r.worst { "*" } else { "" };
                    vec![
                        format!("{}{mark}", r.task.name()),
                        format!("{:.2}", r.accuracy * 100.0),
                        r.layer.to_string(),
                        r.feature_type.as_str().to_string(),
                    ]
                })
                .collect(),
        }
    }

    /// Aligned table; accuracies in percent. The worst row of each feature
    /// type carries a `*`.
    pub fn render_text(&self) -> String {
        let mut out = self.table(true).render_text();
        out.push_str("* worst accuracy within its feature type\n");
        out
    }

    pub fn render_csv(&self) -> Result<String> {
        self.table(false).render_csv()
    }
}
