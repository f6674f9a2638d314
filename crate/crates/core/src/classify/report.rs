use super::{EvalMetrics, ModelSetting};
use crate::error::Result;
use crate::table::{Align, Table};

pub const CLASSIFIER_REPORT_COLUMNS: [&str; 4] = ["Model", "Accuracy", "Sensitivity", "Specificity"];

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierReportRow {
    pub model: String,
    pub metrics: EvalMetrics,
}

/// Rows in insertion order; ratios print with two decimals, undefined
/// ratios as `n/a`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassifierReport {
    pub rows: Vec<ClassifierReportRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

impl ClassifierReport {
    pub fn push(&mut self, setting: ModelSetting, metrics: EvalMetrics) {
        self.rows.push(ClassifierReportRow {
            model: setting.display_name().into(),
            metrics,
        });
    }

    fn table(&self) -> Table {
        Table {
            header: CLASSIFIER_REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(),
            align: vec![Align::Left, Align::Right, Align::Right, Align::Right],
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.model.clone(),
                        cell(r.metrics.accuracy),
                        cell(r.metrics.sensitivity),
                        cell(r.metrics.specificity),
                    ]
                })
                .collect(),
        }
    }

    pub fn render_text(&self) -> String {
        self.table().render_text()
    }

    pub fn render_csv(&self) -> Result<String> {
        self.table().render_csv()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_undefined_as_na() {
        let mut rep = ClassifierReport::default();
        rep.push(ModelSetting::FeaturesOnly, EvalMetrics::from_counts(0, 1, 1, 0));
        assert_eq!(
            rep.render_csv().unwrap(),
            "Model,Accuracy,Sensitivity,Specificity\nNN + FS1,0.50,n/a,0.50\n"
        );
        assert_eq!(
            rep.render_text(),
            "Model    | Accuracy | Sensitivity | Specificity\n\
             ---------+----------+-------------+------------\n\
             NN + FS1 |     0.50 |         n/a |        0.50\n"
        );
    }
}
