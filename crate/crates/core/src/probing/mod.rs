//! The five probing tasks: labelled datasets built from a corpus, and
//! layer-wise probes trained on frozen embeddings.

mod build;
mod probe;
mod report;

pub use build::{bigram_shift_corpus, build_probing_dataset, swap_adjacent};
pub use probe::{run_probe, write_probe_results_csv, ProbeResult};
pub use report::{probe_report, ProbeReport, ProbeReportRow, PROBE_REPORT_COLUMNS};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbingTask {
    WordContent,
    SentenceLength,
    TopConstituents,
    TreeDepth,
    BiGramShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureType {
    Surface,
    Syntactic,
}

impl FeatureType {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureType::Surface => "Surface",
            FeatureType::Syntactic => "Syntactic",
        }
    }
}

impl ProbingTask {
    /// Report order.
    pub const ALL: [ProbingTask; 5] = [
        ProbingTask::WordContent,
        ProbingTask::SentenceLength,
        ProbingTask::TopConstituents,
        ProbingTask::TreeDepth,
        ProbingTask::BiGramShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProbingTask::WordContent => "WordContent",
            ProbingTask::SentenceLength => "SentenceLength",
            ProbingTask::TopConstituents => "TopConstituents",
            ProbingTask::TreeDepth => "TreeDepth",
            ProbingTask::BiGramShift => "BiGramShift",
        }
    }

    pub fn feature_type(self) -> FeatureType {
        match self {
            ProbingTask::WordContent | ProbingTask::SentenceLength => FeatureType::Surface,
            _ => FeatureType::Syntactic,
        }
    }

    pub fn needs_parses(self) -> bool {
        matches!(self, ProbingTask::TopConstituents | ProbingTask::TreeDepth)
    }
}

impl fmt::Display for ProbingTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the display name in any case, with or without `-` or `_`
/// separators: `TreeDepth`, `tree-depth`, `tree_depth`.
impl FromStr for ProbingTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .flat_map(char::to_lowercase)
            .collect();
        ProbingTask::ALL
            .into_iter()
            .find(|t| t.name().to_lowercase() == norm)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown probing task {s:?}; expected one of {}",
                    ProbingTask::ALL.map(|t| t.name()).join(", ")
                ))
            })
    }
}

/// Dataset construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub sentence_length_bins: usize,
    /// Lower and upper percentile of train-split depths kept as classes.
    pub tree_depth_percentiles: (f64, f64),
    /// Including the catch-all `OTHER` class.
    pub top_constituent_classes: usize,
    pub word_content_targets: usize,
    /// Seeds the BiGramShift perturbations. Config files do not carry it;
    /// runs take it from the global seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            sentence_length_bins: 6,
            tree_depth_percentiles: (5.0, 95.0),
            top_constituent_classes: 20,
            word_content_targets: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeInstance {
    pub id: String,
    pub split: Split,
    pub label: usize,
    /// The text the probe input must be embedded from, when it differs from
    /// the corpus text.
    pub perturbed_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbingDataset {
    task: ProbingTask,
    instances: Vec<ProbeInstance>,
    class_names: Vec<String>,
}

impl ProbingDataset {
    pub fn new(
        task: ProbingTask,
        instances: Vec<ProbeInstance>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.is_empty() {
            return Err(Error::Validation(format!("{task}: no classes")));
        }
        if let Some(bad) = instances.iter().find(|i| i.label >= class_names.len()) {
            return Err(Error::Validation(format!(
                "{task}: label {} of {:?} outside [0, {})",
                bad.label,
                bad.id,
                class_names.len()
            )));
        }
        Ok(ProbingDataset {
            task,
            instances,
            class_names,
        })
    }

    pub fn task(&self) -> ProbingTask {
        self.task
    }

    pub fn instances(&self) -> &[ProbeInstance] {
        &self.instances
    }

    /// Mutable access for relabelling experiments; labels stay in range
    /// only if the caller keeps them there.
    pub fn instances_mut(&mut self) -> &mut [ProbeInstance] {
        &mut self.instances
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ProbeInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }

    /// One JSON object per instance: `id`, `label`, `class_name`, `split`
    /// and, when present, `perturbed_text`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            id: &'a str,
            label: usize,
            class_name: &'a str,
            split: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            perturbed_text: Option<&'a str>,
        }
        for i in &self.instances {
            let line = Line {
                id: &i.id,
                label: i.label,
                class_name: &self.class_names[i.label],
                split: i.split.as_str(),
                perturbed_text: i.perturbed_text.as_deref(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_parse_loosely() {
        for t in ProbingTask::ALL {
            assert_eq!(t.name().parse::<ProbingTask>().unwrap(), t);
        }
        assert_eq!("tree-depth".parse::<ProbingTask>().unwrap(), ProbingTask::TreeDepth);
        assert_eq!("bigram_shift".parse::<ProbingTask>().unwrap(), ProbingTask::BiGramShift);
        assert!("tense".parse::<ProbingTask>().is_err());
    }

    #[test]
    fn feature_types_follow_the_table() {
        let surface: Vec<_> = ProbingTask::ALL
            .into_iter()
            .filter(|t| t.feature_type() == FeatureType::Surface)
            .collect();
        assert_eq!(surface, [ProbingTask::WordContent, ProbingTask::SentenceLength]);
    }

    #[test]
    fn dataset_rejects_out_of_range_labels() {
        let inst = ProbeInstance {
            id: "a".into(),
            split: Split::Train,
            label: 2,
            perturbed_text: None,
        };
        assert!(ProbingDataset::new(ProbingTask::TreeDepth, vec![inst.clone()], vec!["0".into(), "1".into()]).is_err());
        let ds = ProbingDataset::new(ProbingTask::TreeDepth, vec![inst], vec!["x".into(); 3]).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"id\":\"a\",\"label\":2,\"class_name\":\"x\",\"split\":\"train\"}\n"
        );
    }
}
