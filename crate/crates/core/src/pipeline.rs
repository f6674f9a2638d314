//! End-to-end stages with every source of randomness tied to one seed.

use serde::{Deserialize, Serialize};

use crate::classify::{
    assemble_inputs, run_experiment, ClassifierReport, ExperimentConfig, ExperimentOutcome,
    ModelSetting, Sources,
};
use crate::corpus::{assign_splits, Corpus, SplitOptions, SplitRatios};
use crate::embio::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::{FeatureTable, IcuLexicon};
use crate::mlp::GridSpec;
use crate::probing::{
    build_probing_dataset, probe_report, run_probe, write_probe_results_csv, ProbeConfig,
    ProbeResult, ProbingDataset, ProbingTask,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub split_ratios: SplitRatios,
    pub by_speaker: bool,
    pub probe: ProbeConfig,
    pub probe_grid: GridSpec,
    /// Replaces each setting's default classifier grid.
    pub classifier_grid: Option<GridSpec>,
    pub folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            split_ratios: SplitRatios::default(),
            by_speaker: false,
            probe: ProbeConfig::default(),
            probe_grid: GridSpec::default(),
            classifier_grid: None,
            folds: 5,
        }
    }
}

impl PipelineConfig {
    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            seed: self.seed,
            ..self.probe.clone()
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            folds: self.folds,
            seed: self.seed,
            grid: self.classifier_grid.clone(),
        }
    }
}

/// The corpus with split tags, assigning them when the input has none.
pub fn prepare_corpus(corpus: &Corpus, config: &PipelineConfig) -> Result<Corpus> {
    assign_splits(
        corpus,
        config.split_ratios,
        config.seed,
        SplitOptions {
            by_speaker: config.by_speaker,
        },
    )
}

pub fn feature_csv(table: &FeatureTable) -> Result<String> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelection {
    All,
    One(usize),
}

impl std::str::FromStr for LayerSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(LayerSelection::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(LayerSelection::One(k)),
            _ => Err(Error::Validation(format!(
                "layer must be a positive integer or \"all\", got {s:?}"
            ))),
        }
    }
}

impl LayerSelection {
    pub fn layers(self, n_layers: usize) -> Result<Vec<usize>> {
        match self {
            LayerSelection::All => Ok((1..=n_layers).collect()),
            LayerSelection::One(k) if k <= n_layers => Ok(vec![k]),
            LayerSelection::One(k) => Err(Error::Validation(format!(
                "layer {k} outside [1, {n_layers}]"
            ))),
        }
    }
}

/// Embeddings a probing run reads: `main` for every task but BiGramShift,
/// which needs the embeddings of its perturbed corpus.
#[derive(Debug, Clone, Copy)]
pub struct ProbeStores<'a> {
    pub main: &'a EmbeddingStore,
    pub bigram: Option<&'a EmbeddingStore>,
}

/// Builds each task's dataset and probes every selected layer, in task
/// order then layer order.
pub fn probe_layers(
    corpus: &Corpus,
    stores: ProbeStores<'_>,
    tasks: &[ProbingTask],
    layers: LayerSelection,
    config: &PipelineConfig,
) -> Result<Vec<ProbeResult>> {
    let probe_cfg = config.probe_config();
    let mut results = Vec::new();
    for &task in tasks {
        let store = match (task, stores.bigram) {
            (ProbingTask::BiGramShift, Some(s)) => s,
            (ProbingTask::BiGramShift, None) => {
                return Err(Error::Validation(
                    "BiGramShift needs embeddings of its perturbed corpus".into(),
                ))
            }
            _ => stores.main,
        };
        let dataset: ProbingDataset = build_probing_dataset(task, corpus, &probe_cfg)?;
        for layer in layers.layers(store.n_layers())? {
            results.push(run_probe(&dataset, store, layer, &config.probe_grid, config.seed)?);
        }
    }
    Ok(results)
}

pub fn probe_results_csv(results: &[ProbeResult]) -> Result<String> {
    let mut buf = Vec::new();
    write_probe_results_csv(results, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Runs each setting's experiment and collects the report rows in the
/// order given.
pub fn classify_settings(
    corpus: &Corpus,
    sources: Sources<'_>,
    settings: &[ModelSetting],
    config: &PipelineConfig,
) -> Result<(Vec<ExperimentOutcome>, ClassifierReport)> {
    let exp = config.experiment_config();
    let mut outcomes = Vec::new();
    let mut report = ClassifierReport::default();
    for &setting in settings {
        let inputs = assemble_inputs(setting, corpus, sources)?;
        let outcome = run_experiment(&inputs, &exp)?;
        report.push(setting, outcome.metrics);
        outcomes.push(outcome);
    }
    Ok((outcomes, report))
}

/// Text artifacts of a full run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutputs {
    pub features_csv: String,
    pub probe_results_csv: String,
    pub probe_report_txt: String,
    pub probe_report_csv: String,
    pub classifier_report_txt: String,
    pub classifier_report_csv: String,
}

/// Features, all probes on all layers, and all three classifier settings.
/// BiGramShift is skipped when `bigram` is `None`.
pub fn run_full(
    corpus: &Corpus,
    lexicon: IcuLexicon,
    store: &EmbeddingStore,
    bigram: Option<&EmbeddingStore>,
    config: &PipelineConfig,
) -> Result<PipelineOutputs> {
    let corpus = prepare_corpus(corpus, config)?;
    let (table, _) = FeatureTable::from_corpus(&corpus, lexicon)?;
    let tasks: Vec<ProbingTask> = ProbingTask::ALL
        .into_iter()
        .filter(|&t| t != ProbingTask::BiGramShift || bigram.is_some())
        .collect();
    let results = probe_layers(
        &corpus,
        ProbeStores { main: store, bigram },
        &tasks,
        LayerSelection::All,
        config,
    )?;
    let report = probe_report(&results);
    let sources = Sources {
        features: Some(&table),
        embeddings: Some(store),
        layer: None,
    };
    let (_, classifier) = classify_settings(&corpus, sources, &ModelSetting::ALL, config)?;
    Ok(PipelineOutputs {
        features_csv: feature_csv(&table)?,
        probe_results_csv: probe_results_csv(&results)?,
        probe_report_txt: report.render_text(),
        probe_report_csv: report.render_csv()?,
        classifier_report_txt: classifier.render_text(),
        classifier_report_csv: classifier.render_csv()?,
    })
}
