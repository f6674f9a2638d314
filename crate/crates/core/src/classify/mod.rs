//! Utterance-level AD classification from hand-crafted features, frozen
//! embeddings, or both.

mod metrics;
mod report;

pub use metrics::{evaluate, EvalMetrics};
pub use report::{ClassifierReport, ClassifierReportRow, CLASSIFIER_REPORT_COLUMNS};

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Split};
use crate::embio::{align, EmbeddingStore};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, Standardizer, N_FEATURES};
use crate::mlp::{init_mlp, train, Dataset, GridSpec, TrainConfig};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelSetting {
    FeaturesOnly,
    EmbeddingOnly,
    EmbeddingPlusFeatures,
}

impl ModelSetting {
    pub const ALL: [ModelSetting; 3] = [
        ModelSetting::FeaturesOnly,
        ModelSetting::EmbeddingOnly,
        ModelSetting::EmbeddingPlusFeatures,
    ];

    /// Row label in the report table.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelSetting::FeaturesOnly => "NN + FS1",
            ModelSetting::EmbeddingOnly => "Fine-tuned BERT",
            ModelSetting::EmbeddingPlusFeatures => "BERT + FS1",
        }
    }

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            ModelSetting::FeaturesOnly => "features-only",
            ModelSetting::EmbeddingOnly => "embedding-only",
            ModelSetting::EmbeddingPlusFeatures => "embedding-plus-features",
        }
    }

    pub fn needs_features(self) -> bool {
        self != ModelSetting::EmbeddingOnly
    }

    pub fn needs_embeddings(self) -> bool {
        self != ModelSetting::FeaturesOnly
    }

    /// Grid searched when the caller gives none.
    pub fn default_grid(self) -> GridSpec {
        match self {
            ModelSetting::FeaturesOnly => GridSpec::default(),
            _ => GridSpec::linear(),
        }
    }
}

impl fmt::Display for ModelSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for ModelSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelSetting::ALL
            .into_iter()
            .find(|m| m.cli_name() == s || m.display_name() == s)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown model setting {s:?}; expected one of {}",
                    ModelSetting::ALL.map(|m| m.cli_name()).join(", ")
                ))
            })
    }
}

/// Inputs a setting may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sources<'a> {
    pub features: Option<&'a FeatureTable>,
    pub embeddings: Option<&'a EmbeddingStore>,
    /// 1-based store layer; the last layer when `None`.
    pub layer: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitData {
    pub ids: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn dataset(&self) -> Result<Dataset> {
        let y: Vec<usize> = self.y.iter().map(|l| l.index()).collect();
        Dataset::new(&self.x, &y, 2)
    }
}

/// Held-out split that counts how often its contents are read.
#[derive(Debug)]
pub struct SealedSplit {
    data: SplitData,
    opens: Cell<usize>,
}

impl SealedSplit {
    fn new(data: SplitData) -> Self {
        SealedSplit {
            data,
            opens: Cell::new(0),
        }
    }

    pub fn open(&self) -> &SplitData {
        self.opens.set(self.opens.get() + 1);
        &self.data
    }

    pub fn accesses(&self) -> usize {
        self.opens.get()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug)]
pub struct AssembledInputs {
    pub setting: ModelSetting,
    pub width: usize,
    pub train: SplitData,
    pub val: SplitData,
    pub test: SealedSplit,
}

/// Builds per-split input matrices in corpus order. Feature columns are
/// standardized with train statistics; embedding columns are used as read.
pub fn assemble_inputs(
    setting: ModelSetting,
    corpus: &Corpus,
    sources: Sources<'_>,
) -> Result<AssembledInputs> {
    if !corpus.is_fully_split() {
        return Err(Error::Validation(
            "classification needs split tags on every utterance".into(),
        ));
    }
    let features: Option<Vec<Vec<f64>>> = match (setting.needs_features(), sources.features) {
        (false, _) => None,
        (true, None) => {
            return Err(Error::Validation(format!(
                "setting {setting} needs a feature file"
            )))
        }
        (true, Some(table)) => Some(feature_rows(table, corpus)?),
    };
    let embeddings: Option<Vec<Vec<f64>>> = match (setting.needs_embeddings(), sources.embeddings) {
        (false, _) => None,
        (true, None) => {
            return Err(Error::Validation(format!(
                "setting {setting} needs an embedding file"
            )))
        }
        (true, Some(store)) => {
            let layer = sources.layer.unwrap_or(store.n_layers());
            if layer == 0 || layer > store.n_layers() {
                return Err(Error::Validation(format!(
                    "layer {layer} outside [1, {}]",
                    store.n_layers()
                )));
            }
            let rows = align(store, corpus)?;
            Some(rows.into_iter().map(|r| store.row_f64(layer, r)).collect())
        }
    };
    let features = match features {
        Some(rows) => {
            let train_rows: Vec<&Vec<f64>> = corpus
                .utterances()
                .iter()
                .zip(&rows)
                .filter(|(u, _)| u.split == Some(Split::Train))
                .map(|(_, r)| r)
                .collect();
            let standardizer = Standardizer::fit(&train_rows)?;
            Some(rows.iter().map(|r| standardizer.apply(r)).collect::<Vec<_>>())
        }
        None => None,
    };
    let mut splits: HashMap<Split, SplitData> = Split::ALL.iter().map(|&s| (s, SplitData::default())).collect();
    for (i, u) in corpus.utterances().iter().enumerate() {
        let mut row = Vec::new();
        if let Some(e) = &embeddings {
            row.extend_from_slice(&e[i]);
        }
        if let Some(f) = &features {
            row.extend_from_slice(&f[i]);
        }
        let split = splits
            .get_mut(&u.split.expect("fully split"))
            .expect("all splits present");
        split.ids.push(u.id.clone());
        split.x.push(row);
        split.y.push(u.label);
    }
    let width = embeddings.as_ref().map_or(0, |e| e.first().map_or(0, Vec::len))
        + if features.is_some() { N_FEATURES } else { 0 };
    let mut take = |s| splits.remove(&s).expect("all splits present");
    Ok(AssembledInputs {
        setting,
        width,
        train: take(Split::Train),
        val: take(Split::Val),
        test: SealedSplit::new(take(Split::Test)),
    })
}

fn feature_rows(table: &FeatureTable, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    let index: HashMap<&str, usize> = table
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rows = Vec::with_capacity(corpus.len());
    let mut missing = Vec::new();
    for u in corpus.utterances() {
        match index.get(u.id.as_str()) {
            Some(&i) => rows.push(table.rows[i].clone()),
            None => missing.push(u.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            what: "utterances absent from the feature file".into(),
            ids: missing,
        });
    }
    Ok(rows)
}

/// Fold index of every row, `0..k`, from the rank of a seeded hash of its id.
pub fn fold_assignment(ids: &[String], k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<(u64, usize)> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (derive_seed(seed, &["fold", id]), i))
        .collect();
    order.sort_unstable();
    let mut folds = vec![0; ids.len()];
    for (rank, (_, i)) in order.into_iter().enumerate() {
        folds[i] = rank % k;
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub seed: u64,
    /// Overrides the setting's default grid.
    pub grid: Option<GridSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: 5,
            seed: 0,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub setting: ModelSetting,
    pub metrics: EvalMetrics,
    pub hyperparameters: String,
    /// Mean fold accuracy per grid cell.
    pub cv_accuracies: Vec<f64>,
    /// Epochs of the final fit: the mean best epoch over the chosen cell's folds.
    pub final_epochs: usize,
    pub width: usize,
}

/// Selects a grid cell by k-fold cross-validation within the train split,
/// refits it on the whole train split and scores it once on test.
pub fn run_experiment(inputs: &AssembledInputs, config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let k = config.folds;
    if k < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
    }
    if inputs.train.len() < k {
        return Err(Error::Validation(format!(
            "{} training rows cannot fill {k} folds",
            inputs.train.len()
        )));
    }
    if inputs.test.is_empty() {
        return Err(Error::Validation("empty test split".into()));
    }
    let grid = config.grid.clone().unwrap_or_else(|| inputs.setting.default_grid());
    let setting_seed = derive_seed(config.seed, &["classify", inputs.setting.cli_name()]);
    let cells = grid.cells(inputs.width, 2, setting_seed);
    if cells.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    let train_set = inputs.train.dataset()?;
    let folds = fold_assignment(&inputs.train.ids, k, setting_seed);

    let mut cv_accuracies = Vec::with_capacity(cells.len());
    let mut best_epochs = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut acc_sum = 0.0;
        let mut epoch_sum = 0;
        for f in 0..k {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..train_set.len()).partition(|&i| folds[i] == f);
            let fold_cfg = TrainConfig {
                seed: derive_seed(cell.train.seed, &["fold", &f.to_string()]),
                ..cell.train.clone()
            };
            let held_set = train_set.subset(&held);
            let (model, history) = train(
                init_mlp(&cell.model)?,
                &train_set.subset(&kept),
                Some(&held_set),
                &fold_cfg,
            )?;
            acc_sum += model.accuracy(&held_set);
            epoch_sum += history.best_epoch;
        }
        cv_accuracies.push(acc_sum / k as f64);
        best_epochs.push(epoch_sum as f64 / k as f64);
    }
    let mut best = 0;
    for (i, &a) in cv_accuracies.iter().enumerate() {
        if a > cv_accuracies[best] {
            best = i;
        }
    }
    let cell = &cells[best];
    let final_epochs = (best_epochs[best].round() as usize).max(1);
    let final_cfg = TrainConfig {
        max_epochs: final_epochs,
        seed: derive_seed(cell.train.seed, &["final"]),
        ..cell.train.clone()
    };
    let (model, _) = train(init_mlp(&cell.model)?, &train_set, None, &final_cfg)?;

    let test = inputs.test.open();
    let predictions: Vec<Label> = test
        .x
        .iter()
        .map(|x| {
            model
                .predict(x)
                .map(|c| if c == Label::Ad.index() { Label::Ad } else { Label::Control })
        })
        .collect::<Result<_>>()?;
    let metrics = evaluate(&predictions, &test.y)?;
    Ok(ExperimentOutcome {
        setting: inputs.setting,
        metrics,
        hyperparameters: cell.describe(),
        cv_accuracies,
        final_epochs,
        width: inputs.width,
    })
}
