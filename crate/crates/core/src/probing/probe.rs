use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ProbingDataset, ProbingTask};
use crate::corpus::Split;
use crate::embio::EmbeddingStore;
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::mlp::{grid_search, Dataset, GridSpec};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub task: ProbingTask,
    pub layer: usize,
    /// Test accuracy of the selected probe.
    pub accuracy: f64,
    pub val_accuracy: f64,
    pub hyperparameters: String,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Trains one probe per grid cell on the train instances of `dataset`,
/// keeps the cell with the best validation accuracy and scores it on test.
/// `layer` is 1-based. Inputs are standardized with train statistics.
pub fn run_probe(
    dataset: &ProbingDataset,
    store: &EmbeddingStore,
    layer: usize,
    grid: &GridSpec,
    seed: u64,
) -> Result<ProbeResult> {
    if layer == 0 || layer > store.n_layers() {
        return Err(Error::Validation(format!(
            "layer {layer} outside [1, {}]",
            store.n_layers()
        )));
    }
    let index: HashMap<&str, usize> = store
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let missing: Vec<String> = dataset
        .instances()
        .iter()
        .filter(|i| !index.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIds {
            what: format!("{} instances absent from the embedding store", dataset.task()),
            ids: missing,
        });
    }
    let gather = |split: Split| -> (Vec<Vec<f64>>, Vec<usize>) {
        dataset
            .in_split(split)
            .map(|i| (store.row_f64(layer, index[i.id.as_str()]), i.label))
            .unzip()
    };
    let (mut train_x, train_y) = gather(Split::Train);
    let (mut val_x, val_y) = gather(Split::Val);
    let (mut test_x, test_y) = gather(Split::Test);
    for (name, n) in [("train", train_y.len()), ("val", val_y.len()), ("test", test_y.len())] {
        if n == 0 {
            return Err(Error::Validation(format!(
                "{}: no {name} instances",
                dataset.task()
            )));
        }
    }
    let standardizer = Standardizer::fit(&train_x)?;
    for rows in [&mut train_x, &mut val_x, &mut test_x] {
        for r in rows.iter_mut() {
            standardizer.apply_in_place(r);
        }
    }
    let k = dataset.n_classes();
    let train = Dataset::new(&train_x, &train_y, k)?;
    let val = Dataset::new(&val_x, &val_y, k)?;
    let cell_seed = derive_seed(seed, &["probe", dataset.task().name(), &layer.to_string()]);
    let cells = grid.cells(store.dim(), k, cell_seed);
    let outcome = grid_search(&cells, &train, &val)?;
    let test = Dataset::new(&test_x, &test_y, k)?;
    Ok(ProbeResult {
        task: dataset.task(),
        layer,
        accuracy: outcome.model.accuracy(&test),
        val_accuracy: outcome.val_accuracies[outcome.best_index],
        hyperparameters: cells[outcome.best_index].describe(),
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
    })
}

/// One row per result: `task,layer,accuracy,val_accuracy,hyperparameters,n_train,n_val,n_test`.
pub fn write_probe_results_csv<W: Write>(results: &[ProbeResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "task",
        "layer",
        "accuracy",
        "val_accuracy",
        "hyperparameters",
        "n_train",
        "n_val",
        "n_test",
    ])?;
    for r in results {
        out.write_record([
            r.task.name().to_string(),
            r.layer.to_string(),
            r.accuracy.to_string(),
            r.val_accuracy.to_string(),
            r.hyperparameters.clone(),
            r.n_train.to_string(),
            r.n_val.to_string(),
            r.n_test.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<probe results>", e))
}
