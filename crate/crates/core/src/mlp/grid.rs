use serde::{Deserialize, Serialize};

use super::{init_mlp, train, Dataset, MlpConfig, MlpModel, TrainConfig, TrainHistory, GRID_DEPTHS, GRID_WIDTHS};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Learning rates tried for probes and classifier heads.
pub const DEFAULT_LEARNING_RATES: [f64; 2] = [1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub model: MlpConfig,
    pub train: TrainConfig,
}

impl GridCell {
    pub fn describe(&self) -> String {
        format!("{} lr={}", self.model.describe(), self.train.learning_rate)
    }
}

/// Hyperparameter axes, independent of the data dimensions.
///
/// Cells enumerate depths, then widths, then learning rates. A linear spec
/// has a single architecture with no hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub linear_head: bool,
    /// Template for everything except learning rate and seed.
    pub train: TrainConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            depths: GRID_DEPTHS.to_vec(),
            widths: GRID_WIDTHS.to_vec(),
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            linear_head: false,
            train: TrainConfig::default(),
        }
    }
}

impl GridSpec {
    pub fn linear() -> Self {
        GridSpec {
            depths: Vec::new(),
            widths: Vec::new(),
            learning_rates: DEFAULT_LEARNING_RATES.to_vec(),
            linear_head: true,
            train: TrainConfig::default(),
        }
    }

    pub fn n_cells(&self) -> usize {
        let archs = if self.linear_head {
            1
        } else {
            self.depths.len() * self.widths.len()
        };
        archs * self.learning_rates.len()
    }

    /// Concrete cells; each gets init and shuffle seeds derived from `seed`
    /// and its index.
    pub fn cells(&self, input_dim: usize, n_classes: usize, seed: u64) -> Vec<GridCell> {
        let archs: Vec<Vec<usize>> = if self.linear_head {
            vec![Vec::new()]
        } else {
            self.depths
                .iter()
                .flat_map(|&d| self.widths.iter().map(move |&w| vec![w; d]))
                .collect()
        };
        let mut cells = Vec::with_capacity(self.n_cells());
        for hidden in archs {
            for &lr in &self.learning_rates {
                let idx = cells.len().to_string();
                let init_seed = derive_seed(seed, &["init", &idx]);
                let model = if self.linear_head {
                    MlpConfig::linear(input_dim, n_classes, init_seed)
                } else {
                    MlpConfig::new(input_dim, hidden.clone(), n_classes, init_seed)
                };
                let train = TrainConfig {
                    learning_rate: lr,
                    seed: derive_seed(seed, &["train", &idx]),
                    ..self.train.clone()
                };
                cells.push(GridCell { model, train });
            }
        }
        cells
    }
}

/// The 3 x 2 x 2 default grid.
pub fn default_grid(input_dim: usize, n_classes: usize, seed: u64) -> Vec<GridCell> {
    GridSpec::default().cells(input_dim, n_classes, seed)
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best_index: usize,
    pub val_accuracies: Vec<f64>,
    pub model: MlpModel,
    pub history: TrainHistory,
}

/// Trains every cell on `train` and keeps the one with the best validation
/// accuracy; ties go to the earliest cell.
pub fn grid_search(grid: &[GridCell], train_set: &Dataset, val: &Dataset) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    let mut val_accuracies = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, MlpModel, TrainHistory)> = None;
    for (i, cell) in grid.iter().enumerate() {
        let model = init_mlp(&cell.model)?;
        let (model, history) = train(model, train_set, Some(val), &cell.train)?;
        let acc = model.accuracy(val);
        val_accuracies.push(acc);
        if best.as_ref().is_none_or(|(b, _, _)| acc > val_accuracies[*b]) {
            best = Some((i, model, history));
        }
    }
    let (best_index, model, history) = best.expect("grid is nonempty");
    Ok(GridOutcome {
        best_index,
        val_accuracies,
        model,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn data(n: usize, seed: u64) -> Dataset {
        let mut r = crate::seed::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let y = r.gen_range(0..2);
            rows.push(vec![y as f64 * 2.0 - 1.0 + r.gen_range(-0.5..0.5), r.gen_range(-1.0..1.0)]);
            labels.push(y);
        }
        Dataset::new(&rows, &labels, 2).unwrap()
    }

    #[test]
    fn default_grid_has_twelve_cells() {
        let grid = default_grid(5, 3, 1);
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0].model.hidden_layers, vec![10]);
        assert_eq!(grid[11].model.hidden_layers, vec![100, 100, 100]);
        assert_eq!(grid[1].train.learning_rate, 1e-4);
        assert_ne!(grid[0].model.seed, grid[1].model.seed);
    }

    #[test]
    fn linear_spec_has_one_architecture() {
        let cells = GridSpec::linear().cells(7, 2, 0);
        assert_eq!(cells.len(), 2);
        assert!(cells.iter().all(|c| c.model.hidden_layers.is_empty() && c.model.linear_head));
        let empty = GridSpec {
            learning_rates: vec![],
            ..GridSpec::default()
        };
        assert!(empty.cells(3, 2, 0).is_empty());
    }

    #[test]
    fn single_cell_grid_returns_that_cell() {
        let (tr, va) = (data(60, 1), data(30, 2));
        let grid = &default_grid(2, 2, 3)[..1];
        let out = grid_search(grid, &tr, &va).unwrap();
        assert_eq!(out.best_index, 0);
        assert_eq!(out.val_accuracies.len(), 1);
    }

    #[test]
    fn full_grid_reports_every_cell() {
        let (tr, va) = (data(60, 1), data(30, 2));
        let out = grid_search(&default_grid(2, 2, 3), &tr, &va).unwrap();
        assert_eq!(out.val_accuracies.len(), 12);
        let best = out.val_accuracies[out.best_index];
        assert!(out.val_accuracies.iter().all(|&a| a <= best));
        assert!(out.val_accuracies[..out.best_index].iter().all(|&a| a < best));
    }

    #[test]
    fn empty_grid_is_an_error() {
        let d = data(10, 1);
        assert!(grid_search(&[], &d, &d).is_err());
    }

    #[test]
    fn signal_beats_shuffled_labels() {
        // the same architecture trained once on real labels and once on a
        // permutation of them; grid search has to pick the real one
        let tr = data(200, 1);
        let va = data(100, 2);
        let mut shuffled_labels = tr.labels().to_vec();
        shuffled_labels.shuffle(&mut crate::seed::rng(9));
        let rows: Vec<Vec<f64>> = (0..tr.len()).map(|i| tr.row(i).to_vec()).collect();
        let noisy = Dataset::new(&rows, &shuffled_labels, 2).unwrap();
        let cell = default_grid(2, 2, 4).remove(0);
        let a = grid_search(std::slice::from_ref(&cell), &noisy, &va).unwrap();
        let b = grid_search(std::slice::from_ref(&cell), &tr, &va).unwrap();
        let accs = [a.val_accuracies[0], b.val_accuracies[0]];
        let winner = if accs[1] > accs[0] { 1 } else { 0 };
        assert_eq!(winner, 1, "{accs:?}");
    }
}
