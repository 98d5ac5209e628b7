//! Mean-absolute-error training with AdaGrad.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::{EstimatorModel, Normalizer};
use super::schema::FeatureSchema;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
    /// Share of records held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.05, batch_size: 8, epochs: 10, hidden: 64, validation_fraction: 0.1, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training MAE over the epoch's batches, in label units.
    pub train_loss: f64,
    /// MAE on the held-out split after the epoch, in label units.
    pub validation_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

struct AdaGrad {
    lr: f64,
    accum: Vec<Array2<f64>>,
}

impl AdaGrad {
    const EPS: f64 = 1e-10;

    fn new(lr: f64, params: &[Array2<f64>]) -> Self {
        AdaGrad { lr, accum: params.iter().map(|p| Array2::zeros(p.raw_dim())).collect() }
    }

    fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>]) {
        for ((p, g), a) in params.iter_mut().zip(grads).zip(&mut self.accum) {
            ndarray::Zip::from(p).and(g).and(a).for_each(|p, &g, a| {
                *a += g * g;
                *p -= self.lr * g / (a.sqrt() + Self::EPS);
            });
        }
    }
}

/// Deterministic split: shuffled with the training stream, last fraction held out.
pub fn split(n: usize, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, rng::streams::TRAINING));
    let held = ((n as f64) * validation_fraction).round() as usize;
    let held = if n > 1 { held.min(n - 1) } else { 0 };
    let validation = idx.split_off(n - held);
    (idx, validation)
}

pub fn mean_absolute_error(model: &EstimatorModel, dataset: &Dataset, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for &i in indices {
        let r = &dataset.records[i];
        total += (model.predict(&r.graph)? - r.label).abs();
    }
    Ok(total / indices.len() as f64)
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(EstimatorModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::Schema("cannot train on an empty dataset".into()));
    }
    let schema: FeatureSchema = dataset.header.schema.clone();
    let mut init_rng = rng::stream(config.seed, rng::streams::TRAINING);
    let mut model = EstimatorModel::new(schema.clone(), config.hidden, &mut init_rng);
    let (train_idx, val_idx) = split(dataset.len(), config.validation_fraction, config.seed);

    model.node_norm = Normalizer::fit(schema.node_dim, train_idx.iter().map(|&i| &dataset.records[i].graph.node_features));
    model.edge_norm = Normalizer::fit(schema.edge_dim, train_idx.iter().map(|&i| &dataset.records[i].graph.edge_features));
    let labels: Vec<f64> = train_idx.iter().map(|&i| dataset.records[i].label).collect();
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let var = labels.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / labels.len() as f64;
    model.label_mean = mean;
    model.label_std = if var.sqrt() < 1e-9 { 1.0 } else { var.sqrt() };

    let mut opt = AdaGrad::new(config.learning_rate, &model.params);
    let mut order = train_idx.clone();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut init_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size.max(1)) {
            let mut grads = model.zero_grads();
            let mut loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let r = &dataset.records[i];
                let target = (r.label - model.label_mean) / model.label_std;
                let y = model.accumulate_gradient(&r.graph, |y| scale * (y - target).signum(), &mut grads)?;
                loss += (y - target).abs() * scale;
            }
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            opt.step(&mut model.params, &grads);
            loss_sum += loss;
            batches += 1;
        }
        let train_loss = loss_sum / batches.max(1) as f64 * model.label_std;
        if !train_loss.is_finite() || model.params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        let validation_loss = mean_absolute_error(&model, dataset, &val_idx)?;
        log::info!("epoch {epoch}: train MAE {train_loss:.4}, validation MAE {validation_loss:.4}");
        epochs.push(EpochLog { epoch, train_loss, validation_loss });
    }
    Ok((model, TrainReport { epochs, train_indices: train_idx, validation_indices: val_idx }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anticipate::dataset::generate_dataset;
    use crate::anticipate::oracle::OracleConfig;
    use crate::scenario::Scenario;

    #[test]
    fn split_is_disjoint_and_complete() {
        let (a, b) = split(100, 0.1, 3);
        assert_eq!((a.len(), b.len()), (90, 10));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split(100, 0.1, 3), (a, b));
    }

    #[test]
    fn constant_labels_are_learned() {
        let scn = Scenario::namo_toy(3);
        let mut d = generate_dataset(&scn, 40, 1, &OracleConfig { samples_per_task: 1, ..Default::default() }).unwrap();
        for r in &mut d.records {
            r.label = 50.0;
        }
        let cfg = TrainConfig { hidden: 16, ..Default::default() };
        let (m, _) = train(&d, &cfg).unwrap();
        for r in &d.records {
            assert!((m.predict(&r.graph).unwrap() - 50.0).abs() <= 2.5);
        }
    }

    #[test]
    fn nan_labels_diverge() {
        let scn = Scenario::namo_toy(3);
        let mut d = generate_dataset(&scn, 10, 1, &OracleConfig { samples_per_task: 1, ..Default::default() }).unwrap();
        d.records[0].label = f64::NAN;
        let cfg = TrainConfig { hidden: 8, validation_fraction: 0.0, ..Default::default() };
        assert!(matches!(train(&d, &cfg), Err(Error::Divergence { epoch: 1, .. })));
    }

    #[test]
    fn training_is_deterministic() {
        let scn = Scenario::namo_toy(3);
        let d = generate_dataset(&scn, 24, 2, &OracleConfig { samples_per_task: 2, ..Default::default() }).unwrap();
        let cfg = TrainConfig { hidden: 8, epochs: 2, ..Default::default() };
        let (a, ra) = train(&d, &cfg).unwrap();
        let (b, rb) = train(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }
}
