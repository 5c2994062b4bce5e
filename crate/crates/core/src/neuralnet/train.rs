//! Mini-batch Adam training with early stopping on validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    init_params, loss_and_gradients, predict, AdamConfig, Gradients, Mode, NetError, NetworkConfig,
    NetworkParams, SparseInput,
};
use crate::features::LabeledDataset;

/// Adam optimizer state with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: &NetworkParams, learning_rate: f64, config: AdamConfig) -> Self {
        let n = params.n_params();
        Adam {
            config,
            learning_rate,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut NetworkParams, grads: &Gradients) {
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grads.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 if no epoch ran.
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
    pub stopped_epoch: usize,
}

fn check_dataset(ds: &LabeledDataset, config: &NetworkConfig, what: &'static str) -> Result<Vec<SparseInput>, NetError> {
    if ds.is_empty() {
        return Err(NetError::EmptyDataset(what));
    }
    if ds.n_classes() != config.output_dim {
        return Err(NetError::Shape {
            what: format!("{what} class count"),
            expected: config.output_dim,
            actual: ds.n_classes(),
        });
    }
    let inputs: Vec<SparseInput> = ds.items().iter().map(SparseInput::from_counts).collect();
    for x in &inputs {
        if let Some(&i) = x.indices.iter().max() {
            if i >= config.input_dim {
                return Err(NetError::Shape {
                    what: format!("{what} feature index bound"),
                    expected: config.input_dim,
                    actual: i + 1,
                });
            }
        }
    }
    Ok(inputs)
}

fn accuracy(params: &NetworkParams, inputs: &[SparseInput], labels: &[usize]) -> Result<f64, NetError> {
    let mut correct = 0usize;
    for (x, &y) in inputs.iter().zip(labels) {
        if predict(params, x)?.0 == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / inputs.len() as f64)
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the best validation accuracy (earliest on ties).
///
/// Training stops after `patience` consecutive epochs without improvement or
/// at `max_epochs`. A non-finite loss or activation ends training with
/// [`NetError::Divergence`].
pub fn train(
    config: &NetworkConfig,
    train_set: &LabeledDataset,
    val_set: &LabeledDataset,
) -> Result<(NetworkParams, TrainReport), NetError> {
    config.validate()?;
    let train_inputs = check_dataset(train_set, config, "training set")?;
    let val_inputs = check_dataset(val_set, config, "validation set")?;

    let mut params = init_params(config)?;
    let mut adam = Adam::new(&params, config.learning_rate, config.adam.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mode = Mode::Train {
        dropout_rate: config.dropout_rate,
    };

    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: None,
        stopped_epoch: 0,
    };
    let mut best = params.clone();
    let mut since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        let diverged = NetError::Divergence {
            epoch,
            last_finite_epoch: epoch - 1,
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&SparseInput, usize)> =
                chunk.iter().map(|&i| (&train_inputs[i], train_set.labels()[i])).collect();
            let (loss, grads) = match loss_and_gradients(&params, &batch, mode, &mut rng) {
                Ok(v) => v,
                Err(NetError::Numerical) => return Err(diverged),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || !grads.is_finite() {
                return Err(diverged);
            }
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut params, &grads);
        }
        if !params.is_finite() {
            return Err(diverged);
        }
        let train_loss = loss_sum / train_inputs.len() as f64;
        let val_accuracy = match accuracy(&params, &val_inputs, val_set.labels()) {
            Ok(a) => a,
            Err(NetError::Numerical) => return Err(diverged),
            Err(e) => return Err(e),
        };
        log::info!("epoch {epoch}: train loss {train_loss:.6}, validation accuracy {val_accuracy:.4}");
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_accuracy,
        });
        report.stopped_epoch = epoch;

        if report.best_val_accuracy.map_or(true, |b| val_accuracy > b) {
            report.best_val_accuracy = Some(val_accuracy);
            report.best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log::info!("early stop at epoch {epoch}, best epoch {}", report.best_epoch);
                break;
            }
        }
    }
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{DocumentVector, Labeled};
    use std::collections::BTreeMap;

    fn doc(id: usize, counts: &[(usize, u32)]) -> DocumentVector {
        DocumentVector {
            tweet_id: format!("t{id}"),
            counts: counts.iter().copied().collect::<BTreeMap<_, _>>(),
        }
    }

    /// Class 0 uses words 0..5, class 1 uses words 5..10.
    fn separable(n: usize) -> LabeledDataset {
        let mut items = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let base = class * 5;
            items.push(doc(i, &[(base + i % 5, 1 + (i % 3) as u32), (base + (i + 2) % 5, 1)]));
            labels.push(class);
        }
        Labeled::new(items, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = separable(40);
        for seed in 0..10 {
            let config = NetworkConfig {
                max_epochs: 50,
                patience: 50,
                batch_size: 4,
                ..NetworkConfig::new(10, 2, seed)
            };
            let (params, report) = train(&config, &data, &data).unwrap();
            assert_eq!(report.best_val_accuracy, Some(1.0), "seed {seed}");
            assert!(report.best_epoch <= 50);
            let inputs = check_dataset(&data, &config, "x").unwrap();
            assert_eq!(accuracy(&params, &inputs, data.labels()).unwrap(), 1.0);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable(30);
        let config = NetworkConfig {
            max_epochs: 5,
            ..NetworkConfig::new(10, 2, 11)
        };
        let a = train(&config, &data, &data).unwrap();
        let b = train(&config, &data, &data).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let other = NetworkConfig { seed: 12, ..config };
        assert_ne!(a.0, train(&other, &data, &data).unwrap().0);
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let data = separable(20);
        let config = NetworkConfig {
            max_epochs: 200,
            patience: 3,
            ..NetworkConfig::new(10, 2, 1)
        };
        let (_, report) = train(&config, &data, &data).unwrap();
        let best = report.best_val_accuracy.unwrap();
        assert!(report.epochs.iter().all(|e| e.val_accuracy <= best));
        if report.stopped_epoch < 200 {
            assert_eq!(report.stopped_epoch, report.best_epoch + 3);
        }
        let first_best = report.epochs.iter().find(|e| e.val_accuracy == best).unwrap().epoch;
        assert_eq!(first_best, report.best_epoch);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let data = separable(10);
        let config = NetworkConfig {
            max_epochs: 0,
            ..NetworkConfig::new(10, 2, 4)
        };
        let (params, report) = train(&config, &data, &data).unwrap();
        assert_eq!(params, init_params(&config).unwrap());
        assert_eq!(report.best_epoch, 0);
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let data = separable(10);
        let empty = Labeled::new(vec![], vec![], vec!["a".into(), "b".into()]).unwrap();
        let config = NetworkConfig::new(10, 2, 0);
        assert!(matches!(train(&config, &empty, &data), Err(NetError::EmptyDataset(_))));
        assert!(matches!(train(&config, &data, &empty), Err(NetError::EmptyDataset(_))));
        let narrow = NetworkConfig::new(6, 2, 0);
        assert!(matches!(train(&narrow, &data, &data), Err(NetError::Shape { .. })));
    }

    #[test]
    fn huge_learning_rate_diverges_or_stays_finite() {
        let data = separable(20);
        let config = NetworkConfig {
            learning_rate: 1e300,
            max_epochs: 5,
            ..NetworkConfig::new(10, 2, 3)
        };
        match train(&config, &data, &data) {
            Err(NetError::Divergence { epoch, last_finite_epoch }) => assert_eq!(last_finite_epoch + 1, epoch),
            Ok((params, _)) => assert!(params.is_finite()),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let config = NetworkConfig {
            hidden_dims: vec![2],
            ..NetworkConfig::new(2, 2, 0)
        };
        let mut p = init_params(&config).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.values_mut().enumerate().for_each(|(i, v)| *v = if i % 2 == 0 { 0.5 } else { -2.0 });
        let mut adam = Adam::new(&p, 0.01, AdamConfig::default());
        adam.step(&mut p, &g);
        for ((a, b), gi) in p.values().zip(before.values()).zip(g.values()) {
            let moved = b - a;
            assert!((moved - 0.01 * gi.signum()).abs() < 1e-9);
        }
    }
}
