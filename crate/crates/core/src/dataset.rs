//! DP-GD on tabular data: CSV ingestion, the train / normalization / validation split and
//! standardization.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_std;
use crate::privacy::discrete_noise_schedule;
use crate::rng::{purpose, StreamKey};
use crate::schedule::Schedule;
use crate::sim::{dpgd_update, permutation};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// Row-major features.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    /// Reads a CSV with a header row; `label_column` names the target.
    pub fn from_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
        let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::Config(format!("label column {label_column:?} not found in header")))?;
        let feature_names = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_idx)
            .map(|(_, h)| h.clone())
            .collect();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Ingestion {
                    row,
                    msg: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            let mut xs = Vec::with_capacity(headers.len() - 1);
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Ingestion {
                    row,
                    msg: format!("column {:?}: not a number: {field:?}", headers[i]),
                })?;
                if i == label_idx {
                    labels.push(v);
                } else {
                    xs.push(v);
                }
            }
            features.push(xs);
        }
        Ok(Self { feature_names, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRunConfig {
    pub c: f64,
    pub rho: f64,
    pub schedule: Schedule,
    pub seed: u64,
    pub trials: usize,
    /// Train / normalization / validation fractions.
    pub split: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    /// Validation loss `mean (x.theta - y)^2 / 2` per trial.
    pub losses: Vec<f64>,
    pub diverged: Vec<bool>,
    /// Mean and standard deviation over the trials that did not diverge.
    pub mean: f64,
    pub std: f64,
    /// Validation loss of the zero model.
    pub zero_model_loss: f64,
    pub n_train: usize,
    pub d: usize,
    /// `d / n_train`.
    pub gamma: f64,
    pub dropped_features: Vec<String>,
}

struct Standardized {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    val_x: Vec<Vec<f64>>,
    val_y: Vec<f64>,
    dropped: Vec<String>,
}

fn standardize(data: &Dataset, split: [f64; 3], seed: u64) -> Result<Standardized> {
    if split.iter().any(|f| !(*f > 0.0)) || (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions must be > 0 and sum to 1, got {split:?}")));
    }
    let n = data.len();
    let n_train = (split[0] * n as f64).floor() as usize;
    let n_norm = (split[1] * n as f64).floor() as usize;
    if n_train < 1 || n_norm < 2 || n - n_train - n_norm < 1 {
        return Err(Error::Config(format!("{n} rows are too few for split {split:?}")));
    }
    let order = permutation(n, seed, purpose::SPLIT);
    let (train, rest) = order.split_at(n_train);
    let (norm, val) = rest.split_at(n_norm);

    let p = data.feature_names.len();
    let mut keep = Vec::new();
    let mut stats = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let col: Vec<f64> = norm.iter().map(|&i| data.features[i][j]).collect();
        let (m, s) = mean_std(&col);
        if s > 0.0 && s.is_finite() {
            keep.push(j);
            stats.push((m, s));
        } else {
            warn!("feature {:?} has zero variance on the normalization subset; dropped", data.feature_names[j]);
            dropped.push(data.feature_names[j].clone());
        }
    }
    let ycol: Vec<f64> = norm.iter().map(|&i| data.labels[i]).collect();
    let (ym, ys) = mean_std(&ycol);
    let ys = if ys > 0.0 && ys.is_finite() {
        ys
    } else {
        warn!("label has zero variance on the normalization subset; labels are centered but not scaled");
        1.0
    };
    let row = |i: usize| -> Vec<f64> {
        keep.iter().zip(&stats).map(|(&j, (m, s))| (data.features[i][j] - m) / s).collect()
    };
    Ok(Standardized {
        train_x: train.iter().map(|&i| row(i)).collect(),
        train_y: train.iter().map(|&i| (data.labels[i] - ym) / ys).collect(),
        val_x: val.iter().map(|&i| row(i)).collect(),
        val_y: val.iter().map(|&i| (data.labels[i] - ym) / ys).collect(),
        dropped,
    })
}

fn validation_loss(theta: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let pred: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
        acc += 0.5 * (pred - y) * (pred - y);
    }
    acc / ys.len() as f64
}

/// Runs one pass of DP-GD over the training subset per trial and reports the validation
/// loss. Trials differ in the visiting order and in the privacy noise; diverged trials
/// are flagged, not removed.
pub fn run_on_dataset(data: &Dataset, config: &DatasetRunConfig) -> Result<DatasetResult> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let s = standardize(data, config.split, config.seed)?;
    let d = s.train_x.first().map_or(0, |x| x.len());
    if d == 0 {
        return Err(Error::Config("no usable features left after standardization".into()));
    }
    let n = s.train_x.len();
    let budget = discrete_noise_schedule(&config.schedule, n, config.rho)?;
    let c_clip = config.c * (d as f64).sqrt();
    let zero_model_loss = validation_loss(&vec![0.0; d], &s.val_x, &s.val_y);

    let mut losses = Vec::with_capacity(config.trials);
    let mut diverged = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let key = StreamKey::new(config.seed, purpose::TRIAL | trial as u64);
        let order = permutation(n, config.seed, purpose::SPLIT | (trial as u64 + 1));
        let mut theta = vec![0.0; d];
        let mut bad = false;
        for (k, &i) in order.iter().enumerate() {
            let mut rng = key.at(k as u64);
            dpgd_update(&mut theta, &s.train_x[i], s.train_y[i], budget.eta[k], budget.sigma[k], c_clip, &mut rng);
            if theta.iter().any(|t| !t.is_finite()) {
                bad = true;
                break;
            }
        }
        let loss = if bad { f64::INFINITY } else { validation_loss(&theta, &s.val_x, &s.val_y) };
        if bad || !loss.is_finite() {
            warn!("trial {trial} diverged");
        }
        diverged.push(bad || !loss.is_finite());
        losses.push(loss);
    }
    let ok: Vec<f64> = losses.iter().zip(&diverged).filter(|(_, d)| !**d).map(|(l, _)| *l).collect();
    let (mean, std) = mean_std(&ok);
    Ok(DatasetResult {
        losses,
        diverged,
        mean,
        std,
        zero_model_loss,
        n_train: n,
        d,
        gamma: d as f64 / n as f64,
        dropped_features: s.dropped,
    })
}
