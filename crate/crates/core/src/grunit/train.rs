use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{classify, classify_backward, mlsm_loss, FeatureGrid, GrParams, Mat, ParamGrads};
use crate::error::{Error, Result};
use crate::maps::ClassId;

/// A feature grid with its image-level label.
#[derive(Clone, Debug)]
pub struct LabeledGrid {
    pub grid: FeatureGrid,
    pub classes: BTreeSet<ClassId>,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Latent node count `N`.
    pub nodes: usize,
    /// Foreground class count `C`.
    pub classes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            epochs: 14,
            seed: 0,
            nodes: 64,
            classes: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: GrParams,
    /// Mean loss at the start of each epoch, before that epoch's update.
    pub losses: Vec<f64>,
    /// Mean loss after the final update.
    pub final_loss: f64,
    /// Parameters after each epoch's update, one per epoch.
    pub snapshots: Vec<GrParams>,
}

fn targets(classes: &BTreeSet<ClassId>, count: usize) -> Vec<bool> {
    (1..=count).map(|c| classes.contains(&(c as ClassId))).collect()
}

/// Mean multi-label soft-margin loss over `dataset` and its gradient with
/// respect to every parameter tensor. The `input` field of the returned
/// gradient holds zeros.
pub fn loss_and_grads(params: &GrParams, dataset: &[LabeledGrid]) -> Result<(f64, ParamGrads)> {
    if dataset.is_empty() {
        return Err(Error::Parameter("empty training set".into()));
    }
    let mut total = 0.0;
    let mut acc = ParamGrads::zeros_like(params, (0, 0));
    for sample in dataset {
        let scores = classify(params, &sample.grid)?.scores;
        let (loss, d_scores) = mlsm_loss(&scores, &targets(&sample.classes, params.class_count()));
        total += loss;
        let g = classify_backward(params, &sample.grid, &d_scores)?;
        acc.projection.add_scaled_in_place(&g.projection, 1.0);
        acc.adjacency.add_scaled_in_place(&g.adjacency, 1.0);
        acc.state_update.add_scaled_in_place(&g.state_update, 1.0);
        acc.classifier.add_scaled_in_place(&g.classifier, 1.0);
        for (a, b) in acc.bias.iter_mut().zip(&g.bias) {
            *a += b;
        }
    }
    let n = dataset.len() as f64;
    let scale = 1.0 / n;
    Ok((
        total / n,
        ParamGrads {
            projection: acc.projection.scale(scale),
            adjacency: acc.adjacency.scale(scale),
            state_update: acc.state_update.scale(scale),
            classifier: acc.classifier.scale(scale),
            bias: acc.bias.iter().map(|b| b * scale).collect(),
            input: Mat::zeros(0, 0),
        },
    ))
}

struct Velocity {
    projection: Mat,
    adjacency: Mat,
    state_update: Mat,
    classifier: Mat,
    bias: Vec<f64>,
}

fn momentum_step(v: &mut Mat, g: &Mat, param: &mut Mat, momentum: f64, lr: f64) {
    for ((vi, gi), pi) in v
        .as_mut_slice()
        .iter_mut()
        .zip(g.as_slice())
        .zip(param.as_mut_slice())
    {
        *vi = momentum * *vi + gi;
        *pi -= lr * *vi;
    }
}

/// Full-batch gradient descent with heavy-ball momentum on the classifier
/// loss. Deterministic for a given seed.
pub fn train_toy(dataset: &[LabeledGrid], config: &TrainConfig) -> Result<TrainOutcome> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Parameter("empty training set".into()))?;
    if let Some(bad) = dataset.iter().find(|s| {
        s.grid.locations() != first.grid.locations() || s.grid.dim() != first.grid.dim()
    }) {
        return Err(Error::shape(
            "training set",
            format!("L={} K={}", first.grid.locations(), first.grid.dim()),
            format!("L={} K={}", bad.grid.locations(), bad.grid.dim()),
        ));
    }
    if let Some(c) = dataset
        .iter()
        .flat_map(|s| s.classes.iter())
        .find(|&&c| c == 0 || c as usize > config.classes)
    {
        return Err(Error::Parameter(format!(
            "class id {c} outside 1..={}",
            config.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = GrParams::init(
        config.nodes,
        first.grid.locations(),
        first.grid.dim(),
        config.classes,
        &mut rng,
    )?;
    let zeros = ParamGrads::zeros_like(&params, (0, 0));
    let mut velocity = Velocity {
        projection: zeros.projection,
        adjacency: zeros.adjacency,
        state_update: zeros.state_update,
        classifier: zeros.classifier,
        bias: zeros.bias,
    };
    let (lr, mu) = (config.learning_rate, config.momentum);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, g) = loss_and_grads(&params, dataset)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        losses.push(loss);
        momentum_step(&mut velocity.projection, &g.projection, &mut params.projection, mu, lr);
        momentum_step(&mut velocity.adjacency, &g.adjacency, &mut params.adjacency, mu, lr);
        momentum_step(&mut velocity.state_update, &g.state_update, &mut params.state_update, mu, lr);
        momentum_step(&mut velocity.classifier, &g.classifier, &mut params.classifier, mu, lr);
        for ((v, g), p) in velocity.bias.iter_mut().zip(&g.bias).zip(params.bias.iter_mut()) {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
        if params.validate().is_err() {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        snapshots.push(params.clone());
    }
    let (final_loss, _) = loss_and_grads(&params, dataset)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok(TrainOutcome {
        params,
        losses,
        final_loss,
        snapshots,
    })
}
