use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use diffprog_core::graph::{mask_from_spec, randomize_edges, remove_edges, CitationGraph, MaskSpec};
use diffprog_core::optim::{adam_step, sgd_step, Adam};
use diffprog_core::primitives::cross_entropy_shared;
use diffprog_core::{Tape, Tensor};
use serde::{Deserialize, Serialize};

use crate::model::{build_model, GraphContext, Model, ModelConfig};
use crate::{ExpError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            seed: 0,
        }
    }
}

/// Edge perturbation applied before training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EdgeSpec {
    #[default]
    None,
    Random,
    /// Fraction of undirected pairs to drop.
    Remove(f64),
}

impl EdgeSpec {
    pub fn apply(self, g: &CitationGraph, seed: u64) -> Result<CitationGraph> {
        Ok(match self {
            EdgeSpec::None => g.clone(),
            EdgeSpec::Random => randomize_edges(g, seed),
            EdgeSpec::Remove(f) => remove_edges(g, f, seed)?,
        })
    }
}

impl FromStr for EdgeSpec {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EdgeSpec::None),
            "random" => Ok(EdgeSpec::Random),
            _ => s
                .strip_prefix("remove:")
                .and_then(|p| p.parse::<f64>().ok())
                .filter(|p| (0.0..=1.0).contains(p))
                .map(EdgeSpec::Remove)
                .ok_or_else(|| {
                    ExpError::Spec(format!(
                        "bad edge spec {s:?} (none, random or remove:P with P in [0, 1])"
                    ))
                }),
        }
    }
}

impl fmt::Display for EdgeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeSpec::None => f.write_str("none"),
            EdgeSpec::Random => f.write_str("random"),
            EdgeSpec::Remove(p) => write!(f, "remove:{p}"),
        }
    }
}

impl TryFrom<String> for EdgeSpec {
    type Error = ExpError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EdgeSpec> for String {
    fn from(e: EdgeSpec) -> String {
        e.to_string()
    }
}

/// Everything that determines one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub config: ModelConfig,
    pub mask: MaskSpec,
    pub edges: EdgeSpec,
    pub hyper: Hyperparams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ModelConfig,
    pub mask: MaskSpec,
    pub edges: EdgeSpec,
    pub seed: u64,
    pub losses: Vec<f64>,
    pub test_accuracy: f64,
    pub param_count: usize,
}

/// Share of `rows` whose arg-max logit (lowest class on ties) equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize], rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(ExpError::EmptyMask);
    }
    let correct = rows
        .iter()
        .filter(|&&r| {
            let row = logits.row(r);
            let best = row
                .iter()
                .enumerate()
                .fold(0, |best, (c, &v)| if v > row[best] { c } else { best });
            best == labels[r]
        })
        .count();
    Ok(correct as f64 / rows.len() as f64)
}

/// Inference-mode accuracy over `rows`.
pub fn evaluate(model: &Model, ctx: &GraphContext, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(ExpError::EmptyMask);
    }
    let mut tape = Tape::new();
    let logits = model.forward(&mut tape, ctx, false, 0)?;
    accuracy(tape.value(logits)?, &ctx.labels, rows)
}

fn dropout_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// One optimization step per epoch on a fresh tape. Returns the per-epoch
/// training losses.
pub fn fit(model: &mut Model, ctx: &GraphContext, rows: &[usize], hyper: &Hyperparams) -> Result<Vec<f64>> {
    if hyper.epochs == 0 {
        return Err(ExpError::Config("epochs must be at least 1".into()));
    }
    let rows = Arc::new(rows.to_vec());
    let adam = Adam {
        lr: hyper.lr,
        weight_decay: hyper.weight_decay,
        ..Adam::default()
    };
    let mut losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let mut tape = Tape::new();
        let logits = model.forward(&mut tape, ctx, true, dropout_seed(hyper.seed, epoch))?;
        let loss = cross_entropy_shared(&mut tape, logits, &ctx.labels, &rows)?;
        losses.push(tape.value(loss)?.item().expect("scalar loss"));
        model.store.zero_grad();
        tape.backward_into(loss, &mut model.store)?;
        match hyper.optimizer {
            Optimizer::Adam => adam_step(&mut model.store, &adam),
            Optimizer::Sgd => sgd_step(&mut model.store, hyper.lr),
        }
    }
    Ok(losses)
}

/// Perturbs `base` per `spec.edges`, trains on `spec.mask` and reports test
/// accuracy.
pub fn run(spec: &RunSpec, base: &CitationGraph) -> Result<RunReport> {
    let graph = spec.edges.apply(base, spec.hyper.seed)?;
    let ctx = GraphContext::new(&graph, &spec.config)?;
    let mut model = build_model(&spec.config, &ctx, spec.hyper.seed)?;
    let train_rows = mask_from_spec(&graph, spec.mask)?;
    let test_rows = mask_from_spec(&graph, MaskSpec::Test)?;
    let losses = fit(&mut model, &ctx, &train_rows, &spec.hyper)?;
    let test_accuracy = evaluate(&model, &ctx, &test_rows)?;
    Ok(RunReport {
        config: spec.config.clone(),
        mask: spec.mask,
        edges: spec.edges,
        seed: spec.hyper.seed,
        losses,
        test_accuracy,
        param_count: model.param_count(),
    })
}

/// [`run`] without edge perturbation.
pub fn train(config: &ModelConfig, graph: &CitationGraph, mask: MaskSpec, hyper: &Hyperparams) -> Result<RunReport> {
    run(
        &RunSpec {
            config: config.clone(),
            mask,
            edges: EdgeSpec::None,
            hyper: *hyper,
        },
        graph,
    )
}
