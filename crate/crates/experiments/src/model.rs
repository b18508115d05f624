//! Node-classification architectures assembled from the core primitives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use diffprog_core::graph::{neighbor_pattern, normalize_adjacency, CitationGraph};
use diffprog_core::primitives::{
    dense, dropout, gcn_layer, self_attention, Activation, AttentionParams, AttentionPattern, DenseParams, GcnParams,
};
use diffprog_core::{NodeId, ParamStore, SparseMatrix, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{ExpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp2,
    Mlp3,
    Gcn2,
    Gcn3,
    Attn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Mlp2,
        ModelKind::Mlp3,
        ModelKind::Gcn2,
        ModelKind::Gcn3,
        ModelKind::Attn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp2 => "mlp2",
            ModelKind::Mlp3 => "mlp3",
            ModelKind::Gcn2 => "gcn2",
            ModelKind::Gcn3 => "gcn3",
            ModelKind::Attn => "attn",
        }
    }

    pub fn default_hidden(self) -> Vec<usize> {
        match self {
            ModelKind::Mlp2 | ModelKind::Gcn2 => vec![16],
            ModelKind::Mlp3 => vec![512, 256],
            ModelKind::Gcn3 => vec![16],
            ModelKind::Attn => vec![120],
        }
    }

    fn hidden_layers(self) -> usize {
        match self {
            ModelKind::Mlp2 | ModelKind::Gcn2 | ModelKind::Attn => 1,
            ModelKind::Mlp3 => 2,
            ModelKind::Gcn3 => 1,
        }
    }

    pub fn uses_edges(self) -> bool {
        matches!(self, ModelKind::Gcn2 | ModelKind::Gcn3 | ModelKind::Attn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ExpError::Spec(format!("unknown model {s:?}")))
    }
}

/// Which node pairs the attention model may relate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttnScope {
    All,
    #[serde(rename = "self")]
    SelfOnly,
    #[default]
    Neighbors,
}

impl AttnScope {
    pub fn name(self) -> &'static str {
        match self {
            AttnScope::All => "all",
            AttnScope::SelfOnly => "self",
            AttnScope::Neighbors => "neighbors",
        }
    }

    /// Compressed scope over the nodes of `g`; neighbors include the node
    /// itself.
    pub fn pattern(self, g: &CitationGraph) -> Result<AttentionPattern> {
        let n = g.num_nodes();
        Ok(match self {
            AttnScope::All => AttentionPattern::full(n),
            AttnScope::SelfOnly => AttentionPattern::from_rows(n, &(0..n).map(|v| vec![v]).collect::<Vec<_>>())?,
            AttnScope::Neighbors => neighbor_pattern(g, true)?,
        })
    }
}

impl fmt::Display for AttnScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttnScope {
    type Err = ExpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(AttnScope::All),
            "self" => Ok(AttnScope::SelfOnly),
            "neighbors" => Ok(AttnScope::Neighbors),
            _ => Err(ExpError::Spec(format!("unknown attention scope {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dims: Vec<usize>,
    #[serde(default)]
    pub attn_scope: AttnScope,
    pub dropout_rate: f64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            hidden_dims: kind.default_hidden(),
            attn_scope: AttnScope::default(),
            dropout_rate: 0.5,
        }
    }

    pub fn with_hidden(mut self, dims: Vec<usize>) -> Self {
        self.hidden_dims = dims;
        self
    }

    pub fn with_scope(mut self, scope: AttnScope) -> Self {
        self.attn_scope = scope;
        self
    }

    pub fn validate(&self, feature_dim: usize, classes: usize) -> Result<()> {
        let expected = self.kind.hidden_layers();
        if self.hidden_dims.len() != expected {
            return Err(ExpError::Config(format!(
                "{} takes {expected} hidden dimension(s), got {:?}",
                self.kind, self.hidden_dims
            )));
        }
        if feature_dim == 0 || classes == 0 || self.hidden_dims.contains(&0) {
            return Err(ExpError::Config(format!(
                "dimensions must be positive (features {feature_dim}, classes {classes}, hidden {:?})",
                self.hidden_dims
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ExpError::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    fn widths(&self, feature_dim: usize, classes: usize) -> Vec<usize> {
        let mut w = vec![feature_dim];
        match self.kind {
            ModelKind::Gcn3 => w.extend([self.hidden_dims[0], self.hidden_dims[0]]),
            _ => w.extend(&self.hidden_dims),
        }
        w.push(classes);
        w
    }

    /// Number of trainable scalars [`build_model`] would create.
    pub fn param_count(&self, feature_dim: usize, classes: usize) -> Result<usize> {
        self.validate(feature_dim, classes)?;
        let w = self.widths(feature_dim, classes);
        let layers: usize = w.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        let attention = match self.kind {
            ModelKind::Attn => 4 * (w[1] * w[1] + w[1]),
            _ => 0,
        };
        Ok(layers + attention)
    }
}

/// Graph-derived constants shared by every forward pass.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub num_nodes: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub features: Arc<SparseMatrix>,
    pub a_hat: Arc<SparseMatrix>,
    pub scope: Option<Arc<AttentionPattern>>,
    pub labels: Arc<Vec<usize>>,
}

impl GraphContext {
    /// Precomputes what `config` needs: the normalized adjacency with self
    /// loops for GCNs and the scope pattern for attention.
    pub fn new(g: &CitationGraph, config: &ModelConfig) -> Result<Self> {
        let a_hat = match config.kind {
            ModelKind::Gcn2 | ModelKind::Gcn3 => normalize_adjacency(g, true),
            _ => SparseMatrix::identity(g.num_nodes()),
        };
        let scope = match config.kind {
            ModelKind::Attn => Some(Arc::new(config.attn_scope.pattern(g)?)),
            _ => None,
        };
        Ok(Self {
            num_nodes: g.num_nodes(),
            feature_dim: g.feature_dim(),
            num_classes: g.num_classes(),
            features: Arc::new(g.features().clone()),
            a_hat: Arc::new(a_hat),
            scope,
            labels: Arc::new(g.labels().to_vec()),
        })
    }
}

/// A configuration together with its trainable parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
}

fn layer_name(i: usize) -> String {
    format!("layer{i}")
}

/// Creates the parameters of `config` with seeded Glorot initialization.
pub fn build_model(config: &ModelConfig, ctx: &GraphContext, seed: u64) -> Result<Model> {
    config.validate(ctx.feature_dim, ctx.num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let w = config.widths(ctx.feature_dim, ctx.num_classes);
    match config.kind {
        ModelKind::Mlp2 | ModelKind::Mlp3 => {
            for (i, p) in w.windows(2).enumerate() {
                DenseParams::init(&mut store, &layer_name(i), p[0], p[1], &mut rng)?;
            }
        }
        ModelKind::Gcn2 | ModelKind::Gcn3 => {
            for (i, p) in w.windows(2).enumerate() {
                GcnParams::init(&mut store, &layer_name(i), p[0], p[1], &mut rng)?;
            }
        }
        ModelKind::Attn => {
            DenseParams::init(&mut store, "pre", w[0], w[1], &mut rng)?;
            AttentionParams::init(&mut store, "attention", w[1], &mut rng)?;
            DenseParams::init(&mut store, "post", w[1], w[2], &mut rng)?;
        }
    }
    Ok(Model {
        config: config.clone(),
        store,
    })
}

impl Model {
    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    /// Records the forward pass over all nodes and returns the logits node
    /// `[N, classes]`. Dropout is active only when `training`.
    pub fn forward(&self, tape: &mut Tape, ctx: &GraphContext, training: bool, dropout_seed: u64) -> Result<NodeId> {
        let rate = self.config.dropout_rate;
        let store = &self.store;
        let logits = match self.config.kind {
            ModelKind::Mlp2 | ModelKind::Mlp3 => {
                let layers = self.config.hidden_dims.len() + 1;
                let mut h = None;
                for i in 0..layers {
                    let p = DenseParams::bind(tape, store, &layer_name(i))?;
                    let act = if i + 1 < layers {
                        Activation::Relu
                    } else {
                        Activation::None
                    };
                    h = Some(match h {
                        None => dense(tape, &ctx.features, &p, act)?,
                        Some(x) => dense(tape, x, &p, act)?,
                    });
                }
                h.expect("at least one layer")
            }
            ModelKind::Gcn2 | ModelKind::Gcn3 => {
                let layers = if self.config.kind == ModelKind::Gcn2 { 2 } else { 3 };
                let p = GcnParams::bind(tape, store, &layer_name(0))?;
                let mut h = gcn_layer(tape, &ctx.features, &ctx.a_hat, &p, Activation::Relu)?;
                if self.config.kind == ModelKind::Gcn2 {
                    h = dropout(tape, h, rate, training, dropout_seed)?;
                }
                for i in 1..layers {
                    let p = GcnParams::bind(tape, store, &layer_name(i))?;
                    let act = if i + 1 < layers {
                        Activation::Relu
                    } else {
                        Activation::None
                    };
                    h = gcn_layer(tape, h, &ctx.a_hat, &p, act)?;
                }
                h
            }
            ModelKind::Attn => {
                let scope = ctx
                    .scope
                    .as_ref()
                    .ok_or_else(|| ExpError::Config("attention model needs a scope pattern".into()))?;
                let pre = DenseParams::bind(tape, store, "pre")?;
                let h = dense(tape, &ctx.features, &pre, Activation::None)?;
                let att = AttentionParams::bind(tape, store, "attention")?;
                let h = self_attention(tape, h, scope, &att)?;
                let h = dropout(tape, h, rate, training, dropout_seed)?;
                let post = DenseParams::bind(tape, store, "post")?;
                dense(tape, h, &post, Activation::None)?
            }
        };
        Ok(logits)
    }
}
