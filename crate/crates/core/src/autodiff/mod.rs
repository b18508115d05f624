//! Define-by-run tape and reverse-mode differentiation.
//!
//! A [`Tape`] is a topologically ordered DAG: every recorded node only refers
//! to nodes that already exist, so node ids double as a topological order.
//! Values are computed as soon as a node is recorded. [`Tape::backward`]
//! seeds the adjoint of a scalar output with 1 and walks the ids in strictly
//! descending order, adding each node's local-derivative contributions to
//! its inputs. A node's adjoint is complete by the time it is visited.

mod gradcheck;
mod op;
mod params;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use gradcheck::{gradient_check, GradCheckReport, REL_ERROR_FLOOR};
pub use op::{Op, KIND_NAMES};
pub use params::{ParamEntry, ParamStore};

/// Position of a node on its tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    /// Refers to position `i`; validity is checked by the tape on use.
    pub fn from_index(i: usize) -> Self {
        NodeId(i)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct TapeNode {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    aux: Vec<f64>,
    adjoint: Option<Tensor>,
}

impl TapeNode {
    pub fn op(&self) -> &Op {
        &self.op
    }

    pub fn kind(&self) -> &'static str {
        self.op.name()
    }

    pub fn inputs(&self) -> &[NodeId] {
        &self.inputs
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    /// `∂y/∂v` for the output of the last backward pass, if this node lies
    /// on a path to it.
    pub fn adjoint(&self) -> Option<&Tensor> {
        self.adjoint.as_ref()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
    num_inputs: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_leaf(&mut self, op: Op, value: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(TapeNode {
            op,
            inputs: Vec::new(),
            value,
            aux: Vec::new(),
            adjoint: None,
        });
        self.num_inputs += 1;
        id
    }

    /// Records an input variable.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(Op::Input, value)
    }

    /// Registers the current value of a stored parameter as a leaf node.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        let value = store.value(name)?.clone();
        Ok(self.push_leaf(Op::Parameter(name.to_string()), value))
    }

    /// Appends a node computing `op` over existing nodes and evaluates it
    /// immediately. The returned id is the previous tape length, hence
    /// greater than every input id.
    pub fn record(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        if op.is_leaf() {
            return Err(Error::LeafKind(op.name()));
        }
        for id in inputs {
            self.check(*id)?;
        }
        let (value, aux) = {
            let values: Vec<&Tensor> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
            op.forward(&values)?
        };
        let id = NodeId(self.nodes.len());
        self.nodes.push(TapeNode {
            op,
            inputs: inputs.to_vec(),
            value,
            aux,
            adjoint: None,
        });
        Ok(id)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode {
                id: id.0,
                len: self.nodes.len(),
            })
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of input and parameter (leaf) nodes.
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn nodes(&self) -> &[TapeNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&TapeNode> {
        self.check(id)?;
        Ok(&self.nodes[id.0])
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        Ok(&self.node(id)?.value)
    }

    pub fn adjoint(&self, id: NodeId) -> Result<Option<&Tensor>> {
        Ok(self.node(id)?.adjoint.as_ref())
    }

    /// Every `(input, consumer)` edge in recording order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(j, n)| n.inputs.iter().map(move |&i| (i, NodeId(j))))
    }

    /// Densified weights of an attention node, `[queries, keys]`.
    pub fn attention_weights(&self, id: NodeId) -> Result<Option<Tensor>> {
        let node = self.node(id)?;
        Ok(match &node.op {
            Op::Attention { pattern, .. } => Some(pattern.densify(&node.aux)),
            _ => None,
        })
    }

    /// Reverse sweep from a scalar `output`. Clears adjoints from any earlier
    /// sweep; nodes that do not reach `output` keep no adjoint.
    pub fn backward(&mut self, output: NodeId) -> Result<()> {
        self.check(output)?;
        let out_value = &self.nodes[output.0].value;
        if !out_value.is_scalar() || out_value.rank() > 2 {
            return Err(Error::NonScalarOutput {
                id: output.0,
                shape: out_value.shape().to_vec(),
            });
        }
        let seed = Tensor::full(out_value.shape(), 1.0);
        for node in &mut self.nodes {
            node.adjoint = None;
        }
        self.nodes[output.0].adjoint = Some(seed);

        for id in (0..=output.0).rev() {
            let contributions = {
                let node = &self.nodes[id];
                let Some(grad) = node.adjoint.as_ref() else {
                    continue;
                };
                if node.op.is_leaf() {
                    continue;
                }
                let inputs: Vec<&Tensor> = node.inputs.iter().map(|i| &self.nodes[i.0].value).collect();
                node.op.backward(&inputs, &node.value, &node.aux, grad)?
            };
            let input_ids = self.nodes[id].inputs.clone();
            for (input, contribution) in input_ids.into_iter().zip(contributions) {
                match &mut self.nodes[input.0].adjoint {
                    Some(acc) => acc.add_assign(&contribution)?,
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }

    /// Adds every parameter node's adjoint to the matching gradient
    /// accumulator in `store`.
    pub fn accumulate_grads(&self, store: &mut ParamStore) -> Result<()> {
        for node in &self.nodes {
            if let (Op::Parameter(name), Some(adj)) = (&node.op, &node.adjoint) {
                store.add_grad(name, adj)?;
            }
        }
        Ok(())
    }

    /// [`Tape::backward`] followed by [`Tape::accumulate_grads`].
    pub fn backward_into(&mut self, output: NodeId, store: &mut ParamStore) -> Result<()> {
        self.backward(output)?;
        self.accumulate_grads(store)
    }

    /// Text form, one node per line: `id kind [input ids] [shape]`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let inputs: Vec<String> = node.inputs.iter().map(|i| i.0.to_string()).collect();
            let shape: Vec<String> = node.value.shape().iter().map(|d| d.to_string()).collect();
            let _ = writeln!(
                out,
                "{id} {} [{}] [{}]",
                node.op.name(),
                inputs.join(" "),
                shape.join(",")
            );
        }
        out
    }
}
