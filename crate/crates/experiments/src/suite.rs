//! Batches of training runs described by a JSON spec and reported as a CSV
//! table.
//!
//! A spec looks like
//!
//! ```json
//! {
//!   "hyper": {"epochs": 200, "lr": 0.01},
//!   "cells": [
//!     {"name": "gcn2/train", "model": "gcn2", "mask": "train", "seeds": [0, 1, 2, 3, 4]},
//!     {"name": "attn/self", "model": "attn", "attn_scope": "self", "mask": "first:1500", "seeds": [0]}
//!   ]
//! }
//! ```
//!
//! Omitted cell fields fall back to the model defaults, `"edges": "none"` and
//! the suite-wide `hyper`.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use diffprog_core::graph::{CitationGraph, MaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{AttnScope, ModelConfig, ModelKind};
use crate::train::{run, EdgeSpec, Hyperparams, RunReport, RunSpec};
use crate::{ExpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub name: String,
    pub model: ModelKind,
    #[serde(default)]
    pub hidden_dims: Option<Vec<usize>>,
    #[serde(default)]
    pub attn_scope: Option<AttnScope>,
    #[serde(default)]
    pub dropout_rate: Option<f64>,
    pub mask: MaskSpec,
    #[serde(default)]
    pub edges: EdgeSpec,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub lr: Option<f64>,
}

impl CellSpec {
    pub fn config(&self) -> ModelConfig {
        let mut c = ModelConfig::new(self.model);
        if let Some(h) = &self.hidden_dims {
            c.hidden_dims = h.clone();
        }
        if let Some(s) = self.attn_scope {
            c.attn_scope = s;
        }
        if let Some(d) = self.dropout_rate {
            c.dropout_rate = d;
        }
        c
    }

    fn run_spec(&self, base: &Hyperparams, seed: u64) -> RunSpec {
        let mut hyper = *base;
        hyper.seed = seed;
        if let Some(e) = self.epochs {
            hyper.epochs = e;
        }
        if let Some(lr) = self.lr {
            hyper.lr = lr;
        }
        RunSpec {
            config: self.config(),
            mask: self.mask,
            edges: self.edges,
            hyper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default)]
    pub hyper: Hyperparams,
    pub cells: Vec<CellSpec>,
}

impl SuiteSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SuiteSpec = serde_json::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Structural checks that need no data: names, seeds, epochs and
    /// model dimensions.
    pub fn check(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(ExpError::Spec("suite has no cells".into()));
        }
        let mut names = HashSet::new();
        for cell in &self.cells {
            if !names.insert(cell.name.as_str()) {
                return Err(ExpError::Spec(format!("duplicate cell name {:?}", cell.name)));
            }
            if cell.seeds.is_empty() {
                return Err(ExpError::Spec(format!("cell {:?} has no seeds", cell.name)));
            }
            let spec = cell.run_spec(&self.hyper, 0);
            if spec.hyper.epochs == 0 {
                return Err(ExpError::Spec(format!(
                    "cell {:?}: epochs must be at least 1",
                    cell.name
                )));
            }
            spec.config.validate(1, 1)?;
        }
        Ok(())
    }

    /// Number of training runs the suite performs.
    pub fn runs(&self) -> usize {
        self.cells.iter().map(|c| c.seeds.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub cell: String,
    pub model: ModelKind,
    pub hidden_dims: String,
    pub attn_scope: String,
    pub dropout_rate: f64,
    pub mask: MaskSpec,
    pub edges: EdgeSpec,
    /// A seed number, or `mean` on the per-cell summary row.
    pub seed: String,
    pub epochs: usize,
    pub final_loss: f64,
    pub test_accuracy: f64,
    pub param_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteTable {
    /// Reports in spec order, seeds inner.
    pub reports: Vec<(String, RunReport)>,
}

impl SuiteTable {
    pub fn cell<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RunReport> {
        self.reports.iter().filter(move |(n, _)| n == name).map(|(_, r)| r)
    }

    /// Mean test accuracy over the seeds of a cell.
    pub fn mean_accuracy(&self, name: &str) -> Option<f64> {
        let accs: Vec<f64> = self.cell(name).map(|r| r.test_accuracy).collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// One row per run followed by one `mean` row per cell.
    pub fn rows(&self) -> Vec<SuiteRow> {
        let row = |cell: &str, r: &RunReport, seed: String, acc: f64, loss: f64| SuiteRow {
            cell: cell.to_string(),
            model: r.config.kind,
            hidden_dims: r
                .config
                .hidden_dims
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join("x"),
            attn_scope: if r.config.kind == ModelKind::Attn {
                r.config.attn_scope.to_string()
            } else {
                String::new()
            },
            dropout_rate: r.config.dropout_rate,
            mask: r.mask,
            edges: r.edges,
            seed,
            epochs: r.losses.len(),
            final_loss: loss,
            test_accuracy: acc,
            param_count: r.param_count,
        };
        let mut rows: Vec<SuiteRow> = self
            .reports
            .iter()
            .map(|(c, r)| {
                row(
                    c,
                    r,
                    r.seed.to_string(),
                    r.test_accuracy,
                    *r.losses.last().unwrap_or(&f64::NAN),
                )
            })
            .collect();
        let mut seen = HashSet::new();
        for (name, first) in &self.reports {
            if !seen.insert(name.as_str()) {
                continue;
            }
            let runs: Vec<&RunReport> = self.cell(name).collect();
            let k = runs.len() as f64;
            let loss = runs.iter().map(|r| *r.losses.last().unwrap_or(&f64::NAN)).sum::<f64>() / k;
            rows.push(row(
                name,
                first,
                "mean".into(),
                self.mean_accuracy(name).unwrap_or(f64::NAN),
                loss,
            ));
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|source| ExpError::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Runs every (cell, seed) pair, in parallel across pairs.
pub fn run_experiment_suite(spec: &SuiteSpec, graph: &CitationGraph) -> Result<SuiteTable> {
    spec.check()?;
    let jobs: Vec<(&CellSpec, RunSpec)> = spec
        .cells
        .iter()
        .flat_map(|c| c.seeds.iter().map(move |&s| (c, c.run_spec(&spec.hyper, s))))
        .collect();
    let reports = jobs
        .par_iter()
        .map(|(c, rs)| run(rs, graph).map(|r| (c.name.clone(), r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteTable { reports })
}
