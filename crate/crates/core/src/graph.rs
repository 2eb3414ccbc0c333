//! Hawkes graph of a fitted model: one node per component carrying its
//! baseline, one directed edge `j -> i` per edge with non-zero excitation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{MarkConfig, ModelConfig};
use crate::error::{Error, Result};
use crate::marks::MarkKernel;
use crate::model::{branching_matrix, KernelSpec, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// 1-based component index.
    pub id: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Exciting component.
    pub source: usize,
    /// Excited component.
    pub target: usize,
    /// `alpha_ij` (one entry) or the topic weights `m_ij.`; the entries of
    /// `A_ij` row-major for matrix kernels.
    pub coefficients: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Expected number of direct offspring, the branching-matrix entry.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

pub fn hawkes_graph(params: &ModelParams, marks: &MarkKernel) -> Result<HawkesGraph> {
    let d = params.dim();
    let mean = marks.stationary_mean();
    let phi = branching_matrix(params, mean.as_deref())?;
    let nodes = (0..d).map(|i| Node { id: i + 1, mu: params.mu()[i] }).collect();
    let mut edges = Vec::new();
    for j in 0..d {
        for i in 0..d {
            let coefficients: Vec<f64> = match params.kernel() {
                KernelSpec::ScalarExp { .. } => params.coef(i, j).to_vec(),
                KernelSpec::MatrixExp { a, .. } => a[i * d + j].transpose().iter().copied().collect(),
            };
            if coefficients.iter().all(|&c| c == 0.0) {
                continue;
            }
            edges.push(Edge {
                source: j + 1,
                target: i + 1,
                coefficients,
                beta: params.beta(i, j),
                weight: phi.matrix()[(i, j)],
            });
        }
    }
    Ok(HawkesGraph { nodes, edges })
}

/// Graph of the final estimate stored in a fit JSON document.
pub fn graph_from_fit(fit: &Value) -> Result<HawkesGraph> {
    let model = fit.get("estimate").ok_or_else(|| Error::Config("fit JSON has no `estimate`".into()))?;
    let params = ModelConfig::deserialize(model)?.to_params()?;
    let marks = match fit.get("marks") {
        Some(m) => MarkConfig::deserialize(m)?.to_kernel()?,
        None => MarkKernel::None,
    };
    hawkes_graph(&params, &marks)
}
