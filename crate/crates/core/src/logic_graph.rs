//! Logical graph and structure-aware attention masks.
//!
//! The graph connects every operator to each of its direct arguments. The
//! mask expands that node-level relation to the token level:
//!
//! - an operator token sees itself, its own `{`, `;` and `}` tokens, and the
//!   head token(s) of each direct argument (the operator token of a nested
//!   clause, or every word of a terminal);
//! - a terminal word sees the other words of its terminal, its parent
//!   operator token and the parent's clause punctuation;
//! - punctuation tokens copy the row of the operator that owns them.
//!
//! [`MaskPolicy::ParentAndChildren`] additionally lets an operator token see
//! its parent operator token.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_form::{LogicTree, NodeId, TokenRole};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicGraph {
    node_count: usize,
    /// `(parent, child)` pairs in preorder of the child.
    edges: Vec<(NodeId, NodeId)>,
}

impl LogicGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    /// Undirected edge test.
    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edges
            .iter()
            .any(|&(p, c)| (p, c) == (a, b) || (p, c) == (b, a))
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.edges
            .iter()
            .filter(|&&(p, c)| p == id || c == id)
            .count()
    }

    /// Edges as unordered name pairs, convenient for comparisons.
    pub fn named_edges(&self, tree: &LogicTree) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|(p, c)| (tree.node(*p).name.clone(), tree.node(*c).name.clone()))
            .collect()
    }
}

pub fn build_graph(tree: &LogicTree) -> LogicGraph {
    let edges = tree
        .node_ids()
        .filter_map(|id| tree.node(id).parent.map(|p| (p, id)))
        .collect();
    LogicGraph {
        node_count: tree.nodes().len(),
        edges,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    #[default]
    ChildrenOnly,
    ParentAndChildren,
}

impl MaskPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MaskPolicy::ChildrenOnly => "children_only",
            MaskPolicy::ParentAndChildren => "parent_and_children",
        }
    }
}

impl fmt::Display for MaskPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaskPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "children_only" => Ok(MaskPolicy::ChildrenOnly),
            "parent_and_children" => Ok(MaskPolicy::ParentAndChildren),
            other => Err(format!("unknown mask policy '{other}'")),
        }
    }
}

/// Square 0/1 visibility matrix over the tokens of one form. Serializes as
/// `{"tokens": [...], "policy": "...", "mask": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskMatrix {
    pub tokens: Vec<String>,
    pub policy: MaskPolicy,
    #[serde(rename = "mask")]
    cells: Vec<Vec<u8>>,
}

impl MaskMatrix {
    pub fn order(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row][col] == 1
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.cells[row]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.cells
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.order();
        (0..n).all(|i| (0..i).all(|j| self.cells[i][j] == self.cells[j][i]))
    }

    /// Checks the matrix invariants: square, 0/1 cells, unit diagonal,
    /// and one label per row.
    pub fn is_well_formed(&self) -> bool {
        let n = self.order();
        self.tokens.len() == n
            && self
                .cells
                .iter()
                .enumerate()
                .all(|(i, row)| row.len() == n && row[i] == 1 && row.iter().all(|&c| c <= 1))
    }
}

/// Token positions that the tokens of node `id` present to their neighbours:
/// the operator token of a clause, or every word of a terminal.
fn heads(tree: &LogicTree, id: NodeId) -> Vec<usize> {
    let node = tree.node(id);
    if node.is_operator() {
        vec![node.span.start]
    } else {
        node.span.clone().collect()
    }
}

fn operator_row(tree: &LogicTree, id: NodeId, policy: MaskPolicy) -> Vec<usize> {
    let node = tree.node(id);
    let mut visible = vec![node.span.start];
    visible.extend(tree.punctuation_of(id));
    for child in &node.children {
        visible.extend(heads(tree, *child));
    }
    if policy == MaskPolicy::ParentAndChildren {
        if let Some(parent) = node.parent {
            visible.push(tree.head_position(parent));
        }
    }
    visible
}

fn terminal_row(tree: &LogicTree, id: NodeId) -> Vec<usize> {
    let node = tree.node(id);
    let mut visible: Vec<usize> = node.span.clone().collect();
    if let Some(parent) = node.parent {
        visible.push(tree.head_position(parent));
        visible.extend(tree.punctuation_of(parent));
    }
    visible
}

pub fn attention_mask(tree: &LogicTree, policy: MaskPolicy) -> MaskMatrix {
    let tokens = tree.tokens();
    let n = tokens.len();
    let mut cells = vec![vec![0u8; n]; n];
    for (i, token) in tokens.iter().enumerate() {
        let visible = match token.role {
            TokenRole::TerminalWord => terminal_row(tree, token.node),
            _ => operator_row(tree, token.node, policy),
        };
        for j in visible {
            cells[i][j] = 1;
        }
    }
    MaskMatrix {
        tokens: tokens.iter().map(|t| t.text.clone()).collect(),
        policy,
        cells,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum ApplyMode {
    /// `softmax(M ⊙ A)` taken literally: masked logits become 0, not -inf.
    Literal,
    /// Masked logits are replaced by [`MASKED_LOGIT`] before the softmax.
    #[default]
    Additive,
}

pub const MASKED_LOGIT: f64 = -1e30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("score matrix shape {rows}x{cols} does not match mask order {order}")]
pub struct ShapeError {
    pub rows: usize,
    pub cols: usize,
    pub order: usize,
}

/// Row-wise softmax of `scores` under `mask`.
pub fn apply_mask(
    mask: &MaskMatrix,
    scores: &[Vec<f64>],
    mode: ApplyMode,
) -> Result<Vec<Vec<f64>>, ShapeError> {
    let order = mask.order();
    if let Some(bad) = scores.iter().find(|r| r.len() != order) {
        return Err(ShapeError {
            rows: scores.len(),
            cols: bad.len(),
            order,
        });
    }
    if scores.len() != order {
        return Err(ShapeError {
            rows: scores.len(),
            cols: order,
            order,
        });
    }

    Ok(scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let logits: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(j, &a)| match (mode, mask.get(i, j)) {
                    (ApplyMode::Literal, visible) => {
                        if visible {
                            a
                        } else {
                            0.0
                        }
                    }
                    (ApplyMode::Additive, true) => a,
                    (ApplyMode::Additive, false) => MASKED_LOGIT,
                })
                .collect();
            softmax(&logits)
        })
        .collect())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// One entry of a batched mask export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedMask {
    pub id: String,
    #[serde(flatten)]
    pub mask: MaskMatrix,
}
