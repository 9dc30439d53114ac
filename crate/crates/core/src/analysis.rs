//! Logical-form complexity and complexity-bucketed MTR reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::dataset_io::Sample;
use crate::logic_form::{FormError, LogicTree};
use crate::metrics::{mtr_of, MtrOptions, OperatorLexicon};

/// `depth` counts nodes on the longest root-to-leaf path, so a lone
/// terminal has depth 1. `nodes` counts operators and terminals; braces and
/// separators are not nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Complexity {
    pub depth: usize,
    pub nodes: usize,
}

pub fn complexity(tree: &LogicTree) -> Complexity {
    // Preorder arena: parents always precede their children.
    let mut depths = vec![0usize; tree.nodes().len()];
    for (i, node) in tree.nodes().iter().enumerate() {
        depths[i] = node.parent.map_or(1, |p| depths[p.0] + 1);
    }
    Complexity {
        depth: depths.iter().copied().max().unwrap_or(0),
        nodes: tree.nodes().len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Depth,
    Nodes,
}

impl Axis {
    pub fn value(self, c: Complexity) -> usize {
        match self {
            Axis::Depth => c.depth,
            Axis::Nodes => c.nodes,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Depth => "depth",
            Axis::Nodes => "nodes",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth" => Ok(Axis::Depth),
            "nodes" => Ok(Axis::Nodes),
            other => Err(format!("unknown axis '{other}' (expected depth or nodes)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{gold} samples but {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("bucket width must be positive")]
    ZeroWidth,
    #[error("sample {index}: {source}")]
    Form {
        index: usize,
        #[source]
        source: FormError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    /// Inclusive bounds on the axis value.
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
    /// Absent when no predictions were supplied.
    pub mean_mtr: Option<f64>,
}

impl Bucket {
    pub fn label(&self) -> String {
        if self.lo == self.hi {
            self.lo.to_string()
        } else {
            format!("{}-{}", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketReport {
    pub axis: Axis,
    pub width: usize,
    pub total: usize,
    pub convention: String,
    pub buckets: Vec<Bucket>,
}

fn convention(axis: Axis) -> String {
    match axis {
        Axis::Depth => "depth counts nodes, root = 1".to_string(),
        Axis::Nodes => "nodes = operators + terminals, punctuation excluded".to_string(),
    }
}

/// Group samples into buckets of `width` consecutive axis values starting
/// at 1, reporting the sample count and, with predictions, the mean MTR.
pub fn bucket_report(
    dataset: &[Sample],
    predictions: Option<&[String]>,
    axis: Axis,
    width: usize,
) -> Result<BucketReport, AnalysisError> {
    if width == 0 {
        return Err(AnalysisError::ZeroWidth);
    }
    if let Some(preds) = predictions {
        if preds.len() != dataset.len() {
            return Err(AnalysisError::LengthMismatch {
                gold: dataset.len(),
                predicted: preds.len(),
            });
        }
    }
    let lexicon = OperatorLexicon::default();
    let mut groups: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (index, sample) in dataset.iter().enumerate() {
        let tree = sample
            .tree()
            .map_err(|source| AnalysisError::Form { index, source })?;
        let value = axis.value(complexity(&tree));
        let lo = (value - 1) / width * width + 1;
        let entry = groups.entry(lo).or_insert((0, 0.0));
        entry.0 += 1;
        if let Some(preds) = predictions {
            entry.1 += mtr_of(&tree, &preds[index], MtrOptions::default(), &lexicon);
        }
    }
    let buckets = groups
        .into_iter()
        .map(|(lo, (count, sum))| Bucket {
            lo,
            hi: lo + width - 1,
            count,
            mean_mtr: predictions.map(|_| sum / count as f64),
        })
        .collect();
    Ok(BucketReport {
        axis,
        width,
        total: dataset.len(),
        convention: convention(axis),
        buckets,
    })
}

impl BucketReport {
    /// Column-aligned text table with a commented header line.
    pub fn render_table(&self) -> String {
        let mut rows = vec![[
            self.axis.to_string(),
            "count".to_string(),
            "mean_mtr".to_string(),
        ]];
        for b in &self.buckets {
            rows.push([
                b.label(),
                b.count.to_string(),
                b.mean_mtr.map_or("-".to_string(), |m| format!("{m:.4}")),
            ]);
        }
        let widths: Vec<usize> = (0..3)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "# {} buckets of width {} over {} samples ({})\n",
            self.axis, self.width, self.total, self.convention
        );
        for row in rows {
            let line = format!(
                "{:<w0$}  {:>w1$}  {:>w2$}",
                row[0],
                row[1],
                row[2],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2]
            );
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
