//! Toolkit for the Logic2Text logical-form language.
//!
//! - [`logic_form`]: tokenizer, parser and canonical printer.
//! - [`logic_graph`]: parent/child graph and structure-aware attention masks.
//! - [`counterfactual`]: header-replacement synthesis of training samples.
//! - [`metrics`]: BLEC, BLEC*, mispredicted-token rate and BLEU-4.
//! - [`analysis`]: complexity measures and complexity-bucketed reports.
//! - [`dataset_io`]: line-delimited JSON datasets and model-input assembly.
//! - [`cli`]: the `l2t` command line.

pub mod analysis;
pub mod cli;
pub mod counterfactual;
pub mod dataset_io;
pub mod logic_form;
pub mod logic_graph;
pub mod metrics;

pub use analysis::{bucket_report, complexity, AnalysisError, Axis, BucketReport, Complexity};
pub use counterfactual::{
    build_header_pool, classify_header_type, find_replaceable_headers, synthesize_dataset,
    synthesize_sample, HeaderDataType, HeaderPool, Ratio, Replacement, Strategy, SynthesisConfig,
    SynthesisError,
};
pub use dataset_io::{
    assemble_model_input, load_dataset, write_dataset, DatasetError, DatasetFile, PromptConfig,
    Sample,
};
pub use logic_form::{
    parse, parse_str, parse_with, tokenize, FormError, LogicNode, LogicTree, NodeId, NodeKind,
    OperatorRegistry, Token, TokenRole, TokenizedForm,
};
pub use logic_graph::{
    apply_mask, attention_mask, build_graph, ApplyMode, LogicGraph, MaskMatrix, MaskPolicy,
    ShapeError,
};
pub use metrics::{
    bleu4, consistency_indicator, corpus_score, extract_checkables, mispredicted_token_rate,
    Checkables, ConsistencyMode, MetricError, OperatorLexicon, ScoreReport,
};
