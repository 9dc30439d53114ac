//! Tokenizer, parser and canonical printer for linearized logical forms.
//!
//! A logical form is written as nested clauses `op { arg ; arg ; ... }` where
//! every argument is either another clause or a terminal (a table header, a
//! cell value, `all_rows`, ...). Terminals may span several words, e.g.
//! `dj , take me away`. Braces and `;` are always structural; there is no
//! escaping, so a terminal can never contain them.
//!
//! Most corpus forms end with an assertion suffix `= true`. It is stripped
//! during tokenization and kept as a flag on the tree.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("logical form is empty")]
    EmptyForm,
    #[error("unbalanced braces at token {position}")]
    UnbalancedBraces { position: usize },
    #[error("separator outside of any clause at token {position}")]
    StraySeparator { position: usize },
    #[error("malformed clause at token {position}")]
    MalformedClause { position: usize },
    #[error("empty argument at token {position}")]
    EmptyArgument { position: usize },
    #[error("{0:?} cannot be written as a terminal")]
    InvalidTerminal(String),
}

/// Index of a node in [`LogicTree::nodes`]. Nodes are numbered in preorder,
/// so the root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenRole {
    Operator,
    TerminalWord,
    OpenBrace,
    Separator,
    CloseBrace,
}

impl TokenRole {
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            TokenRole::OpenBrace | TokenRole::Separator | TokenRole::CloseBrace
        )
    }
}

/// A token as produced by [`tokenize`], before node ownership is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexeme {
    pub text: String,
    pub role: TokenRole,
    pub position: usize,
}

/// Output of [`tokenize`]: the token sequence plus the stripped `= true` flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedForm {
    lexemes: Vec<Lexeme>,
    asserts_true: bool,
}

impl TokenizedForm {
    pub fn lexemes(&self) -> &[Lexeme] {
        &self.lexemes
    }

    pub fn len(&self) -> usize {
        self.lexemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lexemes.is_empty()
    }

    pub fn asserts_true(&self) -> bool {
        self.asserts_true
    }

    pub fn texts(&self) -> Vec<&str> {
        self.lexemes.iter().map(|l| l.text.as_str()).collect()
    }
}

/// A token of a parsed form, owned by exactly one tree node. Braces and
/// separators belong to the operator whose clause they delimit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub text: String,
    pub role: TokenRole,
    pub node: NodeId,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Operator,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicNode {
    pub kind: NodeKind,
    /// Operator symbol, or the full terminal text with words joined by one space.
    pub name: String,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Half-open token range of the node, braces included.
    pub span: Range<usize>,
}

impl LogicNode {
    pub fn is_operator(&self) -> bool {
        self.kind == NodeKind::Operator
    }

    pub fn is_terminal(&self) -> bool {
        self.kind == NodeKind::Terminal
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicTree {
    nodes: Vec<LogicNode>,
    tokens: Vec<Token>,
    asserts_true: bool,
}

impl LogicTree {
    pub fn root_id(&self) -> NodeId {
        NodeId(0)
    }

    pub fn root(&self) -> &LogicNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &LogicNode {
        &self.nodes[id.0]
    }

    /// All nodes in preorder.
    pub fn nodes(&self) -> &[LogicNode] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn asserts_true(&self) -> bool {
        self.asserts_true
    }

    pub fn operators(&self) -> impl Iterator<Item = &LogicNode> {
        self.nodes.iter().filter(|n| n.is_operator())
    }

    pub fn terminals(&self) -> impl Iterator<Item = &LogicNode> {
        self.nodes.iter().filter(|n| n.is_terminal())
    }

    /// Position of the token that names `id`: the operator symbol for an
    /// operator node, the first word for a terminal.
    pub fn head_position(&self, id: NodeId) -> usize {
        self.nodes[id.0].span.start
    }

    /// Token positions delimiting an operator's clause: `{`, every `;`, `}`.
    pub fn punctuation_of(&self, id: NodeId) -> Vec<usize> {
        self.tokens
            .iter()
            .filter(|t| t.node == id && t.role.is_structural())
            .map(|t| t.position)
            .collect()
    }

    /// Canonical text: single spaces around every structural token.
    pub fn linearize(&self) -> String {
        self.linearize_with(|node| node.name.as_str())
    }

    /// Linearize with every terminal whose name satisfies `matches` written
    /// as `replacement`, then parse the result. Fails when the replacement
    /// is blank or would change the tree shape (structural characters).
    pub fn rename_terminals(
        &self,
        matches: impl Fn(&str) -> bool,
        replacement: &str,
    ) -> Result<LogicTree, FormError> {
        let invalid = || FormError::InvalidTerminal(replacement.to_string());
        if replacement.trim().is_empty() || replacement.contains(['{', '}', ';']) {
            return Err(invalid());
        }
        let text = self.linearize_with(|node| {
            if node.is_terminal() && matches(&node.name) {
                replacement
            } else {
                node.name.as_str()
            }
        });
        let renamed = parse_str(&text).map_err(|_| invalid())?;
        if renamed.nodes.len() != self.nodes.len() || renamed.asserts_true != self.asserts_true {
            return Err(invalid());
        }
        Ok(renamed)
    }

    fn linearize_with<'a>(&'a self, name_of: impl Fn(&'a LogicNode) -> &'a str) -> String {
        let mut out = String::new();
        self.write_node(NodeId(0), &name_of, &mut out);
        if self.asserts_true {
            out.push_str(" = true");
        }
        out
    }

    fn write_node<'a>(
        &'a self,
        id: NodeId,
        name_of: &impl Fn(&'a LogicNode) -> &'a str,
        out: &mut String,
    ) {
        let node = &self.nodes[id.0];
        out.push_str(name_of(node));
        if node.is_operator() {
            out.push_str(" { ");
            for (i, child) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push_str(" ; ");
                }
                self.write_node(*child, name_of, out);
            }
            out.push_str(" }");
        }
    }
}

impl fmt::Display for LogicTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.linearize())
    }
}

/// Known operator symbols with optional arity hints. Parsing never consults
/// it for clauses; unknown symbols followed by `{` parse as operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorRegistry {
    arity: BTreeMap<String, Option<usize>>,
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        let known: [(&str, usize); 15] = [
            ("eq", 2),
            ("hop", 2),
            ("argmax", 2),
            ("argmin", 2),
            ("nth_argmax", 3),
            ("nth_argmin", 3),
            ("count", 1),
            ("max", 2),
            ("min", 2),
            ("avg", 2),
            ("sum", 2),
            ("filter_eq", 3),
            ("filter_less", 3),
            ("filter_greater", 3),
            ("most_greater", 3),
        ];
        OperatorRegistry {
            arity: known
                .iter()
                .map(|(name, n)| (name.to_string(), Some(*n)))
                .collect(),
        }
    }
}

/// An operator node whose child count disagrees with its registry hint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArityMismatch {
    pub node: NodeId,
    pub operator: String,
    pub expected: usize,
    pub found: usize,
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        OperatorRegistry {
            arity: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, symbol: impl Into<String>, arity: Option<usize>) {
        self.arity.insert(symbol.into(), arity);
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.arity.contains_key(symbol)
    }

    pub fn arity_hint(&self, symbol: &str) -> Option<usize> {
        self.arity.get(symbol).copied().flatten()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.arity.keys().map(String::as_str)
    }

    pub fn unknown_operators<'t>(&self, tree: &'t LogicTree) -> Vec<&'t str> {
        tree.operators()
            .map(|n| n.name.as_str())
            .filter(|name| !self.contains(name))
            .collect()
    }

    pub fn check_arity(&self, tree: &LogicTree) -> Vec<ArityMismatch> {
        tree.node_ids()
            .filter_map(|id| {
                let node = tree.node(id);
                let expected = self.arity_hint(&node.name)?;
                (node.is_operator() && node.children.len() != expected).then(|| ArityMismatch {
                    node: id,
                    operator: node.name.clone(),
                    expected,
                    found: node.children.len(),
                })
            })
            .collect()
    }
}

/// Split a logical form into tokens. Braces and `;` become single tokens,
/// everything else is split on whitespace. A word directly followed by `{`
/// is an operator; other words are terminal words.
pub fn tokenize(source: &str) -> Result<TokenizedForm, FormError> {
    let (body, asserts_true) = strip_assertion(source.trim());
    if body.is_empty() {
        return Err(FormError::EmptyForm);
    }

    let mut raw: Vec<(String, Option<TokenRole>)> = Vec::new();
    let mut word = String::new();
    for ch in body.chars() {
        let structural = match ch {
            '{' => Some(TokenRole::OpenBrace),
            ';' => Some(TokenRole::Separator),
            '}' => Some(TokenRole::CloseBrace),
            _ => None,
        };
        if structural.is_some() || ch.is_whitespace() {
            if !word.is_empty() {
                raw.push((std::mem::take(&mut word), None));
            }
            if let Some(role) = structural {
                raw.push((ch.to_string(), Some(role)));
            }
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        raw.push((word, None));
    }

    let roles: Vec<TokenRole> = (0..raw.len())
        .map(|i| {
            raw[i].1.unwrap_or_else(|| match raw.get(i + 1) {
                Some((_, Some(TokenRole::OpenBrace))) => TokenRole::Operator,
                _ => TokenRole::TerminalWord,
            })
        })
        .collect();
    let lexemes = raw
        .into_iter()
        .zip(roles)
        .enumerate()
        .map(|(position, ((text, _), role))| Lexeme {
            text,
            role,
            position,
        })
        .collect();

    Ok(TokenizedForm {
        lexemes,
        asserts_true,
    })
}

fn strip_assertion(source: &str) -> (&str, bool) {
    let stripped = source
        .strip_suffix("true")
        .map(str::trim_end)
        .and_then(|s| s.strip_suffix('='));
    match stripped {
        Some(rest) => (rest.trim_end(), true),
        None => (source, false),
    }
}

/// Parse a token sequence with the default operator registry.
pub fn parse(tokens: &TokenizedForm) -> Result<LogicTree, FormError> {
    parse_with(tokens, &OperatorRegistry::default())
}

/// Tokenize and parse in one step.
pub fn parse_str(source: &str) -> Result<LogicTree, FormError> {
    parse(&tokenize(source)?)
}

/// Parse with an explicit registry. The registry only matters for a bare
/// top-level word sequence: if it starts with a known operator symbol and
/// has more tokens, the operator is missing its `{`.
pub fn parse_with(
    tokens: &TokenizedForm,
    registry: &OperatorRegistry,
) -> Result<LogicTree, FormError> {
    let lexemes = tokens.lexemes();
    if lexemes.is_empty() {
        return Err(FormError::EmptyForm);
    }
    let mut parser = Parser {
        lexemes,
        pos: 0,
        nodes: Vec::new(),
        owners: vec![None; lexemes.len()],
    };

    match lexemes[0].role {
        TokenRole::Operator => {
            parser.clause(None)?;
        }
        TokenRole::TerminalWord => {
            if registry.contains(&lexemes[0].text) && lexemes.len() > 1 {
                return Err(FormError::MalformedClause { position: 0 });
            }
            parser.terminal(None)?;
        }
        TokenRole::OpenBrace => return Err(FormError::MalformedClause { position: 0 }),
        TokenRole::Separator => return Err(FormError::StraySeparator { position: 0 }),
        TokenRole::CloseBrace => return Err(FormError::UnbalancedBraces { position: 0 }),
    }

    if let Some(extra) = lexemes.get(parser.pos) {
        let position = extra.position;
        return Err(match extra.role {
            TokenRole::CloseBrace => FormError::UnbalancedBraces { position },
            TokenRole::Separator => FormError::StraySeparator { position },
            _ => FormError::MalformedClause { position },
        });
    }

    let owned = lexemes
        .iter()
        .zip(parser.owners)
        .map(|(lexeme, owner)| Token {
            text: lexeme.text.clone(),
            role: lexeme.role,
            node: owner.expect("every token is claimed by a node"),
            position: lexeme.position,
        })
        .collect();

    Ok(LogicTree {
        nodes: parser.nodes,
        tokens: owned,
        asserts_true: tokens.asserts_true(),
    })
}

struct Parser<'a> {
    lexemes: &'a [Lexeme],
    pos: usize,
    nodes: Vec<LogicNode>,
    owners: Vec<Option<NodeId>>,
}

impl Parser<'_> {
    fn push_node(&mut self, kind: NodeKind, name: String, parent: Option<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(LogicNode {
            kind,
            name,
            children: Vec::new(),
            parent,
            span: self.pos..self.pos,
        });
        if let Some(parent) = parent {
            self.nodes[parent.0].children.push(id);
        }
        id
    }

    /// `op { arg ; ... }` starting at an operator token.
    fn clause(&mut self, parent: Option<NodeId>) -> Result<NodeId, FormError> {
        let start = self.pos;
        let name = self.lexemes[start].text.clone();
        let id = self.push_node(NodeKind::Operator, name, parent);
        self.owners[start] = Some(id);

        // the lexer only marks a word as operator when `{` follows
        let open = start + 1;
        self.owners[open] = Some(id);
        self.pos = open + 1;

        loop {
            self.argument(id, open)?;
            let Some(next) = self.lexemes.get(self.pos) else {
                return Err(FormError::UnbalancedBraces { position: open });
            };
            match next.role {
                TokenRole::Separator => {
                    self.owners[self.pos] = Some(id);
                    self.pos += 1;
                }
                TokenRole::CloseBrace => {
                    self.owners[self.pos] = Some(id);
                    self.pos += 1;
                    self.nodes[id.0].span = start..self.pos;
                    return Ok(id);
                }
                _ => return Err(FormError::MalformedClause { position: self.pos }),
            }
        }
    }

    fn argument(&mut self, parent: NodeId, open: usize) -> Result<NodeId, FormError> {
        let Some(next) = self.lexemes.get(self.pos) else {
            return Err(FormError::UnbalancedBraces { position: open });
        };
        match next.role {
            TokenRole::Operator => self.clause(Some(parent)),
            TokenRole::TerminalWord => self.terminal(Some(parent)),
            TokenRole::Separator | TokenRole::CloseBrace => {
                Err(FormError::EmptyArgument { position: self.pos })
            }
            TokenRole::OpenBrace => Err(FormError::MalformedClause { position: self.pos }),
        }
    }

    /// A maximal run of terminal words. A run that ends in an operator
    /// (`a b op { ... }`) is malformed.
    fn terminal(&mut self, parent: Option<NodeId>) -> Result<NodeId, FormError> {
        let start = self.pos;
        let mut end = start;
        while self
            .lexemes
            .get(end)
            .is_some_and(|l| l.role == TokenRole::TerminalWord)
        {
            end += 1;
        }
        if let Some(next) = self.lexemes.get(end) {
            if next.role == TokenRole::Operator {
                return Err(FormError::MalformedClause { position: end });
            }
        }
        let name = self.lexemes[start..end]
            .iter()
            .map(|l| l.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        let id = self.push_node(NodeKind::Terminal, name, parent);
        for owner in &mut self.owners[start..end] {
            *owner = Some(id);
        }
        self.nodes[id.0].span = start..end;
        self.pos = end;
        Ok(id)
    }
}
