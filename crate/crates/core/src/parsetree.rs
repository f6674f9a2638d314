//! Penn Treebank bracketed constituency trees.
//!
//! Leaves of a [`ParseTree`] are preterminals: a label together with the
//! terminal token it dominates. Terminals are never nodes of their own, so
//! depth and production counts never see the lexical level.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParseTree {
    label: String,
    children: Vec<ParseTree>,
    token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductionRule {
    pub lhs: String,
    pub rhs: Vec<String>,
}

impl ProductionRule {
    pub fn new(lhs: impl Into<String>, rhs: &[&str]) -> Self {
        ProductionRule {
            lhs: lhs.into(),
            rhs: rhs.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// `LHS→RHS1 RHS2`, the string rules are ordered by.
    pub fn key(&self) -> String {
        format!("{}\u{2192}{}", self.lhs, self.rhs.join(" "))
    }
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.lhs, self.rhs.join(" "))
    }
}

fn check_atom(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
        return Err(Error::Validation(format!(
            "{kind} {s:?} must be nonempty and free of whitespace and brackets"
        )));
    }
    Ok(())
}

impl ParseTree {
    pub fn preterminal(label: impl Into<String>, token: impl Into<String>) -> Result<Self> {
        let (label, token) = (label.into(), token.into());
        check_atom("label", &label)?;
        check_atom("token", &token)?;
        Ok(ParseTree {
            label,
            children: Vec::new(),
            token: Some(token),
        })
    }

    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Result<Self> {
        let label = label.into();
        check_atom("label", &label)?;
        if children.is_empty() {
            return Err(Error::Validation(format!("node {label:?} has no children")));
        }
        Ok(ParseTree {
            label,
            children,
            token: None,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[ParseTree] {
        &self.children
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn is_preterminal(&self) -> bool {
        self.token.is_some()
    }

    /// Terminal tokens, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.token {
            Some(t) => out.push(t),
            None => self.children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self.token {
            Some(_) => 1,
            None => self.children.iter().map(ParseTree::n_leaves).sum(),
        }
    }

    /// Nodes on the longest root-to-preterminal path, both ends included.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ParseTree::depth).max().unwrap_or(0)
    }

    /// Pre-order list of non-lexical expansions.
    pub fn productions(&self) -> Vec<ProductionRule> {
        let mut out = Vec::new();
        self.collect_productions(&mut out);
        out
    }

    fn collect_productions(&self, out: &mut Vec<ProductionRule>) {
        if self.children.is_empty() {
            return;
        }
        out.push(ProductionRule {
            lhs: self.label.clone(),
            rhs: self.children.iter().map(|c| c.label.clone()).collect(),
        });
        for c in &self.children {
            c.collect_productions(out);
        }
    }

    /// Child labels of the shallowest (then leftmost) S node, or of the root
    /// when the tree has no S node.
    pub fn top_constituents(&self) -> Vec<&str> {
        let mut frontier = vec![self];
        while !frontier.is_empty() {
            if let Some(s) = frontier.iter().find(|n| is_sentence_label(&n.label)) {
                return s.children.iter().map(|c| c.label.as_str()).collect();
            }
            frontier = frontier.iter().flat_map(|n| n.children.iter()).collect();
        }
        self.children.iter().map(|c| c.label.as_str()).collect()
    }

    /// Occurrence statistics for nodes carrying `label`.
    pub fn phrase_stats(&self, label: &str) -> PhraseStats {
        let mut acc = PhraseAcc::default();
        self.walk_phrases(label, false, &mut acc);
        PhraseStats {
            count: acc.count,
            token_coverage: acc.covered,
            mean_length: if acc.count == 0 {
                0.0
            } else {
                acc.total_yield as f64 / acc.count as f64
            },
        }
    }

    fn walk_phrases(&self, label: &str, covered: bool, acc: &mut PhraseAcc) -> usize {
        let here = self.label == label;
        let covered = covered || here;
        let length = match self.token {
            Some(_) => {
                if covered {
                    acc.covered += 1;
                }
                1
            }
            None => self
                .children
                .iter()
                .map(|c| c.walk_phrases(label, covered, acc))
                .sum(),
        };
        if here {
            acc.count += 1;
            acc.total_yield += length;
        }
        length
    }

    fn write_brackets(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.token {
            Some(t) => {
                out.push(' ');
                out.push_str(t);
            }
            None => {
                for c in &self.children {
                    out.push(' ');
                    c.write_brackets(out);
                }
            }
        }
        out.push(')');
    }

    pub fn serialize(&self) -> String {
        let mut s = String::new();
        self.write_brackets(&mut s);
        s
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn is_sentence_label(label: &str) -> bool {
    label == "S" || label.starts_with("S-") || label.starts_with("S=")
}

#[derive(Default)]
struct PhraseAcc {
    count: usize,
    covered: usize,
    total_yield: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhraseStats {
    pub count: usize,
    /// Terminals dominated by at least one node with the label.
    pub token_coverage: usize,
    /// Mean terminal yield per node; 0 when `count` is 0.
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(s: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in s.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(st) = start.take() {
                out.push((st, Tok::Atom(&s[st..i])));
            }
            match c {
                '(' => out.push((i, Tok::Open)),
                ')' => out.push((i, Tok::Close)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((st, Tok::Atom(&s[st..])));
    }
    out
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn err(offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn node(&mut self) -> Result<ParseTree> {
        let open_at = self.offset();
        match self.toks.get(self.pos) {
            Some((_, Tok::Open)) => self.pos += 1,
            Some((off, _)) => return Err(Self::err(*off, "expected '('")),
            None => return Err(Self::err(self.end, "unexpected end of input")),
        }
        let label = match self.toks.get(self.pos) {
            Some((_, Tok::Atom(a))) => {
                self.pos += 1;
                a.to_string()
            }
            Some((off, Tok::Close)) => return Err(Self::err(*off, "empty node")),
            Some((off, Tok::Open)) => return Err(Self::err(*off, "node without a label")),
            None => return Err(Self::err(self.end, "unbalanced brackets: unclosed node")),
        };
        match self.toks.get(self.pos) {
            Some((_, Tok::Atom(token))) => {
                let token = token.to_string();
                self.pos += 1;
                match self.toks.get(self.pos) {
                    Some((_, Tok::Close)) => {
                        self.pos += 1;
                        Ok(ParseTree {
                            label,
                            children: Vec::new(),
                            token: Some(token),
                        })
                    }
                    Some((off, Tok::Open)) => {
                        Err(Self::err(*off, format!("terminal {token:?} has children")))
                    }
                    Some((off, Tok::Atom(_))) => {
                        Err(Self::err(*off, "more than one terminal under a node"))
                    }
                    None => Err(Self::err(self.end, "unbalanced brackets: unclosed node")),
                }
            }
            Some((off, Tok::Close)) => Err(Self::err(*off, format!("node {label:?} is empty"))),
            Some((_, Tok::Open)) => {
                let mut children = Vec::new();
                loop {
                    match self.toks.get(self.pos) {
                        Some((_, Tok::Open)) => children.push(self.node()?),
                        Some((_, Tok::Close)) => {
                            self.pos += 1;
                            break;
                        }
                        Some((off, Tok::Atom(a))) => {
                            return Err(Self::err(
                                *off,
                                format!("terminal {a:?} mixed with child nodes"),
                            ))
                        }
                        None => {
                            return Err(Self::err(
                                self.end,
                                format!("unbalanced brackets: node opened at {open_at} is not closed"),
                            ))
                        }
                    }
                }
                Ok(ParseTree {
                    label,
                    children,
                    token: None,
                })
            }
            None => Err(Self::err(self.end, "unbalanced brackets: unclosed node")),
        }
    }
}

/// Parses one bracketed tree. A wrapping ROOT/TOP node is kept as-is.
pub fn parse_ptb(s: &str) -> Result<ParseTree> {
    let mut p = Parser {
        toks: lex(s),
        pos: 0,
        end: s.len(),
    };
    if p.toks.is_empty() {
        return Err(Parser::err(0, "empty input"));
    }
    let tree = p.node()?;
    if let Some((off, tok)) = p.toks.get(p.pos) {
        let msg = match tok {
            Tok::Close => "unbalanced brackets: unexpected ')'",
            _ => "trailing input after tree",
        };
        return Err(Parser::err(*off, msg));
    }
    Ok(tree)
}
