//! Monotone access-tree policies over an open attribute universe.
//!
//! Concrete syntax:
//!
//! ```text
//! expr   := term | expr "or" term
//! term   := factor | term "and" factor
//! factor := attr | INT "of" "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! `and` binds tighter than `or`. Every gate serializes canonically as
//! `k of (c1, ..., cn)`, so `a and b` becomes `2 of (a, b)`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub const MAX_ATTRIBUTE_LEN: usize = 64;
pub const MAX_POLICY_TEXT: usize = 64 * 1024;
pub const MAX_DEPTH: usize = 32;
pub const MAX_NODES: usize = 4096;
const MAX_NESTING: usize = 128;

const RESERVED: [&str; 3] = ["and", "or", "of"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },
    #[error("policy limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("invalid attribute name {0:?}")]
    InvalidAttribute(String),
}

/// An attribute name. Case-sensitive, `[A-Za-z0-9_:-]+`, at most 64 bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Attribute(String);

impl Attribute {
    pub fn new(name: impl Into<String>) -> Result<Self, PolicyError> {
        let name = name.into();
        if is_attribute_token(&name) && !RESERVED.contains(&name.as_str()) {
            Ok(Attribute(name))
        } else {
            Err(PolicyError::InvalidAttribute(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_attr_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b':' || b == b'-'
}

fn is_attribute_token(s: &str) -> bool {
    !s.is_empty() && s.len() <= MAX_ATTRIBUTE_LEN && s.bytes().all(is_attr_byte)
}

/// A finite set of attributes; iteration order is sorted and never affects results.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AttributeSet(BTreeSet<Attribute>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from names, rejecting the first invalid one.
    pub fn from_names<I, S>(names: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        names
            .into_iter()
            .map(Attribute::new)
            .collect::<Result<BTreeSet<_>, _>>()
            .map(AttributeSet)
    }

    pub fn insert(&mut self, attr: Attribute) -> bool {
        self.0.insert(attr)
    }

    pub fn contains(&self, attr: &Attribute) -> bool {
        self.0.contains(attr)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.0.iter().any(|a| a.as_str() == name)
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Attribute> {
        self.0.iter()
    }
}

impl FromIterator<Attribute> for AttributeSet {
    fn from_iter<T: IntoIterator<Item = Attribute>>(iter: T) -> Self {
        AttributeSet(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Leaf(Attribute),
    Gate { threshold: usize, children: Vec<Node> },
}

impl Node {
    pub fn leaf(name: &str) -> Result<Node, PolicyError> {
        Attribute::new(name).map(Node::Leaf)
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Gate { children, .. } => 1 + children.iter().map(Node::depth).max().unwrap_or(0),
        }
    }

    fn count(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Gate { children, .. } => 1 + children.iter().map(Node::count).sum::<usize>(),
        }
    }

    fn satisfied_by(&self, attrs: &AttributeSet) -> bool {
        match self {
            Node::Leaf(a) => attrs.contains(a),
            Node::Gate { threshold, children } => {
                children.iter().filter(|c| c.satisfied_by(attrs)).count() >= *threshold
            }
        }
    }

    fn check_gates(&self) -> Result<(), PolicyError> {
        match self {
            Node::Leaf(_) => Ok(()),
            Node::Gate { threshold, children } => {
                if children.is_empty() || *threshold == 0 || *threshold > children.len() {
                    return Err(PolicyError::LimitExceeded(format!(
                        "gate threshold {} invalid for {} children",
                        threshold,
                        children.len()
                    )));
                }
                children.iter().try_for_each(Node::check_gates)
            }
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Node::Leaf(a) => out.push_str(a.as_str()),
            Node::Gate { threshold, children } => {
                out.push_str(&threshold.to_string());
                out.push_str(" of (");
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    c.write_canonical(out);
                }
                out.push(')');
            }
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Attribute>) {
        match self {
            Node::Leaf(a) => out.push(a),
            Node::Gate { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }
}

/// A validated access tree: thresholds in range, depth ≤ 32, at most 4096 nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccessTree {
    root: Node,
}

impl AccessTree {
    pub fn new(root: Node) -> Result<Self, PolicyError> {
        root.check_gates()?;
        let depth = root.depth();
        if depth > MAX_DEPTH {
            return Err(PolicyError::LimitExceeded(format!("depth {depth} > {MAX_DEPTH}")));
        }
        let count = root.count();
        if count > MAX_NODES {
            return Err(PolicyError::LimitExceeded(format!("{count} nodes > {MAX_NODES}")));
        }
        Ok(AccessTree { root })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Leaves in serialization (left-to-right) order.
    pub fn leaves(&self) -> Vec<&Attribute> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn satisfies(&self, attrs: &AttributeSet) -> bool {
        self.root.satisfied_by(attrs)
    }
}

impl fmt::Display for AccessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_policy(self))
    }
}

impl std::str::FromStr for AccessTree {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

pub fn satisfies(tree: &AccessTree, attrs: &AttributeSet) -> bool {
    tree.satisfies(attrs)
}

pub fn serialize_policy(tree: &AccessTree) -> String {
    let mut out = String::new();
    tree.root.write_canonical(&mut out);
    out
}

pub fn parse_policy(text: &str) -> Result<AccessTree, PolicyError> {
    if text.len() > MAX_POLICY_TEXT {
        return Err(PolicyError::LimitExceeded(format!(
            "policy text is {} bytes > {MAX_POLICY_TEXT}",
            text.len()
        )));
    }
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(PolicyError::Syntax { position: 0, expected: "attribute or gate".into() });
    }
    let mut parser = Parser { tokens, pos: 0, end: text.len(), nesting: 0 };
    let root = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(PolicyError::Syntax { position: tok.offset, expected: "'and', 'or' or end of input".into() });
    }
    AccessTree::new(root)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, PolicyError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                out.push(Token { tok: Tok::LParen, offset: i });
                i += 1;
            }
            b')' => {
                out.push(Token { tok: Tok::RParen, offset: i });
                i += 1;
            }
            b',' => {
                out.push(Token { tok: Tok::Comma, offset: i });
                i += 1;
            }
            _ if is_attr_byte(b) => {
                let start = i;
                while i < bytes.len() && is_attr_byte(bytes[i]) {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(text[start..i].to_string()), offset: start });
            }
            _ => {
                return Err(PolicyError::Syntax {
                    position: i,
                    expected: "attribute, '(', ')', ',' or whitespace".into(),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
    nesting: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Word(w), .. }) if w == word)
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), PolicyError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(PolicyError::Syntax { position: self.offset(), expected: expected.into() }),
        }
    }

    fn enter(&mut self) -> Result<(), PolicyError> {
        self.nesting += 1;
        if self.nesting > MAX_NESTING {
            return Err(PolicyError::LimitExceeded(format!("nesting deeper than {MAX_NESTING}")));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Node, PolicyError> {
        let mut terms = vec![self.term()?];
        while self.peek_word("or") {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Node::Gate { threshold: 1, children: terms }
        })
    }

    fn term(&mut self) -> Result<Node, PolicyError> {
        let mut factors = vec![self.factor()?];
        while self.peek_word("and") {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Node::Gate { threshold: factors.len(), children: factors }
        })
    }

    fn factor(&mut self) -> Result<Node, PolicyError> {
        let position = self.offset();
        let tok = match self.peek() {
            Some(t) => t.tok.clone(),
            None => return Err(PolicyError::Syntax { position, expected: "attribute, gate or '('".into() }),
        };
        match tok {
            Tok::LParen => {
                self.pos += 1;
                self.enter()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.nesting -= 1;
                Ok(inner)
            }
            Tok::Word(w) => {
                let is_gate = w.bytes().all(|b| b.is_ascii_digit())
                    && matches!(self.tokens.get(self.pos + 1), Some(Token { tok: Tok::Word(of), .. }) if of == "of");
                if is_gate {
                    self.gate(&w, position)
                } else if RESERVED.contains(&w.as_str()) {
                    Err(PolicyError::Syntax { position, expected: "attribute, gate or '('".into() })
                } else {
                    self.pos += 1;
                    Attribute::new(w)
                        .map(Node::Leaf)
                        .map_err(|e| match e {
                            PolicyError::InvalidAttribute(_) => PolicyError::Syntax {
                                position,
                                expected: format!("attribute of at most {MAX_ATTRIBUTE_LEN} bytes"),
                            },
                            other => other,
                        })
                }
            }
            Tok::RParen | Tok::Comma => {
                Err(PolicyError::Syntax { position, expected: "attribute, gate or '('".into() })
            }
        }
    }

    fn gate(&mut self, count: &str, position: usize) -> Result<Node, PolicyError> {
        let threshold: usize = count.parse().map_err(|_| {
            PolicyError::LimitExceeded(format!("threshold {count} does not fit"))
        })?;
        self.pos += 2; // INT "of"
        self.expect(Tok::LParen, "'(' after 'of'")?;
        self.enter()?;
        let mut children = vec![self.expr()?];
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Comma) => {
                    self.pos += 1;
                    children.push(self.expr()?);
                    if children.len() > MAX_NODES {
                        return Err(PolicyError::LimitExceeded(format!("gate wider than {MAX_NODES}")));
                    }
                }
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                _ => {
                    return Err(PolicyError::Syntax { position: self.offset(), expected: "',' or ')'".into() })
                }
            }
        }
        self.nesting -= 1;
        if threshold == 0 || threshold > children.len() {
            return Err(PolicyError::Syntax {
                position,
                expected: format!("threshold between 1 and {}", children.len()),
            });
        }
        Ok(Node::Gate { threshold, children })
    }
}
