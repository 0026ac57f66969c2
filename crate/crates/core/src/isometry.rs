//! Isometries of the space as rooted-tree automorphisms.
//!
//! An automorphism attaches one permutation of `{1..m}` to every internal
//! node; a word is mapped by walking it from the root and permuting each
//! digit with the permutation of the prefix traversed so far. Two sources
//! are supported:
//!
//! - **lazy**: the permutation at a node is a pure function of
//!   `(seed, node word)` through the fixed counter-based generator in
//!   [`crate::rng`], so a single `u64` seed determines the automorphism on
//!   every level at once, identically across threads, platforms, and query
//!   orders;
//! - **explicit**: a finite table of node permutations, for exhaustive
//!   enumeration and for file import; nodes missing from the table act as
//!   the identity.
//!
//! With node permutations i.i.d. uniform (the lazy sampler), the image of a
//! fixed level-k cylinder is uniform over all `m^k` level-k cylinders.

use std::collections::HashMap;
use std::fmt::Write as _;

use num::BigUint;

use crate::error::{CantorError, Result};
use crate::rng::{child_key, root_key, Draws};
use crate::space::{SpaceParams, Word, MAX_DEPTH};
use crate::trie::parse_header;

/// Default cap on the number of truncated automorphisms an exhaustive
/// enumeration may produce.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

/// A permutation of `{0..m-1}` with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perm {
    fwd: Vec<u8>,
    inv: Vec<u8>,
}

impl Perm {
    pub fn identity(m: u32) -> Self {
        let fwd: Vec<u8> = (0..m as u8).collect();
        Perm { inv: fwd.clone(), fwd }
    }

    /// Build from 0-based images; must be a bijection.
    pub fn from_images(fwd: Vec<u8>) -> Result<Self> {
        let m = fwd.len();
        let mut inv = vec![u8::MAX; m];
        for (d, &img) in fwd.iter().enumerate() {
            if img as usize >= m || inv[img as usize] != u8::MAX {
                return Err(CantorError::Parse(format!("not a permutation: {fwd:?}")));
            }
            inv[img as usize] = d as u8;
        }
        Ok(Perm { fwd, inv })
    }

    #[inline]
    pub fn image(&self, digit: u8) -> u8 {
        self.fwd[digit as usize]
    }

    #[inline]
    pub fn preimage(&self, digit: u8) -> u8 {
        self.inv[digit as usize]
    }

    pub fn images(&self) -> &[u8] {
        &self.fwd
    }

    pub fn is_identity(&self) -> bool {
        self.fwd.iter().enumerate().all(|(i, &v)| i == v as usize)
    }

    /// Fisher-Yates shuffle of the identity, fed by the node's draw stream.
    fn from_draws(m: u32, draws: &mut Draws) -> Self {
        let mut fwd: Vec<u8> = (0..m as u8).collect();
        draws.shuffle(&mut fwd);
        Perm::from_images(fwd).unwrap()
    }
}

#[derive(Debug, Clone)]
enum Source {
    Lazy { seed: u64 },
    Explicit { depth: usize, perms: HashMap<Vec<u8>, Perm> },
}

/// A tree automorphism of the m-ary Cantor space.
#[derive(Debug, Clone)]
pub struct Automorphism {
    m: u32,
    source: Source,
}

/// Position of a node while walking an automorphism down the tree.
///
/// Carries exactly the state the source needs to produce the node's
/// permutation: the derived key for lazy automorphisms, the node word for
/// explicit tables.
#[derive(Debug, Clone)]
pub enum AutNode {
    Lazy(u64),
    Explicit(Vec<u8>),
}

impl Automorphism {
    /// Seed-deterministic random automorphism: i.i.d. uniform permutations
    /// at every node.
    pub fn sample(p: &SpaceParams, seed: u64) -> Self {
        Automorphism { m: p.m(), source: Source::Lazy { seed } }
    }

    pub fn sample_m(m: u32, seed: u64) -> Self {
        Automorphism { m, source: Source::Lazy { seed } }
    }

    /// The identity automorphism (an empty explicit table).
    pub fn identity(m: u32) -> Self {
        Automorphism { m, source: Source::Explicit { depth: MAX_DEPTH, perms: HashMap::new() } }
    }

    /// Explicit automorphism from `(node word, permutation)` pairs; nodes not
    /// listed act as the identity. Words of length `>= depth` are rejected.
    pub fn from_perms<I>(m: u32, depth: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Word, Perm)>,
    {
        let mut perms = HashMap::new();
        for (word, perm) in entries {
            if word.len() >= depth {
                return Err(CantorError::LevelOutOfRange { k: word.len(), depth });
            }
            if perm.fwd.len() != m as usize {
                return Err(CantorError::Parse(format!(
                    "permutation arity {} does not match m={m}",
                    perm.fwd.len()
                )));
            }
            perms.insert(word.digits().to_vec(), perm);
        }
        Ok(Automorphism { m, source: Source::Explicit { depth, perms } })
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Largest word length this automorphism can map.
    pub fn max_depth(&self) -> usize {
        match &self.source {
            Source::Lazy { .. } => MAX_DEPTH,
            Source::Explicit { depth, .. } => *depth,
        }
    }

    pub fn is_lazy(&self) -> bool {
        matches!(self.source, Source::Lazy { .. })
    }

    /// Cursor at the root node.
    pub fn root_node(&self) -> AutNode {
        match &self.source {
            Source::Lazy { seed } => AutNode::Lazy(root_key(*seed)),
            Source::Explicit { .. } => AutNode::Explicit(Vec::new()),
        }
    }

    /// Cursor at the `digit`-th child (preimage side) of `node`.
    pub fn child_node(&self, node: &AutNode, digit: u8) -> AutNode {
        match node {
            AutNode::Lazy(key) => AutNode::Lazy(child_key(*key, digit)),
            AutNode::Explicit(word) => {
                let mut w = word.clone();
                w.push(digit);
                AutNode::Explicit(w)
            }
        }
    }

    /// Permutation attached to `node`.
    pub fn perm_at(&self, node: &AutNode) -> Perm {
        match (&self.source, node) {
            (Source::Lazy { .. }, AutNode::Lazy(key)) => {
                Perm::from_draws(self.m, &mut Draws::new(*key))
            }
            (Source::Explicit { perms, .. }, AutNode::Explicit(word)) => {
                perms.get(word).cloned().unwrap_or_else(|| Perm::identity(self.m))
            }
            _ => unreachable!("cursor does not belong to this automorphism"),
        }
    }

    /// Permutation at the node addressed by `word` (independent of traversal
    /// order; used to freeze truncations of lazy automorphisms).
    pub fn node_perm(&self, word: &Word) -> Perm {
        let mut node = self.root_node();
        for &d in word.digits() {
            node = self.child_node(&node, d);
        }
        self.perm_at(&node)
    }

    /// Image of `w`.
    pub fn apply(&self, w: &Word) -> Result<Word> {
        self.check_len(w)?;
        let mut node = self.root_node();
        let mut out = Vec::with_capacity(w.len());
        for &d in w.digits() {
            out.push(self.perm_at(&node).image(d));
            node = self.child_node(&node, d);
        }
        Word::from_digits(out, self.m)
    }

    /// The unique `v` with `apply(v) = w`: walk the image down while
    /// rebuilding the preimage prefix.
    pub fn apply_inverse(&self, w: &Word) -> Result<Word> {
        self.check_len(w)?;
        let mut node = self.root_node();
        let mut out = Vec::with_capacity(w.len());
        for &c in w.digits() {
            let d = self.perm_at(&node).preimage(c);
            out.push(d);
            node = self.child_node(&node, d);
        }
        Word::from_digits(out, self.m)
    }

    fn check_len(&self, w: &Word) -> Result<()> {
        if w.len() > self.max_depth() {
            return Err(CantorError::LevelOutOfRange { k: w.len(), depth: self.max_depth() });
        }
        for &d in w.digits() {
            if d as u32 >= self.m {
                return Err(CantorError::InvalidDigit { digit: d as u32 + 1, m: self.m });
            }
        }
        Ok(())
    }

    /// Materialize the permutations of all nodes of level `< depth` into an
    /// explicit table.
    pub fn truncate(&self, depth: usize) -> Result<Automorphism> {
        let nodes = internal_node_count(self.m, depth);
        if nodes > BigUint::from(1_000_000u64) {
            return Err(CantorError::EnumerationTooLarge {
                count: nodes.to_string(),
                cap: 1_000_000,
            });
        }
        let mut entries = Vec::new();
        for word in node_words_below(self.m, depth) {
            entries.push((word.clone(), self.node_perm(&word)));
        }
        Automorphism::from_perms(self.m, depth, entries)
    }

    /// Serialize an explicit automorphism: one `node=<word> perm=<images>`
    /// line per tabulated node, 1-based digits, sorted by node.
    pub fn to_text(&self) -> Result<String> {
        let Source::Explicit { depth, perms } = &self.source else {
            return Err(CantorError::Unsupported(
                "lazy automorphisms serialize via their seed; truncate() first".into(),
            ));
        };
        let mut out = String::new();
        writeln!(out, "m={} depth={depth}", self.m).unwrap();
        let mut keys: Vec<&Vec<u8>> = perms.keys().collect();
        keys.sort_by(|a, b| (a.len(), *a).cmp(&(b.len(), *b)));
        for key in keys {
            let word = Word::from_digits(key.clone(), self.m).unwrap();
            let images: Vec<String> =
                perms[key].images().iter().map(|&i| (i as u32 + 1).to_string()).collect();
            writeln!(out, "node={word} perm={}", images.join(",")).unwrap();
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| CantorError::Parse("missing header".into()))?;
        let (m, depth) = parse_header(header)?;
        let mut entries = Vec::new();
        for line in lines {
            let mut node = None;
            let mut perm = None;
            for field in line.split_whitespace() {
                if let Some(v) = field.strip_prefix("node=") {
                    node = Some(Word::parse(v, m)?);
                } else if let Some(v) = field.strip_prefix("perm=") {
                    let mut images = Vec::new();
                    for part in v.split(',') {
                        let digit: u32 = part
                            .parse()
                            .map_err(|e| CantorError::Parse(format!("bad perm digit: {e}")))?;
                        if digit == 0 || digit > m {
                            return Err(CantorError::InvalidDigit { digit, m });
                        }
                        images.push((digit - 1) as u8);
                    }
                    perm = Some(Perm::from_images(images)?);
                }
            }
            match (node, perm) {
                (Some(node), Some(perm)) => entries.push((node, perm)),
                _ => return Err(CantorError::Parse(format!("bad automorphism line: {line:?}"))),
            }
        }
        Automorphism::from_perms(m, depth, entries)
    }
}

/// Number of internal nodes of the full m-ary tree above level `depth`:
/// `(m^depth - 1) / (m - 1)`.
pub fn internal_node_count(m: u32, depth: usize) -> BigUint {
    let m_big = BigUint::from(m);
    (m_big.pow(depth as u32) - 1u32) / (m - 1)
}

/// Total number of depth-k truncated automorphisms: `(m!)^#nodes`.
pub fn truncation_count(m: u32, k: usize) -> BigUint {
    let mut fact = BigUint::from(1u32);
    for i in 2..=m {
        fact *= i;
    }
    let nodes = internal_node_count(m, k);
    // The exponent always fits u32 here; enumeration caps keep it tiny.
    fact.pow(nodes.try_into().expect("node count fits u32"))
}

/// Words of every node of level `< depth`, in breadth-first order.
fn node_words_below(m: u32, depth: usize) -> Vec<Word> {
    let mut out = vec![Word::root()];
    let mut frontier = vec![Word::root()];
    for _ in 1..depth {
        let mut next = Vec::new();
        for w in &frontier {
            for d in 0..m as u8 {
                let c = w.child(d);
                out.push(c.clone());
                next.push(c);
            }
        }
        frontier = next;
    }
    if depth == 0 {
        out.clear();
    }
    out
}

/// All permutations of `{0..m-1}` in lexicographic order.
fn all_perms(m: u32) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut current: Vec<u8> = (0..m as u8).collect();
    loop {
        out.push(Perm::from_images(current.clone()).unwrap());
        // next_permutation
        let n = current.len();
        let Some(i) = (0..n - 1).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

/// Exhaustive iterator over every depth-k truncated automorphism, each
/// produced exactly once. This is the exact-expectation oracle: averaging an
/// observable over the iterator equals its expectation over the invariant
/// distribution restricted to depth k.
pub struct TruncationEnumerator {
    m: u32,
    k: usize,
    nodes: Vec<Word>,
    perms: Vec<Perm>,
    /// Mixed-radix counter over `perms`, one entry per node.
    indices: Vec<usize>,
    exhausted: bool,
}

/// Enumerate all truncated automorphisms at depth `k`, refusing when the
/// total exceeds `cap` (default [`DEFAULT_ENUM_CAP`]).
pub fn enumerate_truncations(
    p: &SpaceParams,
    k: usize,
    cap: Option<u64>,
) -> Result<TruncationEnumerator> {
    let cap = cap.unwrap_or(DEFAULT_ENUM_CAP);
    let total = truncation_count(p.m(), k);
    if total > BigUint::from(cap) {
        return Err(CantorError::EnumerationTooLarge { count: total.to_string(), cap });
    }
    let nodes = node_words_below(p.m(), k);
    Ok(TruncationEnumerator {
        m: p.m(),
        k,
        perms: all_perms(p.m()),
        indices: vec![0; nodes.len()],
        nodes,
        exhausted: false,
    })
}

impl TruncationEnumerator {
    pub fn total(&self) -> BigUint {
        truncation_count(self.m, self.k)
    }
}

impl Iterator for TruncationEnumerator {
    type Item = Automorphism;

    fn next(&mut self) -> Option<Automorphism> {
        if self.exhausted {
            return None;
        }
        let entries = self
            .nodes
            .iter()
            .zip(&self.indices)
            .map(|(w, &i)| (w.clone(), self.perms[i].clone()));
        let aut = Automorphism::from_perms(self.m, self.k.max(1), entries).unwrap();
        // Advance the mixed-radix counter.
        let mut pos = 0;
        loop {
            if pos == self.indices.len() {
                self.exhausted = true;
                break;
            }
            self.indices[pos] += 1;
            if self.indices[pos] < self.perms.len() {
                break;
            }
            self.indices[pos] = 0;
            pos += 1;
        }
        Some(aut)
    }
}
