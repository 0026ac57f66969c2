//! Finite-depth cylinder tries.
//!
//! A `CylinderTrie` records, down to a working depth `L`, which cylinders a
//! set meets: a node at level `k` is present iff the corresponding level-k
//! cylinder intersects the set. Nodes are stored in breadth-first order with
//! a fixed m-slot child array per node, so levels are contiguous id ranges
//! and `|U_k|` is an O(1) lookup.
//!
//! Invariants maintained by every constructor:
//! - the root is present iff the set is nonempty;
//! - every present node at level `< L` has at least one present child
//!   (cylinders only count when they contain surviving depth-L material).

use std::fmt::Write as _;

use crate::error::{CantorError, Result};
use crate::rng::{root_key, Draws};
use crate::space::{Word, MAX_DEPTH, MAX_TEXT_M};

pub const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderTrie {
    m: u32,
    depth: usize,
    /// Node ids of level `k` occupy `level_offsets[k]..level_offsets[k+1]`.
    level_offsets: Vec<u32>,
    /// Child ids, `m` slots per node; `NO_CHILD` marks an absent child.
    children: Vec<u32>,
}

impl CylinderTrie {
    /// The empty set at a given depth.
    pub fn empty(m: u32, depth: usize) -> Self {
        CylinderTrie { m, depth, level_offsets: vec![0; depth + 2], children: Vec::new() }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_empty(&self) -> bool {
        self.node_count() == 0
    }

    pub fn node_count(&self) -> usize {
        *self.level_offsets.last().unwrap() as usize
    }

    /// Id of the root node, if the set is nonempty.
    pub fn root(&self) -> Option<u32> {
        if self.is_empty() {
            None
        } else {
            Some(0)
        }
    }

    /// Ids of the nodes at level `k`.
    pub fn level_nodes(&self, k: usize) -> std::ops::Range<u32> {
        self.level_offsets[k]..self.level_offsets[k + 1]
    }

    /// `|U_k|`: number of level-k cylinders meeting the set.
    pub fn cover_count(&self, k: usize) -> Result<u64> {
        if k > self.depth {
            return Err(CantorError::LevelOutOfRange { k, depth: self.depth });
        }
        Ok((self.level_offsets[k + 1] - self.level_offsets[k]) as u64)
    }

    /// All cover counts, levels `0..=depth`.
    pub fn cover_counts(&self) -> Vec<u64> {
        (0..=self.depth).map(|k| self.cover_count(k).unwrap()).collect()
    }

    #[inline]
    pub fn child(&self, node: u32, digit: u8) -> Option<u32> {
        let id = self.children[node as usize * self.m as usize + digit as usize];
        if id == NO_CHILD {
            None
        } else {
            Some(id)
        }
    }

    /// Present children of `node` as `(digit, id)` pairs.
    pub fn children_of(&self, node: u32) -> impl Iterator<Item = (u8, u32)> + '_ {
        let base = node as usize * self.m as usize;
        self.children[base..base + self.m as usize]
            .iter()
            .enumerate()
            .filter(|(_, &id)| id != NO_CHILD)
            .map(|(d, &id)| (d as u8, id))
    }

    pub fn child_count(&self, node: u32) -> usize {
        self.children_of(node).count()
    }

    /// Whether the cylinder addressed by `word` meets the set. Words longer
    /// than the depth are rejected.
    pub fn is_alive(&self, word: &Word) -> Result<bool> {
        if word.len() > self.depth {
            return Err(CantorError::LevelOutOfRange { k: word.len(), depth: self.depth });
        }
        let Some(mut node) = self.root() else { return Ok(false) };
        for &d in word.digits() {
            match self.child(node, d) {
                Some(next) => node = next,
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Depth-L leaf words in lexicographic order.
    pub fn leaf_words(&self) -> Vec<Word> {
        let mut out = Vec::new();
        let Some(root) = self.root() else { return out };
        let mut stack: Vec<u8> = Vec::with_capacity(self.depth);
        self.collect_leaves(root, 0, &mut stack, &mut out);
        out
    }

    fn collect_leaves(&self, node: u32, level: usize, stack: &mut Vec<u8>, out: &mut Vec<Word>) {
        if level == self.depth {
            out.push(Word::from_digits(stack.clone(), self.m).unwrap());
            return;
        }
        for (d, child) in self.children_of(node) {
            stack.push(d);
            self.collect_leaves(child, level + 1, stack, out);
            stack.pop();
        }
    }

    /// Build from depth-L leaf words. Ancestor nodes are derived, so the
    /// pruning invariant holds by construction.
    pub fn from_leaf_words<I>(m: u32, depth: usize, leaves: I) -> Result<Self>
    where
        I: IntoIterator<Item = Word>,
    {
        if depth > MAX_DEPTH {
            return Err(CantorError::LevelOutOfRange { k: depth, depth: MAX_DEPTH });
        }
        let mut words: Vec<Word> = Vec::new();
        for w in leaves {
            if w.len() != depth {
                return Err(CantorError::LengthMismatch(w.len(), depth));
            }
            for &d in w.digits() {
                if d as u32 >= m {
                    return Err(CantorError::InvalidDigit { digit: d as u32 + 1, m });
                }
            }
            words.push(w);
        }
        words.sort();
        words.dedup();
        if words.is_empty() {
            return Ok(CylinderTrie::empty(m, depth));
        }

        // Sorted leaves make the distinct length-k prefixes contiguous runs,
        // so each level can be emitted in breadth-first order by splitting
        // the runs of the previous level on the next digit.
        let mut builder = TrieBuilder::new(m, depth);
        let mut ids: Vec<u32> = vec![builder.root()];
        let mut runs: Vec<(usize, usize)> = vec![(0, words.len())];
        for level in 0..depth {
            let mut next_ids = Vec::new();
            let mut next_runs = Vec::new();
            for (&parent, &(start, end)) in ids.iter().zip(runs.iter()) {
                let mut i = start;
                while i < end {
                    let digit = words[i].digits()[level];
                    let mut j = i + 1;
                    while j < end && words[j].digits()[level] == digit {
                        j += 1;
                    }
                    next_ids.push(builder.add_child(level, parent, digit));
                    next_runs.push((i, j));
                    i = j;
                }
            }
            ids = next_ids;
            runs = next_runs;
        }
        Ok(builder.finish())
    }

    /// Serialize to the line-oriented text format: a `m=<m> depth=<L>` header
    /// followed by one 1-based leaf word per line.
    pub fn to_text(&self) -> Result<String> {
        if self.m > MAX_TEXT_M {
            return Err(CantorError::Unsupported(format!(
                "text format only covers m <= {MAX_TEXT_M}, got m={}",
                self.m
            )));
        }
        let mut out = String::new();
        writeln!(out, "m={} depth={}", self.m, self.depth).unwrap();
        for w in self.leaf_words() {
            writeln!(out, "{w}").unwrap();
        }
        Ok(out)
    }

    /// Parse the text format produced by [`CylinderTrie::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| CantorError::Parse("missing header".into()))?;
        let (m, depth) = parse_header(header)?;
        let mut leaves = Vec::new();
        for line in lines {
            let word_text = line.split_whitespace().next().unwrap_or("");
            leaves.push(Word::parse(word_text, m)?);
        }
        CylinderTrie::from_leaf_words(m, depth, leaves)
    }
}

pub(crate) fn parse_header(header: &str) -> Result<(u32, usize)> {
    let mut m = None;
    let mut depth = None;
    for field in header.split_whitespace() {
        if let Some(v) = field.strip_prefix("m=") {
            m = Some(v.parse::<u32>().map_err(|e| CantorError::Parse(format!("bad m: {e}")))?);
        } else if let Some(v) = field.strip_prefix("depth=") {
            depth =
                Some(v.parse::<usize>().map_err(|e| CantorError::Parse(format!("bad depth: {e}")))?);
        }
    }
    match (m, depth) {
        (Some(m), Some(depth)) => Ok((m, depth)),
        _ => Err(CantorError::Parse(format!("header must contain m= and depth=: {header:?}"))),
    }
}

/// Level-by-level trie constructor. Nodes must be added in breadth-first
/// order: all of level k before any of level k+1.
pub struct TrieBuilder {
    m: u32,
    depth: usize,
    level_offsets: Vec<u32>,
    children: Vec<u32>,
    current_level: usize,
}

impl TrieBuilder {
    pub fn new(m: u32, depth: usize) -> Self {
        assert!(depth <= MAX_DEPTH, "depth {depth} above MAX_DEPTH");
        let mut b = TrieBuilder {
            m,
            depth,
            level_offsets: vec![0],
            children: Vec::new(),
            current_level: 0,
        };
        b.push_node();
        b.level_offsets.push(1);
        b
    }

    fn push_node(&mut self) -> u32 {
        let id = (self.children.len() / self.m as usize) as u32;
        self.children.extend(std::iter::repeat(NO_CHILD).take(self.m as usize));
        id
    }

    pub fn root(&self) -> u32 {
        0
    }

    /// Add (or fetch) the `digit` child of `parent`, which must live at
    /// `parent_level`.
    pub fn add_child(&mut self, parent_level: usize, parent: u32, digit: u8) -> u32 {
        assert!(parent_level < self.depth);
        debug_assert!((digit as u32) < self.m);
        // Entering a deeper level seals the previous one.
        while self.current_level < parent_level {
            self.current_level += 1;
            let end = (self.children.len() / self.m as usize) as u32;
            self.level_offsets.push(end);
        }
        let slot = parent as usize * self.m as usize + digit as usize;
        if self.children[slot] != NO_CHILD {
            return self.children[slot];
        }
        let id = self.push_node();
        self.children[slot] = id;
        id
    }

    pub fn finish(mut self) -> CylinderTrie {
        let total = (self.children.len() / self.m as usize) as u32;
        while self.level_offsets.len() < self.depth + 2 {
            self.level_offsets.push(total);
        }
        let trie = CylinderTrie {
            m: self.m,
            depth: self.depth,
            level_offsets: self.level_offsets,
            children: self.children,
        };
        debug_assert!(trie.check_pruned().is_ok());
        trie
    }
}

impl CylinderTrie {
    /// Verify the pruning invariant: every node above the leaf level has at
    /// least one child.
    pub fn check_pruned(&self) -> Result<()> {
        for k in 0..self.depth {
            for node in self.level_nodes(k) {
                if self.child_count(node) == 0 {
                    return Err(CantorError::Integrity(format!(
                        "node {node} at level {k} has no children"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Seeded random nonempty trie: each depth-L word is kept independently with
/// probability 1/2 (at least one survivor is forced). Used by the exact
/// enumeration suites, which need arbitrary small sets to feed the
/// identities.
pub fn random_trie(m: u32, depth: usize, seed: u64) -> CylinderTrie {
    let mut draws = Draws::new(root_key(seed));
    let mut leaves = Vec::new();
    let total = (m as u64).pow(depth as u32);
    for i in 0..total {
        if draws.next_u64() & 1 == 0 {
            leaves.push(word_from_index(i, m, depth));
        }
    }
    if leaves.is_empty() {
        let pick = draws.next_below(total);
        leaves.push(word_from_index(pick, m, depth));
    }
    CylinderTrie::from_leaf_words(m, depth, leaves).unwrap()
}

/// The `index`-th depth-L word in lexicographic order.
pub fn word_from_index(index: u64, m: u32, depth: usize) -> Word {
    let mut digits = vec![0u8; depth];
    let mut x = index;
    for slot in digits.iter_mut().rev() {
        *slot = (x % m as u64) as u8;
        x /= m as u64;
    }
    Word::from_digits(digits, m).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digit_trie(m: u32, allowed: &[u8], depth: usize) -> CylinderTrie {
        let mut leaves = vec![Word::root()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for w in &leaves {
                for &d in allowed {
                    next.push(w.child(d));
                }
            }
            leaves = next;
        }
        let leaves: Vec<Word> =
            leaves.into_iter().map(|w| Word::from_digits(w.digits().to_vec(), m).unwrap()).collect();
        CylinderTrie::from_leaf_words(m, depth, leaves).unwrap()
    }

    #[test]
    fn full_space_counts_are_powers_of_m() {
        let t = digit_trie(3, &[0, 1, 2], 5);
        assert_eq!(t.cover_count(4).unwrap(), 81);
        assert_eq!(t.cover_counts(), vec![1, 3, 9, 27, 81, 243]);
    }

    #[test]
    fn digit_restriction_counts() {
        let t = digit_trie(3, &[0, 1], 6);
        assert_eq!(t.cover_count(6).unwrap(), 64);
        assert_eq!(t.cover_count(0).unwrap(), 1);
    }

    #[test]
    fn empty_trie_counts_zero() {
        let t = CylinderTrie::empty(3, 4);
        for k in 0..=4 {
            assert_eq!(t.cover_count(k).unwrap(), 0);
        }
        assert!(!t.is_alive(&Word::root()).unwrap());
    }

    #[test]
    fn out_of_range_level_is_an_error() {
        let t = digit_trie(2, &[0], 3);
        assert!(t.cover_count(4).is_err());
    }

    #[test]
    fn monotone_counts_and_pruning() {
        for seed in 0..20 {
            let t = random_trie(3, 5, seed);
            t.check_pruned().unwrap();
            let counts = t.cover_counts();
            for k in 1..counts.len() {
                assert!(counts[k - 1] <= counts[k]);
                assert!(counts[k] <= 3 * counts[k - 1]);
            }
        }
    }

    #[test]
    fn alive_words_match_leaves() {
        let t = random_trie(2, 6, 9);
        for w in t.leaf_words() {
            assert!(t.is_alive(&w).unwrap());
        }
        assert!(t.is_alive(&Word::root()).unwrap());
    }

    #[test]
    fn text_round_trip() {
        let t = random_trie(3, 4, 11);
        let text = t.to_text().unwrap();
        assert!(text.starts_with("m=3 depth=4"));
        let back = CylinderTrie::from_text(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn from_text_rejects_garbage() {
        assert!(CylinderTrie::from_text("").is_err());
        assert!(CylinderTrie::from_text("m=3\n11\n").is_err());
        assert!(CylinderTrie::from_text("m=3 depth=2\n14\n").is_err());
    }
}
