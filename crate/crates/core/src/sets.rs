//! Test sets with known dimensions, and cover/intersection computations for
//! `E ∩ σ(F)`.
//!
//! Sets whose cylinder structure is uniform (the full space, digit
//! restrictions) are kept intensional, so deep working depths cost nothing to
//! represent; Moran-type and file-loaded sets are materialized as tries.
//! Intersection counts are computed by a synchronized root-to-leaf traversal
//! that carries the preimage node alongside the image node, so the cost is
//! proportional to the surviving joint frontier, never a blind `m^k` scan.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CantorError, Result};
use crate::isometry::{AutNode, Automorphism};
use crate::rng::{mix64, stream, Draws};
use crate::space::{SpaceParams, Word};
use crate::trie::{CylinderTrie, TrieBuilder};

/// Cap on materialized trie nodes for constructed sets.
pub const BUILD_NODE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
enum SetRepr {
    /// The whole space.
    Full,
    /// Words using only the given (0-based, sorted) digits.
    Digits(Vec<u8>),
    /// Arbitrary finite-depth set.
    Explicit(CylinderTrie),
}

/// A finite-depth subset of the space: which cylinders it meets, down to
/// `depth`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CantorSet {
    m: u32,
    depth: usize,
    repr: SetRepr,
}

/// Traversal cursor; only meaningful for the set that produced it.
pub type SetCursor = u32;

impl CantorSet {
    pub fn full(m: u32, depth: usize) -> Self {
        CantorSet { m, depth, repr: SetRepr::Full }
    }

    /// Restriction to words over `digits` (0-based).
    pub fn digit_restriction(m: u32, digits: &[u8], depth: usize) -> Result<Self> {
        let mut ds: Vec<u8> = digits.to_vec();
        ds.sort_unstable();
        ds.dedup();
        if ds.is_empty() {
            return Err(CantorError::InvalidParams("digit set must be nonempty".into()));
        }
        for &d in &ds {
            if d as u32 >= m {
                return Err(CantorError::InvalidDigit { digit: d as u32 + 1, m });
            }
        }
        Ok(CantorSet { m, depth, repr: SetRepr::Digits(ds) })
    }

    pub fn from_trie(trie: CylinderTrie) -> Self {
        CantorSet { m: trie.m(), depth: trie.depth(), repr: SetRepr::Explicit(trie) }
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_empty(&self) -> bool {
        match &self.repr {
            SetRepr::Full | SetRepr::Digits(_) => false,
            SetRepr::Explicit(t) => t.is_empty(),
        }
    }

    /// Whether the set is held in closed form (uniform branching at every
    /// node) rather than as a materialized trie.
    pub fn is_intensional(&self) -> bool {
        !matches!(self.repr, SetRepr::Explicit(_))
    }

    /// Branching factor when uniform, None for explicit tries.
    fn uniform_branching(&self) -> Option<u64> {
        match &self.repr {
            SetRepr::Full => Some(self.m as u64),
            SetRepr::Digits(ds) => Some(ds.len() as u64),
            SetRepr::Explicit(_) => None,
        }
    }

    pub fn root(&self) -> Option<SetCursor> {
        match &self.repr {
            SetRepr::Full | SetRepr::Digits(_) => Some(0),
            SetRepr::Explicit(t) => t.root(),
        }
    }

    #[inline]
    pub fn child(&self, cursor: SetCursor, digit: u8) -> Option<SetCursor> {
        match &self.repr {
            SetRepr::Full => Some(0),
            SetRepr::Digits(ds) => {
                if ds.binary_search(&digit).is_ok() {
                    Some(0)
                } else {
                    None
                }
            }
            SetRepr::Explicit(t) => t.child(cursor, digit),
        }
    }

    /// Present children of the cursor as `(digit, cursor)` pairs.
    pub fn children(&self, cursor: SetCursor) -> Vec<(u8, SetCursor)> {
        match &self.repr {
            SetRepr::Full => (0..self.m as u8).map(|d| (d, 0)).collect(),
            SetRepr::Digits(ds) => ds.iter().map(|&d| (d, 0)).collect(),
            SetRepr::Explicit(t) => t.children_of(cursor).collect(),
        }
    }

    /// `|U_k|` for this set.
    pub fn cover_count(&self, k: usize) -> Result<u64> {
        if k > self.depth {
            return Err(CantorError::LevelOutOfRange { k, depth: self.depth });
        }
        match &self.repr {
            SetRepr::Explicit(t) => t.cover_count(k),
            _ => {
                let b = self.uniform_branching().unwrap();
                b.checked_pow(k as u32).ok_or_else(|| {
                    CantorError::Infeasible(format!("cover count {b}^{k} overflows u64"))
                })
            }
        }
    }

    pub fn cover_counts(&self) -> Result<Vec<u64>> {
        (0..=self.depth).map(|k| self.cover_count(k)).collect()
    }

    pub fn is_alive(&self, word: &Word) -> Result<bool> {
        if word.len() > self.depth {
            return Err(CantorError::LevelOutOfRange { k: word.len(), depth: self.depth });
        }
        match &self.repr {
            SetRepr::Full => Ok(true),
            SetRepr::Digits(ds) => {
                Ok(word.digits().iter().all(|d| ds.binary_search(d).is_ok()))
            }
            SetRepr::Explicit(t) => t.is_alive(word),
        }
    }

    /// Materialize as a trie (refused above `BUILD_NODE_CAP` nodes).
    pub fn to_trie(&self) -> Result<CylinderTrie> {
        if let SetRepr::Explicit(t) = &self.repr {
            return Ok(t.clone());
        }
        let mut nodes = 0u64;
        for k in 0..=self.depth {
            nodes = nodes.saturating_add(self.cover_count(k)?);
        }
        if nodes > BUILD_NODE_CAP {
            return Err(CantorError::Infeasible(format!(
                "materializing {nodes} nodes exceeds the cap of {BUILD_NODE_CAP}"
            )));
        }
        let digits: Vec<u8> = match &self.repr {
            SetRepr::Full => (0..self.m as u8).collect(),
            SetRepr::Digits(ds) => ds.clone(),
            SetRepr::Explicit(_) => unreachable!(),
        };
        let mut builder = TrieBuilder::new(self.m, self.depth);
        let mut frontier = vec![builder.root()];
        for level in 0..self.depth {
            let mut next = Vec::with_capacity(frontier.len() * digits.len());
            for &parent in &frontier {
                for &d in &digits {
                    next.push(builder.add_child(level, parent, d));
                }
            }
            frontier = next;
        }
        Ok(builder.finish())
    }

    pub fn to_text(&self) -> Result<String> {
        self.to_trie()?.to_text()
    }
}

/// Recipe for a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SetSpec {
    /// The whole space.
    Full,
    /// Words over the listed digits (1-based).
    DigitRestriction(Vec<u32>),
    /// Cantor-type set tracking the target dimension by varying the number
    /// of surviving children at each level. Deterministic lowest-digit
    /// placement unless a seed is given.
    Moran { target: f64, seed: Option<u64> },
    /// Disjoint union of Moran-type components of dimensions approaching
    /// `alpha` from below, component `i` placed inside the level-i cylinder
    /// `1^(i-1) 2`.
    UnionExample { alpha: f64, i_max: u32 },
    /// Trie text file.
    File(PathBuf),
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Full => write!(f, "full"),
            SetSpec::DigitRestriction(ds) => {
                let list: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
                write!(f, "digits:{}", list.join(","))
            }
            SetSpec::Moran { target, seed } => match seed {
                None => write!(f, "moran:t={target}"),
                Some(s) => write!(f, "moran:t={target},seed={s}"),
            },
            SetSpec::UnionExample { alpha, i_max } => {
                write!(f, "union:alpha={alpha},imax={i_max}")
            }
            SetSpec::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl From<SetSpec> for String {
    fn from(s: SetSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SetSpec {
    type Error = CantorError;

    fn try_from(s: String) -> Result<SetSpec> {
        SetSpec::parse(&s)
    }
}

impl SetSpec {
    /// Parse the CLI mini-language: `full`, `digits:1,2`, `moran:t=0.4`,
    /// `moran:t=0.4,seed=7`, `union:alpha=0.5,imax=8`, `file:<path>`.
    pub fn parse(text: &str) -> Result<SetSpec> {
        let text = text.trim();
        if text == "full" {
            return Ok(SetSpec::Full);
        }
        if let Some(rest) = text.strip_prefix("digits:") {
            let mut digits = Vec::new();
            for part in rest.split(',') {
                digits.push(
                    part.trim()
                        .parse::<u32>()
                        .map_err(|e| CantorError::Parse(format!("bad digit {part:?}: {e}")))?,
                );
            }
            return Ok(SetSpec::DigitRestriction(digits));
        }
        if let Some(rest) = text.strip_prefix("moran:") {
            let kv = parse_kv(rest)?;
            let target = kv_f64(&kv, "t")?;
            let seed = kv_opt_u64(&kv, "seed")?;
            return Ok(SetSpec::Moran { target, seed });
        }
        if let Some(rest) = text.strip_prefix("union:") {
            let kv = parse_kv(rest)?;
            let alpha = kv_f64(&kv, "alpha")?;
            let i_max = kv_f64(&kv, "imax")? as u32;
            return Ok(SetSpec::UnionExample { alpha, i_max });
        }
        if let Some(rest) = text.strip_prefix("file:") {
            return Ok(SetSpec::File(PathBuf::from(rest)));
        }
        Err(CantorError::Parse(format!("unknown set spec {text:?}")))
    }

    /// The dimension the construction is aiming for, when known in closed
    /// form.
    pub fn nominal_dimension(&self, p: &SpaceParams) -> Option<f64> {
        match self {
            SetSpec::Full => Some(p.ambient_dim()),
            SetSpec::DigitRestriction(ds) => {
                let mut unique = ds.clone();
                unique.sort_unstable();
                unique.dedup();
                Some(-(unique.len() as f64).ln() / p.r().ln())
            }
            SetSpec::Moran { target, .. } => Some(*target),
            SetSpec::UnionExample { alpha, .. } => Some(*alpha),
            SetSpec::File(_) => None,
        }
    }
}

fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    text.split(',')
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CantorError::Parse(format!("expected key=value, got {part:?}")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn kv_f64(kv: &[(String, String)], key: &str) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| CantorError::Parse(format!("missing {key}=")))?
        .1
        .parse()
        .map_err(|e| CantorError::Parse(format!("bad {key}: {e}")))
}

fn kv_opt_u64(kv: &[(String, String)], key: &str) -> Result<Option<u64>> {
    match kv.iter().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v
            .parse()
            .map(Some)
            .map_err(|e| CantorError::Parse(format!("bad {key}: {e}"))),
    }
}

/// Build the set described by `spec` at the given working depth.
pub fn build_set(spec: &SetSpec, p: &SpaceParams, depth: usize) -> Result<CantorSet> {
    match spec {
        SetSpec::Full => Ok(CantorSet::full(p.m(), depth)),
        SetSpec::DigitRestriction(ds) => {
            let zero_based: Vec<u8> = ds
                .iter()
                .map(|&d| {
                    if d == 0 || d > p.m() {
                        Err(CantorError::InvalidDigit { digit: d, m: p.m() })
                    } else {
                        Ok((d - 1) as u8)
                    }
                })
                .collect::<Result<_>>()?;
            CantorSet::digit_restriction(p.m(), &zero_based, depth)
        }
        SetSpec::Moran { target, seed } => build_moran(p, *target, *seed, depth),
        SetSpec::UnionExample { alpha, i_max } => build_union_example(p, *alpha, *i_max, depth),
        SetSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let trie = CylinderTrie::from_text(&text)?;
            if trie.m() != p.m() {
                return Err(CantorError::InvalidParams(format!(
                    "file has m={}, expected m={}",
                    trie.m(),
                    p.m()
                )));
            }
            Ok(CantorSet::from_trie(trie))
        }
    }
}

/// Per-level cover counts for a Moran construction of dimension `target`,
/// optionally capped by `count_cap(k)` (absolute level k).
fn moran_counts(
    p: &SpaceParams,
    target: f64,
    start_level: usize,
    depth: usize,
    count_cap: Option<&dyn Fn(usize) -> u64>,
) -> Result<Vec<u64>> {
    let m = p.m() as u64;
    let mut counts = vec![1u64];
    for rel in 1..=(depth - start_level) {
        let prev = *counts.last().unwrap();
        let ideal = p.r().powf(-(rel as f64) * target).round();
        if !ideal.is_finite() || ideal > BUILD_NODE_CAP as f64 {
            return Err(CantorError::Infeasible(format!(
                "Moran level count {ideal} at relative level {rel} exceeds the build cap"
            )));
        }
        let mut next = (ideal as u64).clamp(prev, prev.saturating_mul(m));
        if let Some(cap) = count_cap {
            next = next.min(cap(start_level + rel)).max(prev);
        }
        counts.push(next);
    }
    Ok(counts)
}

/// Expand `prefix` into a Moran-type component whose level counts follow
/// `counts` (relative levels). Children are the lowest digits unless a seed
/// selects them.
fn moran_leaves(
    prefix: &[u8],
    counts: &[u64],
    m: u32,
    seed: Option<u64>,
) -> Vec<Vec<u8>> {
    let mut level: Vec<Vec<u8>> = vec![prefix.to_vec()];
    for (rel, &target) in counts.iter().enumerate().skip(1) {
        let parents = level.len() as u64;
        let base = target / parents;
        let rem = (target % parents) as usize;
        let mut next = Vec::with_capacity(target as usize);
        for (q, parent) in level.iter().enumerate() {
            let want = base as usize + usize::from(q < rem);
            let digits: Vec<u8> = match seed {
                None => (0..want as u8).collect(),
                Some(s) => {
                    // Per-node key: pure function of (seed, level, node rank).
                    let key = stream(mix64(s ^ ((rel as u64) << 40)), q as u64);
                    let mut all: Vec<u8> = (0..m as u8).collect();
                    Draws::new(key).shuffle(&mut all);
                    let mut chosen = all[..want].to_vec();
                    chosen.sort_unstable();
                    chosen
                }
            };
            for d in digits {
                let mut w = parent.clone();
                w.push(d);
                next.push(w);
            }
        }
        level = next;
    }
    level
}

fn build_moran(p: &SpaceParams, target: f64, seed: Option<u64>, depth: usize) -> Result<CantorSet> {
    if depth < 1 {
        return Err(CantorError::InvalidParams("Moran construction needs depth >= 1".into()));
    }
    if !(target > 0.0) || target > p.ambient_dim() + 1e-12 {
        return Err(CantorError::Infeasible(format!(
            "Moran target {target} outside (0, ambient {}]",
            p.ambient_dim()
        )));
    }
    let counts = moran_counts(p, target, 0, depth, None)?;
    let leaves = moran_leaves(&[], &counts, p.m(), seed);
    let words: Result<Vec<Word>> =
        leaves.into_iter().map(|d| Word::from_digits(d, p.m())).collect();
    Ok(CantorSet::from_trie(CylinderTrie::from_leaf_words(p.m(), depth, words?)?))
}

/// Smallest component index of the union example: `ceil(1/alpha) + 1`.
pub fn union_first_index(alpha: f64) -> u32 {
    (1.0 / alpha).ceil() as u32 + 1
}

/// The level-i cylinder `1^(i-1) 2` hosting component `i`.
pub fn union_component_cylinder(i: u32, m: u32) -> Result<Word> {
    let mut digits = vec![0u8; i as usize];
    digits[i as usize - 1] = 1;
    Word::from_digits(digits, m)
}

/// Leaf words of component `i`: a Moran-type set of dimension
/// `alpha - 1/i` inside its cylinder, with `|U_k| <= r^(-k*alpha)` enforced
/// from level `i` on.
fn union_component_leaves(
    p: &SpaceParams,
    alpha: f64,
    i: u32,
    depth: usize,
) -> Result<Vec<Vec<u8>>> {
    let target = alpha - 1.0 / i as f64;
    let cylinder = union_component_cylinder(i, p.m())?;
    let cap = move |k: usize| p.r().powf(-(k as f64) * alpha).floor().max(1.0) as u64;
    let counts = moran_counts(p, target, i as usize, depth, Some(&cap))?;
    Ok(moran_leaves(cylinder.digits(), &counts, p.m(), None))
}

/// A single component of the union example, as its own set.
pub fn build_union_component(p: &SpaceParams, alpha: f64, i: u32, depth: usize) -> Result<CantorSet> {
    validate_union(p, alpha, i, i, depth)?;
    let leaves = union_component_leaves(p, alpha, i, depth)?;
    let words: Result<Vec<Word>> = leaves.into_iter().map(|d| Word::from_digits(d, p.m())).collect();
    Ok(CantorSet::from_trie(CylinderTrie::from_leaf_words(p.m(), depth, words?)?))
}

fn validate_union(p: &SpaceParams, alpha: f64, i_lo: u32, i_hi: u32, depth: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < p.ambient_dim()) {
        return Err(CantorError::Infeasible(format!(
            "union example needs alpha in (0, ambient {}), got {alpha}",
            p.ambient_dim()
        )));
    }
    if i_lo < union_first_index(alpha) {
        return Err(CantorError::InvalidParams(format!(
            "component index {i_lo} below the first admissible index {}",
            union_first_index(alpha)
        )));
    }
    if i_hi as usize > depth {
        return Err(CantorError::InvalidParams(format!(
            "component {i_hi} does not fit inside depth {depth}"
        )));
    }
    Ok(())
}

fn build_union_example(p: &SpaceParams, alpha: f64, i_max: u32, depth: usize) -> Result<CantorSet> {
    let i_lo = union_first_index(alpha);
    validate_union(p, alpha, i_lo, i_max, depth)?;
    if i_max < i_lo {
        return Err(CantorError::InvalidParams(format!(
            "imax {i_max} below the first admissible index {i_lo}"
        )));
    }
    let mut words: Vec<Word> = Vec::new();
    for i in i_lo..=i_max {
        for digits in union_component_leaves(p, alpha, i, depth)? {
            words.push(Word::from_digits(digits, p.m())?);
        }
    }
    Ok(CantorSet::from_trie(CylinderTrie::from_leaf_words(p.m(), depth, words)?))
}

/// `|{I in U_k : I alive in E and sigma^{-1}(I) alive in F}|`.
///
/// This is the cover count the intersection experiments bound: it dominates
/// `|U_k(E ∩ σF)|`, and for pruned finite-depth tries every counted node has
/// surviving depth-L material on both sides.
pub fn intersect_cover(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    k: usize,
) -> Result<u64> {
    Ok(*intersect_level_counts(e, f, aut, k)?.last().unwrap())
}

/// Joint cover counts at every level `0..=depth`.
pub fn intersect_level_counts(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    depth: usize,
) -> Result<Vec<u64>> {
    check_intersect_args(e, f, aut, depth)?;
    let mut counts = vec![0u64; depth + 1];
    if let (Some(er), Some(fr)) = (e.root(), f.root()) {
        descend_counts(e, f, aut, er, fr, &aut.root_node(), 0, depth, &mut counts);
    }
    Ok(counts)
}

#[allow(clippy::too_many_arguments)]
fn descend_counts(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    e_node: SetCursor,
    f_node: SetCursor,
    aut_node: &AutNode,
    level: usize,
    depth: usize,
    counts: &mut [u64],
) {
    counts[level] += 1;
    if level == depth {
        return;
    }
    let perm = aut.perm_at(aut_node);
    for (c, e_child) in e.children(e_node) {
        let d = perm.preimage(c);
        if let Some(f_child) = f.child(f_node, d) {
            let next = aut.child_node(aut_node, d);
            descend_counts(e, f, aut, e_child, f_child, &next, level + 1, depth, counts);
        }
    }
}

/// Level-k joint cover with the surviving image words listed.
pub fn intersect_cover_leaves(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    k: usize,
) -> Result<(u64, Vec<Word>)> {
    check_intersect_args(e, f, aut, k)?;
    let mut words = Vec::new();
    if let (Some(er), Some(fr)) = (e.root(), f.root()) {
        let mut stack = Vec::with_capacity(k);
        descend_leaves(e, f, aut, er, fr, &aut.root_node(), 0, k, &mut stack, &mut words);
    }
    Ok((words.len() as u64, words))
}

#[allow(clippy::too_many_arguments)]
fn descend_leaves(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    e_node: SetCursor,
    f_node: SetCursor,
    aut_node: &AutNode,
    level: usize,
    depth: usize,
    stack: &mut Vec<u8>,
    words: &mut Vec<Word>,
) {
    if level == depth {
        words.push(Word::from_digits(stack.clone(), e.m()).unwrap());
        return;
    }
    let perm = aut.perm_at(aut_node);
    for (c, e_child) in e.children(e_node) {
        let d = perm.preimage(c);
        if let Some(f_child) = f.child(f_node, d) {
            let next = aut.child_node(aut_node, d);
            stack.push(c);
            descend_leaves(e, f, aut, e_child, f_child, &next, level + 1, depth, stack, words);
            stack.pop();
        }
    }
}

/// Whether the joint cover survives to `depth` (short-circuits on the first
/// surviving leaf).
pub fn intersect_nonempty(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    depth: usize,
) -> Result<bool> {
    check_intersect_args(e, f, aut, depth)?;
    match (e.root(), f.root()) {
        (Some(er), Some(fr)) => {
            Ok(descend_nonempty(e, f, aut, er, fr, &aut.root_node(), 0, depth))
        }
        _ => Ok(false),
    }
}

#[allow(clippy::too_many_arguments)]
fn descend_nonempty(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    e_node: SetCursor,
    f_node: SetCursor,
    aut_node: &AutNode,
    level: usize,
    depth: usize,
) -> bool {
    if level == depth {
        return true;
    }
    let perm = aut.perm_at(aut_node);
    for (c, e_child) in e.children(e_node) {
        let d = perm.preimage(c);
        if let Some(f_child) = f.child(f_node, d) {
            let next = aut.child_node(aut_node, d);
            if descend_nonempty(e, f, aut, e_child, f_child, &next, level + 1, depth) {
                return true;
            }
        }
    }
    false
}

/// True iff the depth-truncated intersection is empty for this isometry.
pub fn empty_intersection_trial(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    depth: usize,
) -> Result<bool> {
    Ok(!intersect_nonempty(e, f, aut, depth)?)
}

fn check_intersect_args(
    e: &CantorSet,
    f: &CantorSet,
    aut: &Automorphism,
    k: usize,
) -> Result<()> {
    if e.m() != f.m() || e.m() != aut.m() {
        return Err(CantorError::InvalidParams(format!(
            "alphabet mismatch: E has m={}, F has m={}, sigma has m={}",
            e.m(),
            f.m(),
            aut.m()
        )));
    }
    let max = e.depth().min(f.depth()).min(aut.max_depth());
    if k > max {
        return Err(CantorError::LevelOutOfRange { k, depth: max });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxdim::box_dim_estimate;
    use crate::rng::trial_seed;
    use crate::trie::random_trie;

    fn p33() -> SpaceParams {
        SpaceParams::new(3, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn spec_parser_round_trips() {
        for text in
            ["full", "digits:1,2", "moran:t=0.4", "moran:t=0.4,seed=7", "union:alpha=0.5,imax=8"]
        {
            let spec = SetSpec::parse(text).unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!(SetSpec::parse("blancmange").is_err());
        assert!(SetSpec::parse("digits:x").is_err());
    }

    #[test]
    fn full_counts() {
        let p = p33();
        let set = build_set(&SetSpec::Full, &p, 4).unwrap();
        assert_eq!(set.cover_counts().unwrap(), vec![1, 3, 9, 27, 81]);
    }

    #[test]
    fn digit_restriction_counts_and_dimension() {
        let p = p33();
        let set = build_set(&SetSpec::DigitRestriction(vec![1, 2]), &p, 10).unwrap();
        let counts = set.cover_counts().unwrap();
        for (k, &c) in counts.iter().enumerate() {
            assert_eq!(c, 2u64.pow(k as u32));
        }
        let est = box_dim_estimate(&counts, &p, (0, 10)).unwrap().unwrap();
        let expected = 2f64.ln() / 3f64.ln();
        assert!((est.slope - expected).abs() < 1e-6, "slope {}", est.slope);
    }

    #[test]
    fn moran_counts_track_target() {
        let p = p33();
        let set = build_set(&SetSpec::Moran { target: 0.4, seed: None }, &p, 20).unwrap();
        let counts = set.cover_counts().unwrap();
        let expected_top = 3f64.powf(0.4 * 20.0);
        assert!((counts[20] as f64) >= expected_top / 3.0);
        assert!((counts[20] as f64) <= expected_top * 3.0);
        for k in 1..counts.len() {
            assert!(counts[k - 1] <= counts[k] && counts[k] <= 3 * counts[k - 1]);
        }
        let est = box_dim_estimate(&counts, &p, (10, 20)).unwrap().unwrap();
        assert!((est.slope - 0.4).abs() < 0.02, "slope {}", est.slope);
    }

    #[test]
    fn moran_seeded_placement_still_tracks_counts() {
        let p = p33();
        let plain = build_set(&SetSpec::Moran { target: 0.4, seed: None }, &p, 12).unwrap();
        let seeded = build_set(&SetSpec::Moran { target: 0.4, seed: Some(5) }, &p, 12).unwrap();
        assert_eq!(plain.cover_counts().unwrap(), seeded.cover_counts().unwrap());
        assert_ne!(plain, seeded);
    }

    #[test]
    fn moran_infeasible_target_is_rejected() {
        let p = p33();
        assert!(build_set(&SetSpec::Moran { target: 1.2, seed: None }, &p, 5).is_err());
        assert!(build_set(&SetSpec::Moran { target: 0.0, seed: None }, &p, 5).is_err());
    }

    #[test]
    fn union_example_component_bound() {
        // |U_k(E_i)| <= r^{-k alpha} for k >= i, for every component.
        let p = p33();
        let alpha = 0.5;
        for i in union_first_index(alpha)..=6 {
            let comp = build_union_component(&p, alpha, i, 12).unwrap();
            let counts = comp.cover_counts().unwrap();
            for (k, &c) in counts.iter().enumerate().skip(i as usize) {
                let bound = p.r().powf(-(k as f64) * alpha);
                assert!(
                    c as f64 <= bound + 1e-9,
                    "component {i}: |U_{k}| = {c} > {bound}"
                );
            }
            // Below its level the component is a single cylinder chain.
            for (_k, &c) in counts.iter().enumerate().take(i as usize) {
                assert_eq!(c, 1);
            }
        }
    }

    #[test]
    fn union_example_counts_are_component_sums() {
        let p = p33();
        let set = build_set(&SetSpec::UnionExample { alpha: 0.5, i_max: 6 }, &p, 12).unwrap();
        let mut summed = vec![0u64; 13];
        for i in union_first_index(0.5)..=6 {
            let comp = build_union_component(&p, 0.5, i, 12).unwrap();
            for (k, c) in comp.cover_counts().unwrap().into_iter().enumerate() {
                summed[k] += c;
            }
        }
        // Components are pairwise disjoint, but they share the spine
        // cylinders 1^j near the root, so only deep levels must match.
        let counts = set.cover_counts().unwrap();
        assert_eq!(counts[12], summed[12]);
        assert!(counts[0] == 1);
    }

    #[test]
    fn full_f_side_gives_e_cover_counts() {
        let p = p33();
        let e = CantorSet::from_trie(random_trie(3, 5, 88));
        let f = CantorSet::full(3, 5);
        for seed in 0..5 {
            let aut = Automorphism::sample(&p, trial_seed(10, seed));
            for k in 0..=5 {
                assert_eq!(
                    intersect_cover(&e, &f, &aut, k).unwrap(),
                    e.cover_count(k).unwrap()
                );
            }
        }
    }

    #[test]
    fn identity_on_digit_sets_gives_digit_intersection_counts() {
        let p = p33();
        let e = build_set(&SetSpec::DigitRestriction(vec![1, 2]), &p, 8).unwrap();
        let f = build_set(&SetSpec::DigitRestriction(vec![2, 3]), &p, 8).unwrap();
        let id = Automorphism::identity(3);
        for k in 0..=8 {
            // covers multiply digit-wise: shared digit set {2}
            assert_eq!(intersect_cover(&e, &e, &id, k).unwrap(), 2u64.pow(k as u32));
            assert_eq!(intersect_cover(&e, &f, &id, k).unwrap(), 1);
        }
    }

    #[test]
    fn joint_count_below_both_covers() {
        let p = p33();
        for seed in 0..10 {
            let e = CantorSet::from_trie(random_trie(3, 4, 100 + seed));
            let f = CantorSet::from_trie(random_trie(3, 4, 200 + seed));
            let aut = Automorphism::sample(&p, trial_seed(33, seed));
            for k in 0..=4 {
                let joint = intersect_cover(&e, &f, &aut, k).unwrap();
                assert!(joint <= e.cover_count(k).unwrap().min(f.cover_count(k).unwrap()));
            }
        }
    }

    #[test]
    fn empty_trial_edge_cases() {
        let p = p33();
        let full = CantorSet::full(3, 6);
        let empty = CantorSet::from_trie(crate::trie::CylinderTrie::empty(3, 6));
        for seed in 0..5 {
            let aut = Automorphism::sample(&p, seed);
            assert!(!empty_intersection_trial(&full, &full, &aut, 6).unwrap());
            assert!(empty_intersection_trial(&empty, &full, &aut, 6).unwrap());
        }
    }

    #[test]
    fn subcritical_pair_mostly_dies() {
        // Mean joint count at depth 12 is 3^{-0.2*12} ≈ 0.07, so the
        // overwhelming majority of seeds are empty.
        let p = p33();
        let e = build_set(&SetSpec::Moran { target: 0.4, seed: None }, &p, 12).unwrap();
        let mut empties = 0;
        for t in 0..200u64 {
            let aut = Automorphism::sample(&p, trial_seed(404, t));
            if empty_intersection_trial(&e, &e, &aut, 12).unwrap() {
                empties += 1;
            }
        }
        assert!(empties >= 180, "only {empties}/200 empty");
    }

    #[test]
    fn cover_and_leaves_agree() {
        let p = p33();
        let e = CantorSet::from_trie(random_trie(3, 4, 7));
        let f = CantorSet::from_trie(random_trie(3, 4, 8));
        let aut = Automorphism::sample(&p, 99);
        let (n, words) = intersect_cover_leaves(&e, &f, &aut, 4).unwrap();
        assert_eq!(n, intersect_cover(&e, &f, &aut, 4).unwrap());
        for w in words {
            assert!(e.is_alive(&w).unwrap());
            assert!(f.is_alive(&aut.apply_inverse(&w).unwrap()).unwrap());
        }
    }

    #[test]
    fn to_trie_matches_uniform_counts() {
        let p = p33();
        let set = build_set(&SetSpec::DigitRestriction(vec![1, 3]), &p, 6).unwrap();
        let trie = set.to_trie().unwrap();
        assert_eq!(trie.cover_counts(), set.cover_counts().unwrap());
    }
}
