//! Measures on cylinder tries and the intersection martingale.
//!
//! A [`MassTrie`] attaches a nonnegative mass to every alive cylinder of a
//! set, additively: the mass of a node equals the sum over its children.
//! The natural measure of a constructed set splits each node's mass equally
//! among its children; on uniformly-branching sets it is kept in closed form
//! so deep working depths stay cheap.
//!
//! Given measures `mu`, `nu` and an isometry `sigma`, the level-l martingale
//! value of a cylinder `A` is
//!
//! ```text
//! tau_l(A) = m^l * sum over I in U_l(A) of mu(I) * nu(sigma^{-1}(I))
//! ```
//!
//! which has constant conditional mean in `l` and converges to the mass the
//! limit random measure puts on `A`. The depth-L surrogate records `tau_L`
//! on every cylinder as a `MassTrie` supported on the joint-alive nodes.

use rayon::prelude::*;

use crate::error::{CantorError, Result};
use crate::isometry::{AutNode, Automorphism};
use crate::rng::{pairwise_sum, trial_seed};
use crate::scalar::{scalar_pow, MassScalar};
use crate::sets::CantorSet;
use crate::space::{SpaceParams, Word};
use crate::trie::CylinderTrie;

#[derive(Debug, Clone)]
enum MassKind<S> {
    /// Explicit per-node masses, indexed by trie node id.
    Dense { trie: CylinderTrie, mass: Vec<S> },
    /// Equal splitting on a uniformly-branching set: every level-k node
    /// carries `branching^-k`.
    Uniform { set: CantorSet },
}

/// A measure described by its cylinder masses down to a working depth.
#[derive(Debug, Clone)]
pub struct MassTrie<S: MassScalar> {
    m: u32,
    depth: usize,
    kind: MassKind<S>,
}

impl<S: MassScalar> MassTrie<S> {
    /// Unit-mass measure splitting each node's mass equally among its alive
    /// children.
    pub fn natural(set: &CantorSet) -> Result<Self> {
        if set.is_empty() {
            return Err(CantorError::EmptySet("natural measure"));
        }
        if set.is_intensional() {
            // Every node branches identically, so equal splitting puts
            // branching^-k on each level-k node; keep that in closed form.
            return Ok(MassTrie {
                m: set.m(),
                depth: set.depth(),
                kind: MassKind::Uniform { set: set.clone() },
            });
        }
        let trie = set.to_trie()?;
        let mut mass = vec![S::zero(); trie.node_count()];
        mass[0] = S::one();
        for k in 0..trie.depth() {
            for node in trie.level_nodes(k) {
                let share =
                    mass[node as usize].clone() / S::from_count(trie.child_count(node) as u64);
                for (_, child) in trie.children_of(node) {
                    mass[child as usize] = share.clone();
                }
            }
        }
        Ok(MassTrie { m: trie.m(), depth: trie.depth(), kind: MassKind::Dense { trie, mass } })
    }

    /// Build from explicit leaf masses (one per depth-L leaf of `trie`, in
    /// lexicographic leaf order); internal masses are the children sums.
    pub fn from_leaf_masses(trie: CylinderTrie, leaf_masses: Vec<S>) -> Result<Self> {
        let leaves = trie.level_nodes(trie.depth());
        if leaves.len() != leaf_masses.len() {
            return Err(CantorError::LengthMismatch(leaf_masses.len(), leaves.len()));
        }
        if leaf_masses.iter().any(|v| v < &S::zero()) {
            return Err(CantorError::Integrity("negative leaf mass".into()));
        }
        let mut mass = vec![S::zero(); trie.node_count()];
        for (node, value) in leaves.zip(leaf_masses) {
            mass[node as usize] = value;
        }
        for k in (0..trie.depth()).rev() {
            for node in trie.level_nodes(k) {
                let mut total = S::zero();
                for (_, child) in trie.children_of(node) {
                    total = total + mass[child as usize].clone();
                }
                mass[node as usize] = total;
            }
        }
        Ok(MassTrie { m: trie.m(), depth: trie.depth(), kind: MassKind::Dense { trie, mass } })
    }

    #[inline]
    pub fn m(&self) -> u32 {
        self.m
    }

    #[inline]
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total_mass(&self) -> S {
        match &self.kind {
            MassKind::Dense { mass, .. } => {
                mass.first().cloned().unwrap_or_else(S::zero)
            }
            MassKind::Uniform { .. } => S::one(),
        }
    }

    pub(crate) fn root_cursor(&self) -> Option<u32> {
        match &self.kind {
            MassKind::Dense { trie, .. } => trie.root(),
            MassKind::Uniform { set } => set.root(),
        }
    }

    pub(crate) fn child(&self, cursor: u32, digit: u8) -> Option<u32> {
        match &self.kind {
            MassKind::Dense { trie, .. } => trie.child(cursor, digit),
            MassKind::Uniform { set } => set.child(cursor, digit),
        }
    }

    pub(crate) fn children(&self, cursor: u32) -> Vec<(u8, u32)> {
        match &self.kind {
            MassKind::Dense { trie, .. } => trie.children_of(cursor).collect(),
            MassKind::Uniform { set } => set.children(cursor),
        }
    }

    /// Mass of the node under `cursor`, which lives at `level`.
    pub(crate) fn mass_at(&self, cursor: u32, level: usize) -> S {
        match &self.kind {
            MassKind::Dense { mass, .. } => mass[cursor as usize].clone(),
            MassKind::Uniform { set } => uniform_level_mass::<S>(set, level),
        }
    }

    /// Mass of the cylinder addressed by `word` (zero off the support).
    pub fn mass_of_word(&self, word: &Word) -> Result<S> {
        if word.len() > self.depth {
            return Err(CantorError::LevelOutOfRange { k: word.len(), depth: self.depth });
        }
        let Some(mut cur) = self.root_cursor() else { return Ok(S::zero()) };
        for &d in word.digits() {
            match self.child(cur, d) {
                Some(next) => cur = next,
                None => return Ok(S::zero()),
            }
        }
        Ok(self.mass_at(cur, word.len()))
    }

    /// Per-level sums of squared masses, levels `0..=depth`. This is the
    /// quantity the energy decomposition consumes.
    pub fn level_square_sums(&self) -> Vec<S> {
        match &self.kind {
            MassKind::Dense { trie, mass } => (0..=self.depth)
                .map(|k| {
                    let mut total = S::zero();
                    for node in trie.level_nodes(k) {
                        let v = mass[node as usize].clone();
                        total = total + v.clone() * v;
                    }
                    total
                })
                .collect(),
            MassKind::Uniform { set } => (0..=self.depth)
                .map(|k| {
                    let per = uniform_level_mass::<S>(set, k);
                    S::from_count(set.cover_count(k).unwrap()) * per.clone() * per
                })
                .collect(),
        }
    }

    /// Verify additivity: `|mass(I) - sum of children|` at most `tol` at
    /// every internal node (`tol = 0` for exact scalars).
    pub fn check_additivity(&self, tol: &S) -> Result<()> {
        let MassKind::Dense { trie, mass } = &self.kind else {
            return Ok(()); // closed-form masses are additive by definition
        };
        for k in 0..self.depth {
            for node in trie.level_nodes(k) {
                let mut total = S::zero();
                for (_, child) in trie.children_of(node) {
                    total = total + mass[child as usize].clone();
                }
                let parent = mass[node as usize].clone();
                let gap = if parent >= total {
                    parent - total
                } else {
                    total - parent
                };
                if &gap > tol {
                    return Err(CantorError::Integrity(format!(
                        "node {node} at level {k}: parent mass differs from children sum by {}",
                        gap.render()
                    )));
                }
            }
        }
        Ok(())
    }

    /// The support as a set.
    pub fn support(&self) -> CantorSet {
        match &self.kind {
            MassKind::Dense { trie, .. } => CantorSet::from_trie(trie.clone()),
            MassKind::Uniform { set } => set.clone(),
        }
    }

    /// Smallest constant `c` with `mass(I) <= c * r^(k*alpha)` over all
    /// levels and alive cylinders.
    pub fn frostman_constant(&self, p: &SpaceParams, alpha: f64) -> f64 {
        let mut worst = 0.0f64;
        match &self.kind {
            MassKind::Dense { trie, mass } => {
                for k in 0..=self.depth {
                    let scale = p.r().powf(k as f64 * alpha);
                    for node in trie.level_nodes(k) {
                        worst = worst.max(mass[node as usize].to_f64_lossy() / scale);
                    }
                }
            }
            MassKind::Uniform { set } => {
                for k in 0..=self.depth {
                    let per = uniform_level_mass::<S>(set, k).to_f64_lossy();
                    worst = worst.max(per / p.r().powf(k as f64 * alpha));
                }
            }
        }
        worst
    }

    /// Largest exponent `alpha` for which `mass(I) <= r^(k*alpha)` holds with
    /// constant 1 on every alive cylinder below the root.
    pub fn empirical_exponent(&self, p: &SpaceParams) -> f64 {
        let log_r = p.r().ln();
        let mut best = f64::INFINITY;
        match &self.kind {
            MassKind::Dense { trie, mass } => {
                for k in 1..=self.depth {
                    for node in trie.level_nodes(k) {
                        let v = mass[node as usize].to_f64_lossy();
                        if v > 0.0 {
                            best = best.min(v.ln() / (k as f64 * log_r));
                        }
                    }
                }
            }
            MassKind::Uniform { set } => {
                for k in 1..=self.depth {
                    let v = uniform_level_mass::<S>(set, k).to_f64_lossy();
                    best = best.min(v.ln() / (k as f64 * log_r));
                }
            }
        }
        best
    }
}

fn uniform_level_mass<S: MassScalar>(set: &CantorSet, level: usize) -> S {
    S::one() / S::from_count(set.cover_count(level).unwrap())
}

/// Text export: trie format with ` mass=<decimal>` appended per leaf line.
pub fn mass_trie_to_text(mt: &MassTrie<f64>) -> Result<String> {
    use std::fmt::Write as _;
    let support = mt.support();
    let trie = support.to_trie()?;
    let mut out = String::new();
    writeln!(out, "m={} depth={}", mt.m(), mt.depth()).unwrap();
    for w in trie.leaf_words() {
        let mass = mt.mass_of_word(&w)?;
        writeln!(out, "{w} mass={mass}").unwrap();
    }
    Ok(out)
}

/// Parse the measure text format back into a dense mass trie.
pub fn mass_trie_from_text(text: &str) -> Result<MassTrie<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CantorError::Parse("missing header".into()))?;
    let (m, depth) = crate::trie::parse_header(header)?;
    let mut pairs: Vec<(Word, f64)> = Vec::new();
    for line in lines {
        let mut fields = line.split_whitespace();
        let word = Word::parse(
            fields.next().ok_or_else(|| CantorError::Parse("empty line".into()))?,
            m,
        )?;
        let mass_field = fields
            .next()
            .and_then(|f| f.strip_prefix("mass="))
            .ok_or_else(|| CantorError::Parse(format!("missing mass= on line {line:?}")))?;
        let mass: f64 =
            mass_field.parse().map_err(|e| CantorError::Parse(format!("bad mass: {e}")))?;
        pairs.push((word, mass));
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    let trie =
        CylinderTrie::from_leaf_words(m, depth, pairs.iter().map(|(w, _)| w.clone()))?;
    let masses = pairs.into_iter().map(|(_, v)| v).collect();
    MassTrie::from_leaf_masses(trie, masses)
}

/// The martingale of a `(mu, nu, sigma)` triple.
pub struct Martingale<'a, S: MassScalar> {
    mu: &'a MassTrie<S>,
    nu: &'a MassTrie<S>,
    aut: &'a Automorphism,
}

impl<'a, S: MassScalar> Martingale<'a, S> {
    pub fn new(mu: &'a MassTrie<S>, nu: &'a MassTrie<S>, aut: &'a Automorphism) -> Result<Self> {
        if mu.m() != nu.m() || mu.m() != aut.m() {
            return Err(CantorError::InvalidParams(format!(
                "alphabet mismatch: mu m={}, nu m={}, sigma m={}",
                mu.m(),
                nu.m(),
                aut.m()
            )));
        }
        Ok(Martingale { mu, nu, aut })
    }

    fn max_level(&self) -> usize {
        self.mu.depth().min(self.nu.depth()).min(self.aut.max_depth())
    }

    /// Walk to cylinder `A` on the image side, returning the paired cursors
    /// and the preimage automorphism node, or None when `tau` vanishes on
    /// `A` outright.
    fn seek(&self, a: &Word) -> Option<(u32, u32, AutNode)> {
        let mut mu_cur = self.mu.root_cursor()?;
        let mut nu_cur = self.nu.root_cursor()?;
        let mut node = self.aut.root_node();
        for &c in a.digits() {
            let d = self.aut.perm_at(&node).preimage(c);
            mu_cur = self.mu.child(mu_cur, c)?;
            nu_cur = self.nu.child(nu_cur, d)?;
            node = self.aut.child_node(&node, d);
        }
        Some((mu_cur, nu_cur, node))
    }

    /// `tau_l(A)`.
    pub fn tau(&self, a: &Word, l: usize) -> Result<S> {
        Ok(self.trajectory(a, l)?.pop().unwrap())
    }

    /// `tau_k(A), ..., tau_lmax(A)` where `k = |A|`. The last entry is the
    /// depth-truncated surrogate for the limit value.
    pub fn trajectory(&self, a: &Word, l_max: usize) -> Result<Vec<S>> {
        let k = a.len();
        if l_max < k || l_max > self.max_level() {
            return Err(CantorError::LevelOutOfRange { k: l_max, depth: self.max_level() });
        }
        let mut sums = vec![S::zero(); l_max - k + 1];
        if let Some((mu_cur, nu_cur, node)) = self.seek(a) {
            self.accumulate(mu_cur, nu_cur, &node, k, k, l_max, &mut sums);
        }
        let m = S::from_count(self.mu.m() as u64);
        Ok(sums
            .into_iter()
            .enumerate()
            .map(|(i, total)| scalar_pow(&m, (k + i) as u64) * total)
            .collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate(
        &self,
        mu_cur: u32,
        nu_cur: u32,
        node: &AutNode,
        level: usize,
        base: usize,
        l_max: usize,
        sums: &mut [S],
    ) {
        let term = self.mu.mass_at(mu_cur, level) * self.nu.mass_at(nu_cur, level);
        sums[level - base] = sums[level - base].clone() + term;
        if level == l_max {
            return;
        }
        let perm = self.aut.perm_at(node);
        for (c, mu_child) in self.mu.children(mu_cur) {
            let d = perm.preimage(c);
            if let Some(nu_child) = self.nu.child(nu_cur, d) {
                let next = self.aut.child_node(node, d);
                self.accumulate(mu_child, nu_child, &next, level + 1, base, l_max, sums);
            }
        }
    }

    /// Depth-L surrogate of the limit measure: the `MassTrie` whose node
    /// masses are `tau_L` of the corresponding cylinders. Its support is the
    /// joint-alive trie.
    pub fn surrogate(&self, depth: usize) -> Result<MassTrie<S>> {
        if depth > self.max_level() {
            return Err(CantorError::LevelOutOfRange { k: depth, depth: self.max_level() });
        }
        let mut words: Vec<Word> = Vec::new();
        let mut masses: Vec<S> = Vec::new();
        if let Some((mu_cur, nu_cur, node)) = self.seek(&Word::root()) {
            let scale = scalar_pow(&S::from_count(self.mu.m() as u64), depth as u64);
            let mut stack = Vec::with_capacity(depth);
            self.collect_leaves(
                mu_cur, nu_cur, &node, 0, depth, &scale, &mut stack, &mut words, &mut masses,
            );
        }
        let trie = CylinderTrie::from_leaf_words(self.mu.m(), depth, words)?;
        MassTrie::from_leaf_masses(trie, masses)
    }

    #[allow(clippy::too_many_arguments)]
    fn collect_leaves(
        &self,
        mu_cur: u32,
        nu_cur: u32,
        node: &AutNode,
        level: usize,
        depth: usize,
        scale: &S,
        stack: &mut Vec<u8>,
        words: &mut Vec<Word>,
        masses: &mut Vec<S>,
    ) {
        if level == depth {
            // Image-side DFS in digit order keeps leaves lexicographic,
            // matching from_leaf_masses' expected order.
            words.push(Word::from_digits(stack.clone(), self.mu.m()).unwrap());
            masses.push(
                scale.clone()
                    * self.mu.mass_at(mu_cur, level)
                    * self.nu.mass_at(nu_cur, level),
            );
            return;
        }
        let perm = self.aut.perm_at(node);
        for (c, mu_child) in self.mu.children(mu_cur) {
            let d = perm.preimage(c);
            if let Some(nu_child) = self.nu.child(nu_cur, d) {
                let next = self.aut.child_node(node, d);
                stack.push(c);
                self.collect_leaves(
                    mu_child, nu_child, &next, level + 1, depth, scale, stack, words, masses,
                );
                stack.pop();
            }
        }
    }
}

/// Validate that a surrogate's positive-mass depth-L cylinders are alive in
/// `mu`'s support with preimage alive in `nu`'s support.
pub fn surrogate_support_ok<S: MassScalar>(
    tau: &MassTrie<S>,
    mu: &MassTrie<S>,
    nu: &MassTrie<S>,
    aut: &Automorphism,
) -> Result<bool> {
    let support = tau.support().to_trie()?;
    for w in support.leaf_words() {
        if tau.mass_of_word(&w)? <= S::zero() {
            continue;
        }
        if mu.mass_of_word(&w)? <= S::zero() {
            return Ok(false);
        }
        let pre = aut.apply_inverse(&w)?;
        if nu.mass_of_word(&pre)? <= S::zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Build the depth-L surrogate and check its support is contained in the
/// intersection structure.
pub fn support_check<S: MassScalar>(
    mu: &MassTrie<S>,
    nu: &MassTrie<S>,
    aut: &Automorphism,
    depth: usize,
) -> Result<bool> {
    let mart = Martingale::new(mu, nu, aut)?;
    let tau = mart.surrogate(depth)?;
    surrogate_support_ok(&tau, mu, nu, aut)
}

/// Frostman data `(alpha, c)` for a measure: `mass(I) <= c * r^(k*alpha)`.
#[derive(Debug, Clone, Copy)]
pub struct FrostmanBound {
    pub alpha: f64,
    pub c: f64,
}

impl FrostmanBound {
    /// Measure the constant for a chosen exponent.
    pub fn measured(mt: &MassTrie<f64>, p: &SpaceParams, alpha: f64) -> Self {
        FrostmanBound { alpha, c: mt.frostman_constant(p, alpha) }
    }
}

/// Monte Carlo second-moment statistics of `tau_l(A)` over fresh isometry
/// seeds.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SecondMomentStats {
    pub l: usize,
    pub mean: f64,
    pub m2: f64,
    pub bound_ratio: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Estimate `E[tau_l(A)]` and `E[tau_l(A)^2]` and compare the second moment
/// against the L2 bound `c_0 * mu(A) * r^(k d)` where
/// `d = alpha + beta + log m / log r`, `c_0 = c_E c_F + c_1` and `c_1` is
/// the exact geometric-series constant `c_E c_F r^d / (1 - r^d)`.
#[allow(clippy::too_many_arguments)]
pub fn second_moment_stats(
    mu: &MassTrie<f64>,
    nu: &MassTrie<f64>,
    mu_bound: &FrostmanBound,
    nu_bound: &FrostmanBound,
    p: &SpaceParams,
    a: &Word,
    l: usize,
    trials: u64,
    seed: u64,
) -> Result<SecondMomentStats> {
    let d = mu_bound.alpha + nu_bound.alpha + p.log_ratio();
    if d <= 0.0 {
        return Err(CantorError::Hypothesis(format!(
            "second-moment bound needs alpha + beta + log m/log r > 0, got {d}"
        )));
    }
    let k = a.len();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let aut = Automorphism::sample(p, trial_seed(seed, t));
            let mart = Martingale::new(mu, nu, &aut).expect("matching alphabets");
            mart.tau(a, l).expect("level within depth")
        })
        .collect();
    let mean = pairwise_sum(&values) / trials as f64;
    let squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    let m2 = pairwise_sum(&squares) / trials as f64;

    let rho = p.r().powf(d);
    let c = mu_bound.c * nu_bound.c;
    let c1 = c * rho / (1.0 - rho);
    let c0 = c + c1;
    let bound = c0 * mu.mass_of_word(a)?.to_f64_lossy() * p.r().powf(k as f64 * d);
    Ok(SecondMomentStats { l, mean, m2, bound_ratio: m2 / bound, trials, seed })
}
