//! Dimension functionals: the interval premeasure and the s-energy.
//!
//! **Premeasure.** `M^s_delta(A)` is the infimum of `sum d(I_i)^s` over
//! covers of `A` by intervals of diameter at most `delta = r^j`. On a
//! finite-depth trie the infimum over countable interval covers is attained
//! by an antichain of alive nodes, so a bottom-up dynamic program is exact:
//! `cost(I) = min(r^(|I| s), sum of children costs)` for nodes of level
//! `>= j`, plain children sums above the cutoff.
//!
//! **Energy.** The kernel `d(x, y)^{-s}` is constant, `r^{-ks}`, on pairs
//! whose meet is a level-k cylinder, so the double integral splits exactly
//! by meet level with no quadrature:
//!
//! ```text
//! I_s(tau) = sum_k r^{-ks} * sum_{I in U_k} (tau(I)^2 - sum_{J child of I} tau(J)^2)
//! ```
//!
//! A depth-L trie cannot separate pairs inside one leaf; that diagonal part,
//! `r^{-Ls} * sum of leaf masses squared`, is reported alongside the value
//! rather than silently folded in.

use serde::Serialize;

use crate::error::{CantorError, Result};
use crate::isometry::Automorphism;
use crate::measure::{FrostmanBound, Martingale, MassTrie};
use crate::rng::{pairwise_sum, trial_seed};
use crate::scalar::{scalar_pow, MassScalar};
use crate::sets::CantorSet;
use crate::space::{SpaceParams, Word};

use rayon::prelude::*;

/// Premeasure value at one `(s, delta)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct PremeasureResult {
    pub s: f64,
    /// Cover intervals were constrained to diameter at most `r^delta_level`.
    pub delta_level: usize,
    pub value: f64,
    /// An optimal cover, when requested (words of the chosen intervals).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<Vec<String>>,
}

/// Exact infimum over interval covers with diameters at most `r^j`, as a
/// weighted DP with per-level weight `w^k` standing for `d(I)^s = (r^s)^k`.
///
/// Runs on any scalar so the enumeration oracles can use exact rationals.
pub fn premeasure_weighted<S: MassScalar>(set: &CantorSet, w: &S, j: usize) -> Result<S> {
    if j > set.depth() {
        return Err(CantorError::LevelOutOfRange { k: j, depth: set.depth() });
    }
    if set.is_empty() {
        return Ok(S::zero());
    }
    if set.is_intensional() {
        // All nodes of a level share one cost; run the DP on levels.
        let branching = S::from_count(set.cover_count(1)?);
        let mut cost = scalar_pow(w, set.depth() as u64);
        for level in (0..set.depth()).rev() {
            let sum = branching.clone() * cost;
            cost = if level >= j {
                let own = scalar_pow(w, level as u64);
                if own < sum {
                    own
                } else {
                    sum
                }
            } else {
                sum
            };
        }
        return Ok(cost);
    }

    let trie = set.to_trie()?;
    let mut cost: Vec<S> = vec![S::zero(); trie.node_count()];
    let leaf_cost = scalar_pow(w, trie.depth() as u64);
    for node in trie.level_nodes(trie.depth()) {
        cost[node as usize] = leaf_cost.clone();
    }
    for level in (0..trie.depth()).rev() {
        let own = scalar_pow(w, level as u64);
        for node in trie.level_nodes(level) {
            let mut sum = S::zero();
            for (_, child) in trie.children_of(node) {
                sum = sum + cost[child as usize].clone();
            }
            cost[node as usize] = if level >= j && own < sum { own.clone() } else { sum };
        }
    }
    Ok(cost[0].clone())
}

/// Floating premeasure `M^s_{r^j}` of the set, optionally extracting one
/// optimal cover.
pub fn premeasure(
    set: &CantorSet,
    p: &SpaceParams,
    s: f64,
    j: usize,
    want_cover: bool,
) -> Result<PremeasureResult> {
    if s < 0.0 {
        return Err(CantorError::InvalidParams(format!("s must be >= 0, got {s}")));
    }
    let w = p.r().powf(s);
    let value = premeasure_weighted(set, &w, j)?;
    let cover = if want_cover { Some(optimal_cover(set, w, j)?) } else { None };
    Ok(PremeasureResult { s, delta_level: j, value, cover })
}

/// Extract one optimal cover for the floating DP (ties broken toward the
/// shallower interval).
fn optimal_cover(set: &CantorSet, w: f64, j: usize) -> Result<Vec<String>> {
    let trie = set.to_trie()?;
    if trie.is_empty() {
        return Ok(Vec::new());
    }
    let mut cost: Vec<f64> = vec![0.0; trie.node_count()];
    for node in trie.level_nodes(trie.depth()) {
        cost[node as usize] = w.powi(trie.depth() as i32);
    }
    for level in (0..trie.depth()).rev() {
        let own = w.powi(level as i32);
        for node in trie.level_nodes(level) {
            let sum: f64 = trie.children_of(node).map(|(_, c)| cost[c as usize]).sum();
            cost[node as usize] = if level >= j && own <= sum { own } else { sum };
        }
    }
    let mut out = Vec::new();
    let mut stack: Vec<(u32, Word, usize)> = vec![(0, Word::root(), 0)];
    while let Some((node, word, level)) = stack.pop() {
        let own = w.powi(level as i32);
        if level == trie.depth() || (level >= j && own <= cost[node as usize]) {
            out.push(word.to_string());
            continue;
        }
        for (d, child) in trie.children_of(node) {
            stack.push((child, word.child(d), level + 1));
        }
    }
    out.sort();
    Ok(out)
}

/// s-energy of a mass trie via the meet-level decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyResult {
    pub s: f64,
    pub depth: usize,
    /// Energy of all pairs separated above the leaf level.
    pub value: f64,
    /// Unresolved same-leaf contribution `r^{-Ls} * sum tau(leaf)^2`,
    /// reported separately.
    pub diagonal: f64,
    /// Per-meet-level terms, `terms[k]` for level k.
    pub terms: Vec<f64>,
}

/// Energy with explicit per-level kernel `inv_w^k` standing for `r^{-ks}`.
/// Returns `(per-level terms, diagonal)`.
pub fn energy_weighted<S: MassScalar>(
    tau: &MassTrie<S>,
    inv_w: &S,
    additivity_tol: &S,
) -> Result<(Vec<S>, S)> {
    tau.check_additivity(additivity_tol)?;
    let square_sums = tau.level_square_sums();
    let depth = tau.depth();
    let mut terms = Vec::with_capacity(depth);
    let mut kernel = S::one();
    for k in 0..depth {
        let gap = square_sums[k].clone() - square_sums[k + 1].clone();
        terms.push(kernel.clone() * gap);
        kernel = kernel * inv_w.clone();
    }
    let diagonal = kernel * square_sums[depth].clone();
    Ok((terms, diagonal))
}

/// s-energy of `tau` under the space metric.
pub fn energy(tau: &MassTrie<f64>, p: &SpaceParams, s: f64) -> Result<EnergyResult> {
    if s <= 0.0 {
        return Err(CantorError::InvalidParams(format!("s must be > 0, got {s}")));
    }
    let inv_w = p.r().powf(-s);
    let (terms, diagonal) = energy_weighted(tau, &inv_w, &1e-9)?;
    for (k, t) in terms.iter().enumerate() {
        if *t < -1e-9 {
            return Err(CantorError::Integrity(format!("negative energy term {t} at level {k}")));
        }
    }
    Ok(EnergyResult { s, depth: tau.depth(), value: pairwise_sum(&terms), diagonal, terms })
}

/// Monte Carlo mean of the per-level energy terms of the intersection
/// surrogate, over fresh isometry seeds. The level-k mean is expected to
/// decay geometrically at rate `r^(alpha + beta + log m/log r - s)`.
#[allow(clippy::too_many_arguments)]
pub fn energy_growth_probe(
    mu: &MassTrie<f64>,
    nu: &MassTrie<f64>,
    mu_bound: &FrostmanBound,
    nu_bound: &FrostmanBound,
    p: &SpaceParams,
    s: f64,
    l_max: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = mu_bound.alpha + nu_bound.alpha + p.log_ratio();
    if s >= d {
        return Err(CantorError::Hypothesis(format!(
            "energy probe needs s < alpha + beta + log m/log r = {d}, got s = {s}"
        )));
    }
    if s < 0.0 {
        return Err(CantorError::InvalidParams(format!("s must be >= 0, got {s}")));
    }
    let inv_w = p.r().powf(-s);
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let aut = Automorphism::sample(p, trial_seed(seed, t));
            let mart = Martingale::new(mu, nu, &aut).expect("matching alphabets");
            let tau = mart.surrogate(l_max).expect("depth within range");
            let (terms, _) = energy_weighted(&tau, &inv_w, &1e-9).expect("additive by construction");
            terms
        })
        .collect();
    let mut means = Vec::with_capacity(l_max);
    for k in 0..l_max {
        let column: Vec<f64> = per_trial.iter().map(|t| t[k]).collect();
        means.push(pairwise_sum(&column) / trials as f64);
    }
    Ok(means)
}

/// Least-squares decay rate of a positive sequence: fits
/// `log y_k ~ a + k log rate` over `k_range` and returns `rate`.
pub fn fitted_decay_rate(values: &[f64], k_range: (usize, usize)) -> Option<f64> {
    let (lo, hi) = k_range;
    if hi >= values.len() || lo + 1 > hi {
        return None;
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&k| values[k] > 0.0)
        .map(|k| (k as f64, values[k].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|(x, _)| x).sum::<f64>() / n;
    let ym = pts.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|(x, _)| (x - xm) * (x - xm)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - xm) * (y - ym)).sum();
    Some((sxy / sxx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MassTrie;
    use crate::sets::{build_set, SetSpec};
    use crate::space::metric_distance;
    use crate::trie::{random_trie, CylinderTrie};
    use num::{BigRational, One, Zero};

    fn p33() -> SpaceParams {
        SpaceParams::new(3, 1.0 / 3.0).unwrap()
    }

    /// Brute-force minimum over every antichain cover (test oracle,
    /// exponential).
    fn antichain_minimum<S: MassScalar>(trie: &CylinderTrie, w: &S, j: usize) -> S {
        fn covers<S: MassScalar>(
            trie: &CylinderTrie,
            node: u32,
            level: usize,
            w: &S,
            j: usize,
        ) -> Vec<S> {
            let mut options = Vec::new();
            if level >= j {
                options.push(scalar_pow(w, level as u64));
            }
            if level < trie.depth() {
                let mut sums: Vec<S> = vec![S::zero()];
                for (_, child) in trie.children_of(node) {
                    let child_options = covers(trie, child, level + 1, w, j);
                    let mut next = Vec::with_capacity(sums.len() * child_options.len());
                    for base in &sums {
                        for opt in &child_options {
                            next.push(base.clone() + opt.clone());
                        }
                    }
                    sums = next;
                }
                options.extend(sums);
            }
            options
        }
        let all = covers(trie, trie.root().unwrap(), 0, w, j);
        all.into_iter()
            .reduce(|a, b| if a < b { a } else { b })
            .expect("nonempty option list")
    }

    /// O(n^2) pair-sum energy oracle over leaves.
    fn pair_sum_energy(tau: &MassTrie<f64>, p: &SpaceParams, s: f64) -> (f64, f64) {
        let trie = tau.support().to_trie().unwrap();
        let leaves = trie.leaf_words();
        let masses: Vec<f64> = leaves.iter().map(|w| tau.mass_of_word(w).unwrap()).collect();
        let mut off_diag = 0.0;
        let mut diag = 0.0;
        for i in 0..leaves.len() {
            for k in 0..leaves.len() {
                let weight = masses[i] * masses[k];
                if i == k {
                    diag += weight * p.r().powf(-(trie.depth() as f64) * s);
                } else {
                    let d = metric_distance(&leaves[i], &leaves[k], p).unwrap();
                    off_diag += weight * d.value.powf(-s);
                }
            }
        }
        (off_diag, diag)
    }

    #[test]
    fn full_space_premeasure_at_ambient_is_one() {
        let p = p33();
        for depth in [1usize, 3, 8, 20] {
            let set = CantorSet::full(3, depth);
            for j in 0..=depth.min(5) {
                let res = premeasure(&set, &p, p.ambient_dim(), j, false).unwrap();
                assert!((res.value - 1.0).abs() < 1e-9, "depth {depth} j {j}: {}", res.value);
            }
            // Exact in rational mode: weight r^s = 1/m exactly.
            let w = BigRational::new(1.into(), 3.into());
            for j in 0..=depth.min(5) {
                assert_eq!(premeasure_weighted(&set, &w, j).unwrap(), BigRational::one());
            }
        }
    }

    #[test]
    fn full_space_supercritical_s_takes_deep_cover() {
        // s = 1.2 > ambient: every refinement is cheaper, value = (3 r^1.2)^L.
        let p = p33();
        let set = CantorSet::full(3, 20);
        let res = premeasure(&set, &p, 1.2, 0, false).unwrap();
        let expected = 3f64.powi(20) * (1.0f64 / 3.0).powf(1.2 * 20.0);
        assert!((res.value - expected).abs() < 1e-12 * expected.max(1.0),
            "value {} expected {expected}", res.value);
        assert!((expected - 3f64.powi(-4)).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_antichain_oracle_float_and_exact() {
        let p = p33();
        for seed in 0..15u64 {
            let trie = random_trie(3, 3, 1000 + seed);
            let set = CantorSet::from_trie(trie.clone());
            for j in 0..=3usize {
                // float
                let s = 0.7;
                let w = p.r().powf(s);
                let dp = premeasure(&set, &p, s, j, false).unwrap().value;
                let brute = antichain_minimum(&trie, &w, j);
                assert!((dp - brute).abs() < 1e-12, "seed {seed} j {j}");
                // exact rational, zero tolerance
                let wq = BigRational::new(2.into(), 5.into());
                let dpq = premeasure_weighted(&set, &wq, j).unwrap();
                let bruteq = antichain_minimum(&trie, &wq, j);
                assert_eq!(dpq, bruteq, "seed {seed} j {j}");
            }
        }
    }

    #[test]
    fn premeasure_monotone_in_delta_level() {
        // Shrinking delta (raising j) restricts covers, so the value cannot
        // decrease.
        let p = p33();
        for seed in 0..10u64 {
            let set = CantorSet::from_trie(random_trie(3, 4, 2000 + seed));
            let mut prev = -1.0;
            for j in 0..=4usize {
                let value = premeasure(&set, &p, 0.5, j, false).unwrap().value;
                assert!(value >= prev - 1e-15, "seed {seed} j {j}: {value} < {prev}");
                prev = value;
            }
        }
    }

    #[test]
    fn optimal_cover_is_consistent_with_value() {
        let p = p33();
        let set = CantorSet::from_trie(random_trie(3, 4, 31));
        let s = 0.8;
        let res = premeasure(&set, &p, s, 1, true).unwrap();
        let cover = res.cover.unwrap();
        let total: f64 = cover
            .iter()
            .map(|text| {
                let w = Word::parse(text, 3).unwrap();
                assert!(w.len() >= 1, "cover interval {text} above the delta level");
                p.r().powf(s * w.len() as f64)
            })
            .sum();
        assert!((total - res.value).abs() < 1e-12);
    }

    #[test]
    fn negative_s_is_rejected() {
        let set = CantorSet::full(3, 3);
        assert!(premeasure(&set, &p33(), -0.1, 0, false).is_err());
    }

    #[test]
    fn uniform_full_energy_matches_geometric_series() {
        // Per-level terms are (1 - 1/m) q^k with q = r^{-s}/m.
        let p = p33();
        let s = 0.5;
        let mu: MassTrie<f64> = MassTrie::natural(&CantorSet::full(3, 20)).unwrap();
        let res = energy(&mu, &p, s).unwrap();
        let q = p.r().powf(-s) / 3.0;
        let closed: f64 = (0..20).map(|k| (2.0 / 3.0) * q.powi(k)).sum();
        assert!((res.value - closed).abs() < 1e-12, "value {} closed {closed}", res.value);
        for (k, term) in res.terms.iter().enumerate() {
            assert!((term - (2.0 / 3.0) * q.powi(k as i32)).abs() < 1e-12);
        }
        assert!((res.diagonal - q.powi(20)).abs() < 1e-15);
        // Infinite-sum closed form: value plus the self-similar within-leaf
        // tail (diagonal times the full-space energy factor).
        let infinite = (2.0 / 3.0) / (1.0 - q);
        let tail = res.diagonal * (2.0 / 3.0) / (1.0 - q);
        assert!((res.value + tail - infinite).abs() < 1e-9);
    }

    #[test]
    fn zero_measure_has_zero_energy() {
        let trie = random_trie(3, 4, 77);
        let leaves = trie.level_nodes(4).len();
        let tau = MassTrie::from_leaf_masses(trie, vec![0.0; leaves]).unwrap();
        let res = energy(&tau, &p33(), 0.5).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(res.diagonal, 0.0);
    }

    #[test]
    fn energy_matches_pair_sum_oracle() {
        let p = p33();
        for seed in 0..8u64 {
            let trie = random_trie(3, 5, 3000 + seed);
            let set = CantorSet::from_trie(trie);
            let tau: MassTrie<f64> = MassTrie::natural(&set).unwrap();
            for s in [0.3, 0.5, 0.9] {
                let res = energy(&tau, &p, s).unwrap();
                let (off, diag) = pair_sum_energy(&tau, &p, s);
                assert!((res.value - off).abs() < 1e-9, "seed {seed} s {s}");
                assert!((res.diagonal - diag).abs() < 1e-9, "seed {seed} s {s}");
            }
        }
    }

    #[test]
    fn energy_terms_are_nonnegative() {
        let p = p33();
        for seed in 0..10u64 {
            let set = CantorSet::from_trie(random_trie(3, 5, 4000 + seed));
            let tau: MassTrie<f64> = MassTrie::natural(&set).unwrap();
            let res = energy(&tau, &p, 0.6).unwrap();
            for t in res.terms {
                assert!(t >= -1e-15);
            }
        }
    }

    #[test]
    fn energy_weighted_is_exact_in_rational_mode() {
        let trie = random_trie(2, 4, 5);
        let set = CantorSet::from_trie(trie);
        let tau: MassTrie<BigRational> = MassTrie::natural(&set).unwrap();
        let inv_w = BigRational::new(3.into(), 2.into());
        let (terms, _) = energy_weighted(&tau, &inv_w, &BigRational::zero()).unwrap();
        for t in terms {
            assert!(t >= BigRational::zero());
        }
    }

    #[test]
    fn probe_decay_matches_bound_rate_for_product_uniform() {
        // Full x Full: tau is deterministic, terms equal the closed form, so
        // the fitted rate equals r^{d - s} exactly with d = ambient.
        let p = p33();
        let mu: MassTrie<f64> = MassTrie::natural(&CantorSet::full(3, 10)).unwrap();
        let fb = FrostmanBound { alpha: p.ambient_dim(), c: 1.0 };
        let s = 0.5;
        let means = energy_growth_probe(&mu, &mu, &fb, &fb, &p, s, 10, 4, 9).unwrap();
        let q = p.r().powf(-s) / 3.0;
        for (k, mean) in means.iter().enumerate() {
            assert!((mean - (2.0 / 3.0) * q.powi(k as i32)).abs() < 1e-9);
        }
        let rate = fitted_decay_rate(&means, (2, 9)).unwrap();
        assert!((rate - p.r().powf(p.ambient_dim() - s)).abs() < 1e-6);
    }

    #[test]
    fn probe_refuses_supercritical_s() {
        let p = p33();
        let set = build_set(&SetSpec::DigitRestriction(vec![1, 2]), &p, 6).unwrap();
        let mu: MassTrie<f64> = MassTrie::natural(&set).unwrap();
        let alpha = 2f64.ln() / 3f64.ln();
        let fb = FrostmanBound { alpha, c: 1.0 };
        let d = 2.0 * alpha - 1.0;
        assert!(energy_growth_probe(&mu, &mu, &fb, &fb, &p, d + 0.01, 6, 5, 1).is_err());
    }
}
