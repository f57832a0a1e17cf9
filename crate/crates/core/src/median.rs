//! Median prices: posted-price runs, sale-probability estimation, sample
//! counts, Tatonnement for unit-demand bidders, verification and a small
//! exhaustive search for XOS instances.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid_param, Error, Result};
use crate::greedy::{welfare_of, Allocation, PriceVector};
use crate::instances::{check_permutation, DistributionSpec, ValuationProfile};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::valuations::{ItemSet, XosValuation};

/// Slack used when comparing exactly computed probabilities.
pub const PROB_EPS: f64 = 1e-9;

/// How an agent picks among utility-maximal bundles.
#[derive(Clone, Debug, PartialEq)]
pub enum ChoiceRule {
    /// Assumes a unique demand set; indifference is resolved by buying only
    /// items whose supporting value strictly beats the price.
    Generic,
    /// Buys covered items priced exactly at their supporting value; ties
    /// between clauses go to the lowest index.
    Lexicographic,
    /// Fresh `w ~ U[0,1]^m` per agent; picks a utility-maximal bundle
    /// maximising `sum_{j in S} (w_j - q_j)`.
    QRule { q: Vec<f64> },
}

impl ChoiceRule {
    pub fn uniform_q(m: usize, q: f64) -> Self {
        ChoiceRule::QRule { q: vec![q; m] }
    }

    pub fn name(&self) -> String {
        match self {
            ChoiceRule::Generic => "generic".into(),
            ChoiceRule::Lexicographic => "lexicographic".into(),
            ChoiceRule::QRule { q } => {
                let parts: Vec<String> = q.iter().map(|x| format!("{x}")).collect();
                format!("q-rule({})", parts.join(";"))
            }
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        if let ChoiceRule::QRule { q } = self {
            if q.len() != m {
                return Err(Error::ShapeMismatch(format!(
                    "q has {} entries for {m} items",
                    q.len()
                )));
            }
            if q.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("q entries must be finite".into()));
            }
        }
        Ok(())
    }

    fn needs_weights(&self) -> bool {
        matches!(self, ChoiceRule::QRule { .. })
    }
}

/// Bundle chosen by `v` at prices `p` among `available`; `w` is only read
/// by the q-rule.
pub(crate) fn choose<T: Scalar>(
    v: &XosValuation<T>,
    p: &[T],
    available: ItemSet,
    rule: &ChoiceRule,
    w: &[f64],
) -> ItemSet {
    match rule {
        ChoiceRule::Generic => v.demand_fast(p, available, false),
        ChoiceRule::Lexicographic => v.demand_fast(p, available, true),
        ChoiceRule::QRule { q } => {
            let st = v.demand_structure_of(p, available);
            let mut best: Option<(f64, ItemSet)> = None;
            for opt in &st.options {
                let extra: ItemSet = opt.optional.iter().filter(|&j| w[j] > q[j]).collect();
                let set = opt.forced.union(extra);
                let score: f64 = set.iter().map(|j| w[j] - q[j]).sum();
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, set));
                }
            }
            best.map_or(ItemSet::EMPTY, |(_, s)| s)
        }
    }
}

/// Exact distribution of the bundle chosen under `rule` (a point mass for
/// the deterministic rules). For the q-rule with a single optimal clause the
/// optional items are independent Bernoulli(`1 - q_j`) draws; with several
/// optimal clauses the choice probabilities are integrated on a midpoint
/// grid over the relevant coordinates of `w`.
pub(crate) fn choice_distribution<T: Scalar>(
    v: &XosValuation<T>,
    p: &[T],
    available: ItemSet,
    rule: &ChoiceRule,
) -> Vec<(ItemSet, f64)> {
    let q = match rule {
        ChoiceRule::QRule { q } => q,
        _ => return vec![(choose(v, p, available, rule, &[]), 1.0)],
    };
    let st = v.demand_structure_of(p, available);
    let mut distinct = st.options.clone();
    distinct.dedup_by(|a, b| a.forced == b.forced && a.optional == b.optional);
    let all_same = distinct
        .iter()
        .all(|o| o.forced == distinct[0].forced && o.optional == distinct[0].optional);
    if all_same {
        let opt = distinct[0];
        let optional: Vec<usize> = opt.optional.iter().collect();
        let mut out = Vec::with_capacity(1 << optional.len());
        for mask in 0u64..(1u64 << optional.len()) {
            let mut prob = 1.0;
            let mut set = opt.forced;
            for (b, &j) in optional.iter().enumerate() {
                let buy = 1.0 - q[j].clamp(0.0, 1.0);
                if mask >> b & 1 == 1 {
                    prob *= buy;
                    set.insert(j);
                } else {
                    prob *= 1.0 - buy;
                }
            }
            if prob > 0.0 {
                out.push((set, prob));
            }
        }
        return out;
    }
    let relevant: Vec<usize> = distinct
        .iter()
        .fold(ItemSet::EMPTY, |acc, o| {
            acc.union(o.forced).union(o.optional)
        })
        .iter()
        .collect();
    let d = relevant.len().max(1);
    let per_dim = ((1u64 << 18) as f64).powf(1.0 / d as f64).floor().max(2.0) as usize;
    let total = per_dim.pow(d as u32);
    let mut w = vec![0.0; v.m()];
    let mut counts: BTreeMap<ItemSet, usize> = BTreeMap::new();
    for cell in 0..total {
        let mut c = cell;
        for &j in &relevant {
            w[j] = ((c % per_dim) as f64 + 0.5) / per_dim as f64;
            c /= per_dim;
        }
        *counts.entry(choose(v, p, available, rule, &w)).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(s, c)| (s, c as f64 / total as f64))
        .collect()
}

/// Result of one sequential posted-price run.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismOutcome<T> {
    pub allocation: Allocation<T>,
    pub sold: ItemSet,
    pub revenue: T,
    /// Per-bidder utility `v_i(S_i) - p(S_i)`.
    pub surplus: Vec<T>,
    pub welfare: T,
}

/// Sequential posted-price mechanism: bidders arrive in `order` and each
/// buys a chosen utility-maximal bundle of the still-available items.
pub fn posted_price_run<T: Scalar, R: Rng + ?Sized>(
    p: &[T],
    profile: &ValuationProfile<T>,
    order: &[usize],
    rule: &ChoiceRule,
    rng: &mut R,
) -> Result<MechanismOutcome<T>> {
    let m = profile.m();
    let weights: Vec<Vec<f64>> = if rule.needs_weights() {
        (0..profile.n())
            .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
            .collect()
    } else {
        Vec::new()
    };
    posted_price_run_with_weights(p, profile, order, rule, &weights)
}

/// As [`posted_price_run`] with the q-rule weights given explicitly
/// (`weights[i]` for bidder `i`; ignored by the deterministic rules).
pub fn posted_price_run_with_weights<T: Scalar>(
    p: &[T],
    profile: &ValuationProfile<T>,
    order: &[usize],
    rule: &ChoiceRule,
    weights: &[Vec<f64>],
) -> Result<MechanismOutcome<T>> {
    let (n, m) = (profile.n(), profile.m());
    check_prices(p, m)?;
    check_permutation(order, n)?;
    rule.validate(m)?;
    if rule.needs_weights() && (weights.len() != n || weights.iter().any(|w| w.len() != m)) {
        return Err(Error::ShapeMismatch("q-rule weights must be n x m".into()));
    }
    Ok(run_unchecked(p, profile, order, rule, weights))
}

fn run_unchecked<T: Scalar>(
    p: &[T],
    profile: &ValuationProfile<T>,
    order: &[usize],
    rule: &ChoiceRule,
    weights: &[Vec<f64>],
) -> MechanismOutcome<T> {
    let (n, m) = (profile.n(), profile.m());
    let mut available = ItemSet::full(m);
    let mut bundles = vec![ItemSet::EMPTY; n];
    let mut surplus = vec![T::zero(); n];
    let mut revenue = T::zero();
    for &i in order {
        let w: &[f64] = if rule.needs_weights() {
            &weights[i]
        } else {
            &[]
        };
        let set = choose(&profile[i], p, available, rule, w);
        available = available.difference(set);
        let paid = set.iter().fold(T::zero(), |a, j| a + p[j]);
        revenue = revenue + paid;
        surplus[i] = profile[i].value_of(set) - paid;
        bundles[i] = set;
    }
    let allocation = Allocation::from_bundles_unchecked(profile, bundles);
    MechanismOutcome {
        sold: allocation.allocated(),
        welfare: welfare_of(profile, &allocation.bundles),
        allocation,
        revenue,
        surplus,
    }
}

fn check_prices<T: Scalar>(p: &[T], m: usize) -> Result<()> {
    if p.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} prices for {m} items",
            p.len()
        )));
    }
    if p.iter().any(|x| x.is_negative()) {
        return Err(Error::InvalidInput("prices must be non-negative".into()));
    }
    Ok(())
}

/// Where sale probabilities come from.
#[derive(Clone, Copy, Debug)]
pub enum PiSource<'a, T> {
    /// The empirical distribution over stored profiles. Deterministic rules
    /// give multiples of `1/k`; the q-rule is averaged exactly over its
    /// randomness.
    Empirical(&'a [ValuationProfile<T>]),
    /// Fresh draws from a distribution, one stream per trial.
    MonteCarlo {
        dist: &'a DistributionSpec<T>,
        trials: usize,
        seed: u64,
    },
    /// Exact probabilities for finite-support distributions.
    Exact(&'a DistributionSpec<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateMode {
    EmpiricalExact,
    MonteCarlo,
    Exact,
}

impl EstimateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateMode::EmpiricalExact => "empirical-exact",
            EstimateMode::MonteCarlo => "monte-carlo",
            EstimateMode::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaleProbEstimate {
    pub pi: Vec<f64>,
    pub trials: usize,
    pub mode: EstimateMode,
}

/// Per-item probability that the item is sold at prices `p`.
pub fn estimate_pi<T: Scalar>(
    p: &[T],
    source: PiSource<'_, T>,
    order: Option<&[usize]>,
    rule: &ChoiceRule,
) -> Result<SaleProbEstimate> {
    match source {
        PiSource::Empirical(samples) => {
            let first = samples
                .first()
                .ok_or_else(|| Error::InvalidInput("empty sample list".into()))?;
            let (n, m) = (first.n(), first.m());
            check_prices(p, m)?;
            rule.validate(m)?;
            let order = resolve_order(order, n)?;
            let mut pi = vec![0.0; m];
            for s in samples {
                first.same_shape(s, "empirical samples")?;
                if rule.needs_weights() {
                    let dp = exact_outcome(p, &point_supports(s), &order, rule);
                    pi.iter_mut().zip(&dp.pi).for_each(|(a, b)| *a += b);
                } else {
                    let out = run_unchecked(p, s, &order, rule, &[]);
                    for j in out.sold.iter() {
                        pi[j] += 1.0;
                    }
                }
            }
            let k = samples.len() as f64;
            pi.iter_mut().for_each(|x| *x /= k);
            Ok(SaleProbEstimate {
                pi,
                trials: samples.len(),
                mode: EstimateMode::EmpiricalExact,
            })
        }
        PiSource::MonteCarlo { dist, trials, seed } => {
            if trials == 0 {
                return Err(invalid_param("trials", trials, "need at least one trial"));
            }
            let m = dist.m();
            check_prices(p, m)?;
            rule.validate(m)?;
            let order = resolve_order(order, dist.n())?;
            let counts = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(seed, t as u64);
                    let profile = dist.sample_profile(&mut rng);
                    let out = posted_price_run(p, &profile, &order, rule, &mut rng)
                        .expect("validated inputs");
                    let mut c = vec![0u64; m];
                    for j in out.sold.iter() {
                        c[j] += 1;
                    }
                    c
                })
                .reduce(
                    || vec![0u64; m],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                );
            Ok(SaleProbEstimate {
                pi: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
                trials,
                mode: EstimateMode::MonteCarlo,
            })
        }
        PiSource::Exact(dist) => {
            let dp = exact_mechanism(p, dist, order, rule)?;
            Ok(SaleProbEstimate {
                pi: dp.pi,
                trials: 0,
                mode: EstimateMode::Exact,
            })
        }
    }
}

fn resolve_order(order: Option<&[usize]>, n: usize) -> Result<Vec<usize>> {
    match order {
        Some(o) => {
            check_permutation(o, n)?;
            Ok(o.to_vec())
        }
        None => Ok((0..n).collect()),
    }
}

fn point_supports<T: Scalar>(profile: &ValuationProfile<T>) -> Vec<Vec<(&XosValuation<T>, f64)>> {
    profile.iter().map(|v| vec![(v, 1.0)]).collect()
}

/// Exact expectations of one posted-price mechanism.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactOutcome {
    pub pi: Vec<f64>,
    pub welfare: f64,
    pub revenue: f64,
}

/// Exact sale probabilities, welfare and revenue for a finite-support
/// distribution, by dynamic programming over the set of still-available
/// items.
pub fn exact_mechanism<T: Scalar>(
    p: &[T],
    dist: &DistributionSpec<T>,
    order: Option<&[usize]>,
    rule: &ChoiceRule,
) -> Result<ExactOutcome> {
    let m = dist.m();
    check_prices(p, m)?;
    rule.validate(m)?;
    let order = resolve_order(order, dist.n())?;
    let supports: Vec<Vec<(&XosValuation<T>, f64)>> = dist
        .bidders()
        .iter()
        .map(|b| {
            b.support().ok_or_else(|| {
                Error::InvalidInput("exact computation needs finite supports".into())
            })
        })
        .collect::<Result<_>>()?;
    Ok(exact_outcome(p, &supports, &order, rule))
}

fn exact_outcome<T: Scalar>(
    p: &[T],
    supports: &[Vec<(&XosValuation<T>, f64)>],
    order: &[usize],
    rule: &ChoiceRule,
) -> ExactOutcome {
    let m = p.len();
    let mut pi = vec![0.0; m];
    let mut welfare = 0.0;
    let mut revenue = 0.0;
    let mut states: BTreeMap<ItemSet, f64> = BTreeMap::new();
    states.insert(ItemSet::full(m), 1.0);
    for &i in order {
        let mut next: BTreeMap<ItemSet, f64> = BTreeMap::new();
        for (&avail, &pr) in &states {
            for &(v, pv) in &supports[i] {
                if pv <= 0.0 {
                    continue;
                }
                for (set, pc) in choice_distribution(v, p, avail, rule) {
                    let prob = pr * pv * pc;
                    *next.entry(avail.difference(set)).or_default() += prob;
                    for j in set.iter() {
                        pi[j] += prob;
                        revenue += prob * p[j].as_f64();
                    }
                    welfare += prob * v.value_of(set).as_f64();
                }
            }
        }
        states = next;
    }
    ExactOutcome {
        pi,
        welfare,
        revenue,
    }
}

/// `ceil(C * eps^-2 * (m^2 + m ln n + ln(1/delta)))`.
///
/// `eps` may be 1 (the formula is still meaningful there); `delta` must lie
/// in (0, 1).
pub fn sample_count(eps: f64, delta: f64, n: usize, m: usize, c: f64) -> Result<u64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid_param("eps", eps, "must lie in (0, 1]"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid_param("delta", delta, "must lie in (0, 1)"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid_param("C", c, "must be positive"));
    }
    if n == 0 || m == 0 {
        return Err(invalid_param(
            "n, m",
            format!("{n}, {m}"),
            "must be positive",
        ));
    }
    let (n, m) = (n as f64, m as f64);
    let k = c / (eps * eps) * (m * m + m * n.ln() - delta.ln());
    Ok(k.ceil() as u64)
}

/// One raise of the Tatonnement loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TatonnementStep {
    pub iteration: usize,
    /// Integer sale-count threshold `t`; `None` when no valid threshold
    /// exists and the over-sold items were raised directly.
    pub threshold: Option<usize>,
    pub raised: ItemSet,
    /// Smallest switch gap over the affected agents.
    pub min_gap: f64,
    pub increment: f64,
    pub counts_before: Vec<usize>,
    pub counts_after: Vec<usize>,
    pub potential_before: f64,
    pub potential_after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TatonnementResult<T> {
    pub prices: PriceVector<T>,
    pub trace: Vec<TatonnementStep>,
    /// Sample count after padding to an even number.
    pub k: usize,
    pub counts: Vec<usize>,
    pub pi: Vec<f64>,
}

impl<T> TatonnementResult<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// `eps * k^2 * (m - 1) / 2`.
pub fn tatonnement_iteration_bound(eps: f64, k: usize, m: usize) -> f64 {
    eps * (k * k) as f64 * (m as f64 - 1.0) / 2.0
}

/// Potential of a sale-count vector: zero up to `k/2`, quadratic in the
/// excess up to `eps*k`, linear (slope `eps*k`) beyond.
pub fn tatonnement_potential(counts: &[usize], k: usize, eps: f64) -> f64 {
    let ek = eps * k as f64;
    counts
        .iter()
        .map(|&c| {
            let x = c as f64 - k as f64 / 2.0;
            if x <= 0.0 {
                0.0
            } else if x <= ek + PROB_EPS {
                x * x
            } else {
                ek * x
            }
        })
        .sum()
}

/// Learns approximately median prices for unit-demand bidders from `k`
/// sampled profiles.
///
/// Starting from zero prices, while some item sells in more than
/// `(1/2 + eps) k` samples, the items selling above an integer threshold
/// `t in (k/2, k/2 + eps k)` that no item's count equals are raised
/// uniformly, just past the point where the first agent holding one of them
/// switches to an item outside the set or to nothing. When no such `t`
/// exists, the items above `(1/2 + eps) k` are raised instead.
pub fn tatonnement_unit_demand<T: Scalar>(
    samples: &[ValuationProfile<T>],
    eps: f64,
) -> Result<TatonnementResult<T>> {
    tatonnement_with_cap(samples, eps, None)
}

pub fn tatonnement_with_cap<T: Scalar>(
    samples: &[ValuationProfile<T>],
    eps: f64,
    max_iterations: Option<usize>,
) -> Result<TatonnementResult<T>> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(invalid_param("eps", eps, "must lie in (0, 1/2)"));
    }
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidInput("empty sample list".into()))?;
    let m = first.m();
    for s in samples {
        first.same_shape(s, "Tatonnement samples")?;
        if s.iter().any(|v| !v.is_unit_demand_shaped()) {
            return Err(Error::InvalidInput(
                "Tatonnement needs unit-demand valuations".into(),
            ));
        }
    }
    let mut samples: Vec<&ValuationProfile<T>> = samples.iter().collect();
    if samples.len() % 2 == 1 {
        samples.push(samples[0]);
    }
    let k = samples.len();
    if (k as f64) / eps <= m as f64 {
        return Err(invalid_param(
            "k/eps",
            (k as f64) / eps,
            "must exceed the item count",
        ));
    }
    // values[l][i][j] = v_i^l({j})
    let values: Vec<Vec<Vec<T>>> = samples
        .iter()
        .map(|s| {
            s.iter()
                .map(|v| (0..m).map(|j| v.singleton_value(j)).collect())
                .collect()
        })
        .collect();
    let order: Vec<usize> = (0..first.n()).collect();
    let upper = k as f64 * (0.5 + eps);
    let cap = max_iterations
        .unwrap_or_else(|| (4.0 * tatonnement_iteration_bound(eps, k, m.max(2)) + 1000.0) as usize);

    let mut prices = vec![T::zero(); m];
    let mut trace = Vec::new();
    let mut counts = sale_counts(&samples, &prices, &order);
    loop {
        if counts.iter().all(|&c| c as f64 <= upper + PROB_EPS) {
            break;
        }
        if trace.len() >= cap {
            return Err(Error::NoProgress(format!(
                "Tatonnement did not finish within {cap} iterations"
            )));
        }
        let threshold = ((k / 2 + 1)..)
            .take_while(|&t| (t as f64) < upper - PROB_EPS)
            .find(|t| !counts.contains(t));
        let raised: ItemSet = match threshold {
            Some(t) => (0..m).filter(|&j| counts[j] > t).collect(),
            None => (0..m)
                .filter(|&j| counts[j] as f64 > upper + PROB_EPS)
                .collect(),
        };
        let gaps = switch_gaps(&samples, &values, &prices, &order, raised);
        let min_gap = gaps
            .iter()
            .copied()
            .fold(None, |acc: Option<T>, g| {
                Some(acc.map_or(g, |a| a.min_of(g)))
            })
            .ok_or_else(|| Error::NoProgress("no agent holds a raised item".into()))?;
        let next = gaps
            .iter()
            .copied()
            .filter(|&g| g > min_gap)
            .fold(None, |acc: Option<T>, g| {
                Some(acc.map_or(g, |a| a.min_of(g)))
            });
        let increment = match next {
            Some(g) => (min_gap + g) / T::two(),
            None => min_gap + min_gap.max_of(T::one()),
        };
        for j in raised.iter() {
            prices[j] = prices[j] + increment;
        }
        let after = sale_counts(&samples, &prices, &order);
        trace.push(TatonnementStep {
            iteration: trace.len() + 1,
            threshold,
            raised,
            min_gap: min_gap.as_f64(),
            increment: increment.as_f64(),
            potential_before: tatonnement_potential(&counts, k, eps),
            potential_after: tatonnement_potential(&after, k, eps),
            counts_before: counts,
            counts_after: after.clone(),
        });
        counts = after;
    }
    let pi = counts.iter().map(|&c| c as f64 / k as f64).collect();
    Ok(TatonnementResult {
        prices: PriceVector::new(prices)?,
        trace,
        k,
        counts,
        pi,
    })
}

fn sale_counts<T: Scalar>(
    samples: &[&ValuationProfile<T>],
    p: &[T],
    order: &[usize],
) -> Vec<usize> {
    let mut counts = vec![0usize; p.len()];
    for s in samples {
        for j in run_unchecked(p, s, order, &ChoiceRule::Generic, &[])
            .sold
            .iter()
        {
            counts[j] += 1;
        }
    }
    counts
}

/// For every agent that buys an item of `raised`, the amount by which that
/// item's price can rise before the agent prefers its best available item
/// outside `raised` (or nothing).
fn switch_gaps<T: Scalar>(
    samples: &[&ValuationProfile<T>],
    values: &[Vec<Vec<T>>],
    p: &[T],
    order: &[usize],
    raised: ItemSet,
) -> Vec<T> {
    let m = p.len();
    let mut gaps = Vec::new();
    for (l, s) in samples.iter().enumerate() {
        let mut available = ItemSet::full(m);
        for &i in order {
            let set = choose(&s[i], p, available, &ChoiceRule::Generic, &[]);
            if let Some(j) = set.iter().next() {
                if raised.contains(j) {
                    let v = &values[l][i];
                    let outside = available
                        .difference(raised)
                        .iter()
                        .map(|jj| v[jj] - p[jj])
                        .fold(T::zero(), |a, b| a.max_of(b));
                    gaps.push(v[j] - p[j] - outside);
                }
            }
            available = available.difference(set);
        }
    }
    gaps
}

/// Per-item outcome of a median check.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemVerdict {
    pub pi: f64,
    /// Confidence interval for `pi` (a point in the exact modes).
    pub lower: f64,
    pub upper: f64,
    /// Zero-priced items are exempt from the lower bound.
    pub exempt_lower: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianVerdict {
    pub alpha: f64,
    pub items: Vec<ItemVerdict>,
    /// `max_j |pi_j - 1/2|`.
    pub max_deviation: f64,
    pub pass: bool,
    pub mode: EstimateMode,
}

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`.
pub fn wilson_interval(successes: f64, trials: f64, z: f64) -> (f64, f64) {
    if trials <= 0.0 {
        return (0.0, 1.0);
    }
    let phat = successes / trials;
    let z2 = z * z;
    let denom = 1.0 + z2 / trials;
    let centre = (phat + z2 / (2.0 * trials)) / denom;
    let half = z * (phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Default normal quantile for Monte-Carlo verdicts (two-sided 99%).
pub const DEFAULT_Z: f64 = 2.576;

/// Checks `pi_j <= 1 - alpha` for every item and `pi_j >= alpha` for every
/// positively priced item. In Monte-Carlo mode the Wilson interval must
/// clear each bound.
pub fn verify_median<T: Scalar>(
    p: &[T],
    source: PiSource<'_, T>,
    order: Option<&[usize]>,
    rule: &ChoiceRule,
    alpha: f64,
    z: f64,
) -> Result<MedianVerdict> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(invalid_param("alpha", alpha, "must lie in [0, 1/2]"));
    }
    let est = estimate_pi(p, source, order, rule)?;
    let items: Vec<ItemVerdict> = est
        .pi
        .iter()
        .zip(p)
        .map(|(&pi, &pj)| {
            let (lower, upper) = match est.mode {
                EstimateMode::MonteCarlo => {
                    wilson_interval(pi * est.trials as f64, est.trials as f64, z)
                }
                _ => (pi, pi),
            };
            let slack = if est.mode == EstimateMode::MonteCarlo {
                0.0
            } else {
                PROB_EPS
            };
            let exempt_lower = pj == T::zero();
            let pass = upper <= 1.0 - alpha + slack && (exempt_lower || lower >= alpha - slack);
            ItemVerdict {
                pi,
                lower,
                upper,
                exempt_lower,
                pass,
            }
        })
        .collect();
    let max_deviation = est.pi.iter().fold(0.0f64, |a, &x| a.max((x - 0.5).abs()));
    Ok(MedianVerdict {
        alpha,
        pass: items.iter().all(|v| v.pass),
        items,
        max_deviation,
        mode: est.mode,
    })
}

/// Prices certified as `alpha`-median together with the witnessing rule.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianCertificate {
    pub prices: Vec<f64>,
    pub rule: ChoiceRule,
    pub pi: Vec<f64>,
}

/// Default cap on price vectors times mechanism evaluations in
/// [`grid_search_median_xos`].
pub const DEFAULT_GRID_BUDGET: u64 = 50_000_000;

/// Exhaustive search for `alpha`-median prices of a finite-support XOS
/// distribution with at most three items.
///
/// Per item the candidate prices are the distinct clause weights in the
/// support ("atoms"), zero, `resolution` evenly spaced points strictly
/// between consecutive atoms and one point above the largest atom. Off-atom
/// vectors are tried first with the generic rule; then every vector with
/// the strict, prefer-buy and uniform q-rules (`q` in {1/4, 1/2, 3/4}).
/// Sale probabilities are computed exactly, so a returned vector is
/// certified.
pub fn grid_search_median_xos(
    dist: &DistributionSpec<f64>,
    alpha: f64,
    resolution: usize,
    budget: u64,
) -> Result<Option<MedianCertificate>> {
    let m = dist.m();
    if m > 3 {
        return Err(invalid_param(
            "m",
            m,
            "grid search supports at most three items",
        ));
    }
    if !(0.0..=0.5).contains(&alpha) {
        return Err(invalid_param("alpha", alpha, "must lie in [0, 1/2]"));
    }
    let supports: Vec<Vec<(&XosValuation<f64>, f64)>> = dist
        .bidders()
        .iter()
        .map(|b| {
            b.support()
                .ok_or_else(|| Error::InvalidInput("grid search needs finite supports".into()))
        })
        .collect::<Result<_>>()?;
    let mut atoms: Vec<Vec<f64>> = vec![vec![0.0]; m];
    for sup in &supports {
        for (v, _) in sup {
            for c in v.clauses() {
                for (j, &w) in c.weights().iter().enumerate() {
                    atoms[j].push(w);
                }
            }
        }
    }
    let mut off: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(m);
    for a in atoms.iter_mut() {
        a.sort_by(f64::total_cmp);
        a.dedup();
        let mut between = Vec::new();
        for w in a.windows(2) {
            for r in 1..=resolution {
                between.push(w[0] + (w[1] - w[0]) * r as f64 / (resolution + 1) as f64);
            }
        }
        between.push(a.last().copied().unwrap_or(0.0) + 1.0);
        let mut o = vec![0.0];
        o.extend(&between);
        let mut c = a.clone();
        c.extend(&between);
        c.sort_by(f64::total_cmp);
        c.dedup();
        off.push(o);
        all.push(c);
    }
    let n_rules = 5u64;
    let per_eval: f64 = supports.iter().map(|s| s.len() as f64).sum::<f64>() * (1u64 << m) as f64;
    let vectors = |cands: &[Vec<f64>]| cands.iter().map(|c| c.len() as f64).product::<f64>();
    let required = (vectors(&off) + vectors(&all) * n_rules as f64) * per_eval;
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let order: Vec<usize> = (0..dist.n()).collect();
    let check = |p: &[f64], rule: &ChoiceRule| -> Option<MedianCertificate> {
        let out = exact_outcome(p, &supports, &order, rule);
        let ok = out.pi.iter().zip(p).all(|(&pi, &pj)| {
            pi <= 1.0 - alpha + PROB_EPS && (pj == 0.0 || pi >= alpha - PROB_EPS)
        });
        ok.then(|| MedianCertificate {
            prices: p.to_vec(),
            rule: rule.clone(),
            pi: out.pi,
        })
    };
    if let Some(c) = for_each_vector(&off, |p| check(p, &ChoiceRule::Generic)) {
        return Ok(Some(c));
    }
    let rules = [
        ChoiceRule::Generic,
        ChoiceRule::Lexicographic,
        ChoiceRule::uniform_q(m, 0.25),
        ChoiceRule::uniform_q(m, 0.5),
        ChoiceRule::uniform_q(m, 0.75),
    ];
    for rule in &rules {
        if let Some(c) = for_each_vector(&all, |p| check(p, rule)) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

fn for_each_vector<R>(cands: &[Vec<f64>], mut f: impl FnMut(&[f64]) -> Option<R>) -> Option<R> {
    let mut idx = vec![0usize; cands.len()];
    let mut p: Vec<f64> = cands.iter().map(|c| c[0]).collect();
    loop {
        if let Some(r) = f(&p) {
            return Some(r);
        }
        let mut d = 0;
        loop {
            if d == cands.len() {
                return None;
            }
            idx[d] += 1;
            if idx[d] < cands[d].len() {
                p[d] = cands[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = cands[d][0];
            d += 1;
        }
    }
}

/// Threshold price `tau` and q-rule cutoff `q` for a single item such that
/// the sequential mechanism sells with probability exactly 1/2: bidders
/// with value above `tau` buy, bidders at `tau` buy with probability
/// `1 - q`. Requires every bidder to have a finite single-item support.
pub fn single_item_median(dist: &DistributionSpec<f64>) -> Result<(f64, f64)> {
    if dist.m() != 1 {
        return Err(invalid_param(
            "m",
            dist.m(),
            "single-item check needs m = 1",
        ));
    }
    let supports: Vec<Vec<(f64, f64)>> = dist
        .bidders()
        .iter()
        .map(|b| {
            b.support()
                .map(|s| s.iter().map(|(v, p)| (v.singleton_value(0), *p)).collect())
                .ok_or_else(|| {
                    Error::InvalidInput("single-item check needs finite supports".into())
                })
        })
        .collect::<Result<_>>()?;
    // P(no sale) when values > tau buy and values == tau buy w.p. beta.
    let no_sale = |tau: f64, beta: f64| -> f64 {
        supports
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&(v, p)| {
                        if v > tau {
                            0.0
                        } else if v == tau && v > 0.0 {
                            p * (1.0 - beta)
                        } else {
                            p
                        }
                    })
                    .sum::<f64>()
            })
            .product()
    };
    let mut values: Vec<f64> = supports
        .iter()
        .flatten()
        .map(|&(v, _)| v)
        .filter(|&v| v > 0.0)
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    // Smallest atom tau with P(no sale at tau, beta = 0) >= 1/2, i.e.
    // P(max <= tau) >= 1/2.
    let Some(&tau) = values.iter().find(|&&t| no_sale(t, 0.0) >= 0.5) else {
        return Ok((0.0, 0.0));
    };
    let (lo_val, hi_val) = (no_sale(tau, 1.0), no_sale(tau, 0.0));
    if lo_val >= 0.5 {
        return Ok((tau, 1.0));
    }
    // no_sale is decreasing in beta; bisect for no_sale = 1/2.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    debug_assert!(hi_val >= 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if no_sale(tau, mid) >= 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok((tau, 1.0 - beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{random_unit_demand, BidderDistribution};
    use crate::rng::seeded;
    use rand::Rng;

    fn add(w: Vec<f64>) -> XosValuation<f64> {
        XosValuation::additive(w).unwrap()
    }

    fn ud(w: Vec<f64>) -> XosValuation<f64> {
        XosValuation::unit_demand(w).unwrap()
    }

    fn prof(v: Vec<XosValuation<f64>>) -> ValuationProfile<f64> {
        ValuationProfile::new(v).unwrap()
    }

    fn single_item_dist(values: &[(f64, f64)]) -> BidderDistribution<f64> {
        BidderDistribution::FiniteSupport(values.iter().map(|&(v, p)| (add(vec![v]), p)).collect())
    }

    #[test]
    fn nothing_sells_above_all_values() {
        let p = prof(vec![add(vec![1.0, 2.0]), add(vec![3.0, 1.0])]);
        let out = posted_price_run(
            &[10.0, 10.0],
            &p,
            &[0, 1],
            &ChoiceRule::Generic,
            &mut seeded(1),
        )
        .unwrap();
        assert_eq!(out.welfare, 0.0);
        assert!(out.sold.is_empty());
    }

    #[test]
    fn two_additive_bidders_split() {
        let p = prof(vec![add(vec![3.0, 1.0]), add(vec![1.0, 3.0])]);
        let out = posted_price_run(
            &[2.0, 2.0],
            &p,
            &[0, 1],
            &ChoiceRule::Generic,
            &mut seeded(1),
        )
        .unwrap();
        assert_eq!(
            out.allocation.bundles,
            vec![ItemSet::singleton(0), ItemSet::singleton(1)]
        );
        assert_eq!(out.revenue, 4.0);
        assert_eq!(out.surplus, vec![1.0, 1.0]);
        assert_eq!(out.welfare, 6.0);
        assert_eq!(out.welfare, out.revenue + out.surplus.iter().sum::<f64>());
    }

    #[test]
    fn q_rule_single_item_example() {
        let p = prof(vec![add(vec![3.0]), add(vec![4.0])]);
        let rule = ChoiceRule::uniform_q(1, 0.5);
        let hi = posted_price_run_with_weights(&[4.0], &p, &[0, 1], &rule, &[vec![0.9], vec![0.9]])
            .unwrap();
        assert_eq!(hi.allocation.bundles[1], ItemSet::singleton(0));
        let lo = posted_price_run_with_weights(&[4.0], &p, &[0, 1], &rule, &[vec![0.9], vec![0.1]])
            .unwrap();
        assert!(lo.sold.is_empty());
        let dist = DistributionSpec::point_mass(&p);
        let exact = estimate_pi(&[4.0], PiSource::Exact(&dist), None, &rule).unwrap();
        assert!((exact.pi[0] - 0.5).abs() < 1e-12);
        let v = verify_median(&[4.0], PiSource::Exact(&dist), None, &rule, 0.5, DEFAULT_Z).unwrap();
        assert!(v.pass);
        let mc = estimate_pi(
            &[4.0],
            PiSource::MonteCarlo {
                dist: &dist,
                trials: 10_000,
                seed: 3,
            },
            None,
            &rule,
        )
        .unwrap();
        assert!((mc.pi[0] - 0.5).abs() < 0.02);
    }

    #[test]
    fn empirical_examples() {
        let samples = vec![prof(vec![add(vec![1.0])]), prof(vec![add(vec![3.0])])];
        let e = estimate_pi(
            &[2.0],
            PiSource::Empirical(&samples),
            None,
            &ChoiceRule::Generic,
        )
        .unwrap();
        assert_eq!(e.pi, vec![0.5]);
        let all = estimate_pi(
            &[0.0],
            PiSource::Empirical(&samples),
            None,
            &ChoiceRule::Generic,
        )
        .unwrap();
        assert_eq!(all.pi, vec![1.0]);
        assert!(
            estimate_pi::<f64>(&[0.0], PiSource::Empirical(&[]), None, &ChoiceRule::Generic)
                .is_err()
        );
    }

    #[test]
    fn zero_prices_verdict_only_checks_upper() {
        let samples = vec![prof(vec![add(vec![1.0])]), prof(vec![add(vec![0.0])])];
        let v = verify_median(
            &[0.0],
            PiSource::Empirical(&samples),
            None,
            &ChoiceRule::Generic,
            0.5,
            DEFAULT_Z,
        )
        .unwrap();
        assert!(v.items[0].exempt_lower);
        assert!(v.pass);
        let v = verify_median(
            &[0.0],
            PiSource::Empirical(&samples),
            None,
            &ChoiceRule::Generic,
            0.6,
            DEFAULT_Z,
        );
        assert!(v.is_err());
    }

    #[test]
    fn sample_count_examples() {
        assert_eq!(sample_count(0.1, 0.01, 10, 5, 1.0).unwrap(), 4112);
        assert_eq!(sample_count(1.0, (-1.0f64).exp(), 1, 1, 1.0).unwrap(), 2);
        let a = sample_count(0.2, 0.05, 3, 2, 1.0).unwrap() as f64;
        let b = sample_count(0.1, 0.05, 3, 2, 1.0).unwrap() as f64;
        assert!((b / a - 4.0).abs() < 0.01);
        assert!(sample_count(0.0, 0.1, 1, 1, 1.0).is_err());
        assert!(sample_count(0.1, 1.0, 1, 1, 1.0).is_err());
        assert!(sample_count(0.1, 0.1, 1, 1, 0.0).is_err());
    }

    #[test]
    fn tatonnement_single_item_example() {
        let samples = vec![prof(vec![ud(vec![1.0])]), prof(vec![ud(vec![3.0])])];
        let out = tatonnement_unit_demand(&samples, 0.2).unwrap();
        assert!(out.prices[0] > 1.0 && out.prices[0] <= 3.0);
        assert_eq!(out.pi, vec![0.5]);
        assert_eq!(out.iterations(), 1);
    }

    #[test]
    fn tatonnement_no_oversold_item() {
        let samples = vec![
            prof(vec![ud(vec![0.0, 0.0])]),
            prof(vec![ud(vec![1.0, 0.0])]),
        ];
        let out = tatonnement_unit_demand(&samples, 0.2).unwrap();
        assert_eq!(&*out.prices, &[0.0, 0.0]);
        assert_eq!(out.iterations(), 0);
    }

    #[test]
    fn tatonnement_rejects_bad_input() {
        let xos = vec![prof(vec![add(vec![1.0, 1.0])])];
        assert!(tatonnement_unit_demand(&xos, 0.2).is_err());
        let few = vec![prof(vec![ud(vec![1.0; 5])]); 2];
        assert!(tatonnement_unit_demand(&few, 0.4).is_err());
        tatonnement_unit_demand(&few, 0.35).unwrap();
        assert!(tatonnement_unit_demand(&few, 0.5).is_err());
    }

    #[test]
    fn tatonnement_random_runs() {
        let mut rng = seeded(41);
        let eps = 0.2;
        for _ in 0..20 {
            let k = 40;
            let samples: Vec<_> = (0..k)
                .map(|_| prof((0..3).map(|_| random_unit_demand(3, &mut rng)).collect()))
                .collect();
            let out = tatonnement_unit_demand(&samples, eps).unwrap();
            for &pi in &out.pi {
                assert!(pi <= 0.5 + eps + 1e-12);
            }
            let e = estimate_pi(
                &out.prices,
                PiSource::Empirical(&samples),
                None,
                &ChoiceRule::Generic,
            )
            .unwrap();
            assert_eq!(e.pi, out.pi);
        }
    }

    #[test]
    fn wilson_sane() {
        let (lo, hi) = wilson_interval(50.0, 100.0, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
        assert_eq!(wilson_interval(0.0, 100.0, 1.96).0, 0.0);
    }

    #[test]
    fn grid_search_examples() {
        let two = DistributionSpec::new(vec![single_item_dist(&[(1.0, 0.5), (3.0, 0.5)])]).unwrap();
        let c = grid_search_median_xos(&two, 0.5, 3, DEFAULT_GRID_BUDGET)
            .unwrap()
            .unwrap();
        assert!(c.prices[0] > 1.0 && c.prices[0] < 3.0);

        let five =
            DistributionSpec::new(vec![BidderDistribution::PointMass(add(vec![5.0]))]).unwrap();
        let c = grid_search_median_xos(&five, 0.5, 3, DEFAULT_GRID_BUDGET)
            .unwrap()
            .unwrap();
        assert_eq!(c.prices, vec![5.0]);
        assert_eq!(c.rule, ChoiceRule::uniform_q(1, 0.5));

        let tp = |a: f64, b: f64| {
            BidderDistribution::FiniteSupport(vec![(add(vec![a, b]), 0.5), (add(vec![b, a]), 0.5)])
        };
        let pair = DistributionSpec::new(vec![tp(1.0, 2.0), tp(3.0, 1.0)]).unwrap();
        let c = grid_search_median_xos(&pair, 0.5, 3, DEFAULT_GRID_BUDGET)
            .unwrap()
            .unwrap();
        for pi in c.pi {
            assert!((pi - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_matches_monte_carlo() {
        let mut rng = seeded(42);
        for _ in 0..5 {
            let dist = crate::instances::random_finite_support(2, 2, 2, 2, &mut rng);
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            for rule in [
                ChoiceRule::Generic,
                ChoiceRule::Lexicographic,
                ChoiceRule::uniform_q(2, 0.3),
            ] {
                let ex = estimate_pi(&p, PiSource::Exact(&dist), None, &rule).unwrap();
                let mc = estimate_pi(
                    &p,
                    PiSource::MonteCarlo {
                        dist: &dist,
                        trials: 20_000,
                        seed: 5,
                    },
                    None,
                    &rule,
                )
                .unwrap();
                for j in 0..2 {
                    assert!((ex.pi[j] - mc.pi[j]).abs() < 0.02);
                }
            }
        }
    }

    #[test]
    fn q_rule_multi_clause_integration() {
        // Two optimal clauses at these prices: {0} and {1}, both at utility 0
        // with every item priced at its weight.
        let v = XosValuation::xos(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let rule = ChoiceRule::uniform_q(2, 0.5);
        let d = choice_distribution(&v, &[1.0, 1.0], ItemSet::full(2), &rule);
        let total: f64 = d.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Empty iff both w below q: probability 1/4; otherwise the larger.
        let empty = d.iter().find(|(s, _)| s.is_empty()).map_or(0.0, |x| x.1);
        assert!((empty - 0.25).abs() < 0.01);
    }

    #[test]
    fn single_item_median_example() {
        let dist = DistributionSpec::new(vec![
            single_item_dist(&[(1.0, 1.0)]),
            single_item_dist(&[(0.0, 0.99), (1000.0, 0.01)]),
        ])
        .unwrap();
        let (tau, q) = single_item_median(&dist).unwrap();
        assert_eq!(tau, 1.0);
        let rule = ChoiceRule::uniform_q(1, q);
        let ex = exact_mechanism(&[tau], &dist, None, &rule).unwrap();
        assert!((ex.pi[0] - 0.5).abs() < 1e-9);
        assert!(ex.welfare >= 0.5 * 10.99);
    }

    proptest::proptest! {
        #[test]
        fn empirical_pi_monotone_in_own_price(seed in 0u64..2000, j in 0usize..3, bump in 0.01f64..1.0) {
            let mut rng = seeded(seed);
            let samples: Vec<_> = (0..6)
                .map(|_| prof((0..2).map(|_| crate::instances::random_xos(3, 2, 0.3, &mut rng)).collect()))
                .collect();
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut p2 = p.clone();
            p2[j] += bump;
            for rule in [ChoiceRule::Generic, ChoiceRule::Lexicographic] {
                let a = estimate_pi(&p, PiSource::Empirical(&samples), None, &rule).unwrap();
                let b = estimate_pi(&p2, PiSource::Empirical(&samples), None, &rule).unwrap();
                proptest::prop_assert!(b.pi[j] <= a.pi[j]);
            }
        }
    }
}
