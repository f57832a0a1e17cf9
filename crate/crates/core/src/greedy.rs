//! Offline baselines: the exact optimum, buyer-wise greedy, its
//! powers-of-two variant and the decoupled sample-priced greedy.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::ValuationProfile;
use crate::scalar::{round_up_pow2, Scalar};
use crate::valuations::{ItemSet, TieRule, XosValuation};

/// Perturbation stream used for the profile that sets greedy prices.
pub(crate) const ROLE_PRICING: u64 = 1;
/// Perturbation stream for the second sample.
pub(crate) const ROLE_SECOND: u64 = 2;
/// Perturbation stream for the real valuations.
pub(crate) const ROLE_REAL: u64 = 3;

/// Default cap on `n^m` for [`brute_force_opt`].
pub const DEFAULT_OPT_BUDGET: u64 = 10_000_000;

/// Largest item count the exact optimum accepts (value tables are `2^m`).
pub const MAX_OPT_ITEMS: usize = 22;

/// Non-negative per-item prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector<T>(Vec<T>);

impl<T: Scalar> PriceVector<T> {
    pub fn new(prices: Vec<T>) -> Result<Self> {
        if let Some((j, p)) = prices
            .iter()
            .enumerate()
            .find(|(_, p)| p.is_negative() || !p.is_finite_value())
        {
            return Err(Error::InvalidInput(format!(
                "price of item {j} must be finite and non-negative, got {p}"
            )));
        }
        Ok(Self(prices))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![T::zero(); m])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn sum(&self) -> T {
        self.0.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub(crate) fn set(&mut self, j: usize, p: T) {
        self.0[j] = p;
    }
}

impl<T> Deref for PriceVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Disjoint assignment of items to bidders.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation<T> {
    pub bundles: Vec<ItemSet>,
    /// `contributions[i][j]`: supporting value of item `j` in bidder `i`'s
    /// bundle (zero when `j` is not in it).
    pub contributions: Vec<Vec<T>>,
    pub welfare: T,
}

impl<T: Scalar> Allocation<T> {
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            bundles: vec![ItemSet::EMPTY; n],
            contributions: vec![vec![T::zero(); m]; n],
            welfare: T::zero(),
        }
    }

    /// Allocation of `bundles` with contributions taken from the supporting
    /// clauses and welfare `sum_i v_i(bundles[i])`.
    pub fn from_bundles(profile: &ValuationProfile<T>, bundles: Vec<ItemSet>) -> Result<Self> {
        if bundles.len() != profile.n() {
            return Err(Error::ShapeMismatch(format!(
                "{} bundles for {} bidders",
                bundles.len(),
                profile.n()
            )));
        }
        for (v, b) in profile.iter().zip(&bundles) {
            v.check_set(*b)?;
        }
        let alloc = Self::from_bundles_unchecked(profile, bundles);
        if !alloc.is_disjoint() {
            return Err(Error::InvalidInput("bundles overlap".into()));
        }
        Ok(alloc)
    }

    pub(crate) fn from_bundles_unchecked(
        profile: &ValuationProfile<T>,
        bundles: Vec<ItemSet>,
    ) -> Self {
        let contributions = profile
            .iter()
            .zip(&bundles)
            .map(|(v, &b)| v.supporting_clause(b).weights().to_vec())
            .collect();
        let welfare = welfare_of(profile, &bundles);
        Self {
            bundles,
            contributions,
            welfare,
        }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = ItemSet::EMPTY;
        for b in &self.bundles {
            if !b.intersection(seen).is_empty() {
                return false;
            }
            seen = seen.union(*b);
        }
        true
    }

    /// Union of all bundles.
    pub fn allocated(&self) -> ItemSet {
        self.bundles.iter().fold(ItemSet::EMPTY, |a, b| a.union(*b))
    }

    pub fn owner(&self, item: usize) -> Option<usize> {
        self.bundles.iter().position(|b| b.contains(item))
    }

    /// Per-bidder sum of recorded contributions.
    pub fn contribution_sums(&self) -> Vec<T> {
        self.contributions
            .iter()
            .map(|row| row.iter().fold(T::zero(), |a, &b| a + b))
            .collect()
    }
}

pub(crate) fn welfare_of<T: Scalar>(profile: &ValuationProfile<T>, bundles: &[ItemSet]) -> T {
    profile
        .iter()
        .zip(bundles)
        .fold(T::zero(), |acc, (v, &b)| acc + v.value_of(b))
}

/// Full record of one greedy run.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace<T> {
    /// Final allocation after reassignments.
    pub allocation: Allocation<T>,
    /// Demand set `A_i` each bidder was assigned on arrival.
    pub demanded: Vec<ItemSet>,
    /// `p^(1), ..., p^(n+1)`; bidder `i` (0-based) faced `price_history[i]`.
    pub price_history: Vec<PriceVector<T>>,
    /// `u_i(A_i, p^(i))` under the bidder's valuation.
    pub utilities: Vec<T>,
}

impl<T: Scalar> GreedyTrace<T> {
    pub fn final_prices(&self) -> &PriceVector<T> {
        self.price_history
            .last()
            .expect("history holds at least p^(1)")
    }

    /// `sum_i v_i(A_i)` over the demanded sets, before reassignment.
    pub fn demanded_welfare(&self, profile: &ValuationProfile<T>) -> T {
        welfare_of(profile, &self.demanded)
    }
}

/// Exact optimum by enumerating all `n^m` maps of items to bidders.
pub fn brute_force_opt<T: Scalar>(profile: &ValuationProfile<T>) -> Result<(T, Allocation<T>)> {
    brute_force_opt_with_budget(profile, DEFAULT_OPT_BUDGET)
}

/// Number of item-to-bidder maps the exact optimum enumerates.
pub fn opt_work(n: usize, m: usize) -> f64 {
    (n as f64).powi(m as i32)
}

pub fn brute_force_opt_with_budget<T: Scalar>(
    profile: &ValuationProfile<T>,
    budget: u64,
) -> Result<(T, Allocation<T>)> {
    let (n, m) = (profile.n(), profile.m());
    let work = opt_work(n, m);
    if work > budget as f64 || m > MAX_OPT_ITEMS {
        return Err(Error::BudgetExceeded {
            required: work.max(if m > MAX_OPT_ITEMS {
                f64::INFINITY
            } else {
                0.0
            }),
            budget,
        });
    }
    if n == 1 {
        let full = ItemSet::full(m);
        let alloc = Allocation::from_bundles_unchecked(profile, vec![full]);
        return Ok((alloc.welfare, alloc));
    }
    let tables: Vec<Vec<T>> = profile.iter().map(|v| value_table(v)).collect();
    let mut masks = vec![0u64; n];
    let mut best = T::zero();
    let mut best_masks = vec![0u64; n];
    let mut first = true;
    search(
        0,
        m,
        &tables,
        &mut masks,
        &mut best,
        &mut best_masks,
        &mut first,
    );
    let bundles = best_masks.into_iter().map(ItemSet::from_bits).collect();
    let alloc = Allocation::from_bundles_unchecked(profile, bundles);
    Ok((alloc.welfare, alloc))
}

fn search<T: Scalar>(
    j: usize,
    m: usize,
    tables: &[Vec<T>],
    masks: &mut [u64],
    best: &mut T,
    best_masks: &mut [u64],
    first: &mut bool,
) {
    if j == m {
        let total = masks
            .iter()
            .zip(tables)
            .fold(T::zero(), |acc, (&mask, t)| acc + t[mask as usize]);
        if *first || total > *best {
            *best = total;
            best_masks.copy_from_slice(masks);
            *first = false;
        }
        return;
    }
    for i in 0..masks.len() {
        masks[i] |= 1 << j;
        search(j + 1, m, tables, masks, best, best_masks, first);
        masks[i] &= !(1 << j);
    }
}

/// `table[S] = v(S)` for every `S ⊆ [m]`.
fn value_table<T: Scalar>(v: &XosValuation<T>) -> Vec<T> {
    let size = 1usize << v.m();
    let mut table = vec![T::zero(); size];
    let mut sums = vec![T::zero(); size];
    for clause in v.clauses() {
        let w = clause.weights();
        for s in 1..size {
            let low = s.trailing_zeros() as usize;
            sums[s] = sums[s & (s - 1)] + w[low];
            if sums[s] > table[s] {
                table[s] = sums[s];
            }
        }
    }
    table
}

/// Buyer-wise greedy: each bidder takes a demand set over all items at the
/// current prices (reassigning overlaps) and the prices of its items rise
/// to their supporting values.
pub fn buyer_wise_greedy<T: Scalar>(
    profile: &ValuationProfile<T>,
    tie: &TieRule,
) -> GreedyTrace<T> {
    let work = profile.prepared(tie, ROLE_PRICING);
    greedy_run(profile, &work, tie.prefers_buying(), false)
}

/// As [`buyer_wise_greedy`], but prices rise to the next power of two at or
/// above the supporting value.
pub fn modified_greedy<T: Scalar>(profile: &ValuationProfile<T>, tie: &TieRule) -> GreedyTrace<T> {
    let work = profile.prepared(tie, ROLE_PRICING);
    greedy_run(profile, &work, tie.prefers_buying(), true)
}

/// Greedy on the working copy `work` (possibly perturbed); welfare and
/// utilities are reported on `profile`.
pub(crate) fn greedy_run<T: Scalar>(
    profile: &ValuationProfile<T>,
    work: &ValuationProfile<T>,
    prefer_buy: bool,
    pow2: bool,
) -> GreedyTrace<T> {
    let (n, m) = (profile.n(), profile.m());
    let full = ItemSet::full(m);
    let mut prices = PriceVector::zeros(m);
    let mut history = Vec::with_capacity(n + 1);
    history.push(prices.clone());
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let mut bundles = vec![ItemSet::EMPTY; n];
    let mut contributions = vec![vec![T::zero(); m]; n];
    let mut demanded = Vec::with_capacity(n);
    let mut utilities = Vec::with_capacity(n);

    for i in 0..n {
        let a = work[i].demand_fast(&prices, full, prefer_buy);
        utilities.push(profile[i].utility(a, &prices));
        let support = work[i].supporting_clause(a);
        let reported = profile[i].supporting_clause(a);
        for j in a.iter() {
            if let Some(prev) = owner[j] {
                bundles[prev].remove(j);
                contributions[prev][j] = T::zero();
            }
            owner[j] = Some(i);
            contributions[i][j] = reported.weight(j);
            let aj = support.weight(j);
            prices.set(j, if pow2 { round_up_pow2(aj) } else { aj });
        }
        bundles[i] = a;
        demanded.push(a);
        history.push(prices.clone());
    }
    let welfare = welfare_of(profile, &bundles);
    GreedyTrace {
        allocation: Allocation {
            bundles,
            contributions,
            welfare,
        },
        demanded,
        price_history: history,
        utilities,
    }
}

/// Prices come from the powers-of-two greedy on `s`; each real bidder `i`
/// takes its demand at `p^(i)` over all items, ignoring availability.
/// Returns `sum_i r_i(B_i)` and the bundles `B_i`.
pub fn decoupled_greedy<T: Scalar>(
    s: &ValuationProfile<T>,
    r: &ValuationProfile<T>,
    tie: &TieRule,
) -> Result<(T, Vec<ItemSet>)> {
    s.same_shape(r, "decoupled greedy")?;
    let trace = modified_greedy(s, tie);
    let r_work = r.prepared(tie, ROLE_REAL);
    let full = ItemSet::full(r.m());
    let bundles: Vec<ItemSet> = (0..r.n())
        .map(|i| r_work[i].demand_fast(&trace.price_history[i], full, tie.prefers_buying()))
        .collect();
    Ok((welfare_of(r, &bundles), bundles))
}
