//! The two-sample online allocation algorithm and its single-sample
//! reduction.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid_param, Result};
use crate::greedy::{
    greedy_run, welfare_of, Allocation, PriceVector, ROLE_PRICING, ROLE_REAL, ROLE_SECOND,
};
use crate::instances::ValuationProfile;
use crate::scalar::Scalar;
use crate::valuations::{ItemSet, TieRule, XosValuation};

/// Per-item record of one two-sample run.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ItemDiagnostics<T> {
    /// `max_{i: j in B_i} a_j(r_i, B_i)`.
    pub max_real_bid: T,
    /// `max_{i: j in A'_i} a_j(s'_i, A'_i)`, which is also the base price.
    pub max_second_bid: T,
    /// `p_j^(n+1)` of the greedy run on the first sample.
    pub final_price: T,
    pub sum_real_bids: T,
    pub sum_second_bids: T,
    /// Supporting value `a_j(r_i, B_i)` of the bidder that was granted `j`,
    /// or zero.
    pub alg_contribution: T,
}

impl<T: Scalar> ItemDiagnostics<T> {
    pub fn zero() -> Self {
        let z = T::zero();
        Self {
            max_real_bid: z,
            max_second_bid: z,
            final_price: z,
            sum_real_bids: z,
            sum_second_bids: z,
            alg_contribution: z,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgResult<T> {
    /// Granted bundles, welfare on the real valuations.
    pub allocation: Allocation<T>,
    /// Real demand sets `B_i` at `p^(i)` over all items.
    pub demanded: Vec<ItemSet>,
    /// Second-sample demand sets `A'_i` at `p^(i)`.
    pub second_demanded: Vec<ItemSet>,
    pub base_prices: PriceVector<T>,
    /// `p^(1), ..., p^(n+1)` of the powers-of-two greedy on the first sample.
    pub price_history: Vec<PriceVector<T>>,
    pub per_item_contribution: Vec<T>,
    pub diagnostics: Vec<ItemDiagnostics<T>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TwoSampleOptions {
    /// Grant every still-available demanded item regardless of base
    /// prices. Only useful as a deliberately broken variant.
    pub ignore_base_prices: bool,
}

/// Two-sample algorithm: greedy prices from `s`, base prices from the
/// second sample `s2`, online grants to the real bidders `r`.
///
/// Under the perturbation rule all comparisons, supporting values and
/// diagnostics use the perturbed copies; welfare uses `r` itself.
pub fn two_sample<T: Scalar>(
    s: &ValuationProfile<T>,
    s2: &ValuationProfile<T>,
    r: &ValuationProfile<T>,
    tie: &TieRule,
) -> Result<AlgResult<T>> {
    two_sample_with(s, s2, r, tie, TwoSampleOptions::default())
}

pub fn two_sample_with<T: Scalar>(
    s: &ValuationProfile<T>,
    s2: &ValuationProfile<T>,
    r: &ValuationProfile<T>,
    tie: &TieRule,
    opts: TwoSampleOptions,
) -> Result<AlgResult<T>> {
    s.same_shape(s2, "two-sample (second sample)")?;
    s.same_shape(r, "two-sample (real profile)")?;
    let (n, m) = (s.n(), s.m());
    let full = ItemSet::full(m);
    let prefer = tie.prefers_buying();

    let s_work = s.prepared(tie, ROLE_PRICING);
    let trace = greedy_run(s, &s_work, prefer, true);
    let history = trace.price_history;

    let mut diag = vec![ItemDiagnostics::<T>::zero(); m];
    for (j, d) in diag.iter_mut().enumerate() {
        d.final_price = history[n][j];
    }

    let s2_work = s2.prepared(tie, ROLE_SECOND);
    let mut second_demanded = Vec::with_capacity(n);
    for i in 0..n {
        let a = s2_work[i].demand_fast(&history[i], full, prefer);
        let clause = s2_work[i].supporting_clause(a);
        for j in a.iter() {
            let c = clause.weight(j);
            diag[j].max_second_bid = diag[j].max_second_bid.max_of(c);
            diag[j].sum_second_bids = diag[j].sum_second_bids + c;
        }
        second_demanded.push(a);
    }
    let base: Vec<T> = diag.iter().map(|d| d.max_second_bid).collect();

    let r_work = r.prepared(tie, ROLE_REAL);
    let mut available = full;
    let mut demanded = Vec::with_capacity(n);
    let mut bundles = vec![ItemSet::EMPTY; n];
    let mut contributions = vec![vec![T::zero(); m]; n];
    for i in 0..n {
        let b = r_work[i].demand_fast(&history[i], full, prefer);
        let clause = r_work[i].supporting_clause(b);
        for j in b.iter() {
            let c = clause.weight(j);
            diag[j].max_real_bid = diag[j].max_real_bid.max_of(c);
            diag[j].sum_real_bids = diag[j].sum_real_bids + c;
            if available.contains(j) && (opts.ignore_base_prices || c > base[j]) {
                available.remove(j);
                bundles[i].insert(j);
                contributions[i][j] = c;
                diag[j].alg_contribution = c;
            }
        }
        demanded.push(b);
    }

    let welfare = welfare_of(r, &bundles);
    Ok(AlgResult {
        allocation: Allocation {
            bundles,
            contributions,
            welfare,
        },
        demanded,
        second_demanded,
        base_prices: PriceVector::new(base)?,
        price_history: history,
        per_item_contribution: diag.iter().map(|d| d.alg_contribution).collect(),
        diagnostics: diag,
    })
}

/// Per-item diagnostics of a two-sample run.
pub fn item_stats<T: Scalar>(result: &AlgResult<T>) -> Vec<ItemDiagnostics<T>> {
    result.diagnostics.clone()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneSampleResult<T> {
    pub result: AlgResult<T>,
    /// `slots[i][l]`: candidate in slot `l` for bidder `i`, where candidate
    /// 0 is the sample `s_i` and `1..=inner_k` are zero valuations; slot
    /// `inner_k` is the real one.
    pub slots: Vec<Vec<usize>>,
    /// Bidders whose sample landed in the real slot and was replaced by the
    /// real valuation.
    pub substituted: Vec<bool>,
}

/// Single-sample reduction: per bidder, `s_i` and `inner_k` zero
/// valuations are shuffled onto `inner_k` sample slots and one real slot;
/// if `s_i` lands in the real slot it is replaced by `r_i`. The two-sample
/// algorithm then runs on the first two sample slots and the real slot.
pub fn one_sample<T: Scalar, R: Rng + ?Sized>(
    s: &ValuationProfile<T>,
    r: &ValuationProfile<T>,
    inner_k: usize,
    rng: &mut R,
    tie: &TieRule,
) -> Result<OneSampleResult<T>> {
    if inner_k < 2 {
        return Err(invalid_param(
            "inner_k",
            inner_k,
            "the two-sample algorithm needs two sample slots",
        ));
    }
    s.same_shape(r, "one-sample")?;
    let (n, m) = (s.n(), s.m());
    let zero = XosValuation::zero(m);
    let mut slots = Vec::with_capacity(n);
    let mut substituted = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut real = Vec::with_capacity(n);
    for i in 0..n {
        let mut perm: Vec<usize> = (0..=inner_k).collect();
        perm.shuffle(rng);
        let pick = |c: usize| if c == 0 { s[i].clone() } else { zero.clone() };
        first.push(pick(perm[0]));
        second.push(pick(perm[1]));
        let sub = perm[inner_k] == 0;
        real.push(if sub { r[i].clone() } else { zero.clone() });
        substituted.push(sub);
        slots.push(perm);
    }
    let result = two_sample(
        &ValuationProfile::new(first)?,
        &ValuationProfile::new(second)?,
        &ValuationProfile::new(real)?,
        tie,
    )?;
    Ok(OneSampleResult {
        result,
        slots,
        substituted,
    })
}
