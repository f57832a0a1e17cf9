//! Explicit XOS valuations and their value, demand and XOS (supporting
//! clause) oracles.
//!
//! A valuation is stored as a non-empty list of additive clauses; the value
//! of a bundle is the best clause-sum on it. Unit-demand and additive
//! valuations are the special cases with one non-zero weight per clause and
//! a single clause respectively.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::scalar::Scalar;

/// Largest supported item count (bundles are `u64` bitmasks).
pub const MAX_ITEMS: usize = 64;

/// A bundle of items, as a bitmask over item indices `0..m`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ItemSet(u64);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    /// All items `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_ITEMS, "at most {MAX_ITEMS} items are supported");
        if m == MAX_ITEMS {
            ItemSet(u64::MAX)
        } else {
            ItemSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(item: usize) -> Self {
        assert!(item < MAX_ITEMS);
        ItemSet(1u64 << item)
    }

    /// Builds a set, rejecting indices `>= m`.
    pub fn try_from_items<I: IntoIterator<Item = usize>>(items: I, m: usize) -> Result<Self> {
        let mut set = ItemSet::EMPTY;
        for item in items {
            if item >= m || item >= MAX_ITEMS {
                return Err(Error::ItemOutOfRange { item, m });
            }
            set.insert(item);
        }
        Ok(set)
    }

    #[inline]
    pub const fn from_bits(bits: u64) -> Self {
        ItemSet(bits)
    }

    #[inline]
    pub const fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 & (1u64 << item) != 0
    }

    #[inline]
    pub fn insert(&mut self, item: usize) {
        self.0 |= 1u64 << item;
    }

    #[inline]
    pub fn remove(&mut self, item: usize) {
        self.0 &= !(1u64 << item);
    }

    #[inline]
    pub fn with(self, item: usize) -> Self {
        ItemSet(self.0 | (1u64 << item))
    }

    #[inline]
    pub fn without(self, item: usize) -> Self {
        ItemSet(self.0 & !(1u64 << item))
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn union(self, other: Self) -> Self {
        ItemSet(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Self) -> Self {
        ItemSet(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Self) -> Self {
        ItemSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Items in increasing order.
    pub fn iter(self) -> Items {
        Items(self.0)
    }

    /// Every subset of `self`, starting with the empty set.
    pub fn subsets(self) -> Subsets {
        Subsets {
            universe: self.0,
            next: Some(0),
        }
    }

    /// `true` when every item index is `< m`.
    pub fn fits(self, m: usize) -> bool {
        m >= MAX_ITEMS || self.0 >> m == 0
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl FromIterator<usize> for ItemSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = ItemSet::EMPTY;
        for j in iter {
            set.insert(j);
        }
        set
    }
}

impl Serialize for ItemSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ItemSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = items.iter().find(|&&j| j >= MAX_ITEMS) {
            return Err(serde::de::Error::custom(format!("item {bad} out of range")));
        }
        Ok(items.into_iter().collect())
    }
}

pub struct Items(u64);

impl Iterator for Items {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let j = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(j)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Items {}

pub struct Subsets {
    universe: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = ItemSet;

    fn next(&mut self) -> Option<ItemSet> {
        let cur = self.next?;
        // Standard submask walk: (cur - universe) & universe enumerates all
        // submasks in increasing order.
        let nxt = cur.wrapping_sub(self.universe) & self.universe;
        self.next = if nxt == 0 { None } else { Some(nxt) };
        Some(ItemSet(cur))
    }
}

/// One additive function of an XOS valuation. A zero weight means the item
/// is not covered by the clause.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdditiveClause<T> {
    weights: Vec<T>,
}

impl<T: Scalar> AdditiveClause<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| w.is_negative() || !w.is_finite_value())
        {
            return Err(Error::InvalidInput(format!(
                "clause weight for item {j} must be finite and non-negative, got {w}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            weights: vec![T::zero(); m],
        }
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, item: usize) -> T {
        self.weights[item]
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// Sum of the weights of the items in `set`.
    #[inline]
    pub fn sum_over(&self, set: ItemSet) -> T {
        set.iter().fold(T::zero(), |acc, j| acc + self.weights[j])
    }

    /// Copy of the clause with weights outside `set` zeroed.
    pub fn restricted(&self, set: ItemSet) -> Self {
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, &w)| if set.contains(j) { w } else { T::zero() })
            .collect();
        Self { weights }
    }

    fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != T::zero()).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationKind {
    Xos,
    UnitDemand,
    Additive,
}

impl ValuationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValuationKind::Xos => "xos",
            ValuationKind::UnitDemand => "unit-demand",
            ValuationKind::Additive => "additive",
        }
    }
}

/// An XOS valuation `v(B) = max_l sum_{j in B} a_l(j)` over an explicit
/// clause list.
#[derive(Clone, Debug, PartialEq)]
pub struct XosValuation<T> {
    m: usize,
    clauses: Vec<AdditiveClause<T>>,
    kind: ValuationKind,
}

/// Utility-maximal bundles at given prices, grouped by the clause that
/// supports them.
///
/// Every bundle `forced ∪ T` with `T ⊆ optional` of an option is a demand
/// set. `forced` holds the available items whose clause weight strictly
/// exceeds the price, `optional` the covered items priced exactly at their
/// weight.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandStructure<T> {
    pub utility: T,
    pub options: Vec<DemandOption>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DemandOption {
    pub clause: usize,
    pub forced: ItemSet,
    pub optional: ItemSet,
}

impl<T: Scalar> XosValuation<T> {
    pub fn new(clauses: Vec<AdditiveClause<T>>, kind: ValuationKind) -> Result<Self> {
        let first = clauses
            .first()
            .ok_or_else(|| Error::InvalidInput("a valuation needs at least one clause".into()))?;
        let m = first.m();
        if m == 0 || m > MAX_ITEMS {
            return Err(Error::InvalidInput(format!(
                "item count must be in 1..={MAX_ITEMS}, got {m}"
            )));
        }
        if let Some(bad) = clauses.iter().find(|c| c.m() != m) {
            return Err(Error::ShapeMismatch(format!(
                "clause of length {} in a valuation over {m} items",
                bad.m()
            )));
        }
        match kind {
            ValuationKind::UnitDemand => {
                if clauses.iter().any(|c| c.nonzero_count() > 1) {
                    return Err(Error::InvalidInput(
                        "unit-demand clauses may cover at most one item".into(),
                    ));
                }
            }
            ValuationKind::Additive => {
                if clauses.len() != 1 {
                    return Err(Error::InvalidInput(
                        "an additive valuation has exactly one clause".into(),
                    ));
                }
            }
            ValuationKind::Xos => {}
        }
        Ok(Self { m, clauses, kind })
    }

    /// General XOS valuation from raw clause weights.
    pub fn xos(clauses: Vec<Vec<T>>) -> Result<Self> {
        let clauses = clauses
            .into_iter()
            .map(AdditiveClause::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(clauses, ValuationKind::Xos)
    }

    pub fn additive(weights: Vec<T>) -> Result<Self> {
        Self::new(vec![AdditiveClause::new(weights)?], ValuationKind::Additive)
    }

    /// `v(B) = max_{j in B} values[j]`. One clause per positively valued
    /// item; an all-zero input yields a single zero clause.
    pub fn unit_demand(values: Vec<T>) -> Result<Self> {
        let m = values.len();
        AdditiveClause::new(values.clone())?;
        let mut clauses: Vec<AdditiveClause<T>> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > T::zero())
            .map(|(j, &v)| {
                let mut w = vec![T::zero(); m];
                w[j] = v;
                AdditiveClause { weights: w }
            })
            .collect();
        if clauses.is_empty() {
            clauses.push(AdditiveClause::zero(m));
        }
        Self::new(clauses, ValuationKind::UnitDemand)
    }

    /// The valuation that is zero on every bundle.
    pub fn zero(m: usize) -> Self {
        Self {
            m,
            clauses: vec![AdditiveClause::zero(m)],
            kind: ValuationKind::Additive,
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn clauses(&self) -> &[AdditiveClause<T>] {
        &self.clauses
    }

    #[inline]
    pub fn kind(&self) -> ValuationKind {
        self.kind
    }

    pub fn is_zero(&self) -> bool {
        self.clauses
            .iter()
            .all(|c| c.weights.iter().all(|w| *w == T::zero()))
    }

    /// Structural unit-demand test (at most one covered item per clause),
    /// independent of the construction tag.
    pub fn is_unit_demand_shaped(&self) -> bool {
        self.clauses.iter().all(|c| c.nonzero_count() <= 1)
    }

    pub fn check_set(&self, set: ItemSet) -> Result<()> {
        if set.fits(self.m) {
            Ok(())
        } else {
            let item = set.iter().find(|&j| j >= self.m).unwrap_or(self.m);
            Err(Error::ItemOutOfRange { item, m: self.m })
        }
    }

    fn check_prices(&self, prices: &[T]) -> Result<()> {
        if prices.len() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "{} prices for {} items",
                prices.len(),
                self.m
            )));
        }
        if prices.iter().any(|p| p.is_negative()) {
            return Err(Error::InvalidInput("prices must be non-negative".into()));
        }
        Ok(())
    }

    /// Value oracle.
    pub fn value(&self, set: ItemSet) -> Result<T> {
        self.check_set(set)?;
        Ok(self.value_of(set))
    }

    #[inline]
    pub(crate) fn value_of(&self, set: ItemSet) -> T {
        let mut best = T::zero();
        for c in &self.clauses {
            let s = c.sum_over(set);
            if s > best {
                best = s;
            }
        }
        best
    }

    /// `v({item})`.
    pub fn singleton_value(&self, item: usize) -> T {
        self.clauses
            .iter()
            .fold(T::zero(), |acc, c| acc.max_of(c.weights[item]))
    }

    /// Index of the first clause attaining `v(set)`.
    pub(crate) fn best_clause(&self, set: ItemSet) -> usize {
        let mut best = 0;
        let mut best_sum = self.clauses[0].sum_over(set);
        for (l, c) in self.clauses.iter().enumerate().skip(1) {
            let s = c.sum_over(set);
            if s > best_sum {
                best = l;
                best_sum = s;
            }
        }
        best
    }

    /// XOS oracle: the supporting additive function of `v` on `set`, zero
    /// outside `set`. Ties between clauses go to the lowest index.
    pub fn xos_clause(&self, set: ItemSet) -> Result<AdditiveClause<T>> {
        self.check_set(set)?;
        Ok(self.supporting_clause(set))
    }

    pub(crate) fn supporting_clause(&self, set: ItemSet) -> AdditiveClause<T> {
        if set.is_empty() {
            return AdditiveClause::zero(self.m);
        }
        self.clauses[self.best_clause(set)].restricted(set)
    }

    /// `v(set) - sum_{j in set} prices[j]`.
    pub fn utility(&self, set: ItemSet, prices: &[T]) -> T {
        let paid = set.iter().fold(T::zero(), |acc, j| acc + prices[j]);
        self.value_of(set) - paid
    }

    /// Demand oracle: a utility-maximising bundle within `available`.
    pub fn demand(&self, prices: &[T], available: ItemSet, tie: &TieRule) -> Result<ItemSet> {
        self.check_prices(prices)?;
        self.check_set(available)?;
        Ok(match tie {
            TieRule::StrictExceed => self.demand_fast(prices, available, false),
            TieRule::Lexicographic => self.demand_fast(prices, available, true),
            TieRule::Perturbation { .. } => match tie.perturb(self, 0, 0) {
                Some(p) => p.demand_fast(prices, available, false),
                None => self.demand_fast(prices, available, false),
            },
        })
    }

    /// Per-clause closed form. For clause `l` the best bundle is the set of
    /// available items whose weight beats the price; `prefer_buy` also takes
    /// covered items priced exactly at their weight. Equal utilities go to
    /// the lowest clause index.
    pub(crate) fn demand_fast(
        &self,
        prices: &[T],
        available: ItemSet,
        prefer_buy: bool,
    ) -> ItemSet {
        let mut best_u = T::zero();
        let mut best_set = ItemSet::EMPTY;
        let mut first = true;
        for c in &self.clauses {
            let mut u = T::zero();
            let mut set = ItemSet::EMPTY;
            for j in available.iter() {
                let a = c.weights[j];
                let p = prices[j];
                if a > p {
                    u = u + (a - p);
                    set.insert(j);
                } else if prefer_buy && a == p && a > T::zero() {
                    set.insert(j);
                }
            }
            if first || u > best_u {
                best_u = u;
                best_set = set;
                first = false;
            }
        }
        best_set
    }

    /// All utility-maximal bundles, grouped by supporting clause (see
    /// [`DemandStructure`]). Covered items only: zero-weight items priced at
    /// zero are never offered as optional.
    pub fn demand_structure(&self, prices: &[T], available: ItemSet) -> Result<DemandStructure<T>> {
        self.check_prices(prices)?;
        self.check_set(available)?;
        Ok(self.demand_structure_of(prices, available))
    }

    pub(crate) fn demand_structure_of(
        &self,
        prices: &[T],
        available: ItemSet,
    ) -> DemandStructure<T> {
        let per_clause: Vec<(T, ItemSet, ItemSet)> = self
            .clauses
            .iter()
            .map(|c| {
                let mut u = T::zero();
                let mut forced = ItemSet::EMPTY;
                let mut optional = ItemSet::EMPTY;
                for j in available.iter() {
                    let a = c.weights[j];
                    let p = prices[j];
                    if a > p {
                        u = u + (a - p);
                        forced.insert(j);
                    } else if a == p && a > T::zero() {
                        optional.insert(j);
                    }
                }
                (u, forced, optional)
            })
            .collect();
        let utility = per_clause
            .iter()
            .fold(T::zero(), |acc, (u, _, _)| acc.max_of(*u));
        let options = per_clause
            .iter()
            .enumerate()
            .filter(|(_, (u, _, _))| *u == utility)
            .map(|(clause, &(_, forced, optional))| DemandOption {
                clause,
                forced,
                optional,
            })
            .collect();
        DemandStructure { utility, options }
    }

    /// Copy with every weight of item `j` scaled by `1 + eps * u_j`,
    /// `u_j ~ U[0,1)`. Uncovered items stay uncovered.
    pub fn jittered<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> Self {
        let factors: Vec<T> = (0..self.m)
            .map(|_| T::from_f64(1.0 + eps * rng.random::<f64>()).unwrap_or_else(T::one))
            .collect();
        let clauses = self
            .clauses
            .iter()
            .map(|c| AdditiveClause {
                weights: c
                    .weights
                    .iter()
                    .zip(&factors)
                    .map(|(&w, &f)| w * f)
                    .collect(),
            })
            .collect();
        Self {
            m: self.m,
            clauses,
            kind: self.kind,
        }
    }

    /// Appends a clause without re-validating the kind tag.
    pub(crate) fn with_extra_clause(
        mut self,
        clause: AdditiveClause<T>,
        kind: ValuationKind,
    ) -> Self {
        debug_assert_eq!(clause.m(), self.m);
        self.clauses.push(clause);
        self.kind = kind;
        self
    }

    pub(crate) fn map_weights(
        &self,
        kind: ValuationKind,
        mut f: impl FnMut(usize, T) -> T,
    ) -> Self {
        let clauses = self
            .clauses
            .iter()
            .map(|c| AdditiveClause {
                weights: c
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(j, &w)| f(j, w))
                    .collect(),
            })
            .collect();
        Self {
            m: self.m,
            clauses,
            kind,
        }
    }
}

/// How indifference between bundles is resolved.
///
/// `Perturbation` realises a no-ties assumption: before an algorithm runs,
/// every valuation it reads gets its own deterministic multiplicative jitter
/// of relative size at most `eps`, drawn from a stream keyed by the seed,
/// the profile role and the bidder. The jittered copies are then compared
/// strictly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TieRule {
    /// Only items whose contribution strictly beats the price are bought.
    StrictExceed,
    /// Covered items priced exactly at their contribution are bought too;
    /// clause ties go to the lowest index.
    Lexicographic,
    Perturbation {
        seed: u64,
        eps: f64,
    },
}

pub const DEFAULT_PERTURBATION_EPS: f64 = 1e-9;

impl Default for TieRule {
    fn default() -> Self {
        TieRule::Perturbation {
            seed: 0,
            eps: DEFAULT_PERTURBATION_EPS,
        }
    }
}

impl TieRule {
    pub fn perturbation(seed: u64) -> Self {
        TieRule::Perturbation {
            seed,
            eps: DEFAULT_PERTURBATION_EPS,
        }
    }

    #[inline]
    pub(crate) fn prefers_buying(&self) -> bool {
        matches!(self, TieRule::Lexicographic)
    }

    /// Independent perturbation stream for Monte-Carlo trial `trial`;
    /// deterministic rules are returned unchanged.
    pub fn for_trial(&self, trial: u64) -> TieRule {
        match *self {
            TieRule::Perturbation { seed, eps } => TieRule::Perturbation {
                seed: crate::rng::stream_seed(seed, trial),
                eps,
            },
            ref other => other.clone(),
        }
    }

    pub(crate) fn jitter_rng(seed: u64, role: u64, bidder: usize) -> StreamRng {
        stream_rng(crate::rng::stream_seed(seed, role), bidder as u64)
    }

    /// The perturbed copy of `v` for (`role`, `bidder`), or `None` for the
    /// deterministic rules.
    pub fn perturb<T: Scalar>(
        &self,
        v: &XosValuation<T>,
        role: u64,
        bidder: usize,
    ) -> Option<XosValuation<T>> {
        match *self {
            TieRule::Perturbation { seed, eps } => {
                let mut rng = Self::jitter_rng(seed, role, bidder);
                Some(v.jittered(eps, &mut rng))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TieRule::Perturbation { eps, .. } = *self {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(crate::error::invalid_param(
                    "eps",
                    eps,
                    "perturbation size must be positive",
                ));
            }
        }
        Ok(())
    }
}
