//! Valuation profiles, bidder distributions, the Game-of-Googol model,
//! genericizing noise and the hardness-instance generators.

use std::borrow::Cow;
use std::ops::Index;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid_param, Error, Result};
use crate::scalar::Scalar;
use crate::valuations::{AdditiveClause, TieRule, ValuationKind, XosValuation};

/// Tolerance for per-bidder probabilities summing to one.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// One valuation per bidder, all over the same items.
#[derive(Clone, Debug, PartialEq)]
pub struct ValuationProfile<T> {
    valuations: Vec<XosValuation<T>>,
}

impl<T: Scalar> ValuationProfile<T> {
    pub fn new(valuations: Vec<XosValuation<T>>) -> Result<Self> {
        let first = valuations
            .first()
            .ok_or_else(|| Error::InvalidInput("a profile needs at least one bidder".into()))?;
        let m = first.m();
        if let Some((i, v)) = valuations.iter().enumerate().find(|(_, v)| v.m() != m) {
            return Err(Error::ShapeMismatch(format!(
                "bidder {i} has {} items, bidder 0 has {m}",
                v.m()
            )));
        }
        Ok(Self { valuations })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            valuations: vec![XosValuation::zero(m); n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.valuations[0].m()
    }

    #[inline]
    pub fn bidders(&self) -> &[XosValuation<T>] {
        &self.valuations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, XosValuation<T>> {
        self.valuations.iter()
    }

    pub fn into_inner(self) -> Vec<XosValuation<T>> {
        self.valuations
    }

    /// Bidders reordered so that position `t` holds bidder `order[t]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n())?;
        Ok(Self {
            valuations: order.iter().map(|&i| self.valuations[i].clone()).collect(),
        })
    }

    /// The copy an algorithm should read under `tie`: jittered per bidder
    /// for the perturbation rule (stream keyed by `role`), borrowed
    /// otherwise.
    pub fn prepared(&self, tie: &TieRule, role: u64) -> Cow<'_, Self> {
        match tie {
            TieRule::Perturbation { .. } => Cow::Owned(Self {
                valuations: self
                    .valuations
                    .iter()
                    .enumerate()
                    .map(|(i, v)| tie.perturb(v, role, i).expect("perturbation rule"))
                    .collect(),
            }),
            _ => Cow::Borrowed(self),
        }
    }

    pub(crate) fn same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.n() != other.n() || self.m() != other.m() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {}x{} vs {}x{} (bidders x items)",
                self.n(),
                self.m(),
                other.n(),
                other.m()
            )));
        }
        Ok(())
    }
}

impl<T> Index<usize> for ValuationProfile<T> {
    type Output = XosValuation<T>;

    fn index(&self, i: usize) -> &XosValuation<T> {
        &self.valuations[i]
    }
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::InvalidInput(format!(
            "arrival order has {} entries for {n} bidders",
            order.len()
        )));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidInput(format!(
                "arrival order {order:?} is not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// Per-item value distribution of a parametric unit-demand bidder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ItemDistribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint {
        low: f64,
        high: f64,
        p_high: f64,
    },
}

impl ItemDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            ItemDistribution::Uniform { lo, hi } => {
                if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "bad uniform range [{lo}, {hi}]"
                    )));
                }
            }
            ItemDistribution::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(invalid_param("rate", rate, "must be positive"));
                }
            }
            ItemDistribution::TwoPoint { low, high, p_high } => {
                if !(low >= 0.0 && high >= 0.0 && high.is_finite() && (0.0..=1.0).contains(&p_high))
                {
                    return Err(Error::InvalidInput(format!(
                        "bad two-point distribution ({low}, {high}, {p_high})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ItemDistribution::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            ItemDistribution::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng)
            }
            ItemDistribution::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }
}

/// Distribution of a single bidder's valuation.
#[derive(Clone, Debug, PartialEq)]
pub enum BidderDistribution<T> {
    PointMass(XosValuation<T>),
    FiniteSupport(Vec<(XosValuation<T>, f64)>),
    /// Unit-demand with independent per-item values.
    UnitDemandParametric(Vec<ItemDistribution>),
    /// Draw from `inner`, then genericize with noise size `eps`.
    Generic {
        inner: Box<BidderDistribution<T>>,
        eps: f64,
    },
}

impl<T: Scalar> BidderDistribution<T> {
    pub fn m(&self) -> usize {
        match self {
            BidderDistribution::PointMass(v) => v.m(),
            BidderDistribution::FiniteSupport(s) => s.first().map_or(0, |(v, _)| v.m()),
            BidderDistribution::UnitDemandParametric(items) => items.len(),
            BidderDistribution::Generic { inner, .. } => inner.m(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BidderDistribution::PointMass(_) => Ok(()),
            BidderDistribution::FiniteSupport(support) => {
                if support.is_empty() {
                    return Err(Error::InvalidInput("empty support".into()));
                }
                let m = support[0].0.m();
                if support.iter().any(|(v, _)| v.m() != m) {
                    return Err(Error::ShapeMismatch(
                        "support valuations differ in m".into(),
                    ));
                }
                if support.iter().any(|(_, p)| p.is_nan() || *p < 0.0) {
                    return Err(Error::InvalidInput("negative probability".into()));
                }
                let total: f64 = support.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > PROB_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "support probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            BidderDistribution::UnitDemandParametric(items) => {
                if items.is_empty() || items.len() > crate::valuations::MAX_ITEMS {
                    return Err(Error::InvalidInput("bad item count".into()));
                }
                items.iter().try_for_each(ItemDistribution::validate)
            }
            BidderDistribution::Generic { inner, eps } => {
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(invalid_param("eps", eps, "noise size must be positive"));
                }
                inner.validate()
            }
        }
    }

    /// Draws a valuation; the second component is the support index for
    /// point masses and finite supports.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (XosValuation<T>, Option<usize>) {
        match self {
            BidderDistribution::PointMass(v) => (v.clone(), Some(0)),
            BidderDistribution::FiniteSupport(support) => {
                let idx = pick_index(support.iter().map(|(_, p)| *p), rng);
                (support[idx].0.clone(), Some(idx))
            }
            BidderDistribution::UnitDemandParametric(items) => {
                let values = items
                    .iter()
                    .map(|d| T::from_f64_or_zero(d.sample(rng)))
                    .collect();
                (
                    XosValuation::unit_demand(values).expect("sampled values are valid"),
                    None,
                )
            }
            BidderDistribution::Generic { inner, eps } => {
                let (v, _) = inner.sample(rng);
                (genericize(&v, *eps, rng).expect("validated eps"), None)
            }
        }
    }

    /// Explicit `(valuation, probability)` list for point masses and finite
    /// supports.
    pub fn support(&self) -> Option<Vec<(&XosValuation<T>, f64)>> {
        match self {
            BidderDistribution::PointMass(v) => Some(vec![(v, 1.0)]),
            BidderDistribution::FiniteSupport(s) => Some(s.iter().map(|(v, p)| (v, *p)).collect()),
            _ => None,
        }
    }
}

fn pick_index<R: Rng + ?Sized>(probs: impl Iterator<Item = f64> + Clone, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc && p > 0.0 {
            return i;
        }
    }
    last
}

/// Product distribution over valuation profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec<T> {
    bidders: Vec<BidderDistribution<T>>,
}

impl<T: Scalar> DistributionSpec<T> {
    pub fn new(bidders: Vec<BidderDistribution<T>>) -> Result<Self> {
        if bidders.is_empty() {
            return Err(Error::InvalidInput(
                "a distribution needs at least one bidder".into(),
            ));
        }
        for b in &bidders {
            b.validate()?;
        }
        let m = bidders[0].m();
        if bidders.iter().any(|b| b.m() != m) {
            return Err(Error::ShapeMismatch(
                "bidder distributions differ in m".into(),
            ));
        }
        Ok(Self { bidders })
    }

    pub fn point_mass(profile: &ValuationProfile<T>) -> Self {
        Self {
            bidders: profile
                .iter()
                .cloned()
                .map(BidderDistribution::PointMass)
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    pub fn m(&self) -> usize {
        self.bidders[0].m()
    }

    pub fn bidders(&self) -> &[BidderDistribution<T>] {
        &self.bidders
    }

    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R) -> ValuationProfile<T> {
        self.sample_profile_indexed(rng).0
    }

    /// Also returns per-bidder support indices when every bidder has an
    /// explicit support (used to memoise optima).
    pub fn sample_profile_indexed<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> (ValuationProfile<T>, Option<Vec<usize>>) {
        let mut idx = Vec::with_capacity(self.n());
        let mut all = true;
        let vals = self
            .bidders
            .iter()
            .map(|b| {
                let (v, i) = b.sample(rng);
                match i {
                    Some(i) => idx.push(i),
                    None => all = false,
                }
                v
            })
            .collect();
        (ValuationProfile { valuations: vals }, all.then_some(idx))
    }

    /// `true` when every bidder has an explicit finite support.
    pub fn is_finite_support(&self) -> bool {
        self.bidders.iter().all(|b| b.support().is_some())
    }

    /// Number of joint support profiles, as `f64` to avoid overflow.
    pub fn joint_support_size(&self) -> Option<f64> {
        self.bidders
            .iter()
            .map(|b| b.support().map(|s| s.len() as f64))
            .product()
    }

    /// Every joint support profile with its probability. Fails when the
    /// product of support sizes exceeds `budget`.
    pub fn support_profiles(&self, budget: u64) -> Result<Vec<(ValuationProfile<T>, f64)>> {
        let supports: Vec<Vec<(&XosValuation<T>, f64)>> = self
            .bidders
            .iter()
            .map(|b| {
                b.support().ok_or_else(|| {
                    Error::InvalidInput("exact enumeration needs finite supports".into())
                })
            })
            .collect::<Result<_>>()?;
        let total: f64 = supports.iter().map(|s| s.len() as f64).product();
        if total > budget as f64 {
            return Err(Error::BudgetExceeded {
                required: total,
                budget,
            });
        }
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; supports.len()];
        loop {
            let prob: f64 = idx.iter().zip(&supports).map(|(&k, s)| s[k].1).product();
            if prob > 0.0 {
                let vals = idx
                    .iter()
                    .zip(&supports)
                    .map(|(&k, s)| s[k].0.clone())
                    .collect();
                out.push((ValuationProfile { valuations: vals }, prob));
            }
            let mut b = 0;
            loop {
                if b == idx.len() {
                    return Ok(out);
                }
                idx[b] += 1;
                if idx[b] < supports[b].len() {
                    break;
                }
                idx[b] = 0;
                b += 1;
            }
        }
    }
}

/// Adversarial instance: `k + 1` valuations ("facets") per bidder.
#[derive(Clone, Debug, PartialEq)]
pub struct GoogolInstance<T> {
    facets: Vec<Vec<XosValuation<T>>>,
}

/// Outcome of one roll: `samples[l]` is the `l`-th sample profile;
/// `real_facets[i]` is the facet index that became bidder `i`'s real
/// valuation.
#[derive(Clone, Debug, PartialEq)]
pub struct GoogolRoll<T> {
    pub samples: Vec<ValuationProfile<T>>,
    pub real: ValuationProfile<T>,
    pub real_facets: Vec<usize>,
    /// `slots[i][l]` = facet placed in slot `l` for bidder `i`; slot `k` is
    /// the real one.
    pub slots: Vec<Vec<usize>>,
}

impl<T: Scalar> GoogolInstance<T> {
    pub fn new(facets: Vec<Vec<XosValuation<T>>>) -> Result<Self> {
        let first = facets.first().ok_or_else(|| {
            Error::InvalidInput("a Googol instance needs at least one bidder".into())
        })?;
        let count = first.len();
        if count < 2 {
            return Err(Error::InvalidInput(
                "each bidder needs at least two facets".into(),
            ));
        }
        let m = first[0].m();
        for (i, f) in facets.iter().enumerate() {
            if f.len() != count {
                return Err(Error::ShapeMismatch(format!(
                    "bidder {i} has {} facets, bidder 0 has {count}",
                    f.len()
                )));
            }
            if f.iter().any(|v| v.m() != m) {
                return Err(Error::ShapeMismatch(format!(
                    "bidder {i} has facets over a different m"
                )));
            }
        }
        Ok(Self { facets })
    }

    pub fn n(&self) -> usize {
        self.facets.len()
    }

    pub fn m(&self) -> usize {
        self.facets[0][0].m()
    }

    /// Number of sample slots.
    pub fn k(&self) -> usize {
        self.facets[0].len() - 1
    }

    pub fn facets(&self) -> &[Vec<XosValuation<T>>] {
        &self.facets
    }

    /// Independently per bidder, a uniform bijection of facets onto the `k`
    /// sample slots and the real slot.
    pub fn googol_roll<R: Rng + ?Sized>(&self, rng: &mut R) -> GoogolRoll<T> {
        let k = self.k();
        let slots: Vec<Vec<usize>> = self
            .facets
            .iter()
            .map(|f| {
                let mut perm: Vec<usize> = (0..f.len()).collect();
                perm.shuffle(rng);
                perm
            })
            .collect();
        let profile_at = |l: usize| ValuationProfile {
            valuations: slots
                .iter()
                .zip(&self.facets)
                .map(|(perm, f)| f[perm[l]].clone())
                .collect(),
        };
        GoogolRoll {
            samples: (0..k).map(profile_at).collect(),
            real: profile_at(k),
            real_facets: slots.iter().map(|p| p[k]).collect(),
            slots,
        }
    }
}

/// Adds `w_j ~ U[0, eps]` to item `j`.
///
/// General XOS: every clause covering `j` gains `w_j` and a pure-noise
/// clause `(w_1, ..., w_m)` is appended, so `v(S) <= v'(S) <= v(S) + m*eps`.
/// Additive: every weight gains `w_j`, giving `v'(S) = v(S) + sum_S w_j`.
/// Unit-demand stays unit-demand: item `j` is valued at `v({j}) + w_j`.
pub fn genericize<T: Scalar, R: Rng + ?Sized>(
    v: &XosValuation<T>,
    eps: f64,
    rng: &mut R,
) -> Result<XosValuation<T>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid_param("eps", eps, "noise size must be positive"));
    }
    let w: Vec<T> = (0..v.m())
        .map(|_| T::from_f64_or_zero(rng.random_range(0.0..=eps)))
        .collect();
    Ok(match v.kind() {
        ValuationKind::Additive => v.map_weights(ValuationKind::Additive, |j, a| a + w[j]),
        ValuationKind::UnitDemand => {
            let values = (0..v.m()).map(|j| v.singleton_value(j) + w[j]).collect();
            XosValuation::unit_demand(values)?
        }
        ValuationKind::Xos => {
            let noisy = v.map_weights(
                ValuationKind::Xos,
                |j, a| {
                    if a > T::zero() {
                        a + w[j]
                    } else {
                        a
                    }
                },
            );
            noisy.with_extra_clause(AdditiveClause::new(w)?, ValuationKind::Xos)
        }
    })
}

/// The three strawman-algorithm hardness families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HardnessFamily {
    MaxSampleThreshold,
    SupportingPrice,
    HalfBalanced,
}

impl HardnessFamily {
    pub const ALL: [HardnessFamily; 3] = [
        HardnessFamily::MaxSampleThreshold,
        HardnessFamily::SupportingPrice,
        HardnessFamily::HalfBalanced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HardnessFamily::MaxSampleThreshold => "max-sample-threshold",
            HardnessFamily::SupportingPrice => "supporting-price",
            HardnessFamily::HalfBalanced => "half-balanced",
        }
    }
}

impl std::str::FromStr for HardnessFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HardnessFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown family `{s}`")))
    }
}

/// Builds a hardness family as a product distribution.
///
/// * `MaxSampleThreshold`: bidder 0 values every non-empty bundle at 2
///   (unit-demand, 2 per item); every other bidder is additive with 1 per
///   item. Needs `n >= 2`. `eps` is ignored.
/// * `SupportingPrice` (`n == m`): the last bidder is unit-demand with
///   value 1 for item 0 and `eps` for the rest; everyone else values every
///   item at `eps / 2`.
/// * `HalfBalanced` (`n == m`): the last bidder values a uniformly random
///   item at 1 and the rest at `eps`; everyone else values every item at
///   `eps`.
pub fn gen_hardness(
    family: HardnessFamily,
    n: usize,
    m: usize,
    eps: f64,
) -> Result<DistributionSpec<f64>> {
    if m == 0 || m > crate::valuations::MAX_ITEMS {
        return Err(invalid_param("m", m, "item count out of range"));
    }
    let flat = |x: f64| XosValuation::unit_demand(vec![x; m]);
    match family {
        HardnessFamily::MaxSampleThreshold => {
            if n < 2 {
                return Err(invalid_param("n", n, "family needs at least two bidders"));
            }
            let mut bidders = vec![BidderDistribution::PointMass(flat(2.0)?)];
            for _ in 1..n {
                bidders.push(BidderDistribution::PointMass(XosValuation::additive(
                    vec![1.0; m],
                )?));
            }
            DistributionSpec::new(bidders)
        }
        HardnessFamily::SupportingPrice | HardnessFamily::HalfBalanced => {
            if n != m {
                return Err(invalid_param("n", n, "family needs n == m"));
            }
            if !(eps > 0.0 && eps < 1.0) {
                return Err(invalid_param("eps", eps, "must lie in (0, 1)"));
            }
            let supporting = family == HardnessFamily::SupportingPrice;
            let low = if supporting { eps / 2.0 } else { eps };
            let mut bidders: Vec<BidderDistribution<f64>> = (0..n - 1)
                .map(|_| flat(low).map(BidderDistribution::PointMass))
                .collect::<Result<_>>()?;
            let high_on = |j: usize| {
                let mut v = vec![eps; m];
                v[j] = 1.0;
                XosValuation::unit_demand(v)
            };
            if supporting {
                bidders.push(BidderDistribution::PointMass(high_on(0)?));
            } else {
                let p = 1.0 / m as f64;
                let mut support: Vec<(XosValuation<f64>, f64)> = (0..m)
                    .map(|j| high_on(j).map(|v| (v, p)))
                    .collect::<Result<_>>()?;
                // Make the probabilities sum to one exactly.
                let rest: f64 = support[..m - 1].iter().map(|(_, p)| p).sum();
                support[m - 1].1 = 1.0 - rest;
                bidders.push(BidderDistribution::FiniteSupport(support));
            }
            DistributionSpec::new(bidders)
        }
    }
}

/// Random XOS valuation with `1..=max_clauses` clauses; each weight is zero
/// with probability `sparsity`, otherwise uniform on `[0, 1)`.
pub fn random_xos<R: Rng + ?Sized>(
    m: usize,
    max_clauses: usize,
    sparsity: f64,
    rng: &mut R,
) -> XosValuation<f64> {
    let k = rng.random_range(1..=max_clauses.max(1));
    let clauses = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if rng.random::<f64>() < sparsity {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect();
    XosValuation::xos(clauses).expect("generated weights are valid")
}

/// Random XOS valuation with small integer weights in `0..=max_weight`
/// (many ties; useful for exercising tie rules).
pub fn random_integer_xos<R: Rng + ?Sized>(
    m: usize,
    max_clauses: usize,
    max_weight: u32,
    rng: &mut R,
) -> XosValuation<f64> {
    let k = rng.random_range(1..=max_clauses.max(1));
    let clauses = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| rng.random_range(0..=max_weight) as f64)
                .collect()
        })
        .collect();
    XosValuation::xos(clauses).expect("generated weights are valid")
}

pub fn random_profile<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    max_clauses: usize,
    rng: &mut R,
) -> ValuationProfile<f64> {
    ValuationProfile::new(
        (0..n)
            .map(|_| random_xos(m, max_clauses, 0.3, rng))
            .collect(),
    )
    .expect("uniform m")
}

pub fn random_googol<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    facets: usize,
    max_clauses: usize,
    rng: &mut R,
) -> GoogolInstance<f64> {
    let facets = (0..n)
        .map(|_| {
            (0..facets)
                .map(|_| random_xos(m, max_clauses, 0.3, rng))
                .collect()
        })
        .collect();
    GoogolInstance::new(facets).expect("well-formed facets")
}

/// Unit-demand valuation with i.i.d. uniform values on `[0, 1)`.
pub fn random_unit_demand<R: Rng + ?Sized>(m: usize, rng: &mut R) -> XosValuation<f64> {
    XosValuation::unit_demand((0..m).map(|_| rng.random::<f64>()).collect()).expect("valid values")
}

/// Random finite-support XOS distribution with `support` equiprobable
/// valuations per bidder.
pub fn random_finite_support<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    support: usize,
    max_clauses: usize,
    rng: &mut R,
) -> DistributionSpec<f64> {
    let bidders = (0..n)
        .map(|_| {
            let p = 1.0 / support as f64;
            let mut s: Vec<(XosValuation<f64>, f64)> = (0..support)
                .map(|_| (random_xos(m, max_clauses, 0.3, rng), p))
                .collect();
            let rest: f64 = s[..support - 1].iter().map(|(_, p)| p).sum();
            s[support - 1].1 = 1.0 - rest;
            BidderDistribution::FiniteSupport(s)
        })
        .collect();
    DistributionSpec::new(bidders).expect("well-formed distribution")
}
