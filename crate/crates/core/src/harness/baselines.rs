//! Simple sample-based posted-price strawmen. Each one turns a sample
//! profile `s` into item prices and runs the sequential posted-price
//! mechanism on the real profile with strict buying.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::greedy::brute_force_opt_with_budget;
use crate::instances::ValuationProfile;
use crate::median::{posted_price_run_with_weights, ChoiceRule, MechanismOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// `p_j = max_i s_i({j})`.
    MaxSampleThreshold,
    /// `p_j` = item `j`'s supporting value in an optimal allocation of `s`.
    SupportingPrice,
    /// Half of the supporting price.
    HalfBalanced,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [
        Baseline::MaxSampleThreshold,
        Baseline::SupportingPrice,
        Baseline::HalfBalanced,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Baseline::MaxSampleThreshold => "max-sample-threshold",
            Baseline::SupportingPrice => "supporting-price",
            Baseline::HalfBalanced => "half-balanced",
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Prices the baseline derives from `s`. Items left unallocated by the
/// optimum are priced at zero.
pub fn baseline_prices(
    baseline: Baseline,
    s: &ValuationProfile<f64>,
    opt_budget: u64,
) -> Result<Vec<f64>> {
    let m = s.m();
    match baseline {
        Baseline::MaxSampleThreshold => Ok((0..m)
            .map(|j| s.iter().map(|v| v.singleton_value(j)).fold(0.0, f64::max))
            .collect()),
        Baseline::SupportingPrice | Baseline::HalfBalanced => {
            let (_, alloc) = brute_force_opt_with_budget(s, opt_budget)?;
            let scale = if baseline == Baseline::HalfBalanced {
                0.5
            } else {
                1.0
            };
            Ok((0..m)
                .map(|j| alloc.contributions.iter().map(|row| row[j]).sum::<f64>() * scale)
                .collect())
        }
    }
}

/// Prices from `s`, posted to `r` arriving in `order` (index order when
/// `None`).
pub fn run_baseline(
    baseline: Baseline,
    s: &ValuationProfile<f64>,
    r: &ValuationProfile<f64>,
    order: Option<&[usize]>,
    opt_budget: u64,
) -> Result<MechanismOutcome<f64>> {
    s.same_shape(r, "baseline")?;
    let p = baseline_prices(baseline, s, opt_budget)?;
    let order: Vec<usize> = order.map_or_else(|| (0..r.n()).collect(), <[usize]>::to_vec);
    posted_price_run_with_weights(&p, r, &order, &ChoiceRule::Generic, &[])
}
