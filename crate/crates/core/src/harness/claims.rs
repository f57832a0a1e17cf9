//! Per-item inequality checks on the two-sample algorithm's diagnostics.
//!
//! Each check compares `mean(LHS)` with `c * mean(RHS)` through the paired
//! differences `D = LHS - c * RHS`; a check is flagged when
//! `mean(D) < -3 se(D)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_se, with_workers};
use crate::error::{invalid_param, Result};
use crate::instances::GoogolInstance;
use crate::rng::stream_rng;
use crate::sample_algorithms::{two_sample_with, ItemDiagnostics, TwoSampleOptions};
use crate::valuations::TieRule;

/// Fewest rolls accepted by [`run_claim_checks`].
pub const MIN_CLAIM_TRIALS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    /// `ALG_j >= 1/4 max(max real bid, max second-sample bid)`.
    ContributionVsMaxBid,
    /// `max(max real bid, max second-sample bid) >= 1/32 (sum of both)`.
    MaxBidVsBidSum,
    /// `max real bid >= 1/4 final greedy price`.
    RealBidVsPrice,
    /// `final greedy price >= 1/4 sum of real bids`.
    PriceVsRealBidSum,
}

impl ClaimKind {
    pub const ALL: [ClaimKind; 4] = [
        ClaimKind::ContributionVsMaxBid,
        ClaimKind::MaxBidVsBidSum,
        ClaimKind::RealBidVsPrice,
        ClaimKind::PriceVsRealBidSum,
    ];

    pub fn constant(self) -> f64 {
        match self {
            ClaimKind::MaxBidVsBidSum => 1.0 / 32.0,
            _ => 0.25,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimKind::ContributionVsMaxBid => "contribution-vs-max-bid",
            ClaimKind::MaxBidVsBidSum => "max-bid-vs-bid-sum",
            ClaimKind::RealBidVsPrice => "real-bid-vs-price",
            ClaimKind::PriceVsRealBidSum => "price-vs-real-bid-sum",
        }
    }

    /// `(LHS, RHS)` for one item record.
    pub fn sides(self, d: &ItemDiagnostics<f64>) -> (f64, f64) {
        let max_bid = d.max_real_bid.max(d.max_second_bid);
        match self {
            ClaimKind::ContributionVsMaxBid => (d.alg_contribution, max_bid),
            ClaimKind::MaxBidVsBidSum => (max_bid, d.sum_real_bids + d.sum_second_bids),
            ClaimKind::RealBidVsPrice => (d.max_real_bid, d.final_price),
            ClaimKind::PriceVsRealBidSum => (d.final_price, d.sum_real_bids),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub item: usize,
    pub claim: ClaimKind,
    pub constant: f64,
    pub mean_lhs: f64,
    pub mean_rhs: f64,
    /// `mean(LHS) - constant * mean(RHS)`.
    pub margin: f64,
    /// Standard error of the paired difference.
    pub se: f64,
    pub flagged: bool,
}

/// Rolls `g` `trials` times (trial `t` on stream `(seed, t)`), runs the
/// two-sample algorithm on the first two samples and the real profile, and
/// reports every (item, check) pair.
pub fn run_claim_checks(
    g: &GoogolInstance<f64>,
    trials: usize,
    seed: u64,
    tie: &TieRule,
    opts: TwoSampleOptions,
) -> Result<Vec<ClaimRow>> {
    if trials < MIN_CLAIM_TRIALS {
        return Err(invalid_param(
            "trials",
            trials,
            "claim checks need at least 1000 rolls",
        ));
    }
    if g.k() < 2 {
        return Err(invalid_param(
            "facets",
            g.k() + 1,
            "claim checks need at least three facets",
        ));
    }
    tie.validate()?;
    let diags: Vec<Vec<ItemDiagnostics<f64>>> = with_workers(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                let roll = g.googol_roll(&mut rng);
                let res = two_sample_with(
                    &roll.samples[0],
                    &roll.samples[1],
                    &roll.real,
                    &tie.for_trial(t as u64),
                    opts,
                )?;
                Ok(res.diagnostics)
            })
            .collect::<Result<_>>()
    })?;
    let mut rows = Vec::with_capacity(g.m() * ClaimKind::ALL.len());
    for item in 0..g.m() {
        for claim in ClaimKind::ALL {
            let c = claim.constant();
            let sides: Vec<(f64, f64)> = diags.iter().map(|d| claim.sides(&d[item])).collect();
            let lhs: Vec<f64> = sides.iter().map(|s| s.0).collect();
            let rhs: Vec<f64> = sides.iter().map(|s| s.1).collect();
            let diff: Vec<f64> = sides.iter().map(|&(l, r)| l - c * r).collect();
            let (margin, se) = mean_se(&diff);
            rows.push(ClaimRow {
                item,
                claim,
                constant: c,
                mean_lhs: mean_se(&lhs).0,
                mean_rhs: mean_se(&rhs).0,
                margin,
                se,
                flagged: margin < -3.0 * se - 1e-12,
            });
        }
    }
    Ok(rows)
}

pub fn write_claims_csv<W: Write>(w: W, rows: &[ClaimRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
