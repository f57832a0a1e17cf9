//! Sample-based online allocation and median-price posted-price mechanisms
//! for XOS bidders.
//!
//! The algorithmic core is generic over [`Scalar`], so it runs on `f64`,
//! `f32` or exact rationals; the Monte-Carlo harness works in `f64`.

pub mod error;
pub mod greedy;
pub mod harness;
pub mod instances;
pub mod median;
pub mod rng;
pub mod sample_algorithms;
pub mod scalar;
pub mod valuations;

pub use error::{Error, Result};
pub use greedy::{Allocation, GreedyTrace, PriceVector};
pub use harness::{Instance, Model};
pub use instances::{BidderDistribution, DistributionSpec, GoogolInstance, ValuationProfile};
pub use median::{ChoiceRule, MechanismOutcome};
pub use scalar::Scalar;
pub use valuations::{AdditiveClause, ItemSet, TieRule, ValuationKind, XosValuation};

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type Valuation = XosValuation<f64>;
pub type Profile = ValuationProfile<f64>;
pub type Prices = PriceVector<f64>;
pub type ExactValuation = XosValuation<Rational>;
pub type ExactProfile = ValuationProfile<Rational>;
