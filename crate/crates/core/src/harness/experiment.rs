use std::collections::HashMap;
use std::io::Write;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{run_baseline, Baseline};
use super::io::{Instance, Model};
use super::{mean_se, with_workers};
use crate::error::{invalid_param, Error, Result};
use crate::greedy::{
    brute_force_opt_with_budget, buyer_wise_greedy, modified_greedy, opt_work, DEFAULT_OPT_BUDGET,
};
use crate::instances::ValuationProfile;
use crate::rng::stream_rng;
use crate::sample_algorithms::{one_sample, two_sample};
use crate::valuations::TieRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    TwoSample,
    OneSample,
    /// Offline, on the real profile.
    BuyerWiseGreedy,
    /// Offline, on the real profile.
    ModifiedGreedy,
    Baseline(Baseline),
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::TwoSample,
        Algorithm::OneSample,
        Algorithm::BuyerWiseGreedy,
        Algorithm::ModifiedGreedy,
        Algorithm::Baseline(Baseline::MaxSampleThreshold),
        Algorithm::Baseline(Baseline::SupportingPrice),
        Algorithm::Baseline(Baseline::HalfBalanced),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::TwoSample => "two-sample",
            Algorithm::OneSample => "one-sample",
            Algorithm::BuyerWiseGreedy => "buyer-wise-greedy",
            Algorithm::ModifiedGreedy => "modified-greedy",
            Algorithm::Baseline(b) => b.as_str(),
        }
    }

    /// Sample profiles read per trial.
    pub fn samples_needed(self) -> usize {
        match self {
            Algorithm::TwoSample => 2,
            Algorithm::OneSample | Algorithm::Baseline(_) => 1,
            Algorithm::BuyerWiseGreedy | Algorithm::ModifiedGreedy => 0,
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

/// Everything that determines a run. Equal configs on equal instances give
/// identical rows (apart from `runtime_ms` when timing is on).
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
    /// Trial `t` uses `tie.for_trial(t)`.
    pub tie: TieRule,
    /// Zero valuations mixed in by the single-sample reduction.
    pub inner_k: usize,
    pub opt_budget: u64,
    /// Record wall-clock time; off by default so output is reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: Algorithm, trials: usize, seed: u64) -> Self {
        Self {
            algorithm,
            trials,
            seed,
            tie: TieRule::default(),
            inner_k: 2,
            opt_budget: DEFAULT_OPT_BUDGET,
            timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialOutcome {
    pub welfare: f64,
    pub opt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_id: String,
    pub algorithm: String,
    pub trial_count: usize,
    pub seed: u64,
    pub mean_welfare: f64,
    pub se_welfare: f64,
    pub mean_opt: f64,
    /// Empty when the mean optimum is zero.
    pub ratio: Option<f64>,
    pub runtime_ms: u64,
}

impl ResultRow {
    pub fn from_trials(
        inst: &Instance,
        cfg: &ExperimentConfig,
        trials: &[TrialOutcome],
        runtime_ms: u64,
    ) -> Self {
        let w: Vec<f64> = trials.iter().map(|t| t.welfare).collect();
        let (mean_welfare, se_welfare) = mean_se(&w);
        let mean_opt = trials.iter().map(|t| t.opt).sum::<f64>() / trials.len().max(1) as f64;
        Self {
            instance_id: inst.id.clone(),
            algorithm: cfg.algorithm.as_str().to_string(),
            trial_count: trials.len(),
            seed: cfg.seed,
            mean_welfare,
            se_welfare,
            mean_opt,
            ratio: (mean_opt > 0.0).then(|| mean_welfare / mean_opt),
            runtime_ms,
        }
    }
}

pub fn write_results_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results_csv<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// One trial: roll (or draw) the profiles, run the algorithm, and solve the
/// realised real profile exactly.
///
/// Distribution instances draw the real profile first and then the
/// samples, so every algorithm sees the same real profiles for a seed.
pub fn run_trials(inst: &Instance, cfg: &ExperimentConfig) -> Result<Vec<TrialOutcome>> {
    if cfg.trials == 0 {
        return Err(invalid_param(
            "trials",
            cfg.trials,
            "need at least one trial",
        ));
    }
    cfg.tie.validate()?;
    let (n, m) = (inst.n(), inst.m());
    let work = opt_work(n, m);
    if work > cfg.opt_budget as f64 {
        return Err(Error::BudgetExceeded {
            required: work,
            budget: cfg.opt_budget,
        });
    }
    if let Model::Googol(g) = &inst.model {
        if g.k() < cfg.algorithm.samples_needed() {
            return Err(Error::InvalidInput(format!(
                "{} needs {} samples per bidder, the instance has {}",
                cfg.algorithm.as_str(),
                cfg.algorithm.samples_needed(),
                g.k()
            )));
        }
    }
    if cfg.algorithm == Algorithm::OneSample && cfg.inner_k < 2 {
        return Err(invalid_param(
            "inner_k",
            cfg.inner_k,
            "needs at least two sample slots",
        ));
    }
    let memo: Mutex<HashMap<Vec<usize>, f64>> = Mutex::new(HashMap::new());
    with_workers(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_one(inst, cfg, t as u64, &memo))
            .collect()
    })
}

fn run_one(
    inst: &Instance,
    cfg: &ExperimentConfig,
    trial: u64,
    memo: &Mutex<HashMap<Vec<usize>, f64>>,
) -> Result<TrialOutcome> {
    let mut rng = stream_rng(cfg.seed, trial);
    let tie = cfg.tie.for_trial(trial);
    let (samples, real, key) = match &inst.model {
        Model::Googol(g) => {
            let roll = g.googol_roll(&mut rng);
            (roll.samples, roll.real, Some(roll.real_facets))
        }
        Model::Distribution(d) => {
            let (real, key) = d.sample_profile_indexed(&mut rng);
            let samples: Vec<_> = (0..cfg.algorithm.samples_needed())
                .map(|_| d.sample_profile(&mut rng))
                .collect();
            (samples, real, key)
        }
    };
    let opt = match key {
        Some(key) => {
            let cached = memo.lock().expect("memo lock").get(&key).copied();
            match cached {
                Some(v) => v,
                None => {
                    let v = brute_force_opt_with_budget(&real, cfg.opt_budget)?.0;
                    memo.lock().expect("memo lock").insert(key, v);
                    v
                }
            }
        }
        None => brute_force_opt_with_budget(&real, cfg.opt_budget)?.0,
    };
    let arrange = |p: &ValuationProfile<f64>| match &inst.order {
        Some(o) => p.reordered(o),
        None => Ok(p.clone()),
    };
    let real = arrange(&real)?;
    let samples = samples.iter().map(arrange).collect::<Result<Vec<_>>>()?;
    let welfare = match cfg.algorithm {
        Algorithm::TwoSample => {
            two_sample(&samples[0], &samples[1], &real, &tie)?
                .allocation
                .welfare
        }
        Algorithm::OneSample => {
            one_sample(&samples[0], &real, cfg.inner_k, &mut rng, &tie)?
                .result
                .allocation
                .welfare
        }
        Algorithm::BuyerWiseGreedy => buyer_wise_greedy(&real, &tie).allocation.welfare,
        Algorithm::ModifiedGreedy => modified_greedy(&real, &tie).allocation.welfare,
        Algorithm::Baseline(b) => {
            run_baseline(b, &samples[0], &real, None, cfg.opt_budget)?.welfare
        }
    };
    Ok(TrialOutcome { welfare, opt })
}

/// Runs the trials and aggregates them into one result row.
pub fn run_experiment(inst: &Instance, cfg: &ExperimentConfig) -> Result<ResultRow> {
    let start = Instant::now();
    let trials = run_trials(inst, cfg)?;
    let runtime_ms = if cfg.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(ResultRow::from_trials(inst, cfg, &trials, runtime_ms))
}
