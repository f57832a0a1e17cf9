use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use prophet_core::harness::claims::write_claims_csv;
use prophet_core::harness::experiment::write_results_csv;
use prophet_core::harness::{
    run_claim_checks, run_experiment, Algorithm, ExperimentConfig, Instance, Model,
};
use prophet_core::instances::{
    gen_hardness, random_finite_support, random_googol, BidderDistribution, HardnessFamily,
};
use prophet_core::median::{
    sample_count, tatonnement_unit_demand, verify_median, ChoiceRule, PiSource, DEFAULT_Z,
};
use prophet_core::rng::seeded;
use prophet_core::sample_algorithms::TwoSampleOptions;
use prophet_core::{DistributionSpec, TieRule, ValuationProfile, XosValuation};

#[derive(Parser)]
#[command(
    name = "prophet",
    version,
    about = "Sample-based allocation and median-price experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance JSON.
    Gen(GenArgs),
    /// Monte-Carlo welfare of one or more algorithms on an instance.
    Simulate(SimulateArgs),
    /// Median prices for unit-demand bidders.
    #[command(subcommand)]
    Median(MedianCommand),
    /// Per-item inequality checks of the two-sample algorithm.
    Claims(ClaimsArgs),
    /// Baselines against the two-sample algorithm on the hardness families.
    Baseline(BaselineArgs),
}

#[derive(Subcommand)]
enum MedianCommand {
    /// Learn prices by Tatonnement on samples drawn from a distribution.
    Learn(LearnArgs),
    /// Check sale probabilities at given prices.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    MaxSampleThreshold,
    SupportingPrice,
    HalfBalanced,
    /// Random XOS facets (Googol model).
    RandomGoogol,
    /// Random finite-support XOS distribution.
    RandomDistribution,
    /// Random finite-support unit-demand distribution.
    RandomUnitDemand,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenKind,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Facets per bidder (random-googol).
    #[arg(long, default_value_t = 3)]
    facets: usize,
    /// Support size per bidder (random distributions).
    #[arg(long, default_value_t = 3)]
    support: usize,
    #[arg(long, default_value_t = 3)]
    max_clauses: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Strict,
    Lexicographic,
    Perturbation,
}

#[derive(Args)]
struct TieArgs {
    #[arg(long, value_enum, default_value = "perturbation")]
    tie: TieArg,
    #[arg(long, default_value_t = 0)]
    tie_seed: u64,
    #[arg(long, default_value_t = prophet_core::valuations::DEFAULT_PERTURBATION_EPS)]
    tie_eps: f64,
}

impl TieArgs {
    fn rule(&self) -> TieRule {
        match self.tie {
            TieArg::Strict => TieRule::StrictExceed,
            TieArg::Lexicographic => TieRule::Lexicographic,
            TieArg::Perturbation => TieRule::Perturbation {
                seed: self.tie_seed,
                eps: self.tie_eps,
            },
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Comma-separated algorithm ids.
    #[arg(long, value_delimiter = ',', required = true)]
    algorithm: Vec<String>,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    tie: TieArgs,
    #[arg(long, default_value_t = 2)]
    inner_k: usize,
    #[arg(long, default_value_t = prophet_core::greedy::DEFAULT_OPT_BUDGET)]
    opt_budget: u64,
    /// Fill runtime_ms (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Distribution instance with unit-demand bidders.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long = "c", default_value_t = 1.0)]
    c: f64,
    /// Use this many samples instead of the formula.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise added to every sampled valuation so that demand ties have
    /// probability zero; 0 keeps the raw samples.
    #[arg(long, default_value_t = 1e-6)]
    generic_eps: f64,
    /// Price JSON (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyMode {
    Exact,
    MonteCarlo,
}

#[derive(Args)]
struct VerifyArgs {
    /// Price JSON as written by `median learn` (or a bare array).
    #[arg(long)]
    prices: PathBuf,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "monte-carlo")]
    mode: VerifyMode,
    /// `generic`, `lexicographic` or `q:<value>`.
    #[arg(long, default_value = "generic")]
    rule: String,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-item sale probabilities as CSV.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct ClaimsArgs {
    /// Googol instance with at least three facets per bidder.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tie: TieArgs,
    /// Grant demanded items without checking base prices.
    #[arg(long)]
    ignore_base_prices: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_parser = parse_family)]
    family: HardnessFamily,
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Comma-separated item counts.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Item count equals bidder count (families that need it).
    #[arg(long)]
    square: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<HardnessFamily, String> {
    s.parse().map_err(|e: prophet_core::Error| e.to_string())
}

fn parse_rule(s: &str, m: usize) -> Result<ChoiceRule> {
    Ok(match s {
        "generic" => ChoiceRule::Generic,
        "lexicographic" => ChoiceRule::Lexicographic,
        _ => match s.strip_prefix("q:") {
            Some(q) => {
                ChoiceRule::uniform_q(m, q.parse().with_context(|| format!("bad q in `{s}`"))?)
            }
            None => bail!("unknown rule `{s}` (generic, lexicographic, q:<value>)"),
        },
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<Instance> {
    Instance::load(path).with_context(|| format!("reading instance {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Median(MedianCommand::Learn(a)) => learn(a),
        Command::Median(MedianCommand::Verify(a)) => verify(a),
        Command::Claims(a) => claims(a),
        Command::Baseline(a) => baseline(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let mut rng = seeded(a.seed);
    let hardness =
        |f| -> Result<Model> { Ok(Model::Distribution(gen_hardness(f, a.n, a.m, a.eps)?)) };
    let (name, model) = match a.family {
        GenKind::MaxSampleThreshold => (
            "max-sample-threshold",
            hardness(HardnessFamily::MaxSampleThreshold)?,
        ),
        GenKind::SupportingPrice => (
            "supporting-price",
            hardness(HardnessFamily::SupportingPrice)?,
        ),
        GenKind::HalfBalanced => ("half-balanced", hardness(HardnessFamily::HalfBalanced)?),
        GenKind::RandomGoogol => {
            if a.facets < 2 {
                bail!("need at least two facets");
            }
            (
                "googol",
                Model::Googol(random_googol(a.n, a.m, a.facets, a.max_clauses, &mut rng)),
            )
        }
        GenKind::RandomDistribution => (
            "distribution",
            Model::Distribution(random_finite_support(
                a.n,
                a.m,
                a.support,
                a.max_clauses,
                &mut rng,
            )),
        ),
        GenKind::RandomUnitDemand => {
            let p = 1.0 / a.support as f64;
            let bidders = (0..a.n)
                .map(|_| {
                    let mut s: Vec<(XosValuation<f64>, f64)> = (0..a.support)
                        .map(|_| prophet_core::instances::random_unit_demand(a.m, &mut rng))
                        .map(|v| (v, p))
                        .collect();
                    let rest: f64 = s.iter().skip(1).map(|x| x.1).sum();
                    s[0].1 = 1.0 - rest;
                    BidderDistribution::FiniteSupport(s)
                })
                .collect();
            (
                "unit-demand",
                Model::Distribution(DistributionSpec::new(bidders)?),
            )
        }
    };
    let id =
        a.id.clone()
            .unwrap_or_else(|| format!("{name}-n{}-m{}-s{}", a.n, a.m, a.seed));
    let inst = Instance::new(id, model);
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", inst.to_json_string()?)?;
    w.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let mut rows = Vec::new();
    for name in &a.algorithm {
        let mut cfg = ExperimentConfig::new(name.parse::<Algorithm>()?, a.trials, a.seed);
        cfg.tie = a.tie.rule();
        cfg.inner_k = a.inner_k;
        cfg.opt_budget = a.opt_budget;
        cfg.timing = a.timing;
        rows.push(run_experiment(&inst, &cfg).with_context(|| format!("running {name}"))?);
    }
    write_results_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

#[derive(Serialize, serde::Deserialize)]
struct PriceFile {
    prices: Vec<f64>,
    k: usize,
    eps: f64,
    iterations: usize,
    pi: Vec<f64>,
}

fn learn(a: LearnArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let Model::Distribution(dist) = &inst.model else {
        bail!("median learn needs a distribution instance");
    };
    let k = match a.k {
        Some(k) => k,
        None => usize::try_from(sample_count(a.eps, a.delta, dist.n(), dist.m(), a.c)?)?,
    };
    if k == 0 {
        bail!("need at least one sample");
    }
    let dist = if a.generic_eps > 0.0 {
        let wrapped = dist
            .bidders()
            .iter()
            .map(|b| BidderDistribution::Generic {
                inner: Box::new(b.clone()),
                eps: a.generic_eps,
            })
            .collect();
        DistributionSpec::new(wrapped)?
    } else {
        dist.clone()
    };
    let mut rng = seeded(a.seed);
    let samples: Vec<ValuationProfile<f64>> =
        (0..k).map(|_| dist.sample_profile(&mut rng)).collect();
    let out = tatonnement_unit_demand(&samples, a.eps)?;
    if let Some(path) = &a.trace_out {
        let mut w = csv::Writer::from_writer(output(Some(path))?);
        w.write_record([
            "iteration",
            "threshold",
            "raised_items",
            "increment",
            "potential_before",
            "potential",
            "max_pi",
        ])?;
        for s in &out.trace {
            let raised: Vec<String> = s.raised.iter().map(|j| j.to_string()).collect();
            let max_pi = s.counts_after.iter().copied().max().unwrap_or(0) as f64 / out.k as f64;
            w.write_record([
                s.iteration.to_string(),
                s.threshold.map_or(String::new(), |t| t.to_string()),
                raised.join(";"),
                s.increment.to_string(),
                s.potential_before.to_string(),
                s.potential_after.to_string(),
                max_pi.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let file = PriceFile {
        prices: out.prices.to_vec(),
        k: out.k,
        eps: a.eps,
        iterations: out.iterations(),
        pi: out.pi.clone(),
    };
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(&file)?)?;
    w.flush()?;
    Ok(())
}

fn read_prices(path: &Path) -> Result<Vec<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let arr = match &value {
        serde_json::Value::Array(_) => value,
        serde_json::Value::Object(o) => o.get("prices").cloned().context("no `prices` key")?,
        _ => bail!("prices must be an array or an object with `prices`"),
    };
    Ok(serde_json::from_value(arr)?)
}

#[derive(Serialize)]
struct ItemReport {
    item: usize,
    price: f64,
    pi: f64,
    lower: f64,
    upper: f64,
    exempt_lower: bool,
    pass: bool,
}

#[derive(Serialize)]
struct VerdictReport {
    alpha: f64,
    mode: &'static str,
    rule: String,
    trials: usize,
    pass: bool,
    max_deviation: f64,
    items: Vec<ItemReport>,
}

fn verify(a: VerifyArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let Model::Distribution(dist) = &inst.model else {
        bail!("median verify needs a distribution instance");
    };
    let prices = read_prices(&a.prices)?;
    let rule = parse_rule(&a.rule, dist.m())?;
    let source = match a.mode {
        VerifyMode::Exact => PiSource::Exact(dist),
        VerifyMode::MonteCarlo => PiSource::MonteCarlo {
            dist,
            trials: a.trials,
            seed: a.seed,
        },
    };
    let v = verify_median(&prices, source, inst.order.as_deref(), &rule, a.alpha, a.z)?;
    let items: Vec<ItemReport> = v
        .items
        .iter()
        .enumerate()
        .map(|(j, it)| ItemReport {
            item: j,
            price: prices[j],
            pi: it.pi,
            lower: it.lower,
            upper: it.upper,
            exempt_lower: it.exempt_lower,
            pass: it.pass,
        })
        .collect();
    if let Some(path) = &a.csv_out {
        let mut w = csv::Writer::from_writer(output(Some(path))?);
        w.write_record(["item", "price", "pi", "lower", "upper", "alpha", "pass"])?;
        for it in &items {
            w.write_record([
                it.item.to_string(),
                it.price.to_string(),
                it.pi.to_string(),
                it.lower.to_string(),
                it.upper.to_string(),
                a.alpha.to_string(),
                it.pass.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let report = VerdictReport {
        alpha: v.alpha,
        mode: v.mode.as_str(),
        rule: rule.name(),
        trials: match a.mode {
            VerifyMode::Exact => 0,
            VerifyMode::MonteCarlo => a.trials,
        },
        pass: v.pass,
        max_deviation: v.max_deviation,
        items,
    };
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    w.flush()?;
    Ok(())
}

fn claims(a: ClaimsArgs) -> Result<()> {
    let inst = load(&a.instance)?;
    let Model::Googol(g) = &inst.model else {
        bail!("claims needs a googol instance");
    };
    let opts = TwoSampleOptions {
        ignore_base_prices: a.ignore_base_prices,
    };
    let rows = run_claim_checks(g, a.trials, a.seed, &a.tie.rule(), opts)?;
    write_claims_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let base = match a.family {
        HardnessFamily::MaxSampleThreshold => "max-sample-threshold",
        HardnessFamily::SupportingPrice => "supporting-price",
        HardnessFamily::HalfBalanced => "half-balanced",
    };
    let mut rows = Vec::new();
    for &m in &a.m {
        let n = if a.square { m } else { a.n };
        let dist = gen_hardness(a.family, n, m, a.eps)?;
        let inst = Instance::new(
            format!("{}-n{n}-m{m}", a.family.as_str()),
            Model::Distribution(dist),
        );
        for name in [base, "two-sample"] {
            let cfg = ExperimentConfig::new(name.parse()?, a.trials, a.seed);
            rows.push(run_experiment(&inst, &cfg)?);
        }
    }
    write_results_csv(output(a.out.as_deref())?, &rows)?;
    Ok(())
}
