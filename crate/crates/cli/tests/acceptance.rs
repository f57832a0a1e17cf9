//! Acceptance suite. Every test checks one criterion and writes a single
//! `PASS`/`FAIL` line to stderr (unbuffered, so it shows without
//! `--nocapture`).

use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::Rng;
use rayon::prelude::*;

use prophet_core::greedy::{brute_force_opt, buyer_wise_greedy, modified_greedy};
use prophet_core::harness::{
    mean_se, run_baseline, run_claim_checks, run_experiment, run_trials, Baseline,
};
use prophet_core::harness::{Algorithm, ExperimentConfig, Instance, Model};
use prophet_core::instances::{
    gen_hardness, random_finite_support, random_googol, random_profile, random_unit_demand,
    BidderDistribution, HardnessFamily, ItemDistribution,
};
use prophet_core::median::{
    estimate_pi, exact_mechanism, grid_search_median_xos, posted_price_run, sample_count,
    single_item_median, tatonnement_iteration_bound, tatonnement_unit_demand, ChoiceRule, PiSource,
    DEFAULT_GRID_BUDGET,
};
use prophet_core::rng::{seeded, stream_rng};
use prophet_core::sample_algorithms::TwoSampleOptions;
use prophet_core::{DistributionSpec, GoogolInstance, TieRule, ValuationProfile, XosValuation};

fn report(name: &str, pass: bool, detail: impl AsRef<str>) {
    let line = format!(
        "{} {name}: {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {}", detail.as_ref());
}

fn greedy_suite(name: &str, ratio: f64, run: impl Fn(&ValuationProfile<f64>, &TieRule) -> f64) {
    let mut rng = seeded(0xA11CE);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for _ in 0..1000 {
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let p = random_profile(n, m, 3, &mut rng);
        let opt = brute_force_opt(&p).unwrap().0;
        for tie in [TieRule::Lexicographic, TieRule::perturbation(rng.random())] {
            let w = run(&p, &tie);
            checked += 1;
            if w < ratio * opt - 1e-9 {
                violations += 1;
            }
            if opt > 0.0 {
                worst = worst.min(w / opt);
            }
        }
    }
    report(
        name,
        violations == 0,
        format!(
            "{violations} violations in {checked} runs, worst ratio {worst:.4} (bound {ratio:.4})"
        ),
    );
}

#[test]
fn greedy_half_approximation() {
    greedy_suite("buyer-wise greedy >= OPT/2", 0.5, |p, t| {
        buyer_wise_greedy(p, t).allocation.welfare
    });
}

#[test]
fn modified_greedy_third_approximation() {
    greedy_suite("powers-of-two greedy >= OPT/3", 1.0 / 3.0, |p, t| {
        modified_greedy(p, t).allocation.welfare
    });
}

/// Paired check `mean(W - OPT/c) >= -3 se` on 20 random Googol instances.
fn googol_suite(name: &str, facets: usize, algorithm: Algorithm, c: f64, seed: u64) {
    let mut rng = seeded(seed);
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for idx in 0..20 {
        let (n, m) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let g = random_googol(n, m, facets, 3, &mut rng);
        let inst = Instance::new(format!("g{idx}"), Model::Googol(g));
        let trials =
            run_trials(&inst, &ExperimentConfig::new(algorithm, 10_000, seed + idx)).unwrap();
        let d: Vec<f64> = trials.iter().map(|t| t.welfare - t.opt / c).collect();
        let (mean, se) = mean_se(&d);
        let (w, _) = mean_se(&trials.iter().map(|t| t.welfare).collect::<Vec<_>>());
        let (o, _) = mean_se(&trials.iter().map(|t| t.opt).collect::<Vec<_>>());
        if o > 0.0 {
            worst = worst.min(w / o);
        }
        if mean < -3.0 * se - 1e-12 {
            failures.push(idx);
        }
    }
    report(
        name,
        failures.is_empty(),
        format!("20 instances x 10^4 rolls, failing {failures:?}, worst empirical ratio {worst:.4} (bound {:.5})", 1.0 / c),
    );
}

#[test]
fn two_sample_competitive() {
    googol_suite(
        "two-sample >= E[OPT]/192",
        3,
        Algorithm::TwoSample,
        192.0,
        192,
    );
}

#[test]
fn one_sample_competitive() {
    googol_suite(
        "one-sample >= E[OPT]/576",
        2,
        Algorithm::OneSample,
        576.0,
        576,
    );
}

fn adversarial_instances() -> Vec<GoogolInstance<f64>> {
    let add = |w: &[f64]| XosValuation::additive(w.to_vec()).unwrap();
    let ud = |w: &[f64]| XosValuation::unit_demand(w.to_vec()).unwrap();
    let xos = |c: &[&[f64]]| XosValuation::xos(c.iter().map(|x| x.to_vec()).collect()).unwrap();
    let mut out = vec![
        // One bidder, one dominant facet.
        GoogolInstance::new(vec![vec![
            add(&[1.0, 2.0]),
            add(&[2.0, 1.0]),
            add(&[3.0, 3.0]),
        ]])
        .unwrap(),
        // Two bidders competing for two items, one heavy facet each.
        GoogolInstance::new(vec![
            vec![ud(&[10.0, 0.0]), ud(&[1.0, 1.0]), ud(&[0.0, 1.0])],
            vec![ud(&[0.0, 10.0]), ud(&[1.0, 1.0]), ud(&[1.0, 0.0])],
        ])
        .unwrap(),
        // Identical facets: every comparison is a tie without perturbation.
        GoogolInstance::new(vec![
            vec![add(&[1.0, 1.0, 1.0]); 3],
            vec![add(&[1.0, 1.0, 1.0]); 3],
        ])
        .unwrap(),
        // Heavy tail: one facet worth a thousand times the others.
        GoogolInstance::new(vec![
            vec![add(&[1000.0, 0.0]), add(&[1.0, 1.0]), add(&[1.0, 1.0])],
            vec![add(&[1.0, 1.0]), add(&[1.0, 1.0]), add(&[0.0, 1000.0])],
        ])
        .unwrap(),
        // A unit-demand bidder that wants everything at a high price
        // against additive bidders.
        GoogolInstance::new(vec![
            vec![
                ud(&[2.0, 2.0, 2.0]),
                ud(&[2.0, 2.0, 2.0]),
                ud(&[0.5, 0.5, 0.5]),
            ],
            vec![
                add(&[1.0, 1.0, 1.0]),
                add(&[1.0, 1.0, 1.0]),
                add(&[1.0, 0.0, 0.0]),
            ],
            vec![
                add(&[1.0, 1.0, 1.0]),
                add(&[0.0, 1.0, 1.0]),
                add(&[1.0, 1.0, 1.0]),
            ],
        ])
        .unwrap(),
        // Overlapping XOS clauses.
        GoogolInstance::new(vec![
            vec![
                xos(&[&[3.0, 0.0, 1.0], &[0.0, 3.0, 1.0]]),
                xos(&[&[1.0, 1.0, 1.0]]),
                xos(&[&[2.0, 2.0, 0.0]]),
            ],
            vec![
                xos(&[&[0.0, 0.0, 4.0], &[1.0, 1.0, 1.0]]),
                xos(&[&[2.0, 0.0, 2.0]]),
                xos(&[&[0.0, 1.0, 0.0]]),
            ],
        ])
        .unwrap(),
    ];
    let mut rng = seeded(3131);
    while out.len() < 10 {
        out.push(random_googol(
            rng.random_range(2..=4),
            rng.random_range(2..=4),
            3,
            3,
            &mut rng,
        ));
    }
    out
}

#[test]
fn per_item_claims_hold() {
    let mut flagged = Vec::new();
    let mut min_z = f64::INFINITY;
    for (idx, g) in adversarial_instances().iter().enumerate() {
        let rows = run_claim_checks(
            g,
            10_000,
            7 + idx as u64,
            &TieRule::default(),
            TwoSampleOptions::default(),
        )
        .unwrap();
        for r in rows {
            if r.se > 0.0 {
                min_z = min_z.min(r.margin / r.se);
            }
            if r.flagged {
                flagged.push(format!("#{idx} item {} {}", r.item, r.claim.as_str()));
            }
        }
    }
    report(
        "per-item contribution/price/bid inequalities",
        flagged.is_empty(),
        format!("10 instances x 10^4 rolls x 4 checks, flagged {flagged:?}, smallest margin/se {min_z:.2}"),
    );
}

#[test]
fn baseline_separations() {
    let mut notes = Vec::new();
    let mut pass = true;

    for m in [5usize, 10, 20] {
        let inst = Instance::new(
            "f1",
            Model::Distribution(
                gen_hardness(HardnessFamily::MaxSampleThreshold, 2, m, 0.0).unwrap(),
            ),
        );
        let row = run_experiment(
            &inst,
            &ExperimentConfig::new(Algorithm::Baseline(Baseline::MaxSampleThreshold), 10_000, 1),
        )
        .unwrap();
        let ratio = row.ratio.unwrap();
        pass &= ratio <= 2.5 / m as f64;
        notes.push(format!(
            "family 1 m={m}: ratio {ratio:.4} <= {:.3}",
            2.5 / m as f64
        ));
    }

    let (n, eps) = (5usize, 1e-3);
    let cap = 2.0 * n as f64 * eps;
    for (family, baseline) in [
        (HardnessFamily::SupportingPrice, Baseline::SupportingPrice),
        (HardnessFamily::HalfBalanced, Baseline::HalfBalanced),
    ] {
        let dist = gen_hardness(family, n, n, eps).unwrap();
        let high = |p: &ValuationProfile<f64>| (0..n).find(|&j| p[n - 1].singleton_value(j) == 1.0);
        let mut worst = 0.0f64;
        let mut matched = 0;
        for t in 0..10_000u64 {
            let mut rng = stream_rng(2, t);
            let r = dist.sample_profile(&mut rng);
            let s = dist.sample_profile(&mut rng);
            let w = run_baseline(
                baseline,
                &s,
                &r,
                None,
                prophet_core::greedy::DEFAULT_OPT_BUDGET,
            )
            .unwrap()
            .welfare;
            if family == HardnessFamily::HalfBalanced && high(&s) == high(&r) {
                matched += 1;
                continue;
            }
            worst = worst.max(w);
        }
        pass &= worst <= cap;
        let inst = Instance::new("f", Model::Distribution(dist));
        let row = run_experiment(
            &inst,
            &ExperimentConfig::new(Algorithm::TwoSample, 10_000, 3),
        )
        .unwrap();
        let ratio = row.ratio.unwrap();
        pass &= ratio >= 0.1;
        notes.push(format!(
            "{}: baseline max welfare {worst:.4} <= {cap} ({matched} matched rolls excluded), two-sample ratio {ratio:.3} (se {:.3})",
            family.as_str(),
            row.se_welfare / row.mean_opt
        ));
    }
    report("hardness-family separations", pass, notes.join("; "));
}

#[test]
fn median_prices_welfare_bound() {
    let mut rng = seeded(4343);
    let mut certified = Vec::new();
    let mut tried = 0;
    while certified.len() < 20 && tried < 400 {
        tried += 1;
        let (n, m) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let dist = random_finite_support(n, m, rng.random_range(1..=3), 2, &mut rng);
        for alpha in [0.5, 0.25] {
            if let Ok(Some(c)) = grid_search_median_xos(&dist, alpha, 2, DEFAULT_GRID_BUDGET) {
                certified.push((dist.clone(), alpha, c));
                break;
            }
        }
    }
    let results: Vec<(f64, f64, f64, f64)> = certified
        .par_iter()
        .enumerate()
        .map(|(idx, (dist, alpha, cert))| {
            let order: Vec<usize> = (0..dist.n()).collect();
            let d: Vec<f64> = (0..10_000u64)
                .map(|t| {
                    let mut r = stream_rng(idx as u64, t);
                    let p = dist.sample_profile(&mut r);
                    let w = posted_price_run(&cert.prices, &p, &order, &cert.rule, &mut r)
                        .unwrap()
                        .welfare;
                    w - alpha * brute_force_opt(&p).unwrap().0
                })
                .collect();
            let (mean, se) = mean_se(&d);
            let exact = exact_mechanism(&cert.prices, dist, None, &cert.rule).unwrap();
            (*alpha, mean, se, exact.welfare)
        })
        .collect();
    let failing: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.1 < -3.0 * r.2 - 1e-12)
        .map(|(i, _)| i)
        .collect();
    let halves = results.iter().filter(|r| r.0 == 0.5).count();
    report(
        "posted prices at certified alpha-median prices >= alpha E[OPT]",
        certified.len() == 20 && failing.is_empty(),
        format!(
            "{} certified of {tried} tried ({halves} at alpha=1/2), 10^4 draws each, failing {failing:?}",
            certified.len()
        ),
    );
}

fn single_item(values: &[&[(f64, f64)]]) -> DistributionSpec<f64> {
    DistributionSpec::new(
        values
            .iter()
            .map(|s| {
                BidderDistribution::FiniteSupport(
                    s.iter()
                        .map(|&(v, p)| (XosValuation::additive(vec![v]).unwrap(), p))
                        .collect(),
                )
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn single_item_median_threshold() {
    let mut dists = vec![
        single_item(&[&[(1.0, 1.0)], &[(0.0, 0.99), (1000.0, 0.01)]]),
        single_item(&[&[(1.0, 0.5), (3.0, 0.5)]]),
        single_item(&[&[(2.0, 1.0)], &[(2.0, 1.0)], &[(2.0, 1.0)]]),
        single_item(&[&[(0.0, 0.9), (100.0, 0.1)], &[(5.0, 0.5), (6.0, 0.5)]]),
    ];
    let mut rng = seeded(55);
    while dists.len() < 10 {
        let n = rng.random_range(1..=4);
        let bidders: Vec<Vec<(f64, f64)>> = (0..n)
            .map(|_| {
                let k = rng.random_range(1..=3);
                let p = 1.0 / k as f64;
                let mut s: Vec<(f64, f64)> = (0..k)
                    .map(|_| (rng.random_range(0..=5) as f64, p))
                    .collect();
                let rest: f64 = s.iter().skip(1).map(|x| x.1).sum();
                s[0].1 = 1.0 - rest;
                s
            })
            .collect();
        let refs: Vec<&[(f64, f64)]> = bidders.iter().map(|b| b.as_slice()).collect();
        dists.push(single_item(&refs));
    }
    let mut failing = Vec::new();
    let mut first = String::new();
    for (idx, dist) in dists.iter().enumerate() {
        let (tau, q) = single_item_median(dist).unwrap();
        let rule = ChoiceRule::uniform_q(1, q);
        let order: Vec<usize> = (0..dist.n()).collect();
        let mut d = Vec::with_capacity(10_000);
        let mut w_sum = 0.0;
        let mut max_sum = 0.0;
        for t in 0..10_000u64 {
            let mut r = stream_rng(idx as u64, t);
            let p = dist.sample_profile(&mut r);
            let w = posted_price_run(&[tau], &p, &order, &rule, &mut r)
                .unwrap()
                .welfare;
            let top = p.iter().map(|v| v.singleton_value(0)).fold(0.0, f64::max);
            w_sum += w;
            max_sum += top;
            d.push(w - 0.5 * top);
        }
        let (mean, se) = mean_se(&d);
        if idx == 0 {
            first = format!(
                "two-bidder example: tau {tau}, q {q:.4}, mean value {:.3} vs E[max]/2 {:.3}",
                w_sum / 1e4,
                max_sum / 2e4
            );
        }
        if mean < -3.0 * se - 1e-12 {
            failing.push(idx);
        }
    }
    report(
        "single-item median threshold >= E[max]/2",
        failing.is_empty(),
        format!("10 distributions x 10^4 draws, failing {failing:?}; {first}"),
    );
}

#[test]
fn tatonnement_unit_demand_runs() {
    let eps = 0.1;
    let mut rng = seeded(4848);
    let (mut steps, mut small_drops, mut zero_drops) = (0usize, 0usize, 0usize);
    let (mut over_bound, mut upper_bad, mut lower_bad) = (0usize, 0usize, 0usize);
    let mut worst_drop = f64::INFINITY;
    for _ in 0..50 {
        let m = rng.random_range(2..=5);
        let n = rng.random_range(1..=3);
        let k = 2 * rng.random_range(20..=50);
        let samples: Vec<ValuationProfile<f64>> = (0..k)
            .map(|_| {
                ValuationProfile::new((0..n).map(|_| random_unit_demand(m, &mut rng)).collect())
                    .unwrap()
            })
            .collect();
        let out = tatonnement_unit_demand(&samples, eps).unwrap();
        if out.iterations() as f64 > tatonnement_iteration_bound(eps, out.k, m) {
            over_bound += 1;
        }
        for s in &out.trace {
            steps += 1;
            let drop = s.potential_before - s.potential_after;
            worst_drop = worst_drop.min(drop);
            if drop < 2.0 - 1e-9 {
                small_drops += 1;
                if drop.abs() < 1e-9 {
                    zero_drops += 1;
                }
            }
        }
        for j in 0..m {
            if out.pi[j] > 0.5 + eps + 1e-12 {
                upper_bad += 1;
            }
            if out.prices[j] > 0.0 && out.pi[j] < 0.5 - eps - 2.0 / out.k as f64 - 1e-12 {
                lower_bad += 1;
            }
        }
    }
    report(
        "Tatonnement (iteration bound, potential drop >= 2, sale-probability band)",
        over_bound == 0 && small_drops == 0 && upper_bad == 0 && lower_bad == 0,
        format!(
            "50 runs: {over_bound} over the iteration bound; {small_drops} of {steps} steps drop the potential by < 2 \
             ({zero_drops} by 0, worst {worst_drop}); {upper_bad} items above 1/2+eps; {lower_bad} priced items below 1/2-eps-2/k"
        ),
    );
}

#[test]
fn learned_prices_transfer_to_holdout() {
    let (eps, delta) = (0.1, 0.05);
    let k = sample_count(eps, delta, 3, 2, 1.0).unwrap() as usize;
    let outcomes: Vec<(bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(777, rep);
            let items = |rng: &mut prophet_core::rng::StreamRng| -> Vec<ItemDistribution> {
                (0..2)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            ItemDistribution::Uniform {
                                lo: 0.0,
                                hi: rng.random_range(0.5..2.0),
                            }
                        } else {
                            ItemDistribution::Exponential {
                                rate: rng.random_range(0.5..2.0),
                            }
                        }
                    })
                    .collect()
            };
            let dist = DistributionSpec::new(
                (0..3)
                    .map(|_| BidderDistribution::UnitDemandParametric(items(&mut rng)))
                    .collect(),
            )
            .unwrap();
            let train: Vec<ValuationProfile<f64>> =
                (0..k).map(|_| dist.sample_profile(&mut rng)).collect();
            let hold: Vec<ValuationProfile<f64>> =
                (0..k).map(|_| dist.sample_profile(&mut rng)).collect();
            let out = tatonnement_unit_demand(&train, eps).unwrap();
            let h = estimate_pi(
                &out.prices,
                PiSource::Empirical(&hold),
                None,
                &ChoiceRule::Generic,
            )
            .unwrap();
            let dev = out
                .pi
                .iter()
                .zip(&h.pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (dev < eps, dev)
        })
        .collect();
    let good = outcomes.iter().filter(|o| o.0).count();
    let worst = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    report(
        "learned prices transfer to a holdout",
        good >= 95,
        format!("k = {k}: {good}/100 repetitions within {eps} on every item, worst deviation {worst:.4}"),
    );
}

fn prophet(dir: &Path, args: &[&str], workers: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_prophet"))
        .args(args)
        .current_dir(dir)
        .env("PROPHET_WORKERS", workers)
        .status()
        .unwrap();
    assert!(status.success(), "prophet {args:?} failed");
}

#[test]
fn cli_runs_are_reproducible() {
    let runs: &[(&str, &[&str])] = &[
        (
            "g.json",
            &[
                "gen",
                "--family",
                "random-googol",
                "--n",
                "3",
                "--m",
                "3",
                "--seed",
                "4",
                "--out",
                "g.json",
            ],
        ),
        (
            "u.json",
            &[
                "gen",
                "--family",
                "random-unit-demand",
                "--n",
                "2",
                "--m",
                "3",
                "--support",
                "5",
                "--seed",
                "4",
                "--out",
                "u.json",
            ],
        ),
        (
            "sim.csv",
            &[
                "simulate",
                "--algorithm",
                "two-sample,one-sample,modified-greedy,max-sample-threshold",
                "--instance",
                "g.json",
                "--trials",
                "3000",
                "--seed",
                "9",
                "--out",
                "sim.csv",
            ],
        ),
        (
            "prices.json",
            &[
                "median",
                "learn",
                "--instance",
                "u.json",
                "--k",
                "60",
                "--seed",
                "2",
                "--out",
                "prices.json",
                "--trace-out",
                "trace.csv",
            ],
        ),
        ("trace.csv", &[]),
        (
            "verify.csv",
            &[
                "median",
                "verify",
                "--prices",
                "prices.json",
                "--instance",
                "u.json",
                "--alpha",
                "0.25",
                "--trials",
                "3000",
                "--seed",
                "3",
                "--out",
                "verify.json",
                "--csv-out",
                "verify.csv",
            ],
        ),
        (
            "claims.csv",
            &[
                "claims",
                "--instance",
                "g.json",
                "--trials",
                "2000",
                "--seed",
                "5",
                "--out",
                "claims.csv",
            ],
        ),
        (
            "base.csv",
            &[
                "baseline",
                "--family",
                "half-balanced",
                "--square",
                "--m",
                "3,4",
                "--trials",
                "2000",
                "--seed",
                "6",
                "--out",
                "base.csv",
            ],
        ),
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(a.path(), "1"), (b.path(), "4")] {
        for (_, args) in runs {
            if !args.is_empty() {
                prophet(dir, args, workers);
            }
        }
    }
    let mut differing = Vec::new();
    for (file, _) in runs {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        if x != y || x.is_empty() {
            differing.push(*file);
        }
    }
    report(
        "CLI output is byte-identical across repeated runs",
        differing.is_empty(),
        format!(
            "{} outputs compared across two runs (1 and 4 workers), differing {differing:?}",
            runs.len()
        ),
    );
}
