//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use td_traces::env::{fig1, fig1_mdp};
use td_traces::harness::{run_and_aggregate, Aggregate, ConfigFile, Workbench};
use td_traces::oracle::{bellman_residual, value_iteration, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use td_traces::worked::run_worked_examples;
use td_traces::{Environment, GridMap, StateId};

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if let Some(budget) = budget {
        if elapsed > budget {
            out.passed = false;
            out.detail.push_str(&format!("; over the {:.0?} budget", budget));
        }
    }
    let status = if out.passed { "PASS" } else { "FAIL" };
    println!("{status} {name} [{elapsed:.2?}] {}", out.detail);
    out.passed
}

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run_file(rel: &str, overrides: &[&str]) -> (Aggregate, usize) {
    let mut file = ConfigFile::load(&repo_path(rel)).expect("experiment file");
    for o in overrides {
        file.set_pair(o).expect("override");
    }
    let cfg = file.build().expect("valid experiment");
    let bench = Workbench::load(&cfg.spec).expect("environment");
    let (_, agg) = run_and_aggregate(&cfg.spec, &bench, None).expect("run");
    (agg, bench.mdp.n_states() * cfg.spec.seeds)
}

fn census_line(agg: &Aggregate, labels: &[&str]) -> String {
    labels
        .iter()
        .map(|l| {
            let s = agg.summary_for(l).expect("label");
            format!("{l} {}/{}", s.optimal, s.total)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn smoothed_at(agg: &Aggregate, label: &str, episode: usize) -> f64 {
    agg.curve(label).expect("label").smoothed[episode - 1]
}

fn criterion_1() -> Outcome {
    let results = run_worked_examples().expect("fixtures");
    let failing: Vec<String> = results.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect();
    Outcome {
        passed: results.len() == 9 && failing.is_empty(),
        detail: if failing.is_empty() {
            format!("{}/9 worked-example checks exact", results.len())
        } else {
            failing.join(" | ")
        },
    }
}

fn criterion_2() -> Outcome {
    let mdp = fig1_mdp();
    let oracle = value_iteration(&mdp, 1.0, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).expect("fig1 converges");
    let v: Vec<f64> = [fig1::A, fig1::B, fig1::C].iter().map(|&s| oracle.v(StateId::NonTerminal(s))).collect();
    let mut passed = v == [9.0, 9.0, 10.0];
    let brute = common::brute_force_fig1_q();
    let brute_ok = mdp.layout().keys().all(|k| oracle.q(k).unwrap() == brute[&k]);
    passed &= brute_ok;
    let mut detail = format!("fig1 V* = {v:?}, brute force match {brute_ok}");
    for map in ["maps/paper_cliff.map", "maps/paper_cliff_noisy.map"] {
        let grid = GridMap::parse(&std::fs::read_to_string(repo_path(map)).unwrap()).unwrap();
        let model = grid.to_tabular();
        let o = value_iteration(&model, 1.0, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS).expect("map converges");
        let residual = bellman_residual(&model, 1.0, &o);
        passed &= residual <= 1e-10;
        detail.push_str(&format!(", {map} residual {residual:e}"));
    }
    Outcome { passed, detail }
}

fn criterion_3() -> Outcome {
    let (agg, total) = run_file("experiments/paper_fig3.exp", &[]);
    let frac = |l: &str| agg.summary_for(l).unwrap().fraction();
    let census_ok = total == 1470
        && frac("q_learning") >= 0.95
        && frac("tsdt") >= 0.95
        && frac("watkins") <= 0.5
        && frac("optimistic") <= 0.5;
    let tsdt = smoothed_at(&agg, "tsdt", 1000);
    let q = smoothed_at(&agg, "q_learning", 1000);
    let speed_ok = tsdt.abs() <= q.abs();
    Outcome {
        passed: census_ok && speed_ok,
        detail: format!(
            "census {}; smoothed at episode 1000: tsdt {tsdt:.3}, q_learning {q:.3}",
            census_line(&agg, &["q_learning", "watkins", "optimistic", "tsdt"])
        ),
    }
}

fn criterion_4() -> Outcome {
    let (agg, _) = run_file("experiments/paper_fig4.exp", &[]);
    let early = |l: &str| agg.curve(l).unwrap().smoothed[..500].iter().sum::<f64>() / 500.0;
    let (eq, ew, eo) = (early("q_learning"), early("watkins"), early("optimistic"));
    let early_ok = ew.abs() < eq.abs() && eo.abs() < eq.abs();
    let labels = ["q_learning", "watkins", "optimistic", "tsdt"];
    let last: Vec<f64> = labels.iter().map(|l| smoothed_at(&agg, l, 5000).abs()).collect();
    let min = last.iter().copied().fold(f64::INFINITY, f64::min);
    let max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let late_ok = last[0] == min && last[1] == max;
    Outcome {
        passed: early_ok && late_ok,
        detail: format!(
            "(a) mean smoothed over episodes 1-500: q_learning {eq:.3}, watkins {ew:.3}, optimistic {eo:.3} -> {}; \
             (b) |smoothed| at 5000: q_learning {:.3}, watkins {:.3}, optimistic {:.3}, tsdt {:.3} -> {}",
            if early_ok { "ok" } else { "violated" },
            last[0],
            last[1],
            last[2],
            last[3],
            if late_ok { "ok" } else { "violated" },
        ),
    }
}

fn criterion_5() -> Outcome {
    let (agg, _) = run_file(
        "experiments/paper_fig3.exp",
        &["algorithms=watkins,optimistic", "lambda=0.2"],
    );
    let ok = ["watkins", "optimistic"]
        .iter()
        .all(|l| agg.summary_for(l).unwrap().fraction() >= 0.9);
    Outcome {
        passed: ok,
        detail: format!("lambda 0.2 census {}", census_line(&agg, &["watkins", "optimistic"])),
    }
}

fn criterion_6() -> Outcome {
    let report = common::run_property_suite(common::ACCEPTANCE_CASES);
    Outcome {
        passed: report.iter().all(|(_, r)| r.is_ok()),
        detail: report
            .iter()
            .map(|(name, r)| match r {
                Ok(()) => format!("{name} ok"),
                Err(e) => format!("{name} FAILED: {e}"),
            })
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn main() {
    let results = [
        check("1 worked examples", Some(Duration::from_secs(1)), criterion_1),
        check("2 oracle", Some(Duration::from_secs(1)), criterion_2),
        check("3 deterministic cliff", Some(Duration::from_secs(120)), criterion_3),
        check("4 noisy cliff", Some(Duration::from_secs(300)), criterion_4),
        check("5 lambda 0.2", Some(Duration::from_secs(120)), criterion_5),
        check("6 property suite", None, criterion_6),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
