//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.
//!
//! `EBVI_ACCEPTANCE=1,6,8` restricts the run to the listed criteria.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use ebvi::cavi::{logistic_lower_bound, q_prob, run_cavi, CaviConfig, CaviProblem, StopReason};
use ebvi::dataset::{simulate, SimScenario};
use ebvi::glm::{fisher_information, linear_predictor, log_likelihood, score};
use ebvi::math::sigmoid;
use ebvi::mcmc::{mh_run, ChainConfig};
use ebvi::pilot::jitter_zeros;
use ebvi::posterior::enumerate_posterior;
use ebvi::{Configuration, Dataset, DesignKind, HyperParams, Signal, SimRng};
use ebvi_bench::experiment::{
    compare_vi_mcmc, fit_pilot, replication_data, run_experiment, stage_seed, ExperimentSpec, Method, ScenarioRef,
};
use ebvi_bench::output::{render, Format};

const SEED: u64 = 20_240_601;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn named(name: &str, methods: Vec<Method>, reps: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(ScenarioRef::Named(name.into()), methods, reps, SEED);
    spec.timing = false;
    spec
}

fn iid(n: usize, p: usize, s: usize, a: f64) -> SimScenario {
    SimScenario {
        n,
        p,
        s,
        signal: Signal::Fixed(a),
        design: DesignKind::IidGaussian { sigma: 1.0 },
        seed: 0,
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn random_dataset<R: Rng>(rng: &mut R, n: usize, p: usize, intercept: bool) -> Dataset {
    let x = DMatrix::from_fn(n, p, |_, _| normal(rng));
    let y = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
    Dataset::unnamed(x, y).expect("valid data").with_intercept(intercept)
}

fn random_support<R: Rng>(rng: &mut R, p: usize, max: usize) -> Configuration {
    let k = rng.random_range(0..=max.min(p));
    Configuration::new(sample(rng, p, k).into_vec()).expect("distinct indices")
}

fn max_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn reproduction(name: &str, reps: usize) -> (f64, f64, f64, f64, f64) {
    let t = Instant::now();
    let res = run_experiment(&named(name, vec![Method::Ebvi], reps)).expect("experiment runs");
    let secs = t.elapsed().as_secs_f64();
    let agg = res.aggregate(Method::Ebvi).expect("ebvi aggregate");
    assert_eq!(agg.rep_count, reps, "every replication should produce an outcome");
    (
        agg.tpr_mean.unwrap_or(f64::NAN),
        agg.fdr_mean.unwrap_or(f64::NAN),
        agg.tnr_mean.unwrap_or(f64::NAN),
        agg.mcc_mean.unwrap_or(f64::NAN),
        secs,
    )
}

fn c1_test1() -> Verdict {
    let (tpr, fdr, _, _, secs) = reproduction("test1", 50);
    verdict(
        tpr >= 0.85 && fdr <= 0.10 && secs <= 300.0,
        format!("test1 x50: TPR {tpr:.3} (>= 0.85), FDR {fdr:.3} (<= 0.10), {secs:.1} s (<= 300)"),
    )
}

fn c2_test2() -> Verdict {
    let (tpr, fdr, _, _, _) = reproduction("test2", 50);
    verdict(
        tpr >= 0.98 && fdr <= 0.10,
        format!("test2 x50: TPR {tpr:.3} (>= 0.98), FDR {fdr:.3} (<= 0.10)"),
    )
}

fn c3_table2() -> Verdict {
    let (_, _, tnr, mcc, secs) = reproduction("table2-p200-s4-r0", 100);
    verdict(
        tnr >= 0.99 && mcc >= 0.90 && secs <= 600.0,
        format!("table2-p200-s4-r0 x100: TNR {tnr:.4} (>= 0.99), MCC {mcc:.3} (>= 0.90), {secs:.1} s (<= 600)"),
    )
}

fn c4_d_distance() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, limit) in [("dtable-100-200-4-3", 0.15), ("dtable-100-200-4-6", 0.10)] {
        let mut spec = named(name, vec![Method::Ebvi, Method::Ebmcmc], 20);
        spec.chain.samples = 10_000;
        let cmp = compare_vi_mcmc(&spec).expect("comparison runs");
        let ok = cmp.d <= limit && cmp.replications_used.len() == 20;
        pass &= ok;
        parts.push(format!(
            "{name}: D {:.4} (<= {limit}) over {} reps",
            cmp.d,
            cmp.replications_used.len()
        ));
    }
    verdict(pass, parts.join("; "))
}

fn c5_oracle() -> Verdict {
    let sc = iid(200, 10, 2, 3.0);
    let h = HyperParams::default();
    let spec = named("oracle", vec![Method::Ebvi], 1);
    let (mut worst_mcmc, mut worst_cavi) = (0.0f64, 0.0f64);
    for r in 0..10 {
        let (seed, sim) = replication_data("oracle-p10", &sc, SEED, r).expect("simulate");
        let exact = enumerate_posterior(&sim.data, &h, 5).expect("enumerate").inclusion;

        let chain_cfg = ChainConfig {
            samples: 50_000,
            burn_in: None,
            smax: Some(5),
            seed: stage_seed(seed, "chain"),
        };
        let chain = mh_run(&sim.data, &h, &chain_cfg, &mut chain_cfg.rng()).expect("chain");
        worst_mcmc = worst_mcmc.max(max_abs_gap(&chain.inclusion, &exact));

        let pilot = fit_pilot(&sim, &spec.pilot, stage_seed(seed, "pilot")).expect("pilot");
        let mut rng = SimRng::seed_from_u64(stage_seed(seed, "jitter"));
        let bt = jitter_zeros(&pilot, spec.pilot.jitter_scale, &mut rng).expect("jitter");
        let fit = run_cavi(&sim.data, &bt.beta_tilde, &spec.cavi, &h).expect("cavi");
        worst_cavi = worst_cavi.max(max_abs_gap(&fit.phi, &exact));
    }
    verdict(
        worst_mcmc <= 0.05 && worst_cavi <= 0.15,
        format!(
            "10 instances: max |MCMC - exact| {worst_mcmc:.4} (<= 0.05), max |CAVI - exact| {worst_cavi:.4} (<= 0.15)"
        ),
    )
}

fn c6_bound() -> Verdict {
    let mut rng = SimRng::seed_from_u64(SEED ^ 6);
    let (mut worst_violation, mut worst_tight) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let p = rng.random_range(1..=8);
        let d = random_dataset(&mut rng, n, p, false);
        let s = random_support(&mut rng, p, p);
        let scale = rng.random_range(0.1..3.0);
        let beta: Vec<f64> = (0..p).map(|_| scale * normal(&mut rng)).collect();
        let beta_s = DVector::from_iterator(s.len(), s.indices().iter().map(|&j| beta[j]));
        let ll = log_likelihood(&d, &s, &beta_s).expect("loglik");

        let eta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..8.0)).collect();
        let g = logistic_lower_bound(&d, &s, &beta, &eta).expect("bound");
        worst_violation = worst_violation.max(g - ll);

        let tight: Vec<f64> = linear_predictor(&d, &s, &beta_s).expect("predictor").iter().map(|m| m.abs()).collect();
        let g = logistic_lower_bound(&d, &s, &beta, &tight).expect("bound");
        worst_tight = worst_tight.max((g - ll).abs());
    }
    verdict(
        worst_violation <= 1e-9 && worst_tight <= 1e-9,
        format!("1000 triples: max(g - l) {worst_violation:.3e} (<= 1e-9), max |g - l| at eta=|m| {worst_tight:.3e} (<= 1e-9)"),
    )
}

fn c7_monotone() -> Verdict {
    let mut rng = SimRng::seed_from_u64(SEED ^ 7);
    let h = HyperParams::default();
    let cfg = CaviConfig {
        epsilon: 1e-8,
        max_iter: 10_000,
        ..CaviConfig::default()
    };
    let (mut worst_drop, mut worst_grad, mut checked, mut unconverged) = (0.0f64, 0.0f64, 0usize, 0usize);
    for _ in 0..100 {
        let n = rng.random_range(20..=60);
        let p = rng.random_range(3..=12);
        let x = DMatrix::from_fn(n, p, |_, _| normal(&mut rng));
        let truth: Vec<f64> = (0..p).map(|j| if j < 2 { 2.0 } else { 0.0 }).collect();
        let y = (0..n)
            .map(|i| {
                let t: f64 = (0..p).map(|j| x[(i, j)] * truth[j]).sum();
                f64::from(u8::from(rng.random::<f64>() < sigmoid(t)))
            })
            .collect();
        let d = Dataset::unnamed(x, y).expect("valid data");
        let bt: Vec<f64> = (0..p)
            .map(|j| truth[j] + 0.5 * normal(&mut rng))
            .map(|b| if b == 0.0 { 1e-3 } else { b })
            .collect();

        let res = run_cavi(&d, &bt, &cfg, &h).expect("cavi");
        for w in res.objective_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        if res.stopped_reason != StopReason::Converged {
            unconverged += 1;
            continue;
        }

        let problem = CaviProblem::new(&d, &bt).expect("problem");
        let eta = problem.update_eta(&res.phi);
        let at = |phi: Vec<f64>| {
            let state = problem.state_at(phi, eta.clone()).expect("state");
            problem.surrogate_objective(&state, &h)
        };
        for j in 0..p {
            let f = res.phi[j];
            if !(0.01..=0.99).contains(&f) {
                continue;
            }
            let step = 1e-6;
            let mut up = res.phi.clone();
            up[j] = f + step;
            let mut down = res.phi.clone();
            down[j] = f - step;
            let grad = (at(up) - at(down)) / (2.0 * step);
            worst_grad = worst_grad.max(grad.abs());
            checked += 1;
        }
    }
    verdict(
        worst_drop <= 1e-8 && worst_grad < 1e-3 && unconverged == 0,
        format!(
            "100 instances: largest trace decrease {worst_drop:.3e} (<= 1e-8), max |dF/dphi_j| {worst_grad:.3e} (< 1e-3) over {checked} interior coordinates, {unconverged} not converged"
        ),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn c8_derivatives() -> Verdict {
    let mut rng = SimRng::seed_from_u64(SEED ^ 8);
    let (mut worst_score, mut worst_info) = (0.0f64, 0.0f64);
    let step = 1e-5;
    for i in 0..20 {
        let n = rng.random_range(30..=80);
        let p = rng.random_range(5..=10);
        let d = random_dataset(&mut rng, n, p, i % 2 == 1);
        let s = loop {
            let s = random_support(&mut rng, p, 5);
            if !s.is_empty() {
                break s;
            }
        };
        let k = s.len() + usize::from(d.has_intercept());
        let beta = DVector::from_fn(k, |_, _| 0.7 * normal(&mut rng));
        let g = score(&d, &s, &beta).expect("score");
        let info = fisher_information(&d, &s, &beta).expect("info");
        for a in 0..k {
            let mut up = beta.clone();
            up[a] += step;
            let mut down = beta.clone();
            down[a] -= step;
            let fd = (log_likelihood(&d, &s, &up).unwrap() - log_likelihood(&d, &s, &down).unwrap()) / (2.0 * step);
            worst_score = worst_score.max(rel_err(g[a], fd));
            let col = (score(&d, &s, &down).unwrap() - score(&d, &s, &up).unwrap()) / (2.0 * step);
            for b in 0..k {
                worst_info = worst_info.max(rel_err(info[(b, a)], col[b]));
            }
        }
    }
    verdict(
        worst_score <= 1e-5 && worst_info <= 1e-4,
        format!("20 instances: score rel err {worst_score:.3e} (<= 1e-5), Fisher rel err {worst_info:.3e} (<= 1e-4)"),
    )
}

fn c9_consistency() -> Verdict {
    let mut means = Vec::new();
    for n in [100, 200, 400, 800] {
        let sc = iid(n, 100, 3, 3.0);
        let mut spec = ExperimentSpec::new(ScenarioRef::Inline(sc), vec![Method::Ebvi], 20, SEED);
        spec.timing = false;
        let res = run_experiment(&spec).expect("experiment runs");
        let mut total = 0.0;
        let mut count = 0;
        for (r, out) in res.outcomes(Method::Ebvi) {
            let (_, sim) = replication_data(&res.scenario_id, &sc, SEED, r).expect("simulate");
            total += q_prob(out.scores.as_ref().expect("phi"), &sim.support);
            count += 1;
        }
        assert_eq!(count, 20, "every replication should produce an outcome");
        means.push(total / count as f64);
    }
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let last = means[3];
    verdict(
        monotone && last > 0.9,
        format!(
            "mean q(S*) at n=100,200,400,800: {:.4}, {:.4}, {:.4}, {:.4} (nondecreasing, last > 0.9)",
            means[0], means[1], means[2], means[3]
        ),
    )
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_ebvi-bench"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn cli_to_file(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().expect("utf-8 path");
    full.extend(["--out", p]);
    cli(&full);
    std::fs::read(&path).expect("output written")
}

fn c10_determinism() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |label: &str, a: &[u8], b: &[u8]| {
        if a != b {
            failures.push(label.to_string());
        }
    };

    let sc = iid(60, 20, 2, 3.0);
    let mut spec = ExperimentSpec::new(ScenarioRef::Inline(sc), Method::ALL.to_vec(), 4, SEED);
    spec.timing = false;
    spec.chain.samples = 2000;
    let run = |workers: usize| {
        let mut s = spec.clone();
        s.workers = Some(workers);
        let res = run_experiment(&s).expect("experiment runs");
        (res.to_json(), render(&[res], Format::Csv))
    };
    let (j1, c1) = run(1);
    let (j1b, c1b) = run(1);
    let (j3, c3) = run(3);
    check("run_experiment json, repeated", j1.as_bytes(), j1b.as_bytes());
    check("run_experiment csv, repeated", c1.as_bytes(), c1b.as_bytes());
    check("run_experiment json, 1 vs 3 workers", j1.as_bytes(), j3.as_bytes());
    check("run_experiment csv, 1 vs 3 workers", c1.as_bytes(), c3.as_bytes());

    let h = HyperParams::default();
    let sim = simulate(&sc, &mut SimRng::seed_from_u64(SEED)).expect("simulate");
    let table = || enumerate_posterior(&sim.data, &h, 3).expect("enumerate").to_json();
    check("enumerate_posterior", table().as_bytes(), table().as_bytes());
    let chain = || {
        let cfg = ChainConfig {
            samples: 3000,
            seed: SEED,
            ..ChainConfig::default()
        };
        mh_run(&sim.data, &h, &cfg, &mut cfg.rng()).expect("chain").to_json()
    };
    check("mh_run", chain().as_bytes(), chain().as_bytes());
    let pilot = || {
        let est = fit_pilot(&sim, &spec.pilot, SEED).expect("pilot");
        serde_json::to_string(&est).expect("serializes")
    };
    check("fit_pilot", pilot().as_bytes(), pilot().as_bytes());
    let cavi = || {
        let bt: Vec<f64> = (0..sc.p).map(|j| if j < 2 { 2.5 } else { 0.05 }).collect();
        run_cavi(&sim.data, &bt, &CaviConfig::default(), &h).expect("cavi").to_json()
    };
    check("run_cavi", cavi().as_bytes(), cavi().as_bytes());

    let dir = tempfile::tempdir().expect("temp dir");
    let config = dir.path().join("small.json");
    let config_text = serde_json::json!({
        "scenario": sc,
        "reps": 3,
        "samples": 1500,
        "timing": false,
    });
    std::fs::write(&config, config_text.to_string()).expect("write config");
    let cfg = config.to_str().expect("utf-8 path");
    let compare = |w: &str, f: &str| {
        cli_to_file(dir.path(), &format!("cmp-{w}.{f}"), &["compare", "--config", cfg, "--seed", "9", "--workers", w, "--format", f])
    };
    for f in ["json", "csv"] {
        let a = compare("1", f);
        check(&format!("cli compare {f}, repeated"), &a, &compare("1", f));
        check(&format!("cli compare {f}, 1 vs 2 workers"), &a, &compare("2", f));
    }

    let data = dir.path().join("data.csv");
    let d = data.to_str().expect("utf-8 path");
    let simulate_args = ["simulate", "--config", cfg, "--seed", "4", "--out", d];
    cli(&simulate_args);
    let first = std::fs::read(&data).expect("csv written");
    cli(&simulate_args);
    check("cli simulate", &first, &std::fs::read(&data).expect("csv written"));

    for args in [
        vec!["fit", "--data", d, "--seed", "4"],
        vec!["mcmc", "--data", d, "--seed", "4", "--samples", "2000"],
        vec!["enumerate", "--data", d, "--smax", "2"],
    ] {
        check(&format!("cli {}", args[0]), &cli(&args), &cli(&args));
    }

    let ok = failures.is_empty();
    verdict(
        ok,
        if ok {
            "library and CLI outputs identical across repeats and worker counts".to_string()
        } else {
            format!("differing outputs: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 10] = [
        (1, "test1 reproduction", c1_test1),
        (2, "test2 reproduction", c2_test2),
        (3, "table2 cell p=200 s=4 r=0", c3_table2),
        (4, "D distance", c4_d_distance),
        (5, "oracle equivalence", c5_oracle),
        (6, "bound validity", c6_bound),
        (7, "monotone surrogate", c7_monotone),
        (8, "score and Fisher information", c8_derivatives),
        (9, "consistency trend", c9_consistency),
        (10, "determinism", c10_determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("EBVI_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());

    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
