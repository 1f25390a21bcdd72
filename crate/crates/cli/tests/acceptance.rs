//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Oracles here are independent of the library code paths
//! they check (closed forms, exhaustive enumeration, direct summation).

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use pa_lab::ctbp::{
    estimate_growth_rate, run, simulate_until_size, CtbpSim, RootMode, StopRule, GROWTH_WINDOW,
};
use pa_lab::estimator::lemma_check;
use pa_lab::experiments::{
    run_consistency_study, run_normality_study, Execution, ExperimentPlan, NamedFunction,
};
use pa_lab::generator::replay_check;
use pa_lab::pa_model::census_from_snapshot;
use pa_lab::rng::{rng_from_seed, stream_seed};
use pa_lab::theory::{solve_malthusian, SolveOptions};
use pa_lab::{grow, DegreeClassIndex, GrowthConfig, PaFunction};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((observed.len() - 1) as f64)
        .unwrap()
        .cdf(stat)
}

fn sd_variance(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v)
}

// 1. λ* for f(k) = k + δ against the closed form 2 + δ.
fn malthusian_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for delta in [0.0, 0.5, 1.0] {
        let sol = solve_malthusian(
            &PaFunction::affine(delta).unwrap(),
            &SolveOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let err = (sol.lambda_star - (2.0 + delta)).abs();
        ensure(err <= 1e-8, || {
            format!("delta = {delta}: lambda* = {}", sol.lambda_star)
        })?;
        worst = worst.max(err);
    }
    Ok(format!("max |lambda* - (2+delta)| = {worst:.2e}"))
}

// 2. p_k for f(k) = k against 4 / (k(k+1)(k+2)).
fn limiting_law() -> Outcome {
    let sol = solve_malthusian(&PaFunction::affine(0.0).unwrap(), &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for k in 1..=50usize {
        let kf = k as f64;
        let exact = 4.0 / (kf * (kf + 1.0) * (kf + 2.0));
        let got = sol.p(k).ok_or_else(|| format!("p_{k} missing"))?;
        worst = worst.max((got - exact).abs());
    }
    ensure(worst <= 1e-10, || {
        format!("max |p_k - exact| = {worst:.2e}")
    })?;
    Ok(format!(
        "max |p_k - 4/(k(k+1)(k+2))| over k <= 50 = {worst:.2e}"
    ))
}

// 3. Ratio and mass identities for the three reference functions. The mass
// is recomputed here by running the p recursion directly from λ* out to a
// horizon where the remaining mass is negligible.
fn theory_identities() -> Outcome {
    let mut notes = Vec::new();
    for (id, f) in PaFunction::reference_set() {
        let sol = solve_malthusian(&f, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let lambda = sol.lambda_star;
        let mut worst_ratio = 0.0f64;
        for k in 1..=100usize {
            let r = sol.r(k).ok_or_else(|| format!("{id}: r_{k} missing"))?;
            let ratio = sol.p_gt(k).unwrap() / sol.p(k).unwrap();
            worst_ratio = worst_ratio.max((r - ratio).abs() / r);
        }
        ensure(worst_ratio <= 1e-8, || {
            format!("{id}: ratio deviation {worst_ratio:.2e}")
        })?;

        let mut p = lambda / (lambda + f.value(1));
        let mut mass = 0.0f64;
        let mut comp = 0.0f64;
        for k in 1..=10_000_000u64 {
            let fk = f.value(k);
            let term = fk * p;
            let t = mass + term;
            comp += if mass.abs() >= term.abs() {
                (mass - t) + term
            } else {
                (term - t) + mass
            };
            mass = t;
            if term < 1e-18 * lambda {
                break;
            }
            p *= fk / (lambda + f.value(k + 1));
        }
        let mass = mass + comp;
        let dev = (mass - lambda).abs() / lambda;
        ensure(dev <= 1e-8, || {
            format!("{id}: |sum f p - lambda*| / lambda* = {dev:.2e}")
        })?;
        let lib_dev = (sol.preference_mass - lambda).abs() / lambda;
        ensure(lib_dev <= 1e-8, || {
            format!("{id}: certified mass deviation {lib_dev:.2e}")
        })?;
        notes.push(format!("{id}: ratio {worst_ratio:.1e}, mass {dev:.1e}"));
    }
    Ok(notes.join("; "))
}

// 4. Attachment counts from the log equal N_{>k} on every generated tree.
fn lemma_exactness() -> Outcome {
    let mut trees = 0;
    for (fi, (id, f)) in PaFunction::reference_set().into_iter().enumerate() {
        for rep in 0..100u64 {
            let cfg = GrowthConfig::new(f.clone(), 10_000, stream_seed(4_000 + fi as u64, rep))
                .with_log();
            let (tree, log) = grow(&cfg).map_err(|e| e.to_string())?;
            let log = log.ok_or("log missing")?;
            let census = census_from_snapshot(&tree);
            let report = lemma_check(&census, &log);
            ensure(report.holds(), || {
                format!("{id} rep {rep}: {:?}", report.mismatches.first())
            })?;
            // Independent recount: tally the log and the degrees directly.
            let mut attach: HashMap<u32, u64> = HashMap::new();
            for &d in log.chosen_degrees() {
                *attach.entry(d).or_default() += 1;
            }
            let degrees = tree.degrees();
            let max = *degrees.iter().max().unwrap();
            for k in 1..=max + 1 {
                let above = degrees.iter().filter(|&&d| d > k).count() as u64;
                let made = attach.get(&k).copied().unwrap_or(0);
                ensure(made == above, || {
                    format!("{id} rep {rep} k {k}: {made} != {above}")
                })?;
            }
            ensure(
                replay_check(&tree, &log).map_err(|e| e.to_string())?,
                || format!("{id} rep {rep}: replay"),
            )?;
            trees += 1;
        }
    }
    Ok(format!(
        "{trees} trees of n = 10^4, identity exact for every k"
    ))
}

// 5. Class sampler against the exact per-node multinomial.
fn sampler_equivalence() -> Outcome {
    let fs = PaFunction::reference_set();
    let mut min_p = 1.0f64;
    let mut worst_exact = 0.0f64;
    for s in 0..20u64 {
        let (_, f) = &fs[(s % 3) as usize];
        let mut rng = rng_from_seed(stream_seed(5_000, s));
        let nodes = 25 + (s as u32 % 5) * 5;
        let mut idx = DegreeClassIndex::new(f.clone());
        let mut degree = vec![1u32; nodes as usize];
        for v in 0..nodes {
            idx.insert_leaf(v).map_err(|e| e.to_string())?;
        }
        for _ in 0..3 * nodes {
            let v = rng.random_range(0..nodes);
            idx.promote(v).map_err(|e| e.to_string())?;
            degree[v as usize] += 1;
        }
        let weights: Vec<f64> = degree.iter().map(|&d| f.value(d as u64)).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        for (v, &p) in probs.iter().enumerate() {
            let got = idx.selection_probability(v as u32).ok_or("node missing")?;
            worst_exact = worst_exact.max((got - p).abs() / p);
        }
        let mut counts = vec![0u64; nodes as usize];
        for _ in 0..100_000 {
            let v = idx
                .sample(rng.random(), rng.random())
                .map_err(|e| e.to_string())?;
            counts[v as usize] += 1;
        }
        let p = chi_square_p(&counts, &probs);
        ensure(p > 0.001, || format!("state {s}: chi-square p = {p:.2e}"))?;
        min_p = min_p.min(p);
    }
    ensure(worst_exact <= 1e-12, || {
        format!("probability mismatch {worst_exact:.2e}")
    })?;
    Ok(format!("20 states, min chi-square p = {min_p:.4}, max relative probability error = {worst_exact:.1e}"))
}

/// Exact distribution of parent arrays for the discrete chain from the seed edge.
fn enumerate_histories(n: usize) -> HashMap<Vec<u32>, f64> {
    fn go(
        n: usize,
        parents: &mut Vec<u32>,
        deg: &mut Vec<u32>,
        prob: f64,
        out: &mut HashMap<Vec<u32>, f64>,
    ) {
        if deg.len() == n {
            *out.entry(parents.clone()).or_default() += prob;
            return;
        }
        let total: u32 = deg.iter().sum();
        for v in 0..deg.len() {
            let p = deg[v] as f64 / total as f64;
            deg[v] += 1;
            deg.push(1);
            parents.push(v as u32);
            go(n, parents, deg, prob * p, out);
            parents.pop();
            deg.pop();
            deg[v] -= 1;
        }
    }
    let mut out = HashMap::new();
    go(n, &mut vec![0], &mut vec![1, 1], 1.0, &mut out);
    out
}

/// Sorted degree sequence; identifies the unlabeled shape for n <= 5.
fn shape(parents: &[u32]) -> Vec<u32> {
    // Every non-root node has one edge to its parent.
    let mut deg = vec![1u32; parents.len() + 1];
    deg[0] = 0;
    for &p in parents {
        deg[p as usize] += 1;
    }
    deg.sort_unstable();
    deg
}

fn compare(
    counts: &HashMap<Vec<u32>, u64>,
    exact: &HashMap<Vec<u32>, f64>,
) -> Result<(f64, f64), String> {
    ensure(counts.keys().all(|k| exact.contains_key(k)), || {
        "impossible history observed".into()
    })?;
    let mut keys: Vec<_> = exact.keys().cloned().collect();
    keys.sort();
    let obs: Vec<u64> = keys
        .iter()
        .map(|k| counts.get(k).copied().unwrap_or(0))
        .collect();
    let probs: Vec<f64> = keys.iter().map(|k| exact[k]).collect();
    let history_p = chi_square_p(&obs, &probs);

    let mut shape_obs: HashMap<Vec<u32>, u64> = HashMap::new();
    let mut shape_prob: HashMap<Vec<u32>, f64> = HashMap::new();
    for (k, &o) in keys.iter().zip(&obs) {
        *shape_obs.entry(shape(k)).or_default() += o;
    }
    for (k, &p) in exact {
        *shape_prob.entry(shape(k)).or_default() += p;
    }
    let mut shapes: Vec<_> = shape_prob.keys().cloned().collect();
    shapes.sort();
    let so: Vec<u64> = shapes
        .iter()
        .map(|s| shape_obs.get(s).copied().unwrap_or(0))
        .collect();
    let sp: Vec<f64> = shapes.iter().map(|s| shape_prob[s]).collect();
    Ok((history_p, chi_square_p(&so, &sp)))
}

// 6. Generator and CTBP jump chain against exhaustive enumeration.
fn chain_equivalence() -> Outcome {
    let f = PaFunction::affine(0.0).unwrap();
    let star = enumerate_histories(4)
        .iter()
        .filter(|(k, _)| shape(k) == [1, 1, 1, 3])
        .map(|(_, p)| p)
        .sum::<f64>();
    ensure((star - 0.5).abs() < 1e-15, || {
        format!("enumerated P(star at n=4) = {star}")
    })?;
    let mut notes = Vec::new();
    for n in [4usize, 5] {
        let exact = enumerate_histories(n);
        let (mut gen, mut ct): (HashMap<Vec<u32>, u64>, HashMap<Vec<u32>, u64>) =
            Default::default();
        for rep in 0..100_000u64 {
            let cfg = GrowthConfig::new(f.clone(), n as u64, stream_seed(6_000 + n as u64, rep));
            let (t, _) = grow(&cfg).map_err(|e| e.to_string())?;
            *gen.entry(t.parents().to_vec()).or_default() += 1;
            let out = simulate_until_size(
                &f,
                n,
                stream_seed(6_100 + n as u64, rep),
                RootMode::TwoRoots,
                1,
            )
            .map_err(|e| e.to_string())?;
            *ct.entry(out.snapshot.ok_or("no snapshot")?.parents().to_vec())
                .or_default() += 1;
        }
        for (label, counts) in [("grow", &gen), ("ctbp", &ct)] {
            let (hp, sp) = compare(counts, &exact)?;
            ensure(hp > 0.001 && sp > 0.001, || {
                format!("{label} n = {n}: history p = {hp:.2e}, shape p = {sp:.2e}")
            })?;
            notes.push(format!("{label} n={n}: p = {hp:.3}/{sp:.3}"));
        }
    }
    Ok(format!("history/shape chi-square {}", notes.join(", ")))
}

fn desk_plan(functions: Vec<NamedFunction>, sizes: Vec<u64>, degrees: Vec<u32>) -> ExperimentPlan {
    ExperimentPlan {
        functions,
        sizes,
        replicates: 100,
        degrees_of_interest: degrees,
        ..ExperimentPlan::default()
    }
}

// 7. Median normalized estimate against f(k)/f(1) at n = 10^5.
fn consistency() -> Outcome {
    let plan = desk_plan(
        PaFunction::reference_set()
            .into_iter()
            .map(|(id, f)| NamedFunction { id, f })
            .collect(),
        vec![100_000],
        vec![1, 2, 3, 4],
    );
    let rows = run_consistency_study(&plan, Execution::Parallel).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for nf in &plan.functions {
        for k in 2..=4u32 {
            let mut vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.f_id == nf.id && r.k == k)
                .filter_map(|r| r.r_hat_normalized)
                .collect();
            ensure(vals.len() == 100, || {
                format!("{} k = {k}: {} defined values", nf.id, vals.len())
            })?;
            vals.sort_by(f64::total_cmp);
            let median = 0.5 * (vals[49] + vals[50]);
            let target = nf.f.value(k as u64) / nf.f.value(1);
            let rel = (median - target).abs() / target;
            ensure(rel <= 0.05, || {
                format!("{} k = {k}: median {median:.4} vs {target:.4}", nf.id)
            })?;
            notes.push(format!("{}:{k} {:.1}%", nf.id, 100.0 * rel));
        }
    }
    Ok(format!("relative error of median {}", notes.join(" ")))
}

// 8. Log-population slope of the f(k) = k branching process.
fn growth_rate() -> Outcome {
    let f = PaFunction::affine(0.0).unwrap();
    let mut slopes = Vec::new();
    for rep in 0..10u64 {
        let mut sim = CtbpSim::new(f.clone(), RootMode::TwoRoots, 1, stream_seed(8_000, rep))
            .map_err(|e| e.to_string())?;
        let out = run(&mut sim, StopRule::Size(100_000), 10).map_err(|e| e.to_string())?;
        slopes
            .push(estimate_growth_rate(&out.trajectory, GROWTH_WINDOW).map_err(|e| e.to_string())?);
    }
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let rel = (mean - 2.0).abs() / 2.0;
    ensure(rel <= 0.10, || format!("mean slope {mean:.4}"))?;
    Ok(format!(
        "mean slope {mean:.4} over 10 runs ({:.1}% from 2)",
        100.0 * rel
    ))
}

// 9. Stability of the variance of sqrt(n)(r̂_2 - r_2) and normal QQ fit.
fn normality() -> Outcome {
    let plan = desk_plan(
        vec![NamedFunction {
            id: "f2".into(),
            f: PaFunction::reference_power(),
        }],
        vec![10_000, 100_000],
        vec![2],
    );
    let study = run_normality_study(&plan, 2, Execution::Parallel).map_err(|e| e.to_string())?;
    let mut variances = Vec::new();
    let mut notes = Vec::new();
    for n in [10_000u64, 100_000] {
        let xs: Vec<f64> = study
            .rows
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| r.scaled_error)
            .collect();
        ensure(xs.len() == 100, || format!("n = {n}: {} values", xs.len()))?;
        let (_, var) = sd_variance(&xs);
        variances.push(var);
        let qq = study
            .summary
            .iter()
            .find(|s| s.n == n)
            .and_then(|s| s.qq_correlation)
            .ok_or_else(|| format!("n = {n}: no QQ correlation"))?;
        ensure(qq >= 0.99, || format!("n = {n}: QQ correlation {qq:.4}"))?;
        notes.push(format!("n={n}: var {var:.4}, qq {qq:.4}"));
    }
    let ratio = variances[0].max(variances[1]) / variances[0].min(variances[1]);
    ensure(ratio <= 1.5, || {
        format!("variance ratio {ratio:.3} ({})", notes.join("; "))
    })?;
    Ok(format!("variance ratio {ratio:.3}; {}", notes.join("; ")))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pa-lab"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "pa-lab {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_tree(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.push((rel, std::fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok(files)
}

// 10. Every CLI command is byte-reproducible, serial or parallel.
fn determinism() -> Outcome {
    const F2: &str = r#"{"kind":"power","beta":0.6666666666666666,
        "certificate":{"type":"power_bounded","beta":0.6666666666666666,"delta":0,"c":1}}"#;
    const PLAN: &str = r#"{"sizes":[2000,5000],"replicates":8,"degrees_of_interest":[1,2,3,4,5]}"#;
    let run_all = |mode: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        std::fs::write(d.join("plan.json"), PLAN).map_err(|e| e.to_string())?;
        std::fs::write(d.join("edges.txt"), "0 1\n1 2\n1 3\n3 4\n").map_err(|e| e.to_string())?;
        cli(
            d,
            &[
                "generate", "--f", F2, "--n", "20000", "--seed", "11", "--log", "--out", "tree.txt",
            ],
        )?;
        cli(
            d,
            &[
                "estimate",
                "--snapshot",
                "tree.txt",
                "--log",
                "tree.txt.log",
                "--normalize",
                "--monotone",
                "--out",
                "est.csv",
            ],
        )?;
        cli(
            d,
            &["estimate", "--edges", "edges.txt", "--out", "edges.csv"],
        )?;
        cli(
            d,
            &["theory", "--f", F2, "--tol", "1e-10", "--out", "theory.csv"],
        )?;
        cli(
            d,
            &[
                "ctbp",
                "--f",
                F2,
                "--n",
                "5000",
                "--k",
                "2",
                "--mode",
                "two_roots",
                "--seed",
                "3",
                "--out",
                "ctbp.csv",
            ],
        )?;
        cli(
            d,
            &[
                "ctbp",
                "--f",
                F2,
                "--n",
                "5000",
                "--k",
                "1",
                "--mode",
                "single_root",
                "--seed",
                "3",
                "--out",
                "ctbp1.csv",
            ],
        )?;
        for study in ["consistency", "variance", "normality"] {
            let out = format!("exp/{study}");
            let mut args = vec![
                "experiment",
                "--plan",
                "plan.json",
                "--study",
                study,
                "--k",
                "2",
                "--out-dir",
                &out,
            ];
            match mode {
                "serial" => args.push("--serial"),
                "threads" => args.extend(["--threads", "3"]),
                _ => {}
            }
            cli(d, &args)?;
        }
        cli(
            d,
            &[
                "summarize",
                "exp/consistency/consistency.csv",
                "--out",
                "summary.csv",
            ],
        )?;
        let mut files = read_tree(d)?;
        files.retain(|(name, _)| name != "plan.json" && name != "edges.txt");
        Ok(files)
    };
    let first = run_all("parallel")?;
    ensure(first.len() >= 14, || {
        format!("only {} output files", first.len())
    })?;
    for mode in ["parallel", "serial", "threads"] {
        let again = run_all(mode)?;
        ensure(again.len() == first.len(), || {
            format!("{mode}: file set differs")
        })?;
        for ((na, a), (nb, b)) in first.iter().zip(&again) {
            ensure(na == nb && a == b, || format!("{mode}: {na} differs"))?;
        }
    }
    Ok(format!(
        "{} output files byte-identical across 4 runs (parallel, parallel, serial, 3 threads)",
        first.len()
    ))
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "Malthusian exactness",
            budget: secs(1),
            check: malthusian_exactness,
        },
        Criterion {
            id: 2,
            name: "Limiting law",
            budget: secs(1),
            check: limiting_law,
        },
        Criterion {
            id: 3,
            name: "Theory identities",
            budget: secs(5),
            check: theory_identities,
        },
        Criterion {
            id: 4,
            name: "Attachment identity exactness",
            budget: secs(30),
            check: lemma_exactness,
        },
        Criterion {
            id: 5,
            name: "Sampler oracle equivalence",
            budget: None,
            check: sampler_equivalence,
        },
        Criterion {
            id: 6,
            name: "Small-instance chain equivalence",
            budget: secs(120),
            check: chain_equivalence,
        },
        Criterion {
            id: 7,
            name: "Consistency at desk scale",
            budget: secs(600),
            check: consistency,
        },
        Criterion {
            id: 8,
            name: "Growth rate",
            budget: secs(120),
            check: growth_rate,
        },
        Criterion {
            id: 9,
            name: "Normality diagnostics",
            budget: secs(600),
            check: normality,
        },
        Criterion {
            id: 10,
            name: "Determinism",
            budget: None,
            check: determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(msg), Some(b)) if elapsed > b => Err(format!(
                "{msg}; took {:.2}s > {}s budget",
                elapsed.as_secs_f64(),
                b.as_secs()
            )),
            (o, _) => o,
        };
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!(
            "[{tag}] AC-{} {}: {msg} ({:.2}s)",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
