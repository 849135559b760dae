//! Acceptance suite. Runs every exit criterion, prints one PASS/FAIL line
//! each, and exits non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use cobra_core::eval::cross_validate_detailed;
use cobra_core::query_log::read_ndjson;
use cobra_core::{
    ari, baseline_closure, baseline_full, load_csv, query_bounds, run_cobra, Answer,
    ConstraintStore, CsvOptions, LabelOracle, PairOrdering, ReplayOracle, ResultDocument, RunParams,
};
use common::{brute_force_ari, choose2, data_dir, prepared, BruteClosure, BUNDLED};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn labels_of(name: &str) -> Vec<usize> {
    prepared(name).label_ids().expect("bundled datasets carry labels")
}

/// Instance counts after deduplication and the resulting pair totals.
fn total_pair_counts() -> Verdict {
    let expected = [
        ("iris", 147, 10731),
        ("wine", 178, 15753),
        ("dermatology", 358, 63903),
        ("hepatitis", 112, 6216),
        ("ecoli", 336, 56280),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, n, pairs) in expected {
        let path = data_dir().join(format!("{name}.csv"));
        if !path.exists() {
            ok = false;
            parts.push(format!("{name}: no data/{name}.csv"));
            continue;
        }
        let label = BUNDLED
            .iter()
            .find(|(b, _)| *b == name)
            .map_or("class", |(_, l)| *l);
        let d = load_csv(&path, &CsvOptions { label_column: Some(label.into()), ..Default::default() })
            .map_err(|e| format!("{name}: {e}"))?
            .dedupe();
        let got = choose2(d.len());
        ok &= d.len() == n && got == pairs;
        parts.push(format!("{name}: N={} pairs={got} (want {pairs})", d.len()));
    }
    check(ok, parts.join("; "))
}

fn full_baseline_on_iris() -> Verdict {
    let d = prepared("iris");
    let labels = labels_of("iris");
    let started = Instant::now();
    let out = baseline_full(&d, LabelOracle::new(labels.clone())).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let score = ari(&out.assignment, &labels, None).map_err(|e| e.to_string())?;
    check(
        out.oracle_count == 10731 && score == 1.0 && elapsed < Duration::from_secs(5),
        format!("queries={} ARI={score} time={elapsed:.2?}", out.oracle_count),
    )
}

fn closure_baselines_on_iris() -> Verdict {
    let d = prepared("iris");
    let labels = labels_of("iris");
    let mut random = Vec::new();
    let mut perfect = true;
    for seed in 0..5 {
        let out = baseline_closure(&d, LabelOracle::new(labels.clone()), PairOrdering::Random { seed })
            .map_err(|e| e.to_string())?;
        perfect &= ari(&out.assignment, &labels, None).unwrap() == 1.0;
        random.push(out.oracle_count as f64);
    }
    let closest = baseline_closure(&d, LabelOracle::new(labels.clone()), PairOrdering::ClosestFirst)
        .map_err(|e| e.to_string())?;
    perfect &= ari(&closest.assignment, &labels, None).unwrap() == 1.0;
    let random_mean = mean(&random);
    check(
        (300.0..=520.0).contains(&random_mean)
            && (120..=200).contains(&closest.oracle_count)
            && perfect,
        format!(
            "random mean={random_mean:.1} {random:?} (band [300, 520]); closest-first={} (band [120, 200]); all ARI 1: {perfect}",
            closest.oracle_count
        ),
    )
}

fn cobra_mean_queries(name: &str, n_super: usize) -> Result<Vec<f64>, String> {
    let d = prepared(name);
    let labels = labels_of(name);
    (0..5)
        .map(|seed| {
            run_cobra(&d, n_super, LabelOracle::new(labels.clone()), seed, None)
                .map(|o| o.oracle_count() as f64)
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn cobra_query_counts() -> Verdict {
    let iris = cobra_mean_queries("iris", 25)?;
    let ecoli = cobra_mean_queries("ecoli", 25)?;
    let (mi, me) = (mean(&iris), mean(&ecoli));
    check(
        (25.0..=45.0).contains(&mi) && (38.0..=66.0).contains(&me),
        format!("iris mean={mi:.1} {iris:?} (band [25, 45]); ecoli mean={me:.1} {ecoli:?} (band [38, 66])"),
    )
}

fn bound_bracket() -> Verdict {
    let mut runs = 0;
    let mut failures = Vec::new();
    for &(name, _) in BUNDLED {
        let d = prepared(name);
        let labels = labels_of(name);
        let n_true = d.n_classes().unwrap();
        for n_super in [25, 50, 100] {
            for seed in 0..5 {
                let out = run_cobra(&d, n_super, LabelOracle::new(labels.clone()), seed, None)
                    .map_err(|e| e.to_string())?;
                runs += 1;
                let n_eff = out.super_instances.len();
                let count = out.oracle_count();
                if count > choose2(n_eff) {
                    failures.push(format!("{name}/{n_super}/{seed}: {count} > C({n_eff},2)"));
                }
                if n_super == 25 && (name == "iris" || name == "wine") {
                    let (lower, _) = query_bounds(n_eff, n_true).map_err(|e| e.to_string())?;
                    let floor = lower as i64 - choose2(n_true) as i64;
                    if (count as i64) < floor {
                        failures.push(format!("{name}/{seed}: {count} < {floor}"));
                    }
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!("{runs} runs checked; violations: {failures:?}"),
    )
}

fn iris_cv_quality() -> Verdict {
    let d = prepared("iris");
    let runs = cross_validate_detailed(&d, 25, 5, 0).map_err(|e| e.to_string())?;
    let scores: Vec<f64> = runs.iter().map(|r| r.result.ari_test).collect();
    let m = mean(&scores);
    check(m >= 0.80, format!("mean test ARI={m:.4} folds={scores:.3?} (floor 0.80)"))
}

fn ari_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20170801);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=100);
        let kp = rng.random_range(1..=8);
        let kt = rng.random_range(1..=8);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..kt)).collect();
        let fast = ari(&pred, &truth, None).map_err(|e| e.to_string())?;
        worst = worst.max((fast - brute_force_ari(&pred, &truth)).abs());
    }
    check(worst <= 1e-12, format!("200 pairs, max |diff|={worst:e} (tolerance 1e-12)"))
}

fn closure_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for _ in 0..500 {
        let n = rng.random_range(2..=50);
        let k = rng.random_range(1..=6);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let steps = rng.random_range(0..=2 * n);
        let mut store = ConstraintStore::with_capacity(n);
        let mut applied = Vec::new();
        for _ in 0..steps {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a == b {
                continue;
            }
            let ans = if truth[a] == truth[b] { Answer::MustLink } else { Answer::CannotLink };
            store.add(a, b, ans).map_err(|e| e.to_string())?;
            applied.push((a, b, ans));
        }
        let brute = BruteClosure::new(n, &applied);
        for a in 0..n {
            for b in 0..n {
                checked += 1;
                mismatches += usize::from(store.relation(a, b) != brute.relation(a, b));
            }
        }
    }
    check(
        mismatches == 0,
        format!("500 sequences, {checked} pair checks, {mismatches} mismatches"),
    )
}

fn determinism_and_replay() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut differing = Vec::new();
    for i in 0..10 {
        let (name, _) = BUNDLED[rng.random_range(0..BUNDLED.len())];
        let n_super = rng.random_range(2..=100);
        let seed: u64 = rng.random();
        let d = prepared(name);
        let params = RunParams { n_super, seed };
        let batch = run_cobra(&d, n_super, LabelOracle::new(labels_of(name)), seed, None)
            .map_err(|e| e.to_string())?;
        let mut log = Vec::new();
        batch.log.write_ndjson(&mut log).map_err(|e| e.to_string())?;
        let replay = ReplayOracle::new(read_ndjson(&log[..]).map_err(|e| e.to_string())?);
        let replayed = run_cobra(&d, n_super, replay, seed, None).map_err(|e| e.to_string())?;
        let a = ResultDocument::new(&d, params, &batch, None).to_json();
        let b = ResultDocument::new(&d, params, &replayed, None).to_json();
        if a.as_bytes() != b.as_bytes() {
            differing.push(format!("#{i} {name}/{n_super}/{seed}"));
        }
    }
    check(
        differing.is_empty(),
        format!("10 configs, differing documents: {differing:?}"),
    )
}

fn runtime() -> Verdict {
    let mut slowest = (String::new(), Duration::ZERO);
    for &(name, label) in BUNDLED {
        let started = Instant::now();
        let path = data_dir().join(format!("{name}.csv"));
        let d = load_csv(&path, &CsvOptions { label_column: Some(label.into()), ..Default::default() })
            .map_err(|e| e.to_string())?
            .dedupe()
            .normalize();
        let labels = d.label_ids().unwrap();
        run_cobra(&d, 25, LabelOracle::new(labels), 0, None).map_err(|e| e.to_string())?;
        let cluster = started.elapsed();
        if cluster > slowest.1 {
            slowest = (format!("{name} cluster"), cluster);
        }
        for n_super in [25, 50, 100] {
            for run in cross_validate_detailed(&d, n_super, 5, 0).map_err(|e| e.to_string())? {
                let t = Duration::from_secs_f64(run.result.wall_time.unwrap_or(f64::INFINITY));
                if t > slowest.1 {
                    slowest = (format!("{name} n_super={n_super} fold {}", run.result.fold_index), t);
                }
            }
        }
    }
    check(
        slowest.1 < Duration::from_secs(10),
        format!("slowest: {} in {:.2?} (limit 10 s)", slowest.0, slowest.1),
    )
}

fn protocol_integrity() -> Verdict {
    let mut folds = 0;
    let mut violations = Vec::new();
    for &(name, _) in BUNDLED {
        let d = prepared(name);
        for n_super in [25, 50, 100] {
            for run in cross_validate_detailed(&d, n_super, 5, 0).map_err(|e| e.to_string())? {
                folds += 1;
                let train = cobra_core::super_instances::id_mask(&run.fold.train, d.len()).unwrap();
                for e in run.outcome.log.oracle_entries() {
                    if !train[e.a] || !train[e.b] {
                        violations.push(format!("{name}/{n_super}: pair ({}, {})", e.a, e.b));
                    }
                }
                for &m in &run.outcome.super_instances.medoids {
                    if !train[m] {
                        violations.push(format!("{name}/{n_super}: medoid {m}"));
                    }
                }
            }
        }
    }
    check(
        violations.is_empty(),
        format!("{folds} folds checked; violations: {violations:?}"),
    )
}

fn main() {
    let criteria: &[Criterion] = &[
        ("total pair counts after dedup (iris, wine, dermatology, hepatitis, ecoli)", total_pair_counts),
        ("full baseline on iris: 10731 queries, ARI 1, < 5 s", full_baseline_on_iris),
        ("closure baselines on iris: random and closest-first bands, ARI 1", closure_baselines_on_iris),
        ("COBRA query counts at 25 super-instances (iris, ecoli)", cobra_query_counts),
        ("query count within bound bracket", bound_bracket),
        ("iris 5-fold CV mean test ARI >= 0.80", iris_cv_quality),
        ("ARI matches brute-force pair counting", ari_equivalence),
        ("constraint closure matches brute-force graph closure", closure_equivalence),
        ("batch and replay runs give identical documents", determinism_and_replay),
        ("runtime under 10 s per cluster run and per fold", runtime),
        ("CV protocol never exposes test instances", protocol_integrity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = run();
        let tag = if verdict.is_ok() { "PASS" } else { "FAIL" };
        let detail = verdict.unwrap_or_else(|e| e);
        println!("[{tag}] AC{:02} {name} :: {detail} ({:.2?})", i + 1, started.elapsed());
        failed += usize::from(tag == "FAIL");
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
