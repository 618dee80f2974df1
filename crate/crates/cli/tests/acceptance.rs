//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ordent::compat::{compatible_patterns_exact, verify_lemma, DEFAULT_WORD_BUDGET};
use ordent::estimators::{
    empirical_pattern_distribution, exact_partition_entropies, permutation_entropy_estimate, rokhlin_formula_oracle,
    Estimator, ExactOptions, Flag, SamplingPlan,
};
use ordent::measures::{gauss_monotony_entropy, gauss_monotony_partial_sum, gauss_tail_entropy_bound};
use ordent::ordinal::{comparison_encoding, pattern_from_comparisons, pattern_of, TiePolicy};
use ordent::rng::CounterRng;
use ordent::rokhlin::{
    build_base, build_q_partition, tower_overlap, verify_q_partition, visit_bound_check, CheckKind, Strategy,
    DEFAULT_Q_BUDGET,
};
use ordent::{Builtin, Interval, IntervalUnion, InvariantMeasure, PiecewiseMonotoneMap};

/// Seed for every stochastic criterion.
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn lebesgue() -> InvariantMeasure {
    InvariantMeasure::Lebesgue { lo: 0.0, hi: 1.0 }
}

fn builtin(b: Builtin) -> PiecewiseMonotoneMap {
    PiecewiseMonotoneMap::builtin(b).expect("builtin map")
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Every positive-measure word of length `2..=n_max`, grown depth first.
fn positive_words(map: &PiecewiseMonotoneMap, n_max: usize) -> Vec<Vec<u32>> {
    fn grow(map: &PiecewiseMonotoneMap, word: &mut Vec<u32>, n_max: usize, out: &mut Vec<Vec<u32>>) {
        if word.len() >= 2 {
            out.push(word.clone());
        }
        if word.len() == n_max {
            return;
        }
        for l in map.positive_labels() {
            word.push(l);
            if map.cylinder_interval(word).is_ok_and(|c| c.length() > 0.0) {
                grow(map, word, n_max, out);
            }
            word.pop();
        }
    }
    let mut out = Vec::new();
    grow(map, &mut Vec::new(), n_max, &mut out);
    out
}

/// `#{s ≤ n−2 : w_s = w_{n−1}}`, counted directly.
fn matches(word: &[u32]) -> u32 {
    let last = word[word.len() - 1];
    word[..word.len() - 1].iter().filter(|&&l| l == last).count() as u32
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut words = 0u64;
    let mut violations = 0u64;
    let mut witnesses: Vec<Vec<u32>> = Vec::new();
    let mut tent_11 = false;
    for b in [Builtin::Tent, Builtin::Doubling] {
        let map = builtin(b);
        match verify_lemma(&map, &lebesgue(), 6, DEFAULT_WORD_BUDGET) {
            Ok(s) if s.max_count_over_bound_ratio <= 1.0 => {}
            _ => violations += 1,
        }
        for w in positive_words(&map, 6) {
            words += 1;
            let Ok(r) = compatible_patterns_exact(&map, &lebesgue(), &w, DEFAULT_WORD_BUDGET) else {
                violations += 1;
                continue;
            };
            let bound = 1u64 << matches(&w);
            if r.count > bound {
                violations += 1;
            }
            if r.count == bound && bound >= 2 && b == Builtin::Tent {
                tent_11 |= w == [1, 1];
                witnesses.push(w);
            }
        }
    }
    let extends = witnesses.iter().any(|w| w.len() > 2 && w.starts_with(&[1, 1]));
    let elapsed = start.elapsed();
    let pass = violations == 0 && tent_11 && extends && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{words} words, {violations} violations, {} tent equality witnesses, (1,1) witness {tent_11}, extended {extends}, {:.2} s",
            witnesses.len(),
            secs(elapsed)
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut words = 0u64;
    let mut bad = 0u64;
    for b in [Builtin::Tent, Builtin::Doubling] {
        let map = builtin(b);
        for w in positive_words(&map, 6) {
            words += 1;
            let Ok(r) = compatible_patterns_exact(&map, &lebesgue(), &w, DEFAULT_WORD_BUDGET) else {
                bad += 1;
                continue;
            };
            let n = w.len();
            let product: u64 = r.per_d_counts.iter().product();
            let split_ok = (1..n).all(|d| {
                let c = r.per_d_counts[d - 1];
                if w[n - 1 - d] == w[n - 1] {
                    (1..=2).contains(&c)
                } else {
                    c == 1
                }
            });
            if r.count > product || r.per_d_counts.len() != n - 1 || !split_ok {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{words} words, {bad} factorization or case-split failures"),
    )
}

fn criterion_3() -> Outcome {
    const WINDOWS: usize = 100_000;
    let mut rng = CounterRng::at(SEED, 100, 0, 1);
    let mut failures = 0u64;
    let mut ties = 0u64;
    for i in 0..WINDOWS {
        let n = 2 + i % 7;
        let w: Vec<f64> = (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let Ok(direct) = pattern_of(&w, TiePolicy::Strict) else {
            ties += 1;
            continue;
        };
        // oracle: positions sorted by value
        let mut order: Vec<u8> = (0..n as u8).collect();
        order.sort_by(|&a, &b| w[a as usize].total_cmp(&w[b as usize]));
        let round_trip = comparison_encoding(&w).and_then(|c| pattern_from_comparisons(&c));
        let cubed: Vec<f64> = w.iter().map(|x| x * x * x).collect();
        let ok = direct.as_slice() == order.as_slice()
            && round_trip.as_ref() == Ok(&direct)
            && pattern_of(&cubed, TiePolicy::Strict).as_ref() == Ok(&direct);
        if !ok {
            failures += 1;
        }
    }
    outcome(
        failures == 0 && ties == 0,
        format!("{WINDOWS} windows n=2..8, {failures} failures, {ties} tied windows"),
    )
}

fn random_intervals(seed: u64, count: usize, lo: f64, hi: f64) -> Vec<IntervalUnion> {
    let mut rng = CounterRng::at(seed, 101, 0, 1);
    (0..count)
        .map(|_| {
            let (a, b) = (rng.uniform(), rng.uniform());
            let (a, b) = (a.min(b), a.max(b));
            IntervalUnion::from(Interval::closed(lo + (hi - lo) * a, lo + (hi - lo) * b))
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let gauss = builtin(Builtin::Gauss { n_max: 1_000_000 });
    let gauss_worst = random_intervals(SEED, 100, 0.0, 1.0)
        .iter()
        .map(|a| InvariantMeasure::Gauss.check_invariance(&gauss, a))
        .fold(0.0, f64::max);
    let mut linear_worst: f64 = 0.0;
    for b in [Builtin::Doubling, Builtin::Tent] {
        let map = builtin(b);
        for a in random_intervals(SEED + 1, 100, 0.0, 1.0) {
            linear_worst = linear_worst.max(lebesgue().check_invariance(&map, &a));
        }
    }
    let elapsed = start.elapsed();
    let pass = gauss_worst <= 1e-9 && linear_worst <= 1e-12 && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "gauss N_max=1e6 max gap {gauss_worst:.2e} (tol 1e-9), doubling/tent {linear_worst:.2e} (tol 1e-12), {:.2} s",
            secs(elapsed)
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_rate: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut errors = Vec::new();
    for b in [Builtin::Doubling, Builtin::Tent] {
        let map = builtin(b);
        let mu = lebesgue();
        match exact_partition_entropies(&map, &mu, map.monotony_partition(), 15, ExactOptions::default()) {
            Ok(hs) => {
                let oracle = rokhlin_formula_oracle(&map, &mu, 1e-10)
                    .map(|o| o.value)
                    .unwrap_or(f64::NAN);
                for (k, h) in hs.iter().enumerate() {
                    let rate = h.value / (k + 1) as f64;
                    worst_rate = worst_rate.max((rate - LN_2).abs());
                    worst_oracle = worst_oracle.max((rate - oracle).abs());
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    let pass = errors.is_empty() && worst_rate <= 1e-12 && worst_oracle <= 1e-6;
    outcome(
        pass,
        format!(
            "n=1..15 max |H/n - ln2| {worst_rate:.2e} (tol 1e-12), max |H/n - oracle| {worst_oracle:.2e} (tol 1e-6){}",
            if errors.is_empty() {
                String::new()
            } else {
                format!(", errors {errors:?}")
            }
        ),
    )
}

fn criterion_6() -> Outcome {
    let oracle = |b: Builtin| {
        let map = builtin(b);
        rokhlin_formula_oracle(&map, &b.invariant_measure(), 1e-10)
            .map(|o| o.value)
            .unwrap_or(f64::NAN)
    };
    let doubling = oracle(Builtin::Doubling);
    let tent = oracle(Builtin::Tent);
    let gauss = oracle(Builtin::Gauss { n_max: 1000 });
    let closed_form = PI * PI / (6.0 * LN_2);
    let pass = (doubling - LN_2).abs() <= 1e-6 && (tent - LN_2).abs() <= 1e-6 && (gauss - closed_form).abs() <= 1e-4;
    outcome(
        pass,
        format!(
            "doubling {doubling:.12}, tent {tent:.12}, gauss {gauss:.9} vs pi^2/(6 ln 2) = {closed_form:.9} (diff {:.1e})",
            (gauss - closed_form).abs()
        ),
    )
}

fn criterion_7() -> Outcome {
    let map = builtin(Builtin::Doubling);
    let plan = SamplingPlan {
        seed: SEED,
        samples: 1_000_000,
        offset: 0,
    };
    let run = |n: usize| {
        let dist = empirical_pattern_distribution(&map, &lebesgue(), n, plan).expect("sampling");
        let est = permutation_entropy_estimate(&dist, Estimator::Plugin).expect("estimate");
        (est, dist.tie_fraction())
    };
    let (e10, ties10) = run(10);
    let (e3, _) = run(3);
    let slack = 3.0 * e10.std_error;
    let bracket = LN_2 - slack <= e10.value && e10.value <= 2.0 * LN_2 + slack;
    let trend = e3.value > e10.value;
    let ties_ok = ties10 < 1e-3;
    let sampled_ok = !e10.has(Flag::Undersampled);
    outcome(
        bracket && trend && ties_ok && sampled_ok,
        format!(
            "n=10 plugin {:.6} +- {:.1e} in [{:.6}, {:.6}]: {bracket}; trend n=3 {:.6} > n=10 {:.6}: {trend}; tie fraction {ties10:.1e}",
            e10.value,
            e10.std_error,
            LN_2 - slack,
            2.0 * LN_2 + slack,
            e3.value,
            e10.value,
        ),
    )
}

/// `Σ_{n=1}^{10^7} φ(μ_n)` summed here from scratch, plus the asymptotic tail
/// `∫_M^∞ φ(c/x²) dx = c(2 ln M + 2 − ln c)/M` with `c = 1/ln 2`.
fn gauss_entropy_direct() -> (f64, f64) {
    const TERMS: u64 = 10_000_000;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for n in (1..=TERMS).rev() {
        let x = n as f64;
        let m = (1.0 / (x * (x + 2.0))).ln_1p() / LN_2;
        let term = -m * m.ln();
        let t = sum + term;
        comp += if sum.abs() >= term.abs() {
            (sum - t) + term
        } else {
            (term - t) + sum
        };
        sum = t;
    }
    let c = 1.0 / LN_2;
    let big_m = TERMS as f64 + 0.5;
    let tail = c * (2.0 * big_m.ln() + 2.0 - c.ln()) / big_m;
    (sum + comp, tail)
}

fn criterion_8() -> Outcome {
    const N_MAX: u32 = 1_000_000;
    let h = gauss_monotony_entropy(N_MAX);
    let partial = gauss_monotony_partial_sum(u64::from(N_MAX));
    let width = gauss_tail_entropy_bound(N_MAX);
    let (direct, direct_tail) = gauss_entropy_direct();
    let reference = direct + direct_tail;
    let certified = width.is_finite() && width <= 1e-3;
    let enclosed = partial <= direct && direct <= partial + width;
    let agrees = (h.value - reference).abs() <= 1e-6;
    outcome(
        certified && enclosed && agrees,
        format!(
            "H(M) in [{partial:.9}, {:.9}] (width {width:.2e}); value {:.9}; 1e7-term sum {direct:.9} + tail {direct_tail:.2e}, diff {:.1e} (tol 1e-6)",
            partial + width,
            h.value,
            (h.value - reference).abs()
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let map = builtin(Builtin::Doubling);
    let mu = lebesgue();
    let eps = 0.25;
    let mut parts = Vec::new();
    let mut pass = true;
    for d in [2usize, 3, 4] {
        let tower = match build_base(&map, &mu, d, eps, Strategy::ExactSearch, SEED) {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                parts.push(format!("d={d}: {e}"));
                continue;
            }
        };
        let disjoint = tower.check == CheckKind::Exact && tower_overlap(&map, &tower.base, d) == 0.0;
        let heavy = tower.base_measure >= (1.0 - eps) / d as f64;
        let (q_ok, good) = match build_q_partition(&map, &mu, tower.base.cells(), d, eps, DEFAULT_Q_BUDGET) {
            Ok(q) => {
                let r = verify_q_partition(&map, &mu, &q);
                (r.pass && r.entropy_finite && r.good_measure >= 0.75, r.good_measure)
            }
            Err(_) => (false, f64::NAN),
        };
        let visits = visit_bound_check(&map, &mu, &tower.base, d, 100, 10_000, SEED);
        pass &= disjoint && heavy && q_ok && visits.violations == 0;
        parts.push(format!(
            "d={d}: mu(B)={:.4} disjoint {disjoint} Q ok {q_ok} good {good:.4} visit violations {}",
            tower.base_measure, visits.violations
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    outcome(pass, format!("{}; {:.2} s", parts.join("; "), secs(elapsed)))
}

/// Runs the binary and returns its exit code and every file it wrote.
fn run_cli(dir: &Path, threads: &str, via_env: bool, args: &[String]) -> (i32, Vec<(String, Vec<u8>)>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ordent"));
    if via_env {
        cmd.env("ORDENT_THREADS", threads);
    } else {
        cmd.env_remove("ORDENT_THREADS").args(["--threads", threads]);
    }
    let status = cmd.args(args).output().expect("binary runs").status;
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).expect("read"),
            )
        })
        .collect();
    files.sort();
    (status.code().unwrap_or(-1), files)
}

fn criterion_10() -> Outcome {
    let root = tempfile::tempdir().expect("tempdir");
    let commands: Vec<Vec<&str>> = vec![
        vec!["list-maps"],
        vec![
            "entropy",
            "pe",
            "--map",
            "doubling",
            "--n",
            "2..8",
            "--samples",
            "200000",
            "--seed",
            "7",
            "--histograms",
        ],
        vec![
            "entropy",
            "pe",
            "--map",
            "gauss",
            "--gauss-nmax",
            "1000",
            "--n",
            "2..5",
            "--samples",
            "100000",
            "--seed",
            "11",
        ],
        vec!["entropy", "ks", "--map", "tent", "--n", "1..12"],
        vec![
            "entropy",
            "ks",
            "--map",
            "logistic",
            "--n",
            "1..6",
            "--mode",
            "sampled",
            "--samples",
            "100000",
            "--seed",
            "5",
        ],
        vec!["verify", "lemma-sn", "--map", "doubling", "--nmax", "6"],
        vec![
            "verify",
            "bounds",
            "--map",
            "doubling",
            "--n",
            "10",
            "--samples",
            "1000000",
            "--seed",
            "3",
        ],
        vec![
            "verify", "tower", "--map", "doubling", "--d", "3", "--eps", "0.25", "--seed", "1",
        ],
        vec![
            "tower", "build", "--map", "tent", "--d", "2", "--eps", "0.25", "--seed", "4",
        ],
    ];
    let mut mismatches = Vec::new();
    let mut runs = 0;
    let mut run_pair = |label: String, args: Vec<String>, slot: &str| {
        let mut results = Vec::new();
        for (k, (threads, env)) in [("1", false), ("4", false), ("2", true)].into_iter().enumerate() {
            let dir = root.path().join(format!("{slot}-{k}"));
            fs::create_dir_all(&dir).expect("dir");
            let mut full = args.clone();
            full.extend(["--out".to_string(), dir.join("r").to_string_lossy().into_owned()]);
            results.push(run_cli(&dir, threads, env, &full));
        }
        runs += 1;
        let identical = results.windows(2).all(|w| w[0] == w[1]) && !results[0].1.is_empty();
        if !identical || results[0].0 != 0 {
            mismatches.push(format!("{label} (exit {})", results[0].0));
        }
        root.path().join(format!("{slot}-0")).join("r.json")
    };
    for (i, c) in commands.iter().enumerate() {
        run_pair(c.join(" "), c.iter().map(|s| s.to_string()).collect(), &format!("c{i}"));
    }
    let built = run_pair(
        "tower build (reference)".into(),
        commands[8].iter().map(|s| s.to_string()).collect(),
        "tb",
    );
    run_pair(
        "tower verify".into(),
        vec![
            "tower".into(),
            "verify".into(),
            "--tower".into(),
            built.to_string_lossy().into_owned(),
            "--seed".into(),
            "2".into(),
        ],
        "tv",
    );
    let mut parts = Vec::new();
    for (samples, offset, slot) in [("4000", "0", "pa"), ("6000", "4000", "pb")] {
        let args = [
            "entropy",
            "pe",
            "--map",
            "tent",
            "--n",
            "3..6",
            "--seed",
            "9",
            "--histograms",
            "--samples",
            samples,
            "--offset",
            offset,
        ];
        parts.push(run_pair(
            format!("pe part {offset}"),
            args.iter().map(|s| s.to_string()).collect(),
            slot,
        ));
    }
    let (a, b) = (&parts[0], &parts[1]);
    run_pair(
        "report merge".into(),
        vec![
            "report".into(),
            "merge".into(),
            b.to_string_lossy().into_owned(),
            a.to_string_lossy().into_owned(),
        ],
        "mg",
    );
    outcome(
        mismatches.is_empty(),
        format!(
            "{runs} commands, each run with --threads 1, --threads 4 and ORDENT_THREADS=2; {} differed or failed{}",
            mismatches.len(),
            if mismatches.is_empty() {
                String::new()
            } else {
                format!(": {mismatches:?}")
            }
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("pattern-count bound, exhaustive", criterion_1),
        ("per-lag factorization", criterion_2),
        ("comparison encoding bijection", criterion_3),
        ("measure preservation", criterion_4),
        ("exact partition entropy rate", criterion_5),
        ("oracle values", criterion_6),
        ("permutation entropy bracket and trend", criterion_7),
        ("Gauss monotony entropy finiteness", criterion_8),
        ("Rokhlin tower suite", criterion_9),
        ("CLI reproducibility", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
