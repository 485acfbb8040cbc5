//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::sync::Arc;
use std::time::Instant;

use memetune::bench::{self, BenchmarkSpec, DataSource, ReportFormat, BANANA_NOISE};
use memetune::cv::{make_folds, CvObjective};
use memetune::data::{gen_banana, Dataset};
use memetune::memetic::{grid_search, run, Algorithm, RunConfig};
use memetune::objective::{sphere, Counting};
use memetune::pattern::{refine, PatternConfig};
use memetune::pso::{minimize, PsoConfig};
use memetune::selection::{select_probabilistic, selection_probabilities};
use memetune::svm::{dual_objective, smo_train, Kernel, SmoConfig};
use memetune::{Position, SearchSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn grid_cardinality() -> Outcome {
    let space = SearchSpace::svm_default();
    let mut f = Counting::new(sphere);
    let direct = grid_search(&space, 0.5, &mut f).map_err(|e| e.to_string())?;
    let mut g = Counting::new(|p: &Position| (p.coords()[0] - 1.3).abs() + p.coords()[1].abs());
    let via_run = run(&RunConfig::new(Algorithm::GridSearch, 0), &mut g).map_err(|e| e.to_string())?;
    check(
        direct.evaluations == 1681 && f.calls() == 1681 && via_run.evaluations == 1681 && g.calls() == 1681,
        format!(
            "grid step 0.5: {} reported / {} counted; via run: {} / {}",
            direct.evaluations,
            f.calls(),
            via_run.evaluations,
            g.calls()
        ),
    )
}

fn budget_compliance() -> Outcome {
    let data = Arc::new(gen_banana(60, BANANA_NOISE, 17).map_err(|e| e.to_string())?);
    let mut worst = 0u64;
    let mut runs = 0;
    for a in [Algorithm::Ma1, Algorithm::Ma2, Algorithm::Ma3, Algorithm::Ma4] {
        for seed in 0..30u64 {
            let cfg = RunConfig::new(a, seed);
            let cv = CvObjective::stratified(data.clone(), 5, seed, SmoConfig::default()).map_err(|e| e.to_string())?;
            let mut counted = Counting::new(cv);
            let r = run(&cfg, &mut counted).map_err(|e| e.to_string())?;
            let inner = counted.calls();
            let cv_count = counted.into_inner().evaluations();
            if r.evaluations != inner || inner != cv_count || r.evaluations > 1500 {
                return Err(format!(
                    "{a} seed {seed}: reported {} counted {inner} objective {cv_count}",
                    r.evaluations
                ));
            }
            worst = worst.max(r.evaluations);
            runs += 1;

            // an objective that improves on every call never stalls, so the
            // budget is what stops the run
            let mut calls = 0u64;
            let mut improving = Counting::new(|_: &Position| {
                calls += 1;
                1.0 / calls as f64
            });
            let r = run(&cfg, &mut improving).map_err(|e| e.to_string())?;
            if r.evaluations != 1500 || improving.calls() != 1500 {
                return Err(format!(
                    "{a} seed {seed}: improving objective used {} (counted {})",
                    r.evaluations,
                    improving.calls()
                ));
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} MA runs, max {worst} evaluations on CV, exactly 1500 when never stalling"))
}

// ---- quadratic-program oracle for the SVM dual ----------------------------

fn kernel_value(kind: &Kernel, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        Kernel::Rbf { gamma } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
        _ => unreachable!("oracle instances use linear and rbf kernels"),
    }
}

/// Euclidean projection onto `{0 <= a <= c, y.a = 0}`: the solution is
/// `clip(v - lambda y)` for the root `lambda` of a monotone function.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> (Vec<f64>, f64) {
        let a: Vec<f64> = v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect();
        let s = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        (a, s)
    };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    while hi - lo > 1e-15 * span {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Maximum of `sum(a) - a^T Q a / 2` over the feasible set, by accelerated
/// projected gradient with adaptive restart.
fn qp_oracle(q: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let objective = |a: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += a[i] * q[i][j] * a[j];
            }
        }
        0.5 * quad - a.iter().sum::<f64>()
    };
    // Lipschitz constant from power iteration, padded
    let mut v = vec![1.0; n];
    let mut lmax = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lmax = norm;
        v = w.iter().map(|x| x / norm).collect();
    }
    let step = 1.0 / (lmax * 1.05 + 1e-12);

    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut fx = objective(&x);
    for _ in 0..100_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i][j] * z[j]).sum::<f64>() - 1.0).collect();
        let target: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - step * gi).collect();
        let x_new = project(&target, y, c);
        let f_new = objective(&x_new);
        if f_new > fx {
            // restart momentum
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let moved: f64 = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = x_new
            .iter()
            .zip(&x)
            .map(|(xn, xo)| xn + (t - 1.0) / t_new * (xn - xo))
            .collect();
        x = x_new;
        fx = f_new;
        t = t_new;
        if moved < 1e-12 {
            break;
        }
    }
    -fx
}

/// Largest violation of the per-point optimality conditions, computed from
/// the multipliers and bias alone.
fn kkt_violation(alphas: &[f64], bias: f64, c: f64, kind: &Kernel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = y.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| alphas[j] * y[j] * kernel_value(kind, &x[j], &x[i])).sum::<f64>() + bias;
        let yf = y[i] * f;
        let v = if alphas[i] == 0.0 {
            (1.0 - yf).max(0.0)
        } else if alphas[i] == c {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn smo_oracle_equivalence() -> Outcome {
    let cs = [0.1, 1.0, 10.0];
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for instance in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + instance);
        let n = rng.random_range(2..=12usize);
        let d = rng.random_range(1..=3usize);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = cs[rng.random_range(0..3)];
        let kernel = if instance % 2 == 0 {
            Kernel::Linear
        } else {
            Kernel::Rbf {
                gamma: 2f64.powf(rng.random_range(-2.0..2.0)),
            }
        };
        let data = Dataset::from_rows("qp", x.clone(), y.clone()).map_err(|e| e.to_string())?;
        let model = smo_train(&data, c, kernel, &SmoConfig::default()).map_err(|e| e.to_string())?;

        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * kernel_value(&kernel, &x[i], &x[j])).collect())
            .collect();
        let optimum = qp_oracle(&q, &y, c);
        let smo = dual_objective(&model, &data);
        let gap = (smo - optimum).abs() / (1.0 + optimum.abs());
        let kkt = kkt_violation(&model.alphas, model.bias, c, &kernel, &x, &y);
        let in_box = model.alphas.iter().all(|&a| (0.0..=c).contains(&a));
        let equality: f64 = model.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        if !(model.converged && in_box && equality.abs() <= 1e-9 * c * n as f64) {
            return Err(format!(
                "instance {instance}: converged {} in_box {in_box} equality {equality:e}",
                model.converged
            ));
        }
        if gap > 1e-4 || kkt > 1e-3 {
            return Err(format!(
                "instance {instance} (n={n}, C={c}, {kernel:?}): smo {smo} oracle {optimum} gap {gap:e} kkt {kkt:e}"
            ));
        }
        worst_gap = worst_gap.max(gap);
        worst_kkt = worst_kkt.max(kkt);
    }
    Ok(format!(
        "100 instances; worst relative objective gap {worst_gap:.2e} (limit 1e-4), worst KKT violation {worst_kkt:.2e} (limit 1e-3)"
    ))
}

fn pattern_search_trace() -> Outcome {
    let space = SearchSpace::svm_default();
    let config = PatternConfig::with_initial_step(1.0);
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut f = |p: &Position| {
        seen.push((p.coords()[0], p.coords()[1]));
        sphere(p)
    };
    let r = refine(&[1.0, 0.0].into(), 1.0, &mut f, &config, &space, usize::MAX);

    // +x, +y, -x, -y around (1,0) at step 1, moving to the origin; then four
    // failing polls around the origin at steps 1, 1/2, 1/4, 1/8
    let mut expected = vec![(2.0, 0.0), (1.0, 1.0), (0.0, 0.0), (1.0, -1.0)];
    for s in [1.0, 0.5, 0.25, 0.125] {
        expected.extend([(s, 0.0), (0.0, s), (-s, 0.0), (0.0, -s)]);
    }
    if seen != expected || r.point.coords() != [0.0, 0.0] || r.fitness != 0.0 {
        return Err(format!("trace {seen:?} -> {:?} {}", r.point, r.fitness));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..1000 {
        let center: Vec<f64> = (0..2).map(|_| rng.random_range(-12.0..12.0)).collect();
        let scale: Vec<f64> = (0..2).map(|_| rng.random_range(0.1..5.0)).collect();
        let wiggle = rng.random_range(0.0..10.0);
        let obj = |p: &Position| -> f64 {
            p.coords()
                .iter()
                .enumerate()
                .map(|(d, x)| {
                    let u = x - center[d];
                    scale[d] * u * u + wiggle * (1.0 - (2.0 * std::f64::consts::PI * u).cos())
                })
                .sum()
        };
        let start = Position::new((0..2).map(|_| rng.random_range(-10.0..=10.0)).collect());
        let f0 = obj(&start);
        let step = rng.random_range(0.1..3.0);
        let budget = rng.random_range(1..200usize);
        let mut g = obj;
        let r = refine(&start, f0, &mut g, &PatternConfig::with_initial_step(step), &space, budget);
        if r.fitness > f0 || obj(&r.point) != r.fitness || !space.contains(&r.point) {
            return Err(format!("trial {trial}: start {f0} result {} at {:?}", r.fitness, r.point));
        }
    }
    Ok(format!(
        "(1,0) -> (0,0) with fitness 0 over the exact {}-point trace; 1000 random refinements never worsened",
        seen.len()
    ))
}

fn selection_law() -> Outcome {
    let p = selection_probabilities(&[0.1, 0.2, 0.3]).map_err(|e| e.to_string())?;
    let exact = [2.0 / 3.0, 1.0 / 3.0, 0.0];
    if p.iter().zip(&exact).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(format!("probabilities {p:?}"));
    }

    // far-apart individuals: no crowding interaction, each is selected with
    // its own probability
    let positions: Vec<Position> = vec![[0.0, 0.0].into(), [5.0, 0.0].into(), [10.0, 0.0].into()];
    let fitnesses = [0.1, 0.2, 0.3];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut hits = [0usize; 3];
    let trials = 10_000;
    for _ in 0..trials {
        let out = select_probabilistic(&positions, &fitnesses, 2.0, &mut rng).map_err(|e| e.to_string())?;
        for i in out.selected {
            hits[i] += 1;
        }
    }
    let freq: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    if freq.iter().zip(&exact).any(|(a, b)| (a - b).abs() > 0.02) {
        return Err(format!("frequencies {freq:?}"));
    }

    let mut min_pair = f64::INFINITY;
    for _ in 0..2000 {
        let n = rng.random_range(2..30);
        let pos: Vec<Position> = (0..n)
            .map(|_| Position::new(vec![rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)]))
            .collect();
        let fit: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let out = select_probabilistic(&pos, &fit, 2.0, &mut rng).map_err(|e| e.to_string())?;
        for (a, &i) in out.selected.iter().enumerate() {
            for &j in &out.selected[a + 1..] {
                let d = pos[i].distance(&pos[j]);
                min_pair = min_pair.min(d);
                if d <= 2.0 {
                    return Err(format!("selected {i} and {j} at distance {d}"));
                }
            }
        }
    }
    Ok(format!(
        "p = {p:.6?}; frequencies {freq:.4?} over {trials} trials; min selected pair distance {min_pair:.3} > 2"
    ))
}

fn pso_sphere() -> Outcome {
    let space = SearchSpace::svm_default();
    let cfg = PsoConfig::default();
    let mut hits = 0;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let s = minimize(&space, &cfg, &mut ChaCha8Rng::seed_from_u64(seed), sphere);
        if s.gbest_fitness <= 1e-3 {
            hits += 1;
        }
        worst = worst.max(s.gbest_fitness);
    }
    check(hits >= 95, format!("{hits}/100 seeds reach gbest <= 1e-3 (worst {worst:.2e})"))
}

fn experiment_reproduction() -> Outcome {
    let source = DataSource::Banana {
        n_train: 400,
        n_test: 2000,
        noise: BANANA_NOISE,
        seed: 2024,
    };
    let spec = BenchmarkSpec::new(
        source,
        vec![Algorithm::Pso, Algorithm::Ma4, Algorithm::GridSearch],
        (0..10).collect(),
    );
    let report = bench::run_benchmark(&spec).map_err(|e| e.to_string())?;
    if !report.failures.is_empty() {
        return Err(format!("failed cells: {:?}", report.failures));
    }
    let agg = |a| report.aggregate(a).cloned().ok_or(format!("no rows for {a}"));
    let (pso, ma4, gs) = (agg(Algorithm::Pso)?, agg(Algorithm::Ma4)?, agg(Algorithm::GridSearch)?);
    let calibrated = (0.09..=0.14).contains(&pso.mean_test_error);
    let vs_pso = ma4.mean_test_error <= pso.mean_test_error + 0.005;
    let vs_gs = ma4.mean_test_error <= gs.mean_test_error + 0.005;
    let cheaper = ma4.mean_evaluations < 1681.0;
    check(
        calibrated && vs_pso && vs_gs && cheaper && pso.runs == 10 && ma4.runs == 10 && gs.runs == 10,
        format!(
            "test error PSO {} MA4 {} GS {} (%); #eva PSO {:.1} MA4 {:.1} GS {:.1}",
            bench::percent(pso.mean_test_error, pso.std_test_error),
            bench::percent(ma4.mean_test_error, ma4.std_test_error),
            bench::percent(gs.mean_test_error, gs.std_test_error),
            pso.mean_evaluations,
            ma4.mean_evaluations,
            gs.mean_evaluations
        ),
    )
}

fn json_lines_without_wall_time(report: &bench::BenchmarkReport) -> Result<Vec<serde_json::Value>, String> {
    let mut buf = Vec::new();
    bench::write_report(report, ReportFormat::JsonLines, &mut buf).map_err(|e| e.to_string())?;
    String::from_utf8(buf)
        .map_err(|e| e.to_string())?
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).map_err(|e| e.to_string())?;
            v.as_object_mut().map(|o| o.remove("wall_ms"));
            Ok(v)
        })
        .collect()
}

fn traces_and_determinism() -> Outcome {
    let data = Arc::new(gen_banana(60, BANANA_NOISE, 5).map_err(|e| e.to_string())?);
    let mut runs = 0;
    for a in Algorithm::ALL {
        for seed in 0..5u64 {
            let cfg = RunConfig::new(a, seed);
            let mut cv = CvObjective::stratified(data.clone(), 5, seed, SmoConfig::default()).map_err(|e| e.to_string())?;
            let r = run(&cfg, &mut cv).map_err(|e| e.to_string())?;
            if r.trace.windows(2).any(|w| w[1].best_fitness > w[0].best_fitness) {
                return Err(format!("{a} seed {seed}: trace increases"));
            }
            if r.trace.last().map(|t| t.best_fitness) != Some(r.best_fitness) {
                return Err(format!("{a} seed {seed}: trace does not end at the best fitness"));
            }
            runs += 1;
        }
    }
    let source = DataSource::Banana {
        n_train: 60,
        n_test: 200,
        noise: BANANA_NOISE,
        seed: 6,
    };
    let spec = BenchmarkSpec::new(source, Algorithm::ALL.to_vec(), vec![3, 8]);
    let first = json_lines_without_wall_time(&bench::run_benchmark(&spec).map_err(|e| e.to_string())?)?;
    let second = json_lines_without_wall_time(&bench::run_benchmark(&spec).map_err(|e| e.to_string())?)?;
    check(
        first == second && first.len() == 12,
        format!("{runs} traces non-increasing; {} json lines identical across two benchmark runs", first.len()),
    )
}

fn cv_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut plans = 0;
    for _ in 0..300 {
        let n_pos = rng.random_range(2..120usize);
        let n_neg = rng.random_range(2..120usize);
        let k = rng.random_range(2..=n_pos.min(n_neg).min(10));
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_pos + n_neg {
            rows.push(vec![i as f64]);
            labels.push(if i < n_pos { 1.0 } else { -1.0 });
        }
        let d = Dataset::from_rows("s", rows, labels).map_err(|e| e.to_string())?;
        let plan = make_folds(&d, k, rng.random()).map_err(|e| e.to_string())?;
        let dev = plan.stratification_deviation(d.labels());
        if dev > 1 {
            return Err(format!("n+={n_pos} n-={n_neg} k={k}: deviation {dev}"));
        }
        plans += 1;
    }

    let data = Arc::new(gen_banana(80, BANANA_NOISE, 9).map_err(|e| e.to_string())?);
    let cv = CvObjective::stratified(data.clone(), 5, 1, SmoConfig::default()).map_err(|e| e.to_string())?;
    let frozen = CvObjective::new(data, cv.folds().clone(), SmoConfig::default()).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        let p = Position::new(vec![rng.random_range(-10.0..=10.0), rng.random_range(-10.0..=10.0)]);
        let a = cv.fitness(&p);
        let b = cv.fitness(&p);
        let c = frozen.fitness(&p);
        if !(0.0..=1.0).contains(&a) || a.to_bits() != b.to_bits() || a.to_bits() != c.to_bits() {
            return Err(format!("{p:?}: {a} {b} {c}"));
        }
    }
    Ok(format!(
        "{plans} fold plans with per-class deviation <= 1; 100 positions scored in [0,1] and bit-identical on repeat"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("grid-search cardinality", grid_cardinality),
        ("budget compliance", budget_compliance),
        ("SMO oracle equivalence", smo_oracle_equivalence),
        ("pattern-search determinism and non-worsening", pattern_search_trace),
        ("selection-probability law", selection_law),
        ("PSO sphere sanity", pso_sphere),
        ("banana benchmark: MA4 vs PSO and GS", experiment_reproduction),
        ("monotone traces and determinism", traces_and_determinism),
        ("CV objective properties", cv_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
