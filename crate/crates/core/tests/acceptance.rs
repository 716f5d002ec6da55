//! Acceptance suite. Prints one PASS/FAIL line per criterion to stderr and
//! fails at the end if any criterion failed. Timing criteria run at 10^6
//! fact rows, so run with `--nocapture` or watch stderr for progress.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharecut::bench::{banded_workload, coverage_bytes, mixed_workload, run_grid, Correlation, Grid, Measurement, Scale, System};
use sharecut::config::{Budget, EngineConfig, ReuseMode};
use sharecut::executor::{execute_batch, reuse_phase, ReuseProblem};
use sharecut::globalplan::build_global_plan;
use sharecut::materializer::{build_instance, solve_gr, solve_isk, CutInstance, CutLimits, CutSpec, IskParams};
use sharecut::oracle::{exhaustive_rewrite_cost, greedy_factor, optimal_selection, qat_batch};
use sharecut::queryset::{words_for, QuerySet};
use sharecut::storage::generate_database;
use sharecut::tuner::tune;
use sharecut::workload::{parse_workload, Batch, DimSet, Query};

use common::{eliminated_cost, random_graph, subset};

// Criterion 1 / 9.
const EXACT_ROWS: usize = 20_000;
const EXACT_SELECTIVITIES: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
const EXACT_QUERIES: [usize; 4] = [8, 32, 128, 512];
const EXACT_BUDGETS: [f64; 3] = [0.0, 0.5, 1.0];
const EXACT_SLIDES: [f64; 3] = [0.0, 0.5, 1.0];
const EXACT_MIN_CONFIGS: usize = 50;
const EXACT_MAX_SECS: f64 = 600.0;
/// Selectivity at or below which a correlated workload counts as selective.
const SELECTIVE: f64 = 0.05;

// Criteria 2 to 5.
const SUBMOD_TRIPLES: usize = 1000;
const GRAPH_MAX_NODES: usize = 20;
const ENRICH_SELECTIONS: usize = 200;
const REWRITE_PLANS: usize = 500;
const REWRITE_MAX_NODES: usize = 12;
const REWRITE_MAX_SECS: f64 = 120.0;
const GR_INSTANCES: usize = 100;
const GR_MAX_CUTS: usize = 12;
const EPS: f64 = 1e-9;

// Criteria 6 to 8.
const BENCH_ROWS: usize = 1_000_000;
const BENCH_REPS: usize = 5;
/// Required speedup of full reuse over work sharing, after the 20% machine
/// variance allowance on the nominal 1.5×.
const FILTER_SPEEDUP: f64 = 1.5 * 0.8;
const FILTER_MAX_SECS: f64 = 300.0;
/// A timing grid is measured in up to this many full passes. Each cell keeps
/// its minimum over all passes so far, so a slow stretch on a shared machine
/// hits one pass of a cell rather than all of its samples.
const TIMING_PASSES: usize = 3;
const MISS_BASELINE_TOL: f64 = 0.25;
const COVERAGE_RATIO: f64 = 0.6;

type Outcome = Result<String, String>;

fn report(n: usize, title: &str, started: Instant, outcome: std::thread::Result<Outcome>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(p) => (false, format!("panicked: {}", panic_msg(p.as_ref()))),
    };
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "criterion {n} {title}: {verdict} ({secs:.1}s) {detail}");
    ok
}

fn panic_msg(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panic".into())
}

fn bench_cfg() -> EngineConfig {
    EngineConfig {
        ps_min: BENCH_ROWS / 50,
        sample_rate: 0.05,
        ..EngineConfig::default()
    }
}

fn exact_cfg() -> EngineConfig {
    EngineConfig {
        ps_min: 2000,
        sample_rate: 0.2,
        block_min_rows: 64,
        block_max_rows: 1024,
        ..EngineConfig::default()
    }
}

#[derive(Default)]
struct ExactStats {
    configs: usize,
    mismatches: Vec<String>,
    skip_mismatches: Vec<String>,
    selective_without_skips: Vec<String>,
    selective_checked: usize,
    min_miss: f64,
    max_miss: f64,
    secs: f64,
}

/// Runs the exactness matrix once; criteria 1 and 9 both read from it.
fn exactness_matrix() -> ExactStats {
    let started = Instant::now();
    let mut st = ExactStats {
        min_miss: f64::INFINITY,
        max_miss: f64::NEG_INFINITY,
        ..ExactStats::default()
    };
    let corrs = [Correlation::Correlated, Correlation::Semi, Correlation::Uncorrelated];
    let first = parse_workload(&mixed_workload(EXACT_ROWS, corrs[0], 0.1, 8, 0.0, 1)).unwrap();
    let raw = generate_database(&first.schema, 5).unwrap();
    let mut k = 0usize;
    for corr in corrs {
        for sel in EXACT_SELECTIVITIES {
            for i in 0..3 {
                let queries = EXACT_QUERIES[k % EXACT_QUERIES.len()];
                let budget = EXACT_BUDGETS[(k / 2) % EXACT_BUDGETS.len()];
                let slide = EXACT_SLIDES[(i + k) % EXACT_SLIDES.len()];
                let seed = 100 + k as u64;
                k += 1;
                let label = format!("{corr:?} sel={sel} q={queries} budget={budget} slide={slide}");
                let w = parse_workload(&mixed_workload(EXACT_ROWS, corr, sel, queries, slide, seed)).unwrap();
                let batch = &w.runtime[0];
                let expected = qat_batch(&raw, batch);
                let tuned = tune(&raw, &w.tuning, Budget::Fraction(budget), &exact_cfg()).unwrap();
                let mut skipped_on = 0;
                for reuse in [ReuseMode::Off, ReuseMode::Naive, ReuseMode::Optimized] {
                    let mut by_skip = Vec::new();
                    for skipping in [true, false] {
                        let c = EngineConfig {
                            reuse,
                            skipping,
                            threads: 1,
                            ..exact_cfg()
                        };
                        let out = execute_batch(&tuned.db, &tuned.layout, &tuned.views, batch, &c).unwrap();
                        if out.results != expected {
                            st.mismatches.push(format!("{label} reuse={reuse:?} skipping={skipping}"));
                        }
                        if skipping && reuse == ReuseMode::Off {
                            skipped_on = out.metrics.skipped_blocks;
                        }
                        if reuse == ReuseMode::Optimized && skipping {
                            st.min_miss = st.min_miss.min(out.metrics.miss_rate);
                            st.max_miss = st.max_miss.max(out.metrics.miss_rate);
                        }
                        by_skip.push(out.results);
                    }
                    if by_skip[0] != by_skip[1] {
                        st.skip_mismatches.push(format!("{label} reuse={reuse:?}"));
                    }
                }
                let par = EngineConfig {
                    threads: 2,
                    ..exact_cfg()
                };
                let out = execute_batch(&tuned.db, &tuned.layout, &tuned.views, batch, &par).unwrap();
                if out.results != expected {
                    st.mismatches.push(format!("{label} threads=2"));
                }
                if corr == Correlation::Correlated && sel <= SELECTIVE {
                    st.selective_checked += 1;
                    if skipped_on == 0 {
                        st.selective_without_skips.push(label);
                    }
                }
                st.configs += 1;
            }
        }
    }
    st.secs = started.elapsed().as_secs_f64();
    st
}

fn criterion_1(st: &ExactStats) -> Outcome {
    let detail = format!(
        "{} configs, {} mismatches, measured miss rate {:.2}..{:.2}, {:.0}s",
        st.configs,
        st.mismatches.len(),
        st.min_miss,
        st.max_miss,
        st.secs
    );
    if st.configs < EXACT_MIN_CONFIGS || !st.mismatches.is_empty() || st.secs > EXACT_MAX_SECS {
        return Err(format!("{detail}; first: {:?}", st.mismatches.first()));
    }
    Ok(detail)
}

fn criterion_9(st: &ExactStats) -> Outcome {
    let detail = format!(
        "{} skip on/off differences over {} configs; {}/{} correlated selective configs skipped blocks",
        st.skip_mismatches.len(),
        st.configs,
        st.selective_checked - st.selective_without_skips.len(),
        st.selective_checked
    );
    if !st.skip_mismatches.is_empty() || !st.selective_without_skips.is_empty() || st.selective_checked == 0 {
        return Err(format!(
            "{detail}; {:?} {:?}",
            st.skip_mismatches.first(),
            st.selective_without_skips.first()
        ));
    }
    Ok(detail)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut triples, mut violations) = (0, 0);
    while triples < SUBMOD_TRIPLES {
        let g = random_graph(&mut rng, GRAPH_MAX_NODES);
        let inst = build_instance(&g, CutLimits::NONE).instance;
        let n = inst.cuts.len();
        for _ in 0..8 {
            let big = subset(&mut rng, n, 0.5);
            let small: Vec<usize> = big.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            let outside: Vec<usize> = (0..n).filter(|c| !big.contains(c)).collect();
            if outside.is_empty() {
                continue;
            }
            let c = outside[rng.random_range(0..outside.len())];
            let plus = |s: &[usize]| [s, &[c]].concat();
            let gains = |f: &dyn Fn(&[usize]) -> f64| (f(&plus(&small)) - f(&small), f(&plus(&big)) - f(&big));
            let (rs, rb) = gains(&|s| inst.reduction(s));
            let (bs, bb) = gains(&|s| inst.budget(s));
            if rs < rb - EPS || bs < bb - EPS {
                violations += 1;
            }
            triples += 1;
        }
    }
    let detail = format!("{triples} triples, {violations} violations");
    if violations > 0 {
        Err(detail)
    } else {
        Ok(detail)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    for i in 0..ENRICH_SELECTIONS {
        let g = random_graph(&mut rng, GRAPH_MAX_NODES);
        let inst = build_instance(&g, CutLimits::NONE).instance;
        let s = subset(&mut rng, inst.cuts.len(), 0.3);
        let e = inst.enrichment(&s);
        let ok = inst.budget(&e) == inst.budget(&s)
            && inst.reduction(&e) >= inst.reduction(&s)
            && eliminated_cost(&g, &inst, &s) == inst.reduction(&e);
        if !ok {
            bad.push(i);
        }
    }
    let detail = format!("{ENRICH_SELECTIONS} selections, {} violations", bad.len());
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {bad:?}"))
    }
}

fn random_forest(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = rng.random_range(1..=REWRITE_MAX_NODES);
    let mut succ = vec![Vec::new(); n];
    for v in 1..n {
        if rng.random_bool(0.9) {
            succ[rng.random_range(0..v)].push(v);
        }
    }
    succ
}

fn random_plan(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    loop {
        let nq = rng.random_range(1..=4);
        let queries: Vec<Query> = (0..nq)
            .map(|i| Query {
                name: format!("q{i}"),
                joins: DimSet(rng.random_range(1u64..16)),
                filters: Vec::new(),
                sum: 0,
                group_by: None,
            })
            .collect();
        let plan = build_global_plan(&Batch::new("p", queries), &QuerySet::full(words_for(nq), nq));
        if plan.len() <= REWRITE_MAX_NODES {
            return plan.nodes.iter().map(|n| n.successors.clone()).collect();
        }
    }
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = Vec::new();
    for i in 0..REWRITE_PLANS {
        let successors = if i % 2 == 0 { random_forest(&mut rng) } else { random_plan(&mut rng) };
        let n = successors.len();
        let p = ReuseProblem {
            successors,
            cost: (0..n).map(|_| rng.random_range(0..20) as f64).collect(),
            materialized: (0..n).map(|_| rng.random_bool(0.5)).collect(),
            overhead: (0..n).map(|_| rng.random_range(0..30) as f64).collect(),
        };
        if reuse_phase(&p, false).cost != exhaustive_rewrite_cost(&p) {
            bad.push(i);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("{REWRITE_PLANS} plans, {} mismatches", bad.len());
    if !bad.is_empty() || secs > REWRITE_MAX_SECS {
        return Err(format!("{detail}: {bad:?}"));
    }
    Ok(detail)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut checked, mut worst) = (0, f64::INFINITY);
    let mut bad = Vec::new();
    while checked < GR_INSTANCES {
        let g = random_graph(&mut rng, GRAPH_MAX_NODES);
        let inst = build_instance(&g, CutLimits::NONE).instance;
        if inst.cuts.is_empty() || inst.cuts.len() > GR_MAX_CUTS {
            continue;
        }
        let all: Vec<usize> = (0..inst.cuts.len()).collect();
        let budget = (rng.random_range(0.0..1.0) * inst.budget(&all)).round();
        let (opt, _) = optimal_selection(&inst, budget);
        let gr = solve_gr(&inst, budget);
        let bound = greedy_factor(&inst, budget) * opt;
        if gr.budget > budget + EPS || gr.reduction < bound - EPS {
            bad.push(checked);
        }
        if opt > 0.0 {
            worst = worst.min(gr.reduction / opt);
        }
        checked += 1;
    }
    // Two cheap cuts that together beat the one expensive cut filling the budget.
    let synergy = CutInstance {
        node_cost: vec![20.0, 15.0, 15.0],
        elem_budget: vec![12.0, 6.0, 6.0],
        cuts: (0..3).map(|v| CutSpec { domain: vec![v], bc: vec![v] }).collect(),
    };
    let gr = solve_gr(&synergy, 12.0).reduction;
    let isk = solve_isk(&synergy, 12.0, IskParams::default()).reduction;
    let detail = format!(
        "{checked} instances, {} below bound, worst Gr/OPT {worst:.3}; synergy ISK {isk} vs Gr {gr}",
        bad.len()
    );
    if !bad.is_empty() || isk < gr {
        return Err(detail);
    }
    Ok(detail)
}

fn walls(rows: &[Measurement], system: System) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|m| m.system == system)
        .map(|m| (m.param, m.min_wall_ns as f64 / 1e6))
        .collect()
}

fn fmt_ms(v: &[(f64, f64)]) -> String {
    v.iter().map(|(_, t)| format!("{t:.0}")).collect::<Vec<_>>().join("/")
}

fn filter_trend(rows: &[Measurement]) -> Outcome {
    let naive = walls(rows, System::Naive);
    let sharing = walls(rows, System::Sharing);
    let full = walls(rows, System::Full);
    let increasing = naive.windows(2).all(|w| w[1].1 > w[0].1);
    let last = naive.len() - 1;
    let crosses = naive[last].1 > sharing[last].1;
    let speedups: Vec<f64> = sharing.iter().zip(&full).map(|(s, f)| s.1 / f.1).collect();
    let min_speedup = speedups.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!(
        "naive ms {} sharing ms {} full ms {}; min speedup {min_speedup:.1}x",
        fmt_ms(&naive),
        fmt_ms(&sharing),
        fmt_ms(&full)
    );
    if increasing && crosses && min_speedup >= FILTER_SPEEDUP {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; naive increasing={increasing} naive>sharing at 8={crosses}"
        ))
    }
}

fn timed_passes(grid: Grid, cfg: &EngineConfig, check: impl Fn(&[Measurement]) -> Outcome) -> Outcome {
    let mut best: Vec<Measurement> = Vec::new();
    let mut last = Err(String::new());
    for pass in 1..=TIMING_PASSES {
        let rows = run_grid(grid, scale(), cfg).map_err(|e| e.to_string())?;
        if best.is_empty() {
            best = rows;
        } else {
            for (b, r) in best.iter_mut().zip(rows) {
                assert_eq!((b.param, b.system), (r.param, r.system));
                b.min_wall_ns = b.min_wall_ns.min(r.min_wall_ns);
            }
        }
        last = check(&best).map(|d| format!("{d} (passes {pass})"));
        if last.is_ok() {
            break;
        }
    }
    last
}

fn scale() -> Scale {
    Scale {
        rows: BENCH_ROWS,
        reps: BENCH_REPS,
        ..Scale::default()
    }
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let out = timed_passes(Grid::Filters, &EngineConfig::default(), filter_trend);
    if started.elapsed().as_secs_f64() > FILTER_MAX_SECS {
        return Err(format!("over time budget; {}", out.unwrap_or_else(|e| e)));
    }
    out
}

fn criterion_7() -> Outcome {
    timed_passes(Grid::Miss, &bench_cfg(), |rows| {
        let full = walls(rows, System::Full);
        let sharing = walls(rows, System::Sharing);
        let monotone = full.windows(2).all(|w| w[1].1 >= w[0].1);
        let baseline = sharing.last().expect("miss grid has cells").1;
        let at_full_miss = full.last().expect("miss grid has cells").1;
        let gap = (at_full_miss - baseline).abs() / baseline;
        let detail = format!(
            "full ms {} at miss 0/25/50/75/100%; 100% point {gap:.2} from no-view baseline {baseline:.0} ms",
            fmt_ms(&full)
        );
        if monotone && gap <= MISS_BASELINE_TOL {
            Ok(detail)
        } else {
            Err(format!("{detail}; monotone={monotone}"))
        }
    })
}

fn criterion_8() -> Outcome {
    let w = parse_workload(&banded_workload(BENCH_ROWS, 16, 1)).map_err(|e| e.to_string())?;
    let db = generate_database(&w.schema, 1).map_err(|e| e.to_string())?;
    let cfg = bench_cfg();
    let parted = coverage_bytes(&db, &w.tuning, &cfg).map_err(|e| e.to_string())?;
    let single = coverage_bytes(
        &db,
        &w.tuning,
        &EngineConfig {
            partitioning: false,
            ..cfg
        },
    )
    .map_err(|e| e.to_string())?;
    let ratio = parted / single;
    let detail = format!("partitioned {parted:.0} B vs single {single:.0} B, ratio {ratio:.3}");
    if ratio <= COVERAGE_RATIO {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[test]
fn acceptance() {
    let mut passed = Vec::new();
    let mut run = |n: usize, title: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        passed.push((n, report(n, title, t, catch_unwind(AssertUnwindSafe(f)))));
    };
    let exact = catch_unwind(exactness_matrix).map_err(|p| panic_msg(p.as_ref()));
    let from_matrix = |f: fn(&ExactStats) -> Outcome| match &exact {
        Ok(st) => f(st),
        Err(m) => Err(format!("matrix panicked: {m}")),
    };
    run(1, "exactness", &|| from_matrix(criterion_1));
    run(2, "submodularity", &criterion_2);
    run(3, "enrichment", &criterion_3);
    run(4, "reuse optimality", &criterion_4);
    run(5, "greedy bound", &criterion_5);
    run(6, "filter trend", &criterion_6);
    run(7, "miss degradation", &criterion_7);
    run(8, "partitioning budget", &criterion_8);
    run(9, "skipping soundness", &|| from_matrix(criterion_9));
    let failed: Vec<usize> = passed.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
