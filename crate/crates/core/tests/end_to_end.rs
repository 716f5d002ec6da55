use sharecut::config::{Budget, EngineConfig, ReuseMode};
use sharecut::executor::execute_batch;
use sharecut::materializer::ViewStore;
use sharecut::oracle::qat_batch;
use sharecut::storage::generate_database;
use sharecut::tuner::{derive_layout, load_artifacts, save_artifacts, tune};
use sharecut::workload::{parse_workload, Workload};

fn workload() -> Workload {
    parse_workload(include_str!("fixtures/small.wl")).unwrap()
}

fn cfg() -> EngineConfig {
    EngineConfig {
        ps_min: 4000,
        sample_rate: 0.2,
        block_min_rows: 128,
        block_max_rows: 2048,
        ..EngineConfig::default()
    }
}

#[test]
fn results_match_oracle_across_modes() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let expected: Vec<_> = w.runtime.iter().map(|b| qat_batch(&db, b)).collect();
    for budget in [0.0, 0.3, 1.0] {
        let tuned = tune(&db, &w.tuning, Budget::Fraction(budget), &cfg()).unwrap();
        for reuse in [ReuseMode::Off, ReuseMode::Naive, ReuseMode::Optimized] {
            for skipping in [true, false] {
                for threads in [1, 2] {
                    let c = EngineConfig {
                        reuse,
                        skipping,
                        threads,
                        ..cfg()
                    };
                    for (b, batch) in w.runtime.iter().enumerate() {
                        let out = execute_batch(&tuned.db, &tuned.layout, &tuned.views, batch, &c).unwrap();
                        assert_eq!(
                            out.results, expected[b],
                            "budget {budget} reuse {reuse:?} skipping {skipping} threads {threads} batch {}",
                            batch.name
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn full_budget_on_identical_batch_reads_only_views() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let tuned = tune(&db, &w.tuning, Budget::Fraction(1.0), &cfg()).unwrap();
    assert!(!tuned.views.is_empty());
    let out = execute_batch(&tuned.db, &tuned.layout, &tuned.views, &w.runtime[0], &cfg()).unwrap();
    assert_eq!(out.metrics.miss_rate, 0.0, "{:?}", out.metrics);
    assert!(out.metrics.view_rows > 0);
    assert!(out.metrics.views_used > 0);
}

#[test]
fn no_views_means_full_miss() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let tuned = tune(&db, &w.tuning, Budget::Fraction(0.0), &cfg()).unwrap();
    assert!(tuned.views.is_empty());
    let out = execute_batch(&tuned.db, &tuned.layout, &tuned.views, &w.runtime[0], &cfg()).unwrap();
    assert_eq!(out.metrics.view_rows, 0);
    assert!(out.metrics.base_rows > 0);
    assert_eq!(out.metrics.miss_rate, 1.0);
}

#[test]
fn skipping_prunes_blocks_on_selective_batches() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let tuned = tune(&db, &w.tuning, Budget::Fraction(0.0), &cfg()).unwrap();
    let on = execute_batch(&tuned.db, &tuned.layout, &ViewStore::default(), &w.runtime[2], &cfg()).unwrap();
    let off_cfg = EngineConfig {
        skipping: false,
        ..cfg()
    };
    let off = execute_batch(&tuned.db, &tuned.layout, &ViewStore::default(), &w.runtime[2], &off_cfg).unwrap();
    assert_eq!(on.results, off.results);
    assert!(on.metrics.skipped_blocks > 0);
    assert!(on.metrics.base_rows < off.metrics.base_rows);
    assert!(on.metrics.skipped_filters > 0);
    assert_eq!(off.metrics.skipped_filters, 0);
}

#[test]
fn artifacts_round_trip() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let tuned = tune(&db, &w.tuning, Budget::Fraction(0.5), &cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_artifacts(dir.path(), &tuned).unwrap();
    let (tree, views) = load_artifacts(dir.path(), &db.schema).unwrap().unwrap();
    assert_eq!(tree, tuned.layout.tree);
    let (db2, layout2) = derive_layout(&db, tree, &w.tuning, &cfg()).unwrap();
    assert_eq!(db2.fact, tuned.db.fact);
    views.check_alignment(&layout2.partitions).unwrap();
    for batch in &w.runtime {
        let a = execute_batch(&tuned.db, &tuned.layout, &tuned.views, batch, &cfg()).unwrap();
        let b = execute_batch(&db2, &layout2, &views, batch, &cfg()).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.metrics.view_rows, b.metrics.view_rows);
    }
    assert!(dir.path().join("selection.json").exists());
}

#[test]
fn misaligned_views_are_rejected() {
    let w = workload();
    let db = generate_database(&w.schema, 3).unwrap();
    let tuned = tune(&db, &w.tuning, Budget::Fraction(1.0), &cfg()).unwrap();
    let single = EngineConfig {
        partitioning: false,
        ..cfg()
    };
    let other = tune(&db, &w.tuning, Budget::Fraction(0.0), &single).unwrap();
    if other.layout.partitions.len() != tuned.layout.partitions.len()
        || other.layout.partitions[0].len() != tuned.layout.partitions[0].len()
    {
        let err = tuned.views.check_alignment(&other.layout.partitions).unwrap_err();
        assert_eq!(err.exit_code(), 4, "{err}");
        assert!(err.to_string().contains("view 0"), "{err}");
    }
}
