//! Acceptance suite: the eight checks this artifact must pass before a
//! release, one test per criterion. Each test prints a single
//! `criterion N PASS: ...` line with its measured values (visible with
//! `--nocapture`); a failing criterion panics with the offending numbers.
//!
//! The checks are property-based because the full-scale malware dataset
//! cannot ship with the repository: exact combinatorics (1), algebraic metric
//! identities (2), brute-force oracle equivalence over an exhaustive small
//! universe (3), a synthetic benchmark with frozen floors (4), a
//! finite-difference gradient audit (5), byte-level report determinism
//! through the real binary (6), and model persistence round-trips (7).
//! Criterion 8 is the optional real-data track: it is `#[ignore]`d, needs
//! `MALCLASS_REAL_DATA` to point at the labelled CSV, and *reports* accuracy
//! divergence instead of asserting it.
//!
//! Each criterion carries a wall-clock budget, asserted with generous margin
//! on a single-core reference machine; the suite as a whole stays under three
//! minutes.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use malclass_core::classifiers::{
    fit, load_model, predict_labels, save_model, ClassifierKind, ClassifierSpec,
};
use malclass_core::classifiers::logistic::{lr_gradient, lr_loss};
use malclass_core::data::{generate_synthetic, Dataset, Sample, SyntheticSpec, Task};
use malclass_core::evaluation::{
    compute_metrics, cross_validate, sweep, ConfusionMatrix, CvConfig,
};
use malclass_core::preprocess::preprocess;
use malclass_core::schema::{FeatureSchema, LabelTaxonomy};
use malclass_core::selection::{
    score_chi2, score_mi, select_threshold, threshold_count, SelectionMethod,
};

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// A minimal schema of `width` features. Ids follow the mandatory
/// `F<position>` pattern.
fn small_schema(width: usize) -> Arc<FeatureSchema> {
    let features: Vec<String> = (0..width)
        .map(|i| {
            format!(
                r#"{{"id": "F{}", "name": "feat_{}", "group": "Memory"}}"#,
                i + 1,
                i + 1
            )
        })
        .collect();
    Arc::new(FeatureSchema::from_json(&format!("[{}]", features.join(","))).unwrap())
}

/// A taxonomy of `n` categories, one family each; family index == category
/// index, so synthetic samples can use the same number for both labels.
fn small_taxonomy(n: usize) -> Arc<LabelTaxonomy> {
    let categories: Vec<String> = (0..n).map(|i| format!("\"C{i}\"")).collect();
    let families: Vec<String> = (0..n)
        .map(|i| format!(r#"{{"name": "c{i}_fam", "category": "C{i}"}}"#))
        .collect();
    let doc = format!(
        r#"{{"categories": [{}], "families": [{}]}}"#,
        categories.join(","),
        families.join(",")
    );
    Arc::new(LabelTaxonomy::from_json(&doc).unwrap())
}

// ---------------------------------------------------------------------------
// Criterion 1: the top-percent threshold rule at the canonical feature count
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_threshold_rule() {
    let t60 = threshold_count(60, 141).unwrap();
    let t80 = threshold_count(80, 141).unwrap();
    assert_eq!(t60, 85, "60% of 141 features must keep exactly 85");
    assert_eq!(t80, 113, "80% of 141 features must keep exactly 113");
    println!("criterion 1 PASS: threshold_count(60,141)={t60}, threshold_count(80,141)={t80}");
}

// ---------------------------------------------------------------------------
// Criterion 2: macro recall and macro FNR are complements on any matrix
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_metric_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = rng.random_range(2..=14usize);
        let mut cm = ConfusionMatrix::new((0..c).map(|i| format!("class_{i}")).collect());
        for t in 0..c {
            for p in 0..c {
                cm.counts[t][p] = rng.random_range(0..30);
            }
        }
        if cm.total() == 0 {
            cm.counts[0][0] = 1;
        }
        let m = compute_metrics(&cm).unwrap();
        let gap = (m.macro_recall + m.macro_fnr - 1.0).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 1e-12,
            "macro recall {} + macro FNR {} differs from 1 by {gap:e}",
            m.macro_recall,
            m.macro_fnr
        );
        for pc in &m.per_class {
            match (pc.recall, pc.fnr) {
                (Some(r), Some(f)) => assert!(
                    f == 1.0 - r,
                    "class {}: FNR {f} is not exactly 1 - recall {r}",
                    pc.class
                ),
                (None, None) => {}
                other => panic!("class {}: recall/FNR presence mismatch {other:?}", pc.class),
            }
        }
    }
    // Cross-check against two published rate pairs that must sum to one.
    for (recall, fnr) in [(0.6646f64, 0.3354f64), (0.3627, 0.6373)] {
        assert!(
            (recall + fnr - 1.0).abs() <= 1e-12,
            "{recall} + {fnr} is not 1 within 1e-12"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1s");
    println!(
        "criterion 2 PASS: 1000 random matrices, worst complement gap {worst:e}, {:.3}s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: scoring functions vs brute-force contingency oracles over the
// exhaustive universe of datasets with n <= 6 samples, 2 classes, values in
// {0,1,2}
// ---------------------------------------------------------------------------

/// Textbook chi-squared over the 2-class contingency of per-class value sums.
/// Both classes are present by construction, so expected counts are positive
/// whenever the total is.
fn chi2_oracle(values: &[f64], labels: &[usize]) -> f64 {
    let n = values.len() as f64;
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = n - n1;
    let mut observed = [0.0f64; 2];
    for (&v, &l) in values.iter().zip(labels) {
        observed[l] += v;
    }
    let total = observed[0] + observed[1];
    if total == 0.0 {
        return 0.0;
    }
    let mut score = 0.0;
    for (obs, count) in observed.iter().zip([n0, n1]) {
        let expected = total * count / n;
        score += (obs - expected) * (obs - expected) / expected;
    }
    score
}

/// Plug-in mutual information treating each distinct raw value as its own
/// symbol. With 10 bins and at most 6 samples, equal-frequency binning puts
/// every distinct value in a distinct bin (blocks at sorted positions
/// i1 < i2 land in bins floor(10*i1/n) < floor(10*i2/n) because 10/n > 1),
/// so the discretized joint distribution equals this symbol-level one.
fn mi_oracle(values: &[f64], labels: &[usize]) -> f64 {
    let n = values.len() as f64;
    let mut symbols: Vec<f64> = values.to_vec();
    symbols.sort_by(f64::total_cmp);
    symbols.dedup();
    let mut joint = vec![[0usize; 2]; symbols.len()];
    for (&v, &l) in values.iter().zip(labels) {
        let s = symbols.iter().position(|&x| x == v).unwrap();
        joint[s][l] += 1;
    }
    let class_totals = [
        labels.iter().filter(|&&l| l == 0).count() as f64,
        labels.iter().filter(|&&l| l == 1).count() as f64,
    ];
    let mut mi = 0.0;
    for row in &joint {
        let row_total = (row[0] + row[1]) as f64;
        for (l, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let p_xy = count as f64 / n;
            mi += p_xy * (p_xy / ((row_total / n) * (class_totals[l] / n))).log2();
        }
    }
    mi
}

#[test]
fn criterion_3_selection_oracles() {
    let start = Instant::now();
    let schema = small_schema(1);
    let taxonomy = small_taxonomy(2);
    let mut datasets = 0usize;
    let mut worst_chi2 = 0.0f64;
    let mut worst_mi = 0.0f64;
    for n in 2..=6usize {
        for value_code in 0..3usize.pow(n as u32) {
            let mut values = Vec::with_capacity(n);
            let mut code = value_code;
            for _ in 0..n {
                values.push((code % 3) as f64);
                code /= 3;
            }
            for label_bits in 1..(1usize << n) - 1 {
                // Skip the all-zero and all-one patterns: both classes must
                // appear for a 2-class dataset.
                let labels: Vec<usize> =
                    (0..n).map(|i| (label_bits >> i) & 1).collect();
                let samples: Vec<Sample> = values
                    .iter()
                    .zip(&labels)
                    .map(|(&v, &l)| Sample {
                        id: None,
                        values: vec![v],
                        category: l,
                        family: l,
                    })
                    .collect();
                let dataset =
                    Dataset::new(Arc::clone(&schema), Arc::clone(&taxonomy), samples).unwrap();

                let got_chi2 = score_chi2(&dataset, Task::Category).unwrap().entries[0].score;
                let want_chi2 = chi2_oracle(&values, &labels);
                let gap = (got_chi2 - want_chi2).abs();
                worst_chi2 = worst_chi2.max(gap);
                assert!(
                    gap <= 1e-9,
                    "chi2 mismatch on values {values:?} labels {labels:?}: got {got_chi2}, want {want_chi2}"
                );

                let got_mi = score_mi(&dataset, Task::Category, 10).unwrap().entries[0].score;
                let want_mi = mi_oracle(&values, &labels);
                let gap = (got_mi - want_mi).abs();
                worst_mi = worst_mi.max(gap);
                assert!(
                    gap <= 1e-9,
                    "MI mismatch on values {values:?} labels {labels:?}: got {got_mi}, want {want_mi}"
                );
                datasets += 1;
            }
        }
    }
    assert_eq!(datasets, 53_802, "exhaustive universe size changed");
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}, budget 30s");
    println!(
        "criterion 3 PASS: {datasets} datasets, worst chi2 gap {worst_chi2:e}, worst MI gap {worst_mi:e}, {:.1}s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: the synthetic benchmark (seed 7, 14 classes, 300 samples/class,
// 141 features of which the first 40 are informative, separation 2.0)
// ---------------------------------------------------------------------------

fn benchmark_spec(samples_per_class: usize) -> SyntheticSpec {
    SyntheticSpec {
        classes: 14,
        samples_per_class,
        informative: (0..40).collect(),
        class_separation: 2.0,
        noise_scale: 1.0,
        seed: 7,
    }
}

#[test]
fn criterion_4_synthetic_benchmark() {
    let start = Instant::now();
    let schema = FeatureSchema::canonical();
    let taxonomy = LabelTaxonomy::canonical();
    let bench = generate_synthetic(
        &benchmark_spec(300),
        Arc::clone(&schema),
        Arc::clone(&taxonomy),
    )
    .unwrap();

    // (a) Random forest with default hyperparameters under 10-fold CV.
    // Reference run froze 1.0000 on this machine; 0.95 is the floor.
    let rf = ClassifierSpec::new(ClassifierKind::Rf, 7);
    let cv = CvConfig {
        repeats: 1,
        ..CvConfig::new(7)
    };
    let report = cross_validate(&bench, Task::Category, &rf, None, &cv).unwrap();
    assert!(
        report.accuracy >= 0.95,
        "RF 10-fold accuracy {:.4} fell below the 0.95 floor",
        report.accuracy
    );

    // (b) MI selection at the 60% threshold keeps at least 36 of the 40
    // informative features (reference run kept all 40).
    let (scaled, _, _) = preprocess(&bench).unwrap();
    let ranking = score_mi(&scaled, Task::Category, 10).unwrap();
    let mask = select_threshold(&ranking, 60).unwrap();
    assert_eq!(mask.ordinals.len(), 85);
    let kept_informative = mask.ordinals.iter().filter(|&&o| o < 40).count();
    assert!(
        kept_informative >= 36,
        "MI at 60% kept only {kept_informative}/40 informative features"
    );

    // (c) The threshold-by-classifier sweep emits the complete 5x4 grid with
    // no errored cells. Run at 40 samples/class: grid shape and cell health
    // do not depend on the sample count, and the full-size grid would not fit
    // the single-core time budget.
    let small = generate_synthetic(
        &benchmark_spec(40),
        Arc::clone(&schema),
        Arc::clone(&taxonomy),
    )
    .unwrap();
    let grid = sweep(&small, Task::Category, SelectionMethod::Mi, 10, &cv).unwrap();
    assert_eq!(grid.thresholds, vec![20, 40, 60, 80, 100]);
    assert_eq!(
        grid.classifiers,
        vec![
            ClassifierKind::Rf,
            ClassifierKind::Knn,
            ClassifierKind::J48,
            ClassifierKind::Nb
        ]
    );
    assert_eq!(grid.cells.len(), 20, "sweep grid must have 5x4 cells");
    for cell in &grid.cells {
        assert!(
            cell.accuracy.is_some() && cell.error.is_none(),
            "cell ({}%, {}) failed: {:?}",
            cell.threshold_percent,
            cell.classifier,
            cell.error
        );
    }
    assert!(grid.best.is_some());

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}, budget 120s");
    println!(
        "criterion 4 PASS: rf_accuracy={:.4}, informative_kept={kept_informative}/40, grid_cells={}, {:.1}s",
        report.accuracy,
        grid.cells.len(),
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: analytic logistic-regression gradient vs central differences
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_lr_gradient_check() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(2..=8usize);
        let d = rng.random_range(1..=4usize);
        let c = rng.random_range(2..=4usize);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let x: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let y: Vec<u32> = (0..n).map(|_| rng.random_range(0..c as u32)).collect();
        let mut weights: Vec<f64> = (0..c * (d + 1))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let l2 = rng.random_range(0.0..0.5);

        let analytic = lr_gradient(&x, &y, c, &weights, l2);
        let h = 1e-5;
        let numeric: Vec<f64> = (0..weights.len())
            .map(|i| {
                let w0 = weights[i];
                weights[i] = w0 + h;
                let up = lr_loss(&x, &y, c, &weights, l2);
                weights[i] = w0 - h;
                let down = lr_loss(&x, &y, c, &weights, l2);
                weights[i] = w0;
                (up - down) / (2.0 * h)
            })
            .collect();

        let diff_norm: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = analytic
            .iter()
            .map(|a| a * a)
            .sum::<f64>()
            .sqrt()
            .max(numeric.iter().map(|b| b * b).sum::<f64>().sqrt())
            .max(1e-12);
        let rel = diff_norm / scale;
        worst = worst.max(rel);
        assert!(
            rel <= 1e-4,
            "case {case} (n={n}, d={d}, c={c}): gradient relative error {rel:e}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}, budget 5s");
    println!(
        "criterion 5 PASS: 100 instances, worst relative error {worst:e}, {:.2}s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: cv and sweep produce byte-identical JSON reports across two
// consecutive runs of the real binary with the same seed
// ---------------------------------------------------------------------------

fn malclass(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_malclass"))
        .args(args)
        .current_dir(dir)
        .env_remove("MALCLASS_OUT_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str], dir: &Path) {
    let out = malclass(args, dir);
    assert!(
        out.status.success(),
        "malclass {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_6_report_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(
        &["synth", "--classes", "5", "--per-class", "24", "--informative", "20",
          "--seed", "3", "--out-dir", "data"],
        dir,
    );
    let data = "data/synthetic.csv";

    let run_cv = |out: &str| {
        run_ok(
            &["cv", "--data", data, "--classifier", "RF", "--param", "trees=25",
              "--method", "chi2", "--threshold", "60", "--k", "4", "--repeats", "2",
              "--seed", "11", "--out-dir", out],
            dir,
        )
    };
    run_cv("cv1");
    run_cv("cv2");
    let cv1 = std::fs::read(dir.join("cv1/cv_report.json")).unwrap();
    let cv2 = std::fs::read(dir.join("cv2/cv_report.json")).unwrap();
    assert!(cv1 == cv2, "cv reports differ between identical runs");

    let run_sweep = |out: &str| {
        run_ok(
            &["sweep", "--data", data, "--method", "mi", "--k", "4", "--repeats", "1",
              "--seed", "11", "--out-dir", out],
            dir,
        )
    };
    run_sweep("sw1");
    run_sweep("sw2");
    let sw1 = std::fs::read(dir.join("sw1/sweep_report.json")).unwrap();
    let sw2 = std::fs::read(dir.join("sw2/sweep_report.json")).unwrap();
    assert!(sw1 == sw2, "sweep reports differ between identical runs");

    println!(
        "criterion 6 PASS: cv report ({} bytes) and sweep report ({} bytes) byte-identical across runs",
        cv1.len(),
        sw1.len()
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: save/load/predict equality for every classifier kind
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_model_round_trip() {
    let start = Instant::now();
    let schema = small_schema(10);
    let taxonomy = small_taxonomy(3);
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (i, &kind) in ClassifierKind::ALL.iter().enumerate() {
        let dataset = generate_synthetic(
            &SyntheticSpec {
                classes: 3,
                samples_per_class: 40,
                informative: (0..5).collect(),
                class_separation: 1.5,
                noise_scale: 1.0,
                seed: 13 + i as u64,
            },
            Arc::clone(&schema),
            Arc::clone(&taxonomy),
        )
        .unwrap();
        let spec = ClassifierSpec::new(kind, 99);
        let model = fit(&spec, &dataset, Task::Category).unwrap();

        let queries: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..10).map(|_| rng.random_range(0.0..1.5)).collect())
            .collect();
        let fingerprint = dataset.schema().fingerprint();
        let direct = predict_labels(&model, &queries, fingerprint).unwrap();

        let path = tmp.path().join(format!("{kind}.json"));
        save_model(&model, &path).unwrap();
        let reloaded = load_model(&path).unwrap();
        let via_disk = predict_labels(&reloaded, &queries, fingerprint).unwrap();
        assert_eq!(
            direct, via_disk,
            "{kind}: predictions changed across save/load"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}, budget 10s");
    println!(
        "criterion 7 PASS: 6 kinds x 1000 queries round-trip exactly, {:.2}s",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: optional real-data track (not run in CI)
// ---------------------------------------------------------------------------

/// Runs only when `MALCLASS_REAL_DATA` names the full labelled CSV (28,380
/// samples). Asserts the ingestion totals; the sweep's best-cell accuracy is
/// compared against the expected reference value but divergence is reported,
/// not asserted, because estimator details (fold seeding, tree internals)
/// legitimately move it by a few points.
#[test]
#[ignore = "needs the real dataset; set MALCLASS_REAL_DATA to the labelled CSV and run with --ignored"]
fn criterion_8_real_data_track() {
    const EXPECTED_SAMPLES: usize = 28_380;
    const EXPECTED_CATEGORIES: usize = 14;
    const EXPECTED_FAMILIES: usize = 180;
    const EXPECTED_BEST_ACCURACY: f64 = 0.9689;
    const ACCURACY_TOLERANCE: f64 = 0.02;

    let Ok(path) = std::env::var("MALCLASS_REAL_DATA") else {
        println!("criterion 8 SKIP: MALCLASS_REAL_DATA is not set");
        return;
    };
    let file = std::fs::File::open(&path).expect("real data CSV opens");
    let column_map = std::env::var("MALCLASS_REAL_DATA_COLUMN_MAP")
        .ok()
        .map(|p| {
            malclass_core::data::ColumnMap::from_json(
                &std::fs::read_to_string(p).expect("column map file opens"),
            )
            .expect("column map parses")
        });
    let dataset = malclass_core::data::ingest_csv(
        std::io::BufReader::new(file),
        FeatureSchema::canonical(),
        LabelTaxonomy::canonical(),
        column_map.as_ref(),
    )
    .expect("real data ingests");

    let report = malclass_core::data::validate_dataset(&dataset);
    assert_eq!(report.samples, EXPECTED_SAMPLES);
    let categories_present = report
        .category_counts
        .iter()
        .filter(|c| c.count > 0)
        .count();
    assert_eq!(categories_present, EXPECTED_CATEGORIES);
    assert_eq!(report.families_present, EXPECTED_FAMILIES);

    let (complete, _) = malclass_core::preprocess::drop_incomplete(&dataset).unwrap();
    let (clean, _) = malclass_core::preprocess::dedupe(&complete).unwrap();
    let cv = CvConfig {
        repeats: 1,
        ..CvConfig::new(7)
    };
    let grid = sweep(&clean, Task::Category, SelectionMethod::Chi2, 10, &cv).unwrap();
    let best = grid.best.expect("sweep produced a best cell");
    let delta = (best.accuracy - EXPECTED_BEST_ACCURACY).abs();
    if best.classifier == ClassifierKind::Rf && delta <= ACCURACY_TOLERANCE {
        println!(
            "criterion 8 PASS: {EXPECTED_SAMPLES} samples / {categories_present} categories / {} families; best {} @ {}% = {:.4} (delta {:.4})",
            report.families_present, best.classifier, best.threshold_percent, best.accuracy, delta
        );
    } else {
        println!(
            "criterion 8 DIVERGENCE (reported, not asserted): best {} @ {}% = {:.4}, expected RF near {:.4} (delta {:.4})",
            best.classifier, best.threshold_percent, best.accuracy, EXPECTED_BEST_ACCURACY, delta
        );
    }
}
