//! Acceptance criteria. Runs with `harness = false` and prints one PASS/FAIL
//! line per criterion; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use defog_core::bulk::{build_grid, ParamGrid};
use defog_core::metrics::{report_from_precomputed, variance, MetricsReport};
use defog_core::pipeline::{run_pipeline_on, RunConfig};
use defog_core::retinex::{gaussian_blur, msr, retinex};
use defog_core::selector::{gate, select_and_rank, GateThresholds, RankKey, RejectReason};
use defog_core::{to_scalar, RgbImage, ScalarField, ScalarMode};

use common::{brute_force_blur, foggy_fixture, random_field};

// Tolerances, fixed here for every criterion.
const RAV_TOL: f64 = 1e-4;
const VVO_TOL: f64 = 0.05;
const AVV_ABS_TOL: f64 = 1e-3;
const AVV_REL_TOL: f64 = 0.02;
const RVV_REL_TOL: f64 = 0.02;
const POP_VAR_TOL: f64 = 1e-4;
const BLUR_TOL: f64 = 1e-6;
const FAST_LIMIT: Duration = Duration::from_secs(1);
const PIPELINE_LIMIT: Duration = Duration::from_secs(60);

/// A column of the reference variance table: stripe variances and total as
/// inputs, then the printed RAV, VVO, AVV and RVV values to reproduce.
struct Column {
    id: &'static str,
    total: f64,
    stripes: [f64; 5],
    rav: [f64; 5],
    vvo: [f64; 5],
    avv: f64,
    rvv: f64,
}

const ORIGINAL: Column = Column {
    id: "original",
    total: 577.0,
    stripes: [9.0, 11.0, 20.0, 58.0, 110.0],
    rav: [0.0156, 0.0191, 0.0347, 0.1005, 0.1906],
    vvo: [1.0; 5],
    avv: 0.0045,
    rvv: 1.0,
};

const VARIANTS: [Column; 5] = [
    Column {
        id: "0_5_0_39_1",
        total: 12470.0,
        stripes: [12772.0, 13180.0, 11841.0, 12386.0, 11621.0],
        rav: [1.0242, 1.0569, 0.9496, 0.9933, 0.9319],
        vvo: [65.6638, 55.4411, 27.3948, 9.8813, 4.8883],
        avv: 0.0021,
        rvv: 0.48,
    },
    Column {
        id: "60_1_0_13_0",
        total: 3395.0,
        stripes: [345.0, 201.0, 533.0, 3434.0, 4322.0],
        rav: [0.1016, 0.0592, 0.1570, 1.0115, 1.2730],
        vvo: [6.5150, 3.1056, 4.5293, 10.0626, 6.6777],
        avv: 0.2656,
        rvv: 59.63,
    },
    Column {
        id: "240_7_1_13_0",
        total: 4502.0,
        stripes: [261.0, 157.0, 371.0, 2621.0, 1285.0],
        rav: [0.0580, 0.0349, 0.0824, 0.5822, 0.2854],
        vvo: [3.7168, 1.8293, 2.3775, 5.7917, 1.4972],
        avv: 0.0429,
        rvv: 9.62,
    },
    Column {
        id: "240_5_2_26_1",
        total: 14850.0,
        stripes: [0.0, 0.0, 783.0, 11654.0, 0.0],
        rav: [0.0, 0.0, 0.0527, 0.7848, 0.0],
        vvo: [0.0, 0.0, 1.5212, 7.8072, 0.0],
        avv: 0.0957,
        rvv: 21.48,
    },
    Column {
        id: "180_1_1_13_1",
        total: 13105.0,
        stripes: [155.0, 0.0, 181.0, 15200.0, 0.0],
        rav: [0.0118, 0.0, 0.0138, 1.1599, 0.0],
        vvo: [0.7583, 0.0, 0.3985, 11.5386, 0.0],
        avv: 0.2129,
        rvv: 47.81,
    },
];

fn table_reports() -> Vec<MetricsReport> {
    VARIANTS
        .iter()
        .map(|c| {
            report_from_precomputed(c.id, &c.stripes, c.total, &ORIGINAL.stripes, ORIGINAL.total)
                .unwrap()
        })
        .collect()
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))?;
    Ok(elapsed)
}

fn golden_table() -> Check {
    let start = Instant::now();
    let mut columns = vec![(&ORIGINAL, report_from_precomputed(
        "original",
        &ORIGINAL.stripes,
        ORIGINAL.total,
        &ORIGINAL.stripes,
        ORIGINAL.total,
    )
    .map_err(|e| e.to_string())?)];
    columns.extend(VARIANTS.iter().zip(table_reports()));

    for (col, r) in &columns {
        for i in 0..5 {
            ensure((r.rav[i] - col.rav[i]).abs() <= RAV_TOL, || {
                format!("{} RAV_{}: {} vs {}", col.id, i + 1, r.rav[i], col.rav[i])
            })?;
            ensure((r.vvo[i] - col.vvo[i]).abs() <= VVO_TOL, || {
                format!("{} VVO_{}: {} vs {}", col.id, i + 1, r.vvo[i], col.vvo[i])
            })?;
        }
        let avv_err = (r.avv - col.avv).abs();
        ensure(avv_err <= AVV_ABS_TOL || avv_err <= AVV_REL_TOL * col.avv, || {
            format!("{} AVV: {} vs {}", col.id, r.avv, col.avv)
        })?;
        ensure((r.rvv - col.rvv).abs() <= RVV_REL_TOL * col.rvv, || {
            format!("{} RVV: {} vs {}", col.id, r.rvv, col.rvv)
        })?;
    }
    let elapsed = within_time(start, FAST_LIMIT)?;
    Ok(format!("6 columns reproduced in {elapsed:?}"))
}

fn gate_reproduction() -> Check {
    let start = Instant::now();
    let th = GateThresholds::new(0.001, 1.0, 1.0).map_err(|e| e.to_string())?;
    let (ranked, verdicts) = select_and_rank(&table_reports(), &th, RankKey::MaxVvo);
    let accepted: BTreeSet<&str> = ranked.ids().into_iter().collect();
    ensure(
        accepted == BTreeSet::from(["60_1_0_13_0", "240_7_1_13_0"]),
        || format!("accepted {accepted:?}"),
    )?;
    let reasons = |id: &str| {
        verdicts
            .iter()
            .find(|v| v.variant_id == id)
            .map(|v| v.reasons.clone())
            .unwrap_or_default()
    };
    for id in ["240_5_2_26_1", "180_1_1_13_1"] {
        ensure(reasons(id) == [RejectReason::SolidArea], || {
            format!("{id}: {:?}", reasons(id))
        })?;
    }
    ensure(
        reasons("0_5_0_39_1") == [RejectReason::FakeDetailEverywhere],
        || format!("0_5_0_39_1: {:?}", reasons("0_5_0_39_1")),
    )?;
    let elapsed = within_time(start, FAST_LIMIT)?;
    Ok(format!("2 accepted, 3 rejected with expected reasons in {elapsed:?}"))
}

fn ranking() -> Check {
    let th = GateThresholds::default();
    let mut detail = Vec::new();
    for (key, expected) in [(RankKey::MaxVvo, [10.0626, 5.7917]), (RankKey::Rvv, [59.63, 9.62])] {
        let (ranked, _) = select_and_rank(&table_reports(), &th, key);
        ensure(ranked.ids() == ["60_1_0_13_0", "240_7_1_13_0"], || {
            format!("{key}: order {:?}", ranked.ids())
        })?;
        let values: Vec<f64> = ranked.entries.iter().map(|e| e.key_value).collect();
        for (v, e) in values.iter().zip(expected) {
            ensure((v - e).abs() <= 0.01 * e, || format!("{key}: {values:?}"))?;
        }
        detail.push(format!("{key} {:.4}>{:.4}", values[0], values[1]));
    }
    Ok(detail.join(", "))
}

fn population_variance() -> Check {
    let ravs = [0.0156, 0.0191, 0.0347, 0.1005, 0.1906];
    let expected = 0.00445;
    let pop = variance(&ravs).map_err(|e| e.to_string())?;
    ensure((pop - expected).abs() <= POP_VAR_TOL, || {
        format!("population variance {pop}")
    })?;
    // the M-1 alternative must not pass the same check
    let sample = pop * 5.0 / 4.0;
    ensure((sample - expected).abs() > POP_VAR_TOL, || {
        format!("sample variance {sample} would also pass")
    })?;
    Ok(format!("population {pop:.5}, sample {sample:.5} rejected"))
}

fn retinex_properties() -> Check {
    let flat = RgbImage::filled(24, 18, [173, 181, 190]).map_err(|e| e.to_string())?;
    let grid = ParamGrid::default();
    let mut tuples = 0;
    for entry in build_grid(&grid).map_err(|e| e.to_string())? {
        if entry.threshold.is_some() {
            continue;
        }
        let out = retinex(&flat, &entry.params).map_err(|e| e.to_string())?;
        ensure(out.pixels().iter().all(|&p| p == [128; 3]), || {
            format!("{} is not uniform 128", entry.id())
        })?;
        tuples += 1;
    }
    ensure(tuples == grid.tuple_count(), || format!("only {tuples} tuples"))?;

    for c in [0.0, 1.0, 37.5, 255.0] {
        let f = ScalarField::constant(13, 11, c);
        let m = msr(&f, &[2.0, 9.5, 120.0]).map_err(|e| e.to_string())?;
        ensure(m.values().iter().all(|&v| v == 0.0), || {
            format!("msr of constant {c} is not zero")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let f = random_field(&mut rng, 16, 16);
        let fast = gaussian_blur(&f, 2.0).map_err(|e| e.to_string())?;
        let slow = brute_force_blur(&f, 2.0);
        let err = fast
            .values()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure(err <= BLUR_TOL, || format!("trial {trial}: blur error {err}"))?;
        worst = worst.max(err);
    }
    Ok(format!(
        "{tuples} flat tuples -> 128, msr(const) = 0, blur max err {worst:.2e} over 100 trials"
    ))
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn bulk_determinism() -> Check {
    let grid = ParamGrid::default();
    let entries = build_grid(&grid).map_err(|e| e.to_string())?;
    ensure(entries.len() == 90, || format!("{} grid entries", entries.len()))?;

    let src = foggy_fixture(128);
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for (run, workers) in [(0, 1), (1, 4), (2, 8), (3, 8)] {
        let mut cfg = RunConfig::new("fixture", root.path().join(format!("run{run}")));
        cfg.workers = workers;
        let outcome = run_pipeline_on(&src, &cfg).map_err(|e| e.to_string())?;
        ensure(outcome.records.len() == 90, || {
            format!("manifest has {} entries", outcome.records.len())
        })?;
        trees.push(read_tree(&cfg.out_dir));
    }
    let names: Vec<&str> = trees[0].iter().map(|(n, _)| n.as_str()).collect();
    for name in ["manifest.json", "report.csv", "report.json"] {
        ensure(names.contains(&name), || format!("{name} missing"))?;
    }
    for (i, tree) in trees.iter().enumerate().skip(1) {
        ensure(tree == &trees[0], || format!("run {i} differs from run 0"))?;
    }
    Ok(format!(
        "90 entries; {} files byte-identical across workers 1/4/8 and a repeat run",
        names.len()
    ))
}

fn desk_scale_enhancement() -> Check {
    let src = foggy_fixture(256);
    let original_var = variance(to_scalar(&src, ScalarMode::Brightness).values())
        .map_err(|e| e.to_string())?;
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::new("fixture", root.path());
    let start = Instant::now();
    let outcome = run_pipeline_on(&src, &cfg).map_err(|e| e.to_string())?;
    let elapsed = within_time(start, PIPELINE_LIMIT)?;

    let accepted: Vec<&MetricsReport> = outcome
        .reports
        .iter()
        .filter(|r| outcome.ranked.rank_of(&r.variant_id).is_some())
        .collect();
    let plain = accepted
        .iter()
        .filter(|r| r.variant_id.ends_with("_tnone"))
        .count();
    ensure(plain >= 1, || "no plain variant accepted".into())?;
    for r in &accepted {
        ensure(r.total_variance > original_var, || {
            format!(
                "{} accepted with variance {} <= original {}",
                r.variant_id, r.total_variance, original_var
            )
        })?;
    }
    ensure(outcome.best.is_some(), || "best.png not written".into())?;
    Ok(format!(
        "{} accepted ({plain} plain), all above original variance {original_var:.1}; 256x256 in {elapsed:?}",
        accepted.len()
    ))
}

fn random_report(rng: &mut ChaCha8Rng, i: usize) -> MetricsReport {
    let n = 5;
    let rav: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..0.05) })
        .collect();
    let vvo: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.05) { f64::INFINITY } else { rng.random_range(0.0..4.0) })
        .collect();
    let max_vvo = vvo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    MetricsReport {
        variant_id: format!("r{i:03}"),
        total_variance: 1.0,
        aav: rav.clone(),
        rav,
        vvo,
        avv: 0.0,
        rvv: rng.random_range(0.0..4.0),
        max_vvo,
    }
}

fn gate_monotonicity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reports: Vec<MetricsReport> = (0..100).map(|i| random_report(&mut rng, i)).collect();
    let accepted = |th: &GateThresholds| -> BTreeSet<String> {
        reports
            .iter()
            .filter(|r| gate(r, th).accepted)
            .map(|r| r.variant_id.clone())
            .collect()
    };
    let mut comparisons = 0;
    for _ in 0..50 {
        let base = GateThresholds {
            epsilon: rng.random_range(0.0..0.02),
            tau: rng.random_range(1.0..3.0),
            mu: rng.random_range(1.0..3.0),
        };
        let before = accepted(&base);
        let raised = [
            GateThresholds { epsilon: base.epsilon + rng.random_range(0.0..0.02), ..base },
            GateThresholds { tau: base.tau + rng.random_range(0.0..2.0), ..base },
            GateThresholds { mu: base.mu + rng.random_range(0.0..2.0), ..base },
        ];
        for th in raised {
            let after = accepted(&th);
            ensure(after.is_subset(&before), || {
                format!("raising {base:?} to {th:?} admitted {:?}", after.difference(&before))
            })?;
            comparisons += 1;
        }
    }
    Ok(format!("{comparisons} threshold raises over 100 random reports"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 golden variance table", golden_table),
        ("2 gate reproduction", gate_reproduction),
        ("3 ranking order", ranking),
        ("4 population variance", population_variance),
        ("5 retinex properties", retinex_properties),
        ("6 bulk cardinality and determinism", bulk_determinism),
        ("7 desk-scale enhancement", desk_scale_enhancement),
        ("8 gate monotonicity", gate_monotonicity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
