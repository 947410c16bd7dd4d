//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run with `cargo test --release --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionseq::annotation::{major_axis_angle, normalize_rotation};
use regionseq::bilstm::{
    gradient_check_report, train, train_with_validator, BiLstmModel, ModelConfig, OptimizerKind,
    StopReason, TrainConfig, ValidationMetrics,
};
use regionseq::eval::{confusion_matrix, cross_validate, CvConfig};
use regionseq::flops::bilstm_flops;
use regionseq::scan::{continuity_cost, scan_order};
use regionseq::synthetic::{centroid_dataset, SequenceDatasetSpec};
use regionseq::{FeatureSequence, GridDims, RegionMask, ScanStrategy};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    if took <= limit {
        Ok(format!("{detail}; {:.2?}", took))
    } else {
        Err(format!("{detail}; took {:.2?}, limit {:?}", took, limit))
    }
}

fn c1_flops() -> Outcome {
    let start = Instant::now();
    let r = bilstm_flops(1024, 2000, 3);
    let got = (r.bilstm_params, r.dense_params, r.total);
    if got != (48_400_000, 12_000, 48_412_000) {
        return Err(format!("W, F, total = {got:?}"));
    }
    within(Duration::from_secs(1), start, format!("W={} F={} total={}", got.0, got.1, got.2))
}

fn c2_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let models = 24;
    for k in 0..models {
        let d = rng.random_range(2..=6);
        let h = rng.random_range(1..=4);
        let c = rng.random_range(2..=3);
        let m = rng.random_range(1..=6);
        let model = BiLstmModel::new(ModelConfig::new(d, h, c), k).map_err(|e| e.to_string())?;
        let features = Array2::from_shape_fn((d, m), |_| rng.random_range(-1.0..1.0));
        let label = rng.random_range(0..c);
        let seq = FeatureSequence::new(features, label, format!("g{k}"));
        let report = gradient_check_report(&model, &seq, label, 1e-5).map_err(|e| e.to_string())?;
        worst = worst.max(report.max_rel_error);
        if report.max_rel_error >= 1e-5 {
            return Err(format!(
                "model {k} (D={d} H={h} C={c} m={m}): relative error {:.3e}",
                report.max_rel_error
            ));
        }
    }
    within(
        Duration::from_secs(30),
        start,
        format!("{models} models, max relative error {worst:.2e}"),
    )
}

fn c3_scan_orders() -> Outcome {
    let start = Instant::now();
    for rows in 1..=12 {
        for cols in 1..=12 {
            let dims = GridDims::new(rows, cols);
            for s in ScanStrategy::ALL {
                let mut seen = vec![false; rows * cols];
                let order = scan_order(dims, s);
                for &(r, c) in &order.visits {
                    if r >= rows || c >= cols || std::mem::replace(&mut seen[r * cols + c], true) {
                        return Err(format!("{s} on {rows}x{cols}: bad visit ({r},{c})"));
                    }
                }
                if seen.iter().any(|v| !v) {
                    return Err(format!("{s} on {rows}x{cols}: not every cell visited"));
                }
            }
            let s2 = scan_order(dims, ScanStrategy::Scan2);
            for w in s2.visits.windows(2) {
                if w[0].0.abs_diff(w[1].0) + w[0].1.abs_diff(w[1].1) != 1 {
                    return Err(format!("scan2 on {rows}x{cols}: jump {:?} -> {:?}", w[0], w[1]));
                }
            }
            let s1 = scan_order(dims, ScanStrategy::Scan1);
            if cols >= 2 && continuity_cost(&s2) > continuity_cost(&s1) {
                return Err(format!("{rows}x{cols}: scan2 less continuous than scan1"));
            }
        }
    }
    within(Duration::from_secs(5), start, "144 grids x 3 strategies".into())
}

fn ellipse_mask(w: usize, h: usize, a: f64, b: f64, theta_deg: f64) -> RegionMask {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    RegionMask::from_fn(w, h, |col, row| {
        let x = col as f64 + 0.5 - cx;
        let y = -(row as f64 + 0.5 - cy);
        let u = x * c + y * s;
        let v = -x * s + y * c;
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
}

fn c4_rotation() -> Outcome {
    let start = Instant::now();
    let image = RgbImage::from_pixel(300, 300, Rgb([180, 90, 140]));
    let mut worst = 0.0f64;
    for theta in [-60.0, -30.0, 0.0, 30.0, 60.0] {
        let mask = ellipse_mask(300, 300, 120.0, 40.0, theta);
        let out = normalize_rotation(&image, &mask, 256).map_err(|e| e.to_string())?;
        let after = major_axis_angle(&out.mask).map_err(|e| e.to_string())?;
        let off = (after - 90.0).abs().min((after + 90.0).abs());
        worst = worst.max(off);
        if off > 1.0 {
            return Err(format!("{theta} deg: axis at {after:.3} deg after rotation"));
        }
        let (w, h) = (out.image.width(), out.image.height());
        if w % 256 != 0 || h % 256 != 0 {
            return Err(format!("{theta} deg: output {w}x{h}"));
        }
    }
    within(
        Duration::from_secs(10),
        start,
        format!("5 angles, worst deviation from vertical {worst:.3} deg"),
    )
}

fn c5_learnability() -> Outcome {
    let start = Instant::now();
    let data = centroid_dataset(&SequenceDatasetSpec {
        classes: 3,
        dim: 96,
        min_len: 8,
        max_len: 48,
        seed: 5,
        ..SequenceDatasetSpec::default()
    });
    let tc = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        max_epochs: 30,
        seed: 1,
        ..TrainConfig::default()
    };
    let mc = ModelConfig::new(96, 32, 3).with_dropout(tc.dropout_rate);
    let cv = CvConfig {
        folds: 2,
        validation_fraction: 0.15,
        seed: 3,
    };
    let result = cross_validate(&data, mc, &tc, &cv).map_err(|e| e.to_string())?;
    let correct: u64 = result
        .folds
        .iter()
        .map(|f| (0..3).map(|k| f.confusion.true_positives(k)).sum::<u64>())
        .sum();
    let total: u64 = result.folds.iter().map(|f| f.samples).sum();
    let acc = correct as f64 / total as f64;
    if acc < 0.95 {
        return Err(format!("test accuracy {:.3} over {total} held-out sequences", acc));
    }
    within(
        Duration::from_secs(300),
        start,
        format!("2-fold test accuracy {acc:.3} on {total} sequences"),
    )
}

fn c6_variable_length() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lengths = [1, 7, 48, 200];
    let data: Vec<FeatureSequence> = lengths
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let f = Array2::from_shape_fn((10, m), |_| rng.random_range(0.0..1.0));
            FeatureSequence::new(f, k % 2, format!("len{m}"))
        })
        .collect();
    let model = BiLstmModel::new(ModelConfig::new(10, 6, 2), 0).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        max_epochs: 4,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let (model, history) = train(model, &data, &[], &tc).map_err(|e| e.to_string())?;
    if let Some(e) = history.epochs.iter().find(|e| !e.train_loss.is_finite()) {
        return Err(format!("epoch {} loss {}", e.epoch, e.train_loss));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for seq in &data {
        let pass = model.forward(seq, false, &mut rng).map_err(|e| e.to_string())?;
        let loss = model.loss(seq, seq.label).map_err(|e| e.to_string())?;
        if pass.states.h.ncols() != seq.len() || !loss.is_finite() {
            return Err(format!(
                "m={}: {} states, loss {loss}",
                seq.len(),
                pass.states.h.ncols()
            ));
        }
    }
    Ok(format!(
        "lengths {lengths:?} in one run, {} finite epoch losses",
        history.epochs.len()
    ))
}

fn c7_early_stopping() -> Outcome {
    let trace = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.2, 0.1];
    let data = centroid_dataset(&SequenceDatasetSpec {
        classes: 2,
        dim: 6,
        per_class: 4,
        min_len: 2,
        max_len: 5,
        ..SequenceDatasetSpec::default()
    });
    let model = BiLstmModel::new(ModelConfig::new(6, 3, 2), 0).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        patience: Some(5),
        max_epochs: trace.len(),
        learning_rate: 1e-2,
        ..TrainConfig::default()
    };
    let mut snapshots = Vec::new();
    let (model, history) = train_with_validator(model, &data, &tc, |m| {
        snapshots.push(m.params.clone());
        Ok(Some(ValidationMetrics {
            loss: trace[snapshots.len() - 1],
            accuracy: 0.0,
        }))
    })
    .map_err(|e| e.to_string())?;
    let epochs = history.epochs.len();
    if epochs != 7 || history.stop_reason != StopReason::Patience || history.best_epoch != 2 {
        return Err(format!(
            "stopped after {epochs} epochs ({:?}), best epoch {}",
            history.stop_reason, history.best_epoch
        ));
    }
    if model.params != snapshots[1] || model.params == snapshots[6] {
        return Err("returned parameters are not the epoch-2 snapshot".into());
    }
    Ok("stopped after epoch 7, epoch-2 parameters restored".into())
}

fn c8_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for c in [2usize, 3, 4] {
        let preds: Vec<usize> = (0..1000).map(|_| rng.random_range(0..c)).collect();
        let labels: Vec<usize> = (0..1000).map(|_| rng.random_range(0..c)).collect();
        let cm = confusion_matrix(&preds, &labels, c).map_err(|e| e.to_string())?;
        let correct = preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
        if cm.accuracy() != Some(correct as f64 / 1000.0) {
            return Err(format!("C={c}: accuracy {:?}", cm.accuracy()));
        }
        for k in 0..c {
            let (mut tp, mut fn_, mut fp, mut tn) = (0u64, 0u64, 0u64, 0u64);
            for (&p, &l) in preds.iter().zip(&labels) {
                match (l == k, p == k) {
                    (true, true) => tp += 1,
                    (true, false) => fn_ += 1,
                    (false, true) => fp += 1,
                    (false, false) => tn += 1,
                }
            }
            let se = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
            let sp = (tn + fp > 0).then(|| tn as f64 / (tn + fp) as f64);
            if cm.sensitivity(k) != se || cm.specificity(k) != sp {
                return Err(format!("C={c} class {k}: sensitivity/specificity mismatch"));
            }
        }
    }
    Ok("1000 pairs for C = 2, 3, 4 match the tally exactly".into())
}

fn c9_direction() -> Outcome {
    let seeds = 5;
    let (mut bi_sum, mut uni_sum) = (0.0, 0.0);
    for s in 0..seeds {
        let data = centroid_dataset(&SequenceDatasetSpec {
            classes: 3,
            dim: 12,
            per_class: 16,
            min_len: 20,
            max_len: 30,
            noise: 0.3,
            signal_columns: Some(3),
            seed: 100 + s,
        });
        let tc = TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-2,
            max_epochs: 15,
            dropout_rate: 0.0,
            seed: s,
            ..TrainConfig::default()
        };
        let cv = CvConfig {
            folds: 2,
            validation_fraction: 0.15,
            seed: s,
        };
        let bi = ModelConfig::new(12, 8, 3);
        for (config, sum) in [(bi, &mut bi_sum), (bi.unidirectional(), &mut uni_sum)] {
            let r = cross_validate(&data, config, &tc, &cv).map_err(|e| e.to_string())?;
            *sum += r.aggregate.accuracy.mean.unwrap_or(0.0);
        }
    }
    let (bi, uni) = (bi_sum / seeds as f64, uni_sum / seeds as f64);
    let detail = format!("mean test accuracy bidirectional {bi:.3}, unidirectional {uni:.3}");
    if bi >= uni {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_regionseq"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn read(dir: &Path, file: &str) -> Result<Vec<u8>, String> {
    std::fs::read(dir.join(file)).map_err(|e| format!("{file}: {e}"))
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let config = dir.join("config.toml");
    let config = config.to_str().ok_or("non-UTF-8 temp path")?;
    run_cli(&["synth", "--out", dir.to_str().unwrap()])?;
    let (a, b) = (dir.join("run-a"), dir.join("run-b"));
    run_cli(&["run-all", "-c", config, "-o", a.to_str().unwrap()])?;
    run_cli(&["run-all", "-c", config, "-o", b.to_str().unwrap()])?;
    let files = ["cv_report.json", "cv_report.txt", "cv_histories.json", "features.json", "flops.json"];
    for f in files {
        if read(&a, f)? != read(&b, f)? {
            return Err(format!("{f} differs between runs"));
        }
    }
    Ok(format!("{} report files byte-identical across two runs", files.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 FLOP reproduction", c1_flops),
        ("2 gradient correctness", c2_gradients),
        ("3 scan-order suite", c3_scan_orders),
        ("4 rotation normalization", c4_rotation),
        ("5 end-to-end learnability", c5_learnability),
        ("6 variable-length contract", c6_variable_length),
        ("7 early stopping", c7_early_stopping),
        ("8 metric oracle", c8_metric_oracle),
        ("9 BiLSTM vs LSTM ordering", c9_direction),
        ("10 determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
