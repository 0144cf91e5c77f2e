//! Acceptance gate: one test per release criterion, run against the library
//! and the compiled binary. Each test prints a single summary line; pinned
//! tolerances and runtime budgets are asserted inline.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use kahs_core::experiments::{
    captured_coefficients, detection_experiment, image_experiment,
};
use kahs_core::io::read_pgm;
use kahs_core::models::{
    alpha_star, energy_fraction_top1_limit, generate, recovery_certified, zeta,
    ModelSpec, SignificantSet,
};
use kahs_core::sensing::{
    k_ahs_sense, measurement_count, range_sum_oracle, MeasurementOracle,
    SensingConfig,
};
use kahs_core::transforms::{cdf97_2d_pair, haar2d_pair_with_levels, TransformPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{exit_code, read_bytes, run_kahs, stderr_of, write_test_pgm};

fn assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

/// Canonical photograph if the user provided one, else the bundled stand-in.
/// The stand-in has different statistics, so absolute reference values only
/// apply to the canonical file; the degraded checks assert the
/// image-independent properties instead.
fn reference_image() -> (kahs_core::io::GrayImage, bool) {
    let canonical = assets_dir().join("cameraman.pgm");
    if canonical.exists() {
        (read_pgm(&canonical).expect("canonical image parses"), true)
    } else {
        let fallback = assets_dir().join("sample512.pgm");
        (read_pgm(&fallback).expect("bundled image parses"), false)
    }
}

fn pairs_512() -> (TransformPair, TransformPair) {
    (
        cdf97_2d_pair(512, 5).expect("cdf97 pair builds"),
        haar2d_pair_with_levels(512, 5).expect("haar pair builds"),
    )
}

fn assert_budget(start: Instant, budget: Duration, what: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "{what} took {elapsed:?}, budget {budget:?}"
    );
}

#[test]
fn a01_measurement_counts_match_the_closed_form_and_bound() {
    let start = Instant::now();
    let mut configs = 0u64;
    for exp in 4..=14u32 {
        let n = 1usize << exp;
        let oracle = range_sum_oracle(vec![0.0; n]).expect("oracle builds");
        for k in 1..n / 4 {
            let cfg = SensingConfig::new(n, k).expect("config builds");
            let before = oracle.query_count();
            k_ahs_sense(&oracle, &cfg).expect("descent runs");
            let m = (oracle.query_count() - before) as usize;

            let l = cfg.initial_level();
            let exact = n / (1 << l) + 2 * k * l;
            assert_eq!(m, exact, "N={n} K={k}: {m} queries, closed form {exact}");
            assert_eq!(
                m,
                measurement_count(n, k).expect("count formula"),
                "N={n} K={k}: formula helper disagrees with the run"
            );

            let bound = 2.0 * k as f64 * (n as f64 / k as f64).log2();
            if k.is_power_of_two() {
                assert!(
                    (m as f64 - bound).abs() < 1e-9,
                    "N={n} K={k}: {m} should equal the bound {bound}"
                );
            } else {
                assert!(
                    (m as f64) < bound,
                    "N={n} K={k}: {m} should sit strictly below {bound}"
                );
            }
            configs += 1;
        }
    }
    assert_eq!(configs, 8177, "grid size");
    assert_budget(start, Duration::from_secs(60), "count-law grid");
    println!("a01: {configs} configurations match the count law exactly");
}

#[test]
fn a02_sparse_signals_are_recovered_with_certainty() {
    let start = Instant::now();
    for k in [2usize, 4] {
        let spec = ModelSpec::ksparse(1024, k, 0);
        let report =
            detection_experiment(&spec, 4, 1000, 7).expect("experiment runs");
        for rank in 0..k {
            let p = report.probabilities[rank];
            assert_eq!(
                p,
                1.0,
                "k={k}: rank {} detection probability {p}, expected certainty",
                rank + 1
            );
        }
    }
    assert_budget(start, Duration::from_secs(60), "sparse recovery trials");
    println!("a02: k in {{2, 4}} recovered with probability exactly 1.0");
}

#[test]
fn a03_steep_exponential_decay_is_recovered_with_certainty() {
    let spec = ModelSpec::exponential(1024, 2.0, 0);
    let report = detection_experiment(&spec, 4, 1000, 7).expect("experiment runs");
    for rank in 0..4 {
        let p = report.probabilities[rank];
        assert_eq!(
            p,
            1.0,
            "rank {} detection probability {p}, expected certainty",
            rank + 1
        );
    }
    println!("a03: exponential decay at base 2, top 4 found in every trial");
}

#[test]
fn a04_underprovisioned_sensing_still_finds_the_top_ranks() {
    let spec = ModelSpec::ksparse(1024, 8, 0);
    let report = detection_experiment(&spec, 4, 10_000, 7).expect("experiment runs");
    let probs: Vec<f64> = report.probabilities[..4].to_vec();
    for (rank, &p) in probs.iter().enumerate() {
        assert!(
            p >= 0.78,
            "rank {} detection probability {p} below 0.78",
            rank + 1
        );
    }
    println!("a04: 8 nonzeros vs budget 4, top-4 rates {probs:?}");
}

#[test]
fn a05_certified_instances_are_never_missed() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(50_4170);
    let sizes = [16usize, 32, 64];
    let mut certified = 0u64;
    for i in 0..10_000u64 {
        let n = sizes[rng.gen_range(0..sizes.len())];
        let k_sense = rng.gen_range(1..=(n / 4 - 1).min(4));
        let k_sig = rng.gen_range(1..=k_sense);
        let spec = match i % 3 {
            0 => ModelSpec::ksparse(n, rng.gen_range(1..=8usize), rng.gen()),
            1 => ModelSpec::exponential(n, rng.gen_range(1.2..4.0), rng.gen()),
            _ => ModelSpec::powerlaw(n, rng.gen_range(1.2..3.0), rng.gen()),
        };
        let coeffs = generate(&spec).expect("instance generates");
        let sig = SignificantSet::from_coefficients(&coeffs, k_sig)
            .expect("significant set builds");
        let cfg = SensingConfig::new(n, k_sense).expect("config builds");
        let partition = 1usize << cfg.initial_level();
        if !recovery_certified(&sig, &coeffs, partition).expect("condition evaluates") {
            continue;
        }
        certified += 1;
        let oracle = range_sum_oracle(coeffs).expect("oracle builds");
        let (estimate, _) = k_ahs_sense(&oracle, &cfg).expect("descent runs");
        for idx in sig.indices() {
            assert!(
                estimate.entries().iter().any(|&(j, _)| j == idx),
                "instance {i} (N={n} K={k_sense} k={k_sig}): certified yet index {idx} missed"
            );
        }
    }
    assert!(
        certified > 1000,
        "only {certified} certified instances, sweep too weak"
    );
    assert_budget(start, Duration::from_secs(120), "certified sweep");
    println!("a05: {certified} certified instances of 10000, zero misses");
}

#[test]
fn a06_critical_exponent_and_energy_concentration() {
    let a = alpha_star();
    assert!(
        (1.72..=1.74).contains(&a),
        "critical exponent {a} outside [1.72, 1.74]"
    );
    let gap = (zeta(a) - 2.0).abs();
    assert!(gap < 1e-10, "zeta({a}) misses 2 by {gap:e}");
    let fraction = energy_fraction_top1_limit(a).expect("fraction evaluates");
    assert!(
        fraction > 0.88,
        "leading-term energy fraction {fraction} not above 0.88"
    );
    println!("a06: alpha* = {a}, zeta gap {gap:e}, energy fraction {fraction}");
}

#[test]
fn a07_powerlaw_top_coefficient_is_nearly_always_found() {
    let spec = ModelSpec::powerlaw(1024, 2.0, 0);
    let report = detection_experiment(&spec, 4, 1000, 7).expect("experiment runs");
    let p = report.probabilities[0];
    assert!(p >= 0.99, "top-rank detection probability {p} below 0.99");
    println!("a07: power-law decay 2.0, top coefficient found at rate {p}");
}

#[test]
fn a08_image_rate_distortion() {
    let start = Instant::now();
    let (image, canonical) = reference_image();
    let (cdf97, haar) = pairs_512();
    if canonical {
        let smooth = image_experiment(&image, &cdf97, &[0.2], 10, 7)
            .expect("experiment runs");
        let blocky =
            image_experiment(&image, &haar, &[0.2], 10, 7).expect("experiment runs");
        let s = smooth.points[0].psnr_mean;
        let b = blocky.points[0].psnr_mean;
        assert!(
            (s - 30.85).abs() <= 1.0,
            "cdf97 psnr {s} outside 30.85 +- 1.0"
        );
        assert!((b - 27.86).abs() <= 1.0, "haar psnr {b} outside 27.86 +- 1.0");
        assert_budget(start, Duration::from_secs(120), "canonical point");
        println!("a08: canonical image, cdf97 {s} dB, haar {b} dB");
    } else {
        let ratios: Vec<f64> = (1..=15).map(|i| 0.02 * i as f64).collect();
        let smooth = image_experiment(&image, &cdf97, &ratios, 3, 7)
            .expect("experiment runs");
        let blocky =
            image_experiment(&image, &haar, &ratios, 3, 7).expect("experiment runs");
        let mut min_margin = f64::INFINITY;
        for (s, b) in smooth.points.iter().zip(&blocky.points) {
            assert!(
                s.psnr_mean > b.psnr_mean,
                "ratio {}: cdf97 {} dB does not exceed haar {} dB",
                s.ratio,
                s.psnr_mean,
                b.psnr_mean
            );
            assert!(
                s.psnr_mean > 15.0 && s.psnr_mean < 40.0,
                "ratio {}: cdf97 psnr {} outside the plausible range",
                s.ratio,
                s.psnr_mean
            );
            min_margin = min_margin.min(s.psnr_mean - b.psnr_mean);
        }
        assert_budget(start, Duration::from_secs(120), "rate-distortion grid");
        println!(
            "a08: stand-in image, cdf97 above haar at all 15 ratios, min margin {min_margin:.3} dB"
        );
    }
}

#[test]
fn a09_captured_coefficients_overlap() {
    let start = Instant::now();
    let (image, canonical) = reference_image();
    let (cdf97, _) = pairs_512();
    let report = captured_coefficients(&image, &cdf97, 4506, 100, 7)
        .expect("experiment runs");
    for (i, (o, e)) in report
        .optimal_curve
        .iter()
        .zip(&report.estimate_curve)
        .enumerate()
    {
        assert!(
            e <= o,
            "rank {}: estimate magnitude {e} above optimal {o}",
            i + 1
        );
    }
    let mean = report.mean_overlap;
    assert!(
        mean > 0.0 && mean <= 4506.0,
        "mean overlap {mean} outside (0, K]"
    );
    if canonical {
        assert!(
            (200.0..=700.0).contains(&mean),
            "canonical mean overlap {mean} outside [200, 700]"
        );
        println!("a09: canonical image, mean overlap {mean} within [200, 700]");
    } else {
        assert!(
            report.std_overlap > 0.0,
            "overlap identical across runs, permutations not applied"
        );
        println!(
            "a09: stand-in image, estimate curve dominated at every rank, mean overlap {mean}"
        );
    }
    assert_budget(start, Duration::from_secs(120), "overlap runs");
}

#[test]
fn a10_reruns_are_byte_identical_across_every_command() {
    let base = tempfile::tempdir().expect("temp dir");
    let img = write_test_pgm(base.path(), "texture.pgm", 32);
    let img = img.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["verify"],
        vec![
            "synth-detection",
            "--model",
            "ksparse",
            "--n",
            "256",
            "--k",
            "2",
            "--K",
            "2",
            "--trials",
            "50",
            "--seed",
            "9",
        ],
        vec![
            "synth-energy",
            "--alphas",
            "1.5,2.0",
            "--Ks",
            "1,2",
            "--n",
            "64",
            "--trials",
            "10",
            "--seed",
            "9",
        ],
        vec![
            "image", "--input", img, "--basis", "haar", "--levels", "3",
            "--ratios", "0.1,0.2", "--trials", "2", "--seed", "9",
        ],
        vec![
            "maps", "--input", img, "--basis", "haar", "--levels", "3", "--K",
            "2", "--seed", "9",
        ],
        vec![
            "captured", "--input", img, "--basis", "haar", "--levels", "3",
            "--K", "4", "--runs", "3", "--seed", "9",
        ],
    ];

    for args in &commands {
        let dir_a = tempfile::tempdir().expect("temp dir");
        let dir_b = tempfile::tempdir().expect("temp dir");
        let mut outs = Vec::new();
        for dir in [dir_a.path(), dir_b.path()] {
            let mut argv: Vec<&str> = args.clone();
            let dir = dir.to_str().unwrap();
            argv.extend(["--out-dir", dir]);
            let out = run_kahs(&argv);
            assert_eq!(
                exit_code(&out),
                0,
                "{:?} failed: {}",
                args,
                stderr_of(&out)
            );
            outs.push(out);
        }
        assert_eq!(
            outs[0].stdout, outs[1].stdout,
            "{:?}: stdout differs between reruns",
            args
        );

        let mut names: Vec<Vec<String>> = Vec::new();
        for dir in [dir_a.path(), dir_b.path()] {
            let mut entries: Vec<String> = std::fs::read_dir(dir)
                .expect("out dir listable")
                .map(|e| e.expect("entry").file_name().into_string().unwrap())
                .collect();
            entries.sort();
            names.push(entries);
        }
        assert_eq!(names[0], names[1], "{:?}: emitted file sets differ", args);
        for name in &names[0] {
            assert_eq!(
                read_bytes(&dir_a.path().join(name)),
                read_bytes(&dir_b.path().join(name)),
                "{:?}: {name} differs between reruns",
                args
            );
        }
    }
    println!(
        "a10: {} commands rerun byte-identical, outputs and stdout alike",
        commands.len()
    );
}
