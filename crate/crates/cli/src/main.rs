//! Command-line driver for adaptive hierarchical sensing experiments.
//!
//! Every subcommand is a pure function of its flags, input files, and seed:
//! identical invocations write identical bytes. Each run emits a
//! `manifest.json` echoing the resolved configuration, the checksums of the
//! inputs it read, and the list of files it wrote.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use kahs_core::experiments::{
    captured_coefficients, detection_experiment, energy_experiment, image_experiment,
    sensing_maps, ExperimentError,
};
use kahs_core::io::{encode_pgm, parse_pgm, write_pgm, GrayImage};
use kahs_core::models::{
    generate, recovery_certified, ModelError, ModelSpec, SignificantSet,
};
use kahs_core::sensing::{
    inner_product_oracle, k_ahs_sense, measurement_count, range_sum_oracle, MeasurementOracle,
    NodeId, SensingConfig, SensingError, TieBreak,
};
use kahs_core::transforms::{
    cdf97_2d_pair, haar2d_pair_with_levels, identity_pair, permuted, Transform, TransformError,
    TransformPair,
};

/// Exit codes: 0 success, 1 check failure, 2 usage, 3 I/O.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Check,
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Check => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Check => write!(f, "one or more checks failed"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SensingError> for CliError {
    fn from(e: SensingError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "kahs",
    version,
    about = "Adaptive hierarchical sensing of sparse and compressible signals"
)]
struct Cli {
    /// Worker threads for trial-parallel experiments (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Directory where output files and the run manifest are written.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Ksparse,
    Exponential,
    Powerlaw,
}

impl ModelArg {
    fn name(self) -> &'static str {
        match self {
            ModelArg::Ksparse => "ksparse",
            ModelArg::Exponential => "exponential",
            ModelArg::Powerlaw => "powerlaw",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BasisArg {
    Haar,
    Cdf97,
}

impl BasisArg {
    fn name(self) -> &'static str {
        match self {
            BasisArg::Haar => "haar",
            BasisArg::Cdf97 => "cdf97",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the self-check suite and print a pass/fail table.
    Verify {
        /// Diagnostic: resolve measurement ties toward higher node indices.
        #[arg(long, hide = true)]
        invert_ties: bool,
    },

    /// Monte-Carlo detection probabilities for a synthetic signal model.
    SynthDetection {
        /// Signal model drawn each trial.
        #[arg(long, value_enum, default_value_t = ModelArg::Ksparse)]
        model: ModelArg,
        /// Signal dimension N.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Number of nonzeros (ksparse model only).
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Decay base (exponential model only).
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Decay exponent (powerlaw model only).
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Magnitude scale applied to every coefficient.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Sensing sparsity parameter.
        #[arg(long = "K", default_value_t = 4)]
        k_sense: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },

    /// Mean captured signal energy over a (alpha, K) grid of power-law signals.
    SynthEnergy {
        /// Comma-separated power-law decay exponents.
        #[arg(long, value_delimiter = ',', default_value = "1.5,2.0")]
        alphas: Vec<f64>,
        /// Comma-separated sensing sparsity parameters.
        #[arg(long = "Ks", value_delimiter = ',', default_value = "1,2,4,8,16")]
        k_grid: Vec<usize>,
        /// Signal dimension N.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },

    /// Rate-distortion curve: sense a PGM image at a grid of budgets.
    Image {
        /// Input image, binary PGM, square power-of-two side.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BasisArg::Cdf97)]
        basis: BasisArg,
        /// Wavelet decomposition depth (default: min(5, log2(side))).
        #[arg(long)]
        levels: Option<usize>,
        /// Budget grid as a fraction of the pixel count: start:step:stop
        /// (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0.02:0.02:0.30")]
        ratios: String,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },

    /// Render per-level aggregate sensing maps of one run as PGM images.
    Maps {
        /// Input image, binary PGM, square power-of-two side.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BasisArg::Cdf97)]
        basis: BasisArg,
        /// Wavelet decomposition depth (default: min(5, log2(side))).
        #[arg(long)]
        levels: Option<usize>,
        /// Sensing sparsity parameter.
        #[arg(long = "K", default_value_t = 4095)]
        k_sense: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },

    /// Overlap between the estimate's strongest coefficients and the true ones.
    Captured {
        /// Input image, binary PGM, square power-of-two side.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BasisArg::Cdf97)]
        basis: BasisArg,
        /// Wavelet decomposition depth (default: min(5, log2(side))).
        #[arg(long)]
        levels: Option<usize>,
        /// Sensing sparsity parameter.
        #[arg(long = "K", default_value_t = 4506)]
        k_sense: usize,
        #[arg(long, default_value_t = 100)]
        runs: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cli.out_dir.display())))?;

    match cli.command {
        Command::Verify { invert_ties } => cmd_verify(invert_ties, cli.threads, &cli.out_dir),
        Command::SynthDetection {
            model,
            n,
            k,
            q,
            alpha,
            scale,
            k_sense,
            trials,
            seed,
        } => cmd_synth_detection(
            model, n, k, q, alpha, scale, k_sense, trials, seed, cli.threads, &cli.out_dir,
        ),
        Command::SynthEnergy { alphas, k_grid, n, trials, seed } => {
            cmd_synth_energy(&alphas, &k_grid, n, trials, seed, cli.threads, &cli.out_dir)
        }
        Command::Image { input, basis, levels, ratios, trials, seed } => {
            cmd_image(&input, basis, levels, &ratios, trials, seed, cli.threads, &cli.out_dir)
        }
        Command::Maps { input, basis, levels, k_sense, seed } => {
            cmd_maps(&input, basis, levels, k_sense, seed, cli.threads, &cli.out_dir)
        }
        Command::Captured { input, basis, levels, k_sense, runs, seed } => {
            cmd_captured(&input, basis, levels, k_sense, runs, seed, cli.threads, &cli.out_dir)
        }
    }
}

/// Writes `manifest.json` describing one completed run. Paths are stored
/// relative (file names only) and no timestamps are included, so manifests
/// are byte-identical across reruns and working directories.
fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: serde_json::Value,
    master_seed: u64,
    inputs: &[(String, String)],
    outputs: &[String],
) -> Result<(), CliError> {
    let checksums: BTreeMap<&str, &str> =
        inputs.iter().map(|(name, sum)| (name.as_str(), sum.as_str())).collect();
    let manifest = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "master_seed": master_seed,
        "input_checksums": checksums,
        "outputs": outputs,
    });
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("manifest: {e}")))?;
    fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_text(out_dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let path = out_dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_image(path: &Path) -> Result<(GrayImage, String, String), CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let image =
        parse_pgm(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok((image, name, sha256_hex(&bytes)))
}

/// Builds the transform for an image command; `levels` defaults to
/// min(5, log2(side)).
fn build_pair(
    basis: BasisArg,
    side: usize,
    levels: Option<usize>,
) -> Result<(TransformPair, usize), CliError> {
    if !side.is_power_of_two() || side < 2 {
        return Err(CliError::Usage(format!(
            "image side {side} must be a power of two of at least 2"
        )));
    }
    let max = side.trailing_zeros() as usize;
    let levels = levels.unwrap_or_else(|| max.min(5));
    let pair = match basis {
        BasisArg::Haar => haar2d_pair_with_levels(side, levels)?,
        BasisArg::Cdf97 => cdf97_2d_pair(side, levels)?,
    };
    Ok((pair, levels))
}

/// Inclusive `start:step:stop` grid or comma-separated list of budget
/// fractions; values are rounded to 9 decimals so grid endpoints like 0.30
/// print cleanly.
fn parse_ratios(s: &str) -> Result<Vec<f64>, CliError> {
    let one = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid ratio value '{}'", t.trim())))
    };
    let values: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "ratio range must be start:step:stop, got '{s}'"
            )));
        }
        let (start, step, stop) = (one(parts[0])?, one(parts[1])?, one(parts[2])?);
        if !(step > 0.0) {
            return Err(CliError::Usage(format!("ratio step must be positive, got {step}")));
        }
        if stop < start {
            return Err(CliError::Usage(format!(
                "ratio stop {stop} is below start {start}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        s.split(',').map(one).collect::<Result<_, _>>()?
    };
    let rounded: Vec<f64> = values.iter().map(|v| (v * 1e9).round() / 1e9).collect();
    if rounded.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(CliError::Usage(format!("ratios must lie in [0, 1], got {rounded:?}")));
    }
    Ok(rounded)
}

struct CheckResult {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_verify(invert_ties: bool, threads: usize, out_dir: &Path) -> Result<(), CliError> {
    let tie_break = if invert_ties { TieBreak::HighIndexFirst } else { TieBreak::LowIndexFirst };
    let checks = vec![
        check_count_law(),
        check_recovery_condition(),
        check_round_trips(),
        check_oracle_equivalence(),
        check_descent_replay(tie_break),
        check_image_codec(),
    ];

    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut all_pass = true;
    for check in &checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("{status} {:width$}  {}", check.name, check.detail);
        all_pass &= check.pass;
    }

    write_manifest(
        out_dir,
        "verify",
        json!({ "invert_ties": invert_ties, "threads": threads }),
        0,
        &[],
        &[],
    )?;

    if all_pass {
        Ok(())
    } else {
        Err(CliError::Check)
    }
}

/// Instrumented measurement counts over a dimension/sparsity grid must match
/// the closed form exactly and stay within the logarithmic bound, with
/// equality precisely at power-of-two sparsities.
fn check_count_law() -> CheckResult {
    let mut configs = 0usize;
    for exp in 4..=11 {
        let n: usize = 1 << exp;
        let coeffs: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
        for k in 1..n / 4 {
            let cfg = match SensingConfig::new(n, k) {
                Ok(cfg) => cfg,
                Err(e) => {
                    return CheckResult {
                        name: "measurement-count law",
                        pass: false,
                        detail: format!("config N={n} K={k} rejected: {e}"),
                    }
                }
            };
            let oracle = match range_sum_oracle(coeffs.clone()) {
                Ok(o) => o,
                Err(e) => {
                    return CheckResult {
                        name: "measurement-count law",
                        pass: false,
                        detail: format!("oracle N={n}: {e}"),
                    }
                }
            };
            if k_ahs_sense(&oracle, &cfg).is_err() {
                return CheckResult {
                    name: "measurement-count law",
                    pass: false,
                    detail: format!("sensing failed at N={n} K={k}"),
                };
            }
            let counted = oracle.query_count() as usize;
            let closed_form = measurement_count(n, k).unwrap_or(usize::MAX);
            let bound = 2.0 * k as f64 * (n as f64 / k as f64).log2();
            let within = counted as f64 <= bound + 1e-9;
            let tight = (counted as f64 - bound).abs() < 1e-6;
            if counted != closed_form || !within || tight != k.is_power_of_two() {
                return CheckResult {
                    name: "measurement-count law",
                    pass: false,
                    detail: format!(
                        "N={n} K={k}: counted {counted}, closed form {closed_form}, bound {bound}"
                    ),
                };
            }
            configs += 1;
        }
    }
    CheckResult {
        name: "measurement-count law",
        pass: true,
        detail: format!("N in {{16..2048}}, {configs} configurations exact"),
    }
}

/// Random instances where the sufficient recovery condition holds must never
/// miss a significant coefficient.
fn check_recovery_condition() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(20_2608);
    let sizes = [16usize, 32, 64];
    let mut applicable = 0usize;
    for i in 0..2000u64 {
        let n = sizes[rng.gen_range(0..sizes.len())];
        let k_sense = rng.gen_range(1..=(n / 4 - 1).min(4));
        let k_sig = rng.gen_range(1..=k_sense);
        let spec = match i % 3 {
            0 => ModelSpec::ksparse(n, rng.gen_range(1..=8usize), rng.gen()),
            1 => ModelSpec::exponential(n, rng.gen_range(1.2..4.0), rng.gen()),
            _ => ModelSpec::powerlaw(n, rng.gen_range(1.2..3.0), rng.gen()),
        };
        let detail = |msg: String| CheckResult {
            name: "recovery condition",
            pass: false,
            detail: msg,
        };
        let coeffs = match generate(&spec) {
            Ok(c) => c,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        let sig = match SignificantSet::from_coefficients(&coeffs, k_sig) {
            Ok(s) => s,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        let cfg = match SensingConfig::new(n, k_sense) {
            Ok(c) => c,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        let partition = 1usize << cfg.initial_level();
        let holds = match recovery_certified(&sig, &coeffs, partition) {
            Ok(h) => h,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        if !holds {
            continue;
        }
        applicable += 1;
        let oracle = match range_sum_oracle(coeffs.clone()) {
            Ok(o) => o,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        let (estimate, _) = match k_ahs_sense(&oracle, &cfg) {
            Ok(r) => r,
            Err(e) => return detail(format!("instance {i}: {e}")),
        };
        let found: Vec<usize> = estimate.entries().iter().map(|&(idx, _)| idx).collect();
        for idx in sig.indices() {
            if !found.contains(&idx) {
                return detail(format!(
                    "instance {i} (N={n} K={k_sense} k={k_sig} {spec:?}): condition held yet rank index {idx} was missed"
                ));
            }
        }
    }
    CheckResult {
        name: "recovery condition",
        pass: applicable > 100,
        detail: format!("2000 instances, {applicable} with the condition active, 0 misses"),
    }
}

/// Synthesis must invert analysis for every basis, and the adjoint must
/// match the dense transpose of analysis.
fn check_round_trips() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let pairs: Vec<(&str, Box<dyn Transform>)> = vec![
        ("identity", Box::new(identity_pair(64))),
        ("haar", Box::new(haar2d_pair_with_levels(8, 3).expect("valid"))),
        ("cdf97", Box::new(cdf97_2d_pair(8, 3).expect("valid"))),
        ("permuted cdf97", Box::new(permuted(cdf97_2d_pair(8, 2).expect("valid"), 5))),
    ];
    let mut worst = 0.0f64;
    for (name, pair) in &pairs {
        let n = pair.dimension();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let back = pair.synthesize(&pair.analyze(&x));
        let rt = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);

        // Dense analysis matrix column by column; the adjoint of the j-th
        // signal-space unit vector must reproduce its j-th row.
        let mut columns = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            columns.push(pair.analyze(&e));
        }
        let mut adj = 0.0f64;
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let row = pair.analysis_adjoint(&e);
            for i in 0..n {
                adj = adj.max((row[i] - columns[i][j]).abs());
            }
        }

        worst = worst.max(rt).max(adj);
        if rt > 1e-9 || adj > 1e-9 {
            return CheckResult {
                name: "transform round-trips",
                pass: false,
                detail: format!("{name}: round-trip {rt:e}, adjoint gap {adj:e}"),
            };
        }
    }
    CheckResult {
        name: "transform round-trips",
        pass: true,
        detail: format!("4 bases, worst error {worst:.2e}"),
    }
}

/// Summing stored coefficients and measuring the signal through materialized
/// sensing vectors must agree node for node.
fn check_oracle_equivalence() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let pair = cdf97_2d_pair(8, 2).expect("valid pair");
    let x: Vec<f64> = (0..64).map(|_| rng.gen_range(0.0..255.0)).collect();
    let coeffs = pair.analyze(&x);
    let fast = match range_sum_oracle(coeffs) {
        Ok(o) => o,
        Err(e) => {
            return CheckResult {
                name: "oracle equivalence",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let slow = match inner_product_oracle(&x, &pair) {
        Ok(o) => o,
        Err(e) => {
            return CheckResult {
                name: "oracle equivalence",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let mut worst = 0.0f64;
    for level in 0..=6usize {
        for index in 0..(64 >> level) {
            let node = NodeId::new(level, index);
            let gap = (fast.measure(node) - slow.measure(node)).abs();
            worst = worst.max(gap);
        }
    }
    CheckResult {
        name: "oracle equivalence",
        pass: worst < 1e-8,
        detail: format!("127 nodes, worst gap {worst:.2e}"),
    }
}

/// A frozen descent with an exact measurement tie: exploring ties toward the
/// lower node index must land on coefficient 0, not its mirror at 11.
fn check_descent_replay(tie_break: TieBreak) -> CheckResult {
    let mut coeffs = vec![0.0; 16];
    coeffs[0] = 2.0;
    coeffs[11] = 2.0;
    let cfg = match SensingConfig::new(16, 1) {
        Ok(c) => c.with_tie_break(tie_break),
        Err(e) => {
            return CheckResult {
                name: "descent replay",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let oracle = match range_sum_oracle(coeffs) {
        Ok(o) => o,
        Err(e) => {
            return CheckResult {
                name: "descent replay",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let (estimate, _) = match k_ahs_sense(&oracle, &cfg) {
        Ok(r) => r,
        Err(e) => {
            return CheckResult {
                name: "descent replay",
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let expected = [(0usize, 2.0f64)];
    let pass = estimate.entries() == &expected[..];
    CheckResult {
        name: "descent replay",
        pass,
        detail: format!("estimate {:?}, expected {:?}", estimate.entries(), expected),
    }
}

/// Decoding an encoded image must reproduce it byte for byte.
fn check_image_codec() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    for case in 0..50 {
        let width = rng.gen_range(1..40usize);
        let height = rng.gen_range(1..40usize);
        let pixels: Vec<u8> = (0..width * height).map(|_| rng.gen()).collect();
        let image = match GrayImage::new(width, height, pixels) {
            Ok(img) => img,
            Err(e) => {
                return CheckResult {
                    name: "image codec round-trip",
                    pass: false,
                    detail: format!("case {case}: {e}"),
                }
            }
        };
        match parse_pgm(&encode_pgm(&image)) {
            Ok(back) if back == image => {}
            Ok(_) => {
                return CheckResult {
                    name: "image codec round-trip",
                    pass: false,
                    detail: format!("case {case} ({width}x{height}): pixels changed"),
                }
            }
            Err(e) => {
                return CheckResult {
                    name: "image codec round-trip",
                    pass: false,
                    detail: format!("case {case} ({width}x{height}): {e}"),
                }
            }
        }
    }
    CheckResult {
        name: "image codec round-trip",
        pass: true,
        detail: "50 random images identical after decode(encode)".to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth_detection(
    model: ModelArg,
    n: usize,
    k: usize,
    q: f64,
    alpha: f64,
    scale: f64,
    k_sense: usize,
    trials: u64,
    seed: u64,
    threads: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let spec = match model {
        ModelArg::Ksparse => ModelSpec::ksparse(n, k, 0),
        ModelArg::Exponential => ModelSpec::exponential(n, q, 0),
        ModelArg::Powerlaw => ModelSpec::powerlaw(n, alpha, 0),
    }
    .with_scale(scale);
    spec.validate()?;
    let report = detection_experiment(&spec, k_sense, trials, seed)?;

    write_text(out_dir, "detection.csv", &report.to_csv())?;
    for (i, p) in report.probabilities.iter().take(4).enumerate() {
        println!("rank {} detection probability: {p}", i + 1);
    }
    write_manifest(
        out_dir,
        "synth-detection",
        json!({
            "model": model.name(),
            "N": n,
            "k": k,
            "q": q,
            "alpha": alpha,
            "scale": scale,
            "K": k_sense,
            "trials": trials,
            "seed": seed,
            "threads": threads,
        }),
        seed,
        &[],
        &["detection.csv".to_string()],
    )
}

fn cmd_synth_energy(
    alphas: &[f64],
    k_grid: &[usize],
    n: usize,
    trials: u64,
    seed: u64,
    threads: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let report = energy_experiment(alphas, k_grid, n, trials, seed)?;
    write_text(out_dir, "energy.csv", &report.to_csv())?;
    for row in &report.rows {
        println!("alpha {} K {}: mean captured energy {}", row.alpha, row.k_sense, row.energy);
    }
    write_manifest(
        out_dir,
        "synth-energy",
        json!({
            "alphas": alphas,
            "Ks": k_grid,
            "N": n,
            "trials": trials,
            "seed": seed,
            "threads": threads,
        }),
        seed,
        &[],
        &["energy.csv".to_string()],
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_image(
    input: &Path,
    basis: BasisArg,
    levels: Option<usize>,
    ratios: &str,
    trials: u64,
    seed: u64,
    threads: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (image, input_name, checksum) = load_image(input)?;
    let side = image
        .side()
        .ok_or_else(|| CliError::Usage(format!(
            "input image must be square, got {}x{}",
            image.width(),
            image.height()
        )))?;
    let (pair, resolved_levels) = build_pair(basis, side, levels)?;
    let grid = parse_ratios(ratios)?;
    let report = image_experiment(&image, &pair, &grid, trials, seed)?;

    write_text(out_dir, "rate_distortion.csv", &report.to_csv())?;
    for point in &report.points {
        println!(
            "ratio {} (K={}, M={}): psnr {} +- {}",
            point.ratio, point.k_sense, point.m, point.psnr_mean, point.psnr_std
        );
    }
    write_manifest(
        out_dir,
        "image",
        json!({
            "input": input_name,
            "basis": basis.name(),
            "levels": resolved_levels,
            "ratios": grid,
            "trials": trials,
            "seed": seed,
            "threads": threads,
        }),
        seed,
        &[(input_name.clone(), checksum)],
        &["rate_distortion.csv".to_string()],
    )
}

fn cmd_maps(
    input: &Path,
    basis: BasisArg,
    levels: Option<usize>,
    k_sense: usize,
    seed: u64,
    threads: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (image, input_name, checksum) = load_image(input)?;
    let side = image
        .side()
        .ok_or_else(|| CliError::Usage(format!(
            "input image must be square, got {}x{}",
            image.width(),
            image.height()
        )))?;
    let (pair, resolved_levels) = build_pair(basis, side, levels)?;
    let maps = sensing_maps(&image, &pair, k_sense, seed)?;

    let mut outputs = Vec::with_capacity(maps.len());
    for map in &maps {
        let name = format!("map_level_{}.pgm", map.level);
        let path = out_dir.join(&name);
        write_pgm(&path, &map.to_image())
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        println!("tree level {} -> {name}", map.level);
        outputs.push(name);
    }
    write_manifest(
        out_dir,
        "maps",
        json!({
            "input": input_name,
            "basis": basis.name(),
            "levels": resolved_levels,
            "K": k_sense,
            "seed": seed,
            "threads": threads,
        }),
        seed,
        &[(input_name.clone(), checksum)],
        &outputs,
    )
}

#[allow(clippy::too_many_arguments)]
fn cmd_captured(
    input: &Path,
    basis: BasisArg,
    levels: Option<usize>,
    k_sense: usize,
    runs: u64,
    seed: u64,
    threads: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (image, input_name, checksum) = load_image(input)?;
    let side = image
        .side()
        .ok_or_else(|| CliError::Usage(format!(
            "input image must be square, got {}x{}",
            image.width(),
            image.height()
        )))?;
    let (pair, resolved_levels) = build_pair(basis, side, levels)?;
    let report = captured_coefficients(&image, &pair, k_sense, runs, seed)?;

    write_text(out_dir, "captured_curves.csv", &report.curves_to_csv())?;
    let mut overlap_csv = String::from("run,overlap\n");
    for (run, overlap) in report.overlaps.iter().enumerate() {
        overlap_csv.push_str(&format!("{run},{overlap}\n"));
    }
    write_text(out_dir, "captured_overlap.csv", &overlap_csv)?;
    println!(
        "overlap with the true top {} over {} runs: mean {} +- {}",
        report.k_sense, report.runs, report.mean_overlap, report.std_overlap
    );
    write_manifest(
        out_dir,
        "captured",
        json!({
            "input": input_name,
            "basis": basis.name(),
            "levels": resolved_levels,
            "K": k_sense,
            "runs": runs,
            "seed": seed,
            "threads": threads,
        }),
        seed,
        &[(input_name.clone(), checksum)],
        &["captured_curves.csv".to_string(), "captured_overlap.csv".to_string()],
    )
}
