//! Command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical
//! failure inside a solver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gsvdnmf::io::{
    dataset_info, load_matrix, require_nonnegative, save_factors, save_matrix_csv,
    write_histogram_csv, write_spectrum, write_trials_csv, RunManifest,
};
use gsvdnmf::nmf::{init_random, run_hals, SolverSettings};
use gsvdnmf::pipeline::{
    diagonal_histogram, gen_synthetic, run_comparison, run_pipeline, run_standard, InitMethod,
    PipelineConfig, SvdRank, DEFAULT_HISTOGRAM_BINS,
};
use gsvdnmf::recovery::lambda_spectrum;
use gsvdnmf::svd::truncated_svd;
use gsvdnmf::{DenseMatrix, Error};

#[derive(Parser)]
#[command(
    name = "gsvdnmf",
    version,
    about = "Nonnegative matrix factorization with GSVD-based recovery of missing components"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard HALS NMF.
    Nmf(NmfArgs),
    /// Two-stage pipeline: under-complete NMF, GSVD recovery, refinement.
    GsvdNmf(GsvdNmfArgs),
    /// Print the generalized singular value spectrum for rank guidance.
    Spectrum(SpectrumArgs),
    /// Seeded restart comparison of standard NMF against the pipeline.
    Bench(BenchArgs),
    /// Generate the synthetic bump dataset with ground truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Random,
    Nndsvd,
    Nndsvda,
    Nndsvdar,
}

impl From<InitArg> for InitMethod {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Random => InitMethod::Random,
            InitArg::Nndsvd => InitMethod::Nndsvd,
            InitArg::Nndsvda => InitMethod::Nndsvda,
            InitArg::Nndsvdar => InitMethod::Nndsvdar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SvdRankArg {
    R0,
    #[value(name = "r0+k")]
    R0PlusK,
}

impl From<SvdRankArg> for SvdRank {
    fn from(v: SvdRankArg) -> Self {
        match v {
            SvdRankArg::R0 => SvdRank::R0,
            SvdRankArg::R0PlusK => SvdRank::R0PlusK,
        }
    }
}

#[derive(Args)]
struct NmfArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of components.
    #[arg(long)]
    rank: usize,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stopping tolerance for the relative-change rule.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GsvdNmfArgs {
    #[arg(long)]
    input: PathBuf,
    /// Final rank; the under-complete stage runs at rank - k.
    #[arg(long)]
    rank: usize,
    /// Components proposed by the recovery step.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Stage-1 stopping tolerance.
    #[arg(long, default_value_t = 1e-4)]
    eps0: f64,
    /// Final stopping tolerance.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Rank of the SVD used by the recovery step.
    #[arg(long, value_enum, default_value = "r0")]
    svd_rank: SvdRankArg,
    #[arg(long, value_enum, default_value = "random")]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rank of the preliminary factorization and of the SVD.
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Rank of the standard runs; the pipeline starts at rank - k.
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    trials: usize,
    /// Trial t uses seed seed_base + t.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    /// Stage-1 stopping tolerance for the pipeline side.
    #[arg(long, default_value_t = 1e-4)]
    eps0: f64,
    /// Final stopping tolerance for both sides.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    features: usize,
    /// Noise level relative to the mean of the clean signal.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::from(0);
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Nmf(args) => cmd_nmf(args),
        Command::GsvdNmf(args) => cmd_gsvd_nmf(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::IterationCap(_) | Error::CollinearDirections => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Loads a factorization input: parse, then gate on nonnegativity.
fn load_nmf_input(path: &Path) -> Result<DenseMatrix, Error> {
    let x = load_matrix(path)?;
    require_nonnegative(&x)?;
    Ok(x)
}

fn check_rank(rank: usize, x: &DenseMatrix) -> Result<(), Error> {
    let max = x.rows().min(x.cols());
    if rank < 1 || rank > max {
        return Err(Error::RankOutOfRange {
            rank,
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    Ok(())
}

fn cmd_nmf(args: NmfArgs) -> Result<(), Error> {
    let x = load_nmf_input(&args.input)?;
    check_rank(args.rank, &x)?;
    let t0 = Instant::now();
    let run = run_standard(
        &x,
        args.rank,
        args.init.into(),
        SolverSettings {
            epsilon: args.eps,
            max_iters: args.max_iters,
            seed: args.seed,
        },
    )?;
    let elapsed = t0.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(
        "nmf",
        json!({
            "rank": args.rank,
            "init": init_name(args.init),
            "seed": args.seed,
            "eps": args.eps,
            "max_iters": args.max_iters,
        }),
    );
    manifest.seed_list = vec![args.seed];
    manifest.dataset = Some(dataset_info(&args.input, &x)?);
    save_factors(&run.factors, &args.out, &manifest)?;
    println!(
        "nmf: rank {} fit {:.6}% after {} sweeps ({elapsed:.2}s) -> {}",
        args.rank,
        run.fit,
        run.sweeps,
        args.out.display()
    );
    Ok(())
}

fn cmd_gsvd_nmf(args: GsvdNmfArgs) -> Result<(), Error> {
    let x = load_nmf_input(&args.input)?;
    check_rank(args.rank, &x)?;
    if args.rank <= args.k || args.rank - args.k < 2 {
        return Err(Error::InvalidConfig(format!(
            "need rank - k >= 2, got rank = {}, k = {}",
            args.rank, args.k
        )));
    }
    let cfg = PipelineConfig {
        r0: args.rank - args.k,
        k: args.k,
        epsilon0: args.eps0,
        epsilon: args.eps,
        svd_rank: args.svd_rank.into(),
        init: args.init.into(),
        seed: args.seed,
        max_iters: args.max_iters,
    };
    let t0 = Instant::now();
    let run = run_pipeline(&x, &cfg)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(
        "gsvd-nmf",
        serde_json::to_value(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?,
    );
    manifest.seed_list = vec![args.seed];
    manifest.dataset = Some(dataset_info(&args.input, &x)?);
    save_factors(&run.factors, &args.out, &manifest)?;
    println!(
        "gsvd-nmf: rank {} (r0 {} + k {}) fit {:.6}% after {}+{} sweeps ({elapsed:.2}s) -> {}",
        run.factors.rank(),
        cfg.r0,
        cfg.k,
        run.fit,
        run.sweeps_stage1,
        run.sweeps_stage2,
        args.out.display()
    );
    Ok(())
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), Error> {
    let x = load_nmf_input(&args.input)?;
    check_rank(args.rank, &x)?;
    let init = init_random(&x, args.rank, args.seed)?;
    let run = run_hals(
        &x,
        init,
        SolverSettings {
            epsilon: 1e-4,
            max_iters: 10_000,
            seed: args.seed,
        },
    )?;
    let svd = truncated_svd(&x, args.rank)?;
    let (spectrum, _) = lambda_spectrum(&svd, &run.factors)?;
    let ordered: Vec<f64> = spectrum.order.iter().map(|&i| spectrum.values[i]).collect();
    write_spectrum(&ordered, std::io::stdout().lock())?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let x = load_nmf_input(&args.input)?;
    check_rank(args.rank, &x)?;
    let cfg = PipelineConfig {
        r0: args.rank.saturating_sub(args.k).max(2),
        k: args.k,
        epsilon0: args.eps0,
        epsilon: args.eps,
        svd_rank: SvdRank::R0,
        init: InitMethod::Random,
        seed: args.seed_base,
        max_iters: args.max_iters,
    };
    let t0 = Instant::now();
    let results = run_comparison(&x, args.rank, args.trials, &cfg)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let hist = diagonal_histogram(&results, DEFAULT_HISTOGRAM_BINS)?;

    std::fs::create_dir_all(&args.out)?;
    write_trials_csv(&results, args.out.join("trials.csv"))?;
    write_histogram_csv(&hist, args.out.join("histogram.csv"))?;

    let mut manifest = RunManifest::new(
        "bench",
        json!({
            "rank": args.rank,
            "k": args.k,
            "trials": args.trials,
            "seed_base": args.seed_base,
            "eps0": args.eps0,
            "eps": args.eps,
            "max_iters": args.max_iters,
        }),
    );
    manifest.seed_list = results.iter().map(|t| t.seed).collect();
    manifest.dataset = Some(dataset_info(&args.input, &x)?);
    for name in ["trials.csv", "histogram.csv", "manifest.json"] {
        manifest
            .outputs
            .push(args.out.join(name).display().to_string());
    }
    manifest.write(args.out.join("manifest.json"))?;

    let mut deltas: Vec<f64> = results
        .iter()
        .map(|t| t.fit_standard - t.fit_gsvd)
        .collect();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if deltas.len() % 2 == 1 {
        deltas[deltas.len() / 2]
    } else {
        0.5 * (deltas[deltas.len() / 2 - 1] + deltas[deltas.len() / 2])
    };
    println!(
        "bench: {} trials, median(fit_standard - fit_gsvd) = {:+.6}, {:.1}s -> {}",
        results.len(),
        median,
        elapsed,
        args.out.display()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let (x, truth) = gen_synthetic(args.features, 200, 300, args.noise, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    save_matrix_csv(&x, args.out.join("X.csv"))?;
    save_matrix_csv(&truth.w, args.out.join("W_true.csv"))?;
    save_matrix_csv(&truth.h, args.out.join("H_true.csv"))?;

    let mut manifest = RunManifest::new(
        "synth",
        json!({
            "features": args.features,
            "rows": 200,
            "cols": 300,
            "noise": args.noise,
            "seed": args.seed,
        }),
    );
    manifest.seed_list = vec![args.seed];
    for name in ["X.csv", "W_true.csv", "H_true.csv", "manifest.json"] {
        manifest
            .outputs
            .push(args.out.join(name).display().to_string());
    }
    manifest.write(args.out.join("manifest.json"))?;
    println!(
        "synth: {} features, noise {}, seed {} -> {}",
        args.features,
        args.noise,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn init_name(v: InitArg) -> &'static str {
    match v {
        InitArg::Random => "random",
        InitArg::Nndsvd => "nndsvd",
        InitArg::Nndsvda => "nndsvda",
        InitArg::Nndsvdar => "nndsvdar",
    }
}
