//! Command-line driver tying the pipeline together: compile, run (all three
//! backends), deal, bench-conv and report. The binary in `src/bin/tmpc.rs`
//! is a thin wrapper around [`run`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::comm::{check_symmetry, total_elements, CommReport, Phase};
use crate::compile::compile_to_llil;
use crate::container;
use crate::dealer;
use crate::error::{Error, Result};
use crate::fixed::quantize;
use crate::interp::{eval_fixed, eval_float};
use crate::net::{connect_mesh, local_mesh, run_parties, MeshKeys, PartyConfig};
use crate::protocol::conv::{conv2d_protocol, conv_cost_elements, ConvMode};
use crate::protocol::exec::run_llil_mpc;
use crate::protocol::{share_tensor, PartyId, ProtocolFlags};
use crate::sweep::{sweep_scale, SweepConfig, SweepMetric, SweepReport, DEFAULT_S_MAX, DEFAULT_S_MIN};
use crate::tensor::{Tensor, TensorData};

#[derive(Parser)]
#[command(name = "tmpc", version, about = "Fixed-point compiler and 3-party inference runtime")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower a floating-point model to a fixed-point program.
    Compile(CompileArgs),
    /// Evaluate a model: float or fixed in-process, or as one MPC party.
    Run(RunArgs),
    /// Split a program's weights and an input into per-party share files.
    Deal(DealArgs),
    /// Measure convolution traffic per mode against the analytic formulas.
    BenchConv(BenchConvArgs),
    /// Merge and print communication reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// HLIL model container.
    #[arg(long)]
    model: PathBuf,
    /// Output path for the LLIL container.
    #[arg(long)]
    out: PathBuf,
    /// Fixed scale in bits.
    #[arg(long, conflicts_with = "sweep")]
    scale: Option<u32>,
    /// Directory of calibration input tensors; the scale is swept.
    #[arg(long)]
    sweep: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::ArgmaxAgreement)]
    metric: MetricArg,
    #[arg(long, default_value_t = DEFAULT_S_MIN)]
    s_min: u32,
    #[arg(long, default_value_t = DEFAULT_S_MAX)]
    s_max: u32,
    /// Where to write the sweep report JSON (defaults beside --out).
    #[arg(long)]
    sweep_report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    ArgmaxAgreement,
    MaxAbsError,
}

impl From<MetricArg> for SweepMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::ArgmaxAgreement => SweepMetric::ArgmaxAgreement,
            MetricArg::MaxAbsError => SweepMetric::MaxAbsError,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum BackendArg {
    Float,
    Fixed,
    Mpc,
}

#[derive(Args)]
struct RunArgs {
    /// Model container (HLIL for float, LLIL for fixed, dealt program.llil
    /// for mpc).
    #[arg(long)]
    model: PathBuf,
    /// Input tensor file (float/fixed) or deal directory (mpc).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    /// Compile on the fly at this scale when handing an HLIL model to the
    /// fixed backend.
    #[arg(long)]
    scale: Option<u32>,
    /// This process's party id (mpc).
    #[arg(long)]
    party: Option<u8>,
    /// Party config path (mpc).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the output tensor here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the im2col convolution triple instead of the reshaped one.
    #[arg(long)]
    naive_conv: bool,
    /// Send both shares of every helper-dealt pair instead of deriving one.
    #[arg(long)]
    no_prf_opt: bool,
    /// Print the list of files this process opened.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct DealArgs {
    /// LLIL program container.
    #[arg(long)]
    model: PathBuf,
    /// Input tensor (f32 gets quantized at the program scale).
    #[arg(long)]
    input: PathBuf,
    /// Output directory for program.llil and the per-party share dirs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchConvArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    f: usize,
    /// Comma-separated subset of {naive, reshaped}.
    #[arg(long, default_value = "naive,reshaped")]
    modes: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the comparison as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-party CommReport JSON files.
    files: Vec<PathBuf>,
}

/// Parse argv and dispatch; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; 2 for usage errors, 0 for --help.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compile(args) => cmd_compile(args),
        Command::Run(args) => cmd_run(args),
        Command::Deal(args) => cmd_deal(args),
        Command::BenchConv(args) => cmd_bench_conv(args),
        Command::Report(args) => cmd_report(args),
    }
}

thread_local! {
    static FILE_LOG: RefCell<Option<Vec<PathBuf>>> = const { RefCell::new(None) };
}

fn read_logged(path: &Path) -> Result<Vec<u8>> {
    FILE_LOG.with(|log| {
        if let Some(log) = log.borrow_mut().as_mut() {
            log.push(path.to_path_buf());
        }
    });
    std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn print_sweep_table(report: &SweepReport) {
    println!("{:>6} {:>12} {:>9}", "scale", "metric", "overflow");
    for e in &report.entries {
        println!(
            "{:>6} {:>12.4} {:>9}",
            e.scale,
            e.metric,
            if e.overflow { "yes" } else { "" }
        );
    }
    println!("chosen scale: {}", report.chosen);
}

fn cmd_compile(args: CompileArgs) -> Result<()> {
    let model = container::parse_model(&read_logged(&args.model)?)?;
    let scale = match (args.scale, &args.sweep) {
        (Some(s), None) => s,
        (None, Some(dir)) => {
            if !dir.is_dir() {
                return Err(Error::Usage(format!(
                    "--sweep needs a calibration directory, {} is not one",
                    dir.display()
                )));
            }
            let mut calibration = Vec::new();
            let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "tmpt"))
                .collect();
            paths.sort();
            for p in paths {
                let input = container::parse_tensor(&read_logged(&p)?)?.as_f32()?.clone();
                let reference = eval_float(&model, &input)?;
                calibration.push((input, reference));
            }
            let cfg = SweepConfig {
                s_min: args.s_min,
                s_max: args.s_max,
                calibration,
                metric: args.metric.into(),
            };
            let report = sweep_scale(&model, &cfg)?;
            print_sweep_table(&report);
            let report_path = args
                .sweep_report
                .clone()
                .unwrap_or_else(|| args.out.with_extension("sweep.json"));
            std::fs::write(&report_path, serde_json::to_vec_pretty(&report)?)?;
            println!("sweep report: {}", report_path.display());
            report.chosen
        }
        (None, None) => {
            return Err(Error::Usage("pass either --scale N or --sweep DIR".into()))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let program = compile_to_llil(&model, scale)?;
    std::fs::write(&args.out, container::write_llil(&program)?)?;
    println!("scale: {scale}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_output(out: &TensorData) {
    match out {
        TensorData::F32(t) => {
            if t.len() == 1 {
                println!("output: {}", t.data()[0]);
            } else {
                println!("output {:?}: {:?}", t.shape(), t.data());
            }
        }
        TensorData::I64(t) => {
            if t.len() == 1 {
                println!("output: {}", t.data()[0]);
            } else {
                let signed: Vec<i64> = t.data().iter().map(|&x| x as i64).collect();
                println!("output {:?}: {:?}", t.shape(), signed);
            }
        }
    }
}

fn write_output(path: &Option<PathBuf>, out: &TensorData) -> Result<()> {
    if let Some(path) = path {
        container::write_tensor_file(path, out)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    if args.verbose {
        FILE_LOG.with(|log| *log.borrow_mut() = Some(Vec::new()));
    }
    let started = Instant::now();
    match args.backend {
        BackendArg::Float => {
            let model = container::parse_model(&read_logged(&args.model)?)?;
            let input = container::parse_tensor(&read_logged(&args.input)?)?.as_f32()?.clone();
            let out = TensorData::F32(eval_float(&model, &input)?);
            println!("wall time: {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
            print_output(&out);
            write_output(&args.out, &out)?;
        }
        BackendArg::Fixed => {
            let bytes = read_logged(&args.model)?;
            let program = match container::parse_llil(&bytes) {
                Ok(p) => p,
                Err(_) => {
                    let model = container::parse_model(&bytes)?;
                    let scale = args.scale.ok_or_else(|| {
                        Error::Usage(
                            "fixed backend on an HLIL model needs --scale to compile".into(),
                        )
                    })?;
                    compile_to_llil(&model, scale)?
                }
            };
            let input = match container::parse_tensor(&read_logged(&args.input)?)? {
                TensorData::I64(t) => t,
                TensorData::F32(t) => quantize(&t, program.scale)?,
            };
            let out = TensorData::I64(eval_fixed(&program, &input)?);
            println!("wall time: {:.3} ms", started.elapsed().as_secs_f64() * 1e3);
            print_output(&out);
            write_output(&args.out, &out)?;
        }
        BackendArg::Mpc => return cmd_run_mpc(args, started),
    }
    print_file_log();
    Ok(())
}

fn print_file_log() {
    FILE_LOG.with(|log| {
        if let Some(files) = log.borrow_mut().take() {
            println!("files opened:");
            for f in files {
                println!("  {}", f.display());
            }
        }
    });
}

fn cmd_run_mpc(args: RunArgs, started: Instant) -> Result<()> {
    let party = args
        .party
        .ok_or_else(|| Error::Usage("mpc backend needs --party".into()))?;
    let config_path = args
        .config
        .as_ref()
        .ok_or_else(|| Error::Usage("mpc backend needs --config".into()))?;
    let mut cfg: PartyConfig = serde_json::from_slice(&read_logged(config_path)?)?;
    cfg.validate()?;
    if cfg.party_id != party {
        return Err(Error::Usage(format!(
            "--party {party} does not match config party_id {}",
            cfg.party_id
        )));
    }
    if args.naive_conv {
        cfg.reshaped_conv = false;
    }
    if args.no_prf_opt {
        cfg.prf_opt = false;
    }

    // Parties only ever read the public program and their own share files;
    // the plaintext model never crosses this path.
    let program = container::parse_llil(&read_logged(&args.model)?)?;
    let shares = if party == 2 {
        None
    } else {
        Some(read_party_shares_logged(&args.input, party, &program)?)
    };

    let mut ctx = connect_mesh(&cfg)?;
    let revealed = run_llil_mpc(&mut ctx, &program, shares.as_ref())?;
    println!("wall time: {:.3} ms", started.elapsed().as_secs_f64() * 1e3);

    let report = ctx.comm_report();
    let report_path = args
        .out
        .clone()
        .map(|p| p.with_extension(format!("comm.p{party}.json")))
        .unwrap_or_else(|| PathBuf::from(format!("comm.p{party}.json")));
    std::fs::write(&report_path, serde_json::to_vec_pretty(&report)?)?;
    println!("comm report: {}", report_path.display());

    if let Some(out) = revealed {
        print_output(&out);
        write_output(&args.out, &out)?;
    }
    print_file_log();
    Ok(())
}

fn read_party_shares_logged(
    deal_dir: &Path,
    party: u8,
    program: &crate::graph::LlilProgram,
) -> Result<crate::protocol::exec::PartyShares> {
    let pdir = deal_dir.join(format!("p{party}"));
    let input =
        container::parse_tensor(&read_logged(&pdir.join("input.tmpt"))?)?.as_i64()?.clone();
    let mut weights = BTreeMap::new();
    for &id in program.weights.keys() {
        let w = container::parse_tensor(&read_logged(&pdir.join(format!("w{id}.tmpt")))?)?
            .as_i64()?
            .clone();
        weights.insert(id, w);
    }
    Ok(crate::protocol::exec::PartyShares { input, weights })
}

fn cmd_deal(args: DealArgs) -> Result<()> {
    let program = container::parse_llil(&read_logged(&args.model)?)?;
    let input = match container::parse_tensor(&read_logged(&args.input)?)? {
        TensorData::I64(t) => t,
        TensorData::F32(t) => quantize(&t, program.scale)?,
    };
    dealer::write_dealt(&args.out, &program, &input, args.seed)?;
    println!("dealt shares to {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BenchModeRow {
    mode: String,
    measured_elements: u64,
    analytic_elements: u64,
    bytes: u64,
    wall_ms: f64,
}

#[derive(Serialize)]
struct BenchConvReport {
    m: usize,
    f: usize,
    rows: Vec<BenchModeRow>,
    /// naive / reshaped analytic element ratio.
    ratio: f64,
}

fn cmd_bench_conv(args: BenchConvArgs) -> Result<()> {
    if args.f > args.m {
        return Err(Error::Validation(format!(
            "filter {} larger than image {}",
            args.f, args.m
        )));
    }
    let modes: Vec<ConvMode> = args
        .modes
        .split(',')
        .map(|s| match s.trim() {
            "naive" => Ok(ConvMode::Naive),
            "reshaped" => Ok(ConvMode::Reshaped),
            other => Err(Error::Usage(format!("unknown mode {other:?}"))),
        })
        .collect::<Result<_>>()?;

    let (m, f) = (args.m, args.f);
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let image = Tensor::new(vec![m, m], (0..m * m).map(|_| rand::Rng::gen(&mut rng)).collect())?;
    let filter = Tensor::new(vec![f, f], (0..f * f).map(|_| rand::Rng::gen(&mut rng)).collect())?;
    let (i0, i1) = share_tensor(&image, &mut rng);
    let (f0, f1) = share_tensor(&filter, &mut rng);

    let mut rows = Vec::new();
    for mode in &modes {
        let keys = MeshKeys::from_seed(args.seed);
        let ctxs = local_mesh(&keys, ProtocolFlags::default(), args.seed);
        let started = Instant::now();
        let (_, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => conv2d_protocol(ctx, Some(&i0), Some(&f0), (m, m), (f, f), *mode),
            PartyId::P1 => conv2d_protocol(ctx, Some(&i1), Some(&f1), (m, m), (f, f), *mode),
            PartyId::P2 => conv2d_protocol(ctx, None, None, (m, m), (f, f), *mode),
        })?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;
        let reports: Vec<CommReport> = ctxs.iter().map(|c| c.comm_report()).collect();
        check_symmetry(&reports)?;
        rows.push(BenchModeRow {
            mode: format!("{mode:?}").to_lowercase(),
            measured_elements: total_elements(&reports, &Phase::REVEAL),
            analytic_elements: conv_cost_elements(m, f, *mode),
            bytes: reports.iter().map(|r| r.sent_bytes(&Phase::ALL)).sum(),
            wall_ms,
        });
    }

    let ratio = conv_cost_elements(m, f, ConvMode::Naive) as f64
        / conv_cost_elements(m, f, ConvMode::Reshaped) as f64;
    let report = BenchConvReport { m, f, rows, ratio };

    println!(
        "{:>9} {:>10} {:>10} {:>12} {:>9}",
        "mode", "elements", "analytic", "bytes", "wall ms"
    );
    for row in &report.rows {
        println!(
            "{:>9} {:>10} {:>10} {:>12} {:>9.2}",
            row.mode, row.measured_elements, row.analytic_elements, row.bytes, row.wall_ms
        );
    }
    let magnitude = if ratio >= 100.0 {
        " (order(s) of magnitude)"
    } else if ratio >= 10.0 {
        " (order of magnitude)"
    } else {
        ""
    };
    println!("naive/reshaped ratio: {ratio:.1}x{magnitude}");
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    if args.files.is_empty() {
        return Err(Error::Usage("pass at least one comm report JSON".into()));
    }
    let mut reports = Vec::new();
    for path in &args.files {
        let report: CommReport = serde_json::from_slice(&read_logged(path)?)?;
        reports.push(report);
    }
    println!("{:>5} {:>4} {:>14} {:>12} {:>12}", "from", "to", "phase", "elements", "bytes");
    for r in &reports {
        for e in r.entries.iter().filter(|e| e.from == r.party) {
            println!(
                "{:>5} {:>4} {:>14} {:>12} {:>12}",
                e.from, e.to, e.phase, e.elements, e.bytes
            );
        }
    }
    let total_elems = total_elements(&reports, &Phase::ALL);
    let total_bytes: u64 = reports.iter().map(|r| r.sent_bytes(&Phase::ALL)).sum();
    println!("total: {total_elems} elements, {total_bytes} bytes");
    if reports.len() == 3 {
        check_symmetry(&reports)?;
        println!("counter symmetry: ok");
    }
    Ok(())
}
