//! Command-line front end: run the three detection benches, score outputs,
//! simulate platform energy, build RR-ratio thresholds, generate synthetic
//! records, and prepare fixture data.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rpeak_core::config;
use rpeak_core::corpus;
use rpeak_core::energy::{
    calibrate, load_cost_model, load_power_profile, simulate, trace_always_bayeslope,
    trace_always_lightweight, trace_from_decisions, CalibrationTargets, CostModel, PowerProfile,
};
use rpeak_core::errdet::{build_thresholds, rr_ratios, RrRatioSeries, RrThresholds};
use rpeak_core::eval::{match_peaks, render_table, scores, timing_stats, MatchResult, ScoreRow};
use rpeak_core::pipeline::{run_bench, BenchKind, DetectionReport, PipelineConfig};
use rpeak_core::signal::{
    downsample, load_annotations, load_ecg, save_annotations, save_ecg_csv, synthesize_ecg,
    EcgFormat, PeakList, SynthesisSpec,
};

#[derive(Parser)]
#[command(
    name = "rpeak",
    version,
    about = "Adaptive R-peak detection and platform energy simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a detection bench over one or more records.
    Detect(DetectArgs),
    /// Score detections against annotations.
    Eval(EvalArgs),
    /// Simulate platform energy for a detection report or compare benches.
    Energy(EnergyArgs),
    /// Build RR-ratio thresholds from annotated segments.
    Dist(DistArgs),
    /// Generate a synthetic record with ground-truth annotations.
    Synth(SynthArgs),
    /// Emit columnar series from peak or report files for plotting.
    Plotdata(PlotdataArgs),
    /// Write the committed fixture segments and manifest.
    Fixtures(FixturesArgs),
    /// Copy or download the open dataset and verify its manifest.
    Fetch(FetchArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// lightweight | bayeslope | adaptive
    #[arg(long)]
    bench: String,
    /// Input record(s), CSV with an fs=<int> header.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Input encoding: csv | wfdb_text
    #[arg(long, default_value = "csv")]
    format: String,
    /// RR-ratio threshold file (adaptive bench). Defaults to the built-in
    /// reference band when omitted.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// key=value detector overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $RPEAK_OUT_DIR or the current directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Resample inputs to this rate before detection.
    #[arg(long)]
    target_fs: Option<u32>,
    /// Worker threads across input files.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Detected peak file(s), `label=path` or bare path.
    #[arg(long = "detected", required = true)]
    detected: Vec<String>,
    #[arg(long)]
    annotations: PathBuf,
    /// Sampling rate of the index files.
    #[arg(long)]
    fs: u32,
    /// Matching tolerance in milliseconds.
    #[arg(long, default_value_t = 150.0)]
    tol: f64,
    /// Segment-class label for the report rows.
    #[arg(long, default_value = "all")]
    class: String,
}

#[derive(Args)]
struct EnergyArgs {
    /// Detection report from `detect --bench adaptive`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Power profile overrides (key=value).
    #[arg(long)]
    power: Option<PathBuf>,
    /// Cost model overrides (key=value).
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Skip re-solving cycle constants against the published bench energies.
    #[arg(long)]
    no_calibrate: bool,
    /// Print the three bench totals for a segment of this many seconds.
    #[arg(long)]
    bench_compare: Option<f64>,
    #[arg(long, default_value_t = 250)]
    fs: u32,
    /// Write the energy report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    #[command(subcommand)]
    action: DistAction,
}

#[derive(Subcommand)]
enum DistAction {
    /// Pool RR ratios from every manifest segment's annotations.
    Build {
        /// Segment manifest (id,class,path,checksum).
        #[arg(long)]
        manifest: PathBuf,
        /// Subject/segment id to exclude (leave-one-out).
        #[arg(long)]
        exclude: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 25.0)]
    duration: f64,
    #[arg(long, default_value_t = 250)]
    fs: u32,
    /// Constant heart rate in bpm.
    #[arg(long)]
    hr: Option<f64>,
    /// Linear ramp `start:end` in bpm over the record.
    #[arg(long)]
    hr_ramp: Option<String>,
    /// Amplitude step `gain@seconds` (e.g. 0.4@5).
    #[arg(long)]
    amp_step: Option<String>,
    /// Per-beat alternation `gain@seconds`: every other beat scaled.
    #[arg(long)]
    amp_alternate: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    twave_gain: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes <prefix>.csv and <prefix>.ann.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotdataArgs {
    /// Peak index file: emits index,time_s,rr_ms,rr_ratio columns.
    #[arg(long)]
    peaks: Option<PathBuf>,
    #[arg(long)]
    fs: Option<u32>,
    /// Detection report: emits window,error,bs_invoked,bs_windows columns.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixturesArgs {
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    /// file:// path (or plain directory) or http(s) manifest URL.
    #[arg(long)]
    url: String,
    #[arg(long)]
    dest: PathBuf,
}

fn main() {
    reset_sigpipe();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

/// Die quietly when a consumer like `head` closes the pipe.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Detect(args) => cmd_detect(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Energy(args) => cmd_energy(args),
        Command::Dist(args) => match args.action {
            DistAction::Build {
                manifest,
                exclude,
                out,
            } => cmd_dist_build(&manifest, exclude.as_deref(), &out),
        },
        Command::Synth(args) => cmd_synth(args),
        Command::Plotdata(args) => cmd_plotdata(args),
        Command::Fixtures(args) => {
            let manifest = corpus::prepare_fixtures(&args.out_dir)?;
            println!(
                "wrote {} fixture segments to {}",
                manifest.entries.len(),
                args.out_dir.display()
            );
            Ok(())
        }
        Command::Fetch(args) => {
            let manifest = corpus::fetch_open_dataset(&args.url, &args.dest)?;
            println!(
                "fetched and verified {} segments into {}",
                manifest.entries.len(),
                args.dest.display()
            );
            Ok(())
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("RPEAK_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parse_format(s: &str) -> Result<EcgFormat> {
    match s {
        "csv" => Ok(EcgFormat::Csv),
        "wfdb_text" => Ok(EcgFormat::WfdbText),
        other => bail!("unknown format '{other}' (expected csv or wfdb_text)"),
    }
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let bench =
        BenchKind::parse(&args.bench).ok_or_else(|| anyhow!("unknown bench '{}'", args.bench))?;
    let fmt = parse_format(&args.format)?;
    let thresholds = match (&args.thresholds, bench) {
        (Some(path), _) => Some(RrThresholds::load(path).context("loading thresholds")?),
        (None, BenchKind::Adaptive) => Some(RrThresholds::reference()),
        (None, _) => None,
    };
    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;

    let overrides = args
        .config
        .as_ref()
        .map(|p| config::parse_kv(p).map_err(|e| anyhow!("config {}: {e}", p.display())))
        .transpose()?;

    let process = |input: &PathBuf| -> Result<String> {
        let mut rec =
            load_ecg(input, fmt).with_context(|| format!("loading {}", input.display()))?;
        if let Some(target) = args.target_fs {
            rec = downsample(&rec, target)?;
            eprintln!(
                "note: {} resampled to {target} Hz (63-tap windowed-sinc anti-alias)",
                input.display()
            );
        }
        let mut cfg = PipelineConfig::for_fs(rec.fs());
        if let Some(map) = &overrides {
            config::apply_overrides(&mut cfg, map, rec.fs()).map_err(|e| anyhow!(e))?;
        }
        let report = run_bench(&rec, bench, thresholds.as_ref(), &cfg)
            .with_context(|| format!("processing {}", input.display()))?;
        let stem = input
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("record");
        let peaks_path = dir.join(format!("{stem}.{bench}.peaks.txt"));
        let report_path = dir.join(format!("{stem}.{bench}.report.txt"));
        write_peaks(&report.peaks, report.fs, &peaks_path)?;
        std::fs::write(&report_path, report.render())
            .with_context(|| format!("writing {}", report_path.display()))?;
        Ok(format!(
            "{}: {} peaks, trigger_fraction={:.3} -> {}",
            input.display(),
            report.peaks.len(),
            report.trigger_fraction,
            peaks_path.display()
        ))
    };

    let jobs = args.jobs.max(1);
    if jobs == 1 || args.inputs.len() == 1 {
        for input in &args.inputs {
            println!("{}", process(input)?);
        }
    } else {
        let results: Vec<Result<String>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in args.inputs.chunks(args.inputs.len().div_ceil(jobs)) {
                handles.push(scope.spawn(move || chunk.iter().map(process).collect::<Vec<_>>()));
            }
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for r in results {
            println!("{}", r?);
        }
    }
    Ok(())
}

/// Peak files carry their rate as a comment so downstream commands can
/// refuse mixed-rate comparisons.
fn write_peaks(peaks: &PeakList, fs: u32, path: &Path) -> Result<()> {
    let mut text = format!("# fs={fs}\n");
    for idx in peaks.indices() {
        text.push_str(&format!("{idx}\n"));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn fs_comment(path: &Path) -> Option<u32> {
    let text = std::fs::read_to_string(path).ok()?;
    text.lines()
        .take(5)
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|c| {
            c.trim()
                .strip_prefix("fs=")
                .and_then(|v| v.trim().parse().ok())
        })
}

fn check_fs(path: &Path, expected: u32) -> Result<()> {
    if let Some(file_fs) = fs_comment(path) {
        if file_fs != expected {
            bail!(
                "{} declares fs={file_fs} but --fs is {expected}",
                path.display()
            );
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    check_fs(&args.annotations, args.fs)?;
    let ann = load_annotations(&args.annotations)?;
    let mut rows = Vec::new();
    for spec in &args.detected {
        let (label, path) = match spec.split_once('=') {
            Some((label, path)) => (label.to_string(), PathBuf::from(path)),
            None => (
                Path::new(spec)
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("detector")
                    .to_string(),
                PathBuf::from(spec),
            ),
        };
        check_fs(&path, args.fs)?;
        let det = load_annotations(&path)?;
        let result = match_peaks(det.indices(), ann.indices(), args.tol, args.fs);
        rows.push(ScoreRow {
            detector: label,
            class: args.class.clone(),
            result,
        });
    }
    print!("{}", render_table(&rows));
    if rows.len() > 1 {
        let pooled = MatchResult::pooled(rows.iter().map(|r| &r.result));
        if let (Ok(s), Ok((mean, sd))) = (scores(&pooled), timing_stats(&pooled)) {
            println!(
                "pooled: F1={:.1}% PPV={:.1}% Se={:.1}% time {mean:.1}+/-{sd:.1} ms",
                s.f1 * 100.0,
                s.ppv * 100.0,
                s.sensitivity * 100.0
            );
        }
        let per: Vec<f64> = rows
            .iter()
            .filter_map(|r| scores(&r.result).ok().map(|s| s.f1))
            .collect();
        if !per.is_empty() {
            println!(
                "per-segment mean F1={:.1}%",
                100.0 * per.iter().sum::<f64>() / per.len() as f64
            );
        }
    }
    Ok(())
}

fn cmd_energy(args: EnergyArgs) -> Result<()> {
    let prof = match &args.power {
        Some(path) => load_power_profile(path)?,
        None => PowerProfile::default(),
    };
    let base_cost = match &args.cost {
        Some(path) => load_cost_model(path)?,
        None => CostModel::default(),
    };
    let cost = if args.no_calibrate {
        base_cost
    } else {
        calibrate(
            &base_cost,
            &CalibrationTargets {
                fs: args.fs,
                ..CalibrationTargets::default()
            },
            &prof,
        )?
    };

    if let Some(seconds) = args.bench_compare {
        let n = (seconds * args.fs as f64).round() as usize;
        let e_lw = simulate(&trace_always_lightweight(n, args.fs, &cost, &prof), &prof)?.total_j;
        let e_bs = simulate(&trace_always_bayeslope(n, args.fs, &cost, &prof), &prof)?.total_j;
        println!("bench,seconds,total_mj");
        println!("lightweight,{seconds},{:.6}", e_lw * 1e3);
        println!("bayeslope,{seconds},{:.6}", e_bs * 1e3);
        if let Some(report_path) = &args.report {
            let report = DetectionReport::parse(&std::fs::read_to_string(report_path)?)?;
            let e_ad = simulate(&trace_from_decisions(&report, &cost, &prof)?, &prof)?.total_j;
            println!(
                "adaptive,{:.3},{:.6}",
                report.record_len as f64 / report.fs as f64,
                e_ad * 1e3
            );
        }
        return Ok(());
    }

    let report_path = args
        .report
        .as_ref()
        .ok_or_else(|| anyhow!("--report or --bench-compare required"))?;
    let report = DetectionReport::parse(&std::fs::read_to_string(report_path)?)?;
    let trace = trace_from_decisions(&report, &cost, &prof)?;
    let energy = simulate(&trace, &prof)?;
    let rendered = format!(
        "# duty-cycle energy for {} ({} windows, trigger_fraction={:.3})\n# cycle constants are calibration artifacts\n{}",
        report_path.display(),
        report.full_windows,
        report.trigger_fraction,
        energy.render()
    );
    match &args.out {
        Some(path) => {
            std::fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn cmd_dist_build(manifest_path: &Path, exclude: Option<&str>, out: &Path) -> Result<()> {
    let manifest = corpus::load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut subjects: BTreeMap<String, RrRatioSeries> = BTreeMap::new();
    for entry in &manifest.entries {
        let ann = load_annotations(&base.join(entry.annotation_path()))?;
        subjects.insert(entry.id.clone(), rr_ratios(&ann));
    }
    let thr = build_thresholds(&subjects, exclude)?;
    if thr.is_low_sample() {
        eprintln!(
            "warning: only {} pooled ratios; tail percentiles may be unstable",
            thr.source_count
        );
    }
    thr.save(out)?;
    println!(
        "thresholds p_low={:.4} p_high={:.4} from {} ratios (excluded: {}) -> {}",
        thr.p_low,
        thr.p_high,
        thr.source_count,
        exclude.unwrap_or("none"),
        out.display()
    );
    Ok(())
}

fn parse_at(spec: &str) -> Result<(f64, f64)> {
    let (value, at) = spec
        .split_once('@')
        .ok_or_else(|| anyhow!("expected value@seconds, got '{spec}'"))?;
    Ok((
        value.parse().context("value before @")?,
        at.trim_end_matches('s').parse().context("time after @")?,
    ))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthesisSpec::constant(args.duration, args.fs, args.hr.unwrap_or(75.0));
    if let Some(ramp) = &args.hr_ramp {
        let (a, b) = ramp
            .split_once(':')
            .ok_or_else(|| anyhow!("expected start:end bpm, got '{ramp}'"))?;
        spec.hr_profile = vec![
            (0.0, a.parse().context("ramp start")?),
            (args.duration, b.parse().context("ramp end")?),
        ];
    }
    if let Some(step) = &args.amp_step {
        let (gain, at) = parse_at(step)?;
        spec.amplitude_profile = vec![(0.0, 1.0), (at - 1e-4, 1.0), (at, gain)];
    }
    if let Some(alt) = &args.amp_alternate {
        let (gain, at) = parse_at(alt)?;
        spec.amplitude_profile = alternating_profile(&spec, gain, at);
    }
    spec.t_wave_gain = args.twave_gain;
    spec.noise_sd_uv = args.noise_sd;
    spec.seed = args.seed;
    let (rec, truth) = synthesize_ecg(&spec)?;
    let csv = args.out.with_extension("csv");
    let ann = args.out.with_extension("ann");
    save_ecg_csv(&rec, &csv)?;
    save_annotations(&truth, &ann)?;
    println!(
        "wrote {} ({} samples at {} Hz) and {} ({} beats)",
        csv.display(),
        rec.len(),
        rec.fs(),
        ann.display(),
        truth.len()
    );
    Ok(())
}

/// Per-beat alternation encoded as amplitude nodes at the beat instants of
/// a constant-rate spec.
fn alternating_profile(spec: &SynthesisSpec, gain: f64, start_s: f64) -> Vec<(f64, f64)> {
    let bpm = spec.hr_profile[0].1;
    let rr = 60.0 / bpm;
    let mut amp = vec![(0.0, 1.0), (start_s - 1e-4, 1.0)];
    let mut t = rr;
    let mut small = false;
    while t < spec.duration_s {
        if t >= start_s {
            amp.push((t, if small { gain } else { 1.0 }));
            small = !small;
        }
        t += rr;
    }
    amp
}

fn cmd_plotdata(args: PlotdataArgs) -> Result<()> {
    let mut out = String::new();
    match (&args.peaks, &args.report) {
        (Some(peaks_path), None) => {
            let fs = args
                .fs
                .or_else(|| fs_comment(peaks_path))
                .ok_or_else(|| anyhow!("--fs required (no fs comment in file)"))?;
            let peaks = load_annotations(peaks_path)?;
            out.push_str("beat,time_s,rr_ms,rr_ratio\n");
            let idx = peaks.indices();
            for k in 0..idx.len() {
                let t = idx[k] as f64 / fs as f64;
                let rr = if k > 0 {
                    format!("{:.1}", (idx[k] - idx[k - 1]) as f64 * 1000.0 / fs as f64)
                } else {
                    String::new()
                };
                let ratio = if k > 1 {
                    format!(
                        "{:.4}",
                        (idx[k] - idx[k - 1]) as f64 / (idx[k - 1] - idx[k - 2]) as f64
                    )
                } else {
                    String::new()
                };
                out.push_str(&format!("{k},{t:.4},{rr},{ratio}\n"));
            }
        }
        (None, Some(report_path)) => {
            let report = DetectionReport::parse(&std::fs::read_to_string(report_path)?)?;
            out.push_str("window,error,bs_invoked,bs_windows\n");
            for d in &report.decisions {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    d.window_index, d.error_flag as u8, d.bs_invoked as u8, d.bs_window_count
                ));
            }
        }
        _ => bail!("pass exactly one of --peaks or --report"),
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{out}"),
    }
    Ok(())
}
