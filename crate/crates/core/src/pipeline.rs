//! Orchestration of the full adaptive data-flow: preprocess, run the
//! lightweight detector per window, check its output with the RR-ratio
//! band, and on failure dispatch the slope detector over one or two
//! windows; merge the per-window outputs into one peak list.
//!
//! The window-transfer rule mirrors the platform implementation: when a
//! window fails and the previous window was clean, two windows are shipped
//! so the slope detector can initialize on the clean one; when the previous
//! window had already failed, the detector state is carried and only the
//! new window is shipped.

use std::fmt;

use thiserror::Error;

use crate::bayeslope::{self, BayeSlopeError, BayeSlopeParams, BayeSlopeState};
use crate::errdet::{check_window, RrThresholds};
use crate::hysteresis::{self, HysteresisConfig};
use crate::preprocess::{detection_stream, PreprocessConfig, PreprocessError};
use crate::signal::{EcgRecord, PeakList, PeakSource, WindowGeometry};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    BayeSlope(#[from] BayeSlopeError),
    #[error("record too short: {windows} full windows after preprocessing, need {need}")]
    TooShort { windows: usize, need: usize },
    #[error("the adaptive bench requires RR-ratio thresholds")]
    MissingThresholds,
    #[error("malformed report: {0}")]
    BadReport(String),
}

/// The three execution schemes under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchKind {
    /// Hysteresis detector on every window.
    Lightweight,
    /// Slope detector on every window.
    BayeSlope,
    /// Lightweight everywhere, slope detector on flagged windows.
    Adaptive,
}

impl fmt::Display for BenchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            BenchKind::Lightweight => "lightweight",
            BenchKind::BayeSlope => "bayeslope",
            BenchKind::Adaptive => "adaptive",
        };
        write!(f, "{name}")
    }
}

impl BenchKind {
    pub fn parse(s: &str) -> Option<BenchKind> {
        Some(match s {
            "lightweight" => BenchKind::Lightweight,
            "bayeslope" => BenchKind::BayeSlope,
            "adaptive" => BenchKind::Adaptive,
            _ => return None,
        })
    }
}

/// Outcome of the error check and dispatch for one analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowDecision {
    pub window_index: usize,
    pub error_flag: bool,
    pub bs_invoked: bool,
    /// Windows shipped to the slope detector for this invocation (0 when
    /// not invoked, 2 when it had to re-initialize on the prior window).
    pub bs_window_count: u8,
    pub peaks_source: PeakSource,
}

/// Full outcome of one bench run over one record.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub bench: BenchKind,
    pub fs: u32,
    /// Raw record length in samples.
    pub record_len: usize,
    /// Delay-compensated stream length actually analyzed.
    pub stream_len: usize,
    pub window_len: usize,
    pub full_windows: usize,
    pub peaks: PeakList,
    pub decisions: Vec<WindowDecision>,
    /// Share of full windows on which the slope detector ran, counting the
    /// extra window shipped for initialization.
    pub trigger_fraction: f64,
}

/// Tunables for one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub hysteresis: HysteresisConfig,
    pub bayeslope: BayeSlopeParams,
}

impl PipelineConfig {
    pub fn for_fs(fs: u32) -> Self {
        Self {
            preprocess: PreprocessConfig::for_fs(fs),
            hysteresis: HysteresisConfig::for_fs(fs),
            bayeslope: BayeSlopeParams::for_fs(fs),
        }
    }
}

/// Runs one bench end to end over a record.
pub fn run_bench(
    rec: &EcgRecord,
    bench: BenchKind,
    thresholds: Option<&RrThresholds>,
    cfg: &PipelineConfig,
) -> Result<DetectionReport, PipelineError> {
    let geom = WindowGeometry::for_fs(rec.fs());
    let stream = detection_stream(rec, &cfg.preprocess)?;
    let full_windows = stream.len() / geom.window_len;
    let need = match bench {
        BenchKind::Lightweight => 1,
        BenchKind::BayeSlope => 2,
        BenchKind::Adaptive => 3,
    };
    if full_windows < need {
        return Err(PipelineError::TooShort {
            windows: full_windows,
            need,
        });
    }
    let mut report = DetectionReport {
        bench,
        fs: rec.fs(),
        record_len: rec.len(),
        stream_len: stream.len(),
        window_len: geom.window_len,
        full_windows,
        peaks: PeakList::default(),
        decisions: Vec::new(),
        trigger_fraction: 0.0,
    };
    match bench {
        BenchKind::Lightweight => {
            let indices = hysteresis::detect_stream(&stream, &geom, &cfg.hysteresis);
            let sources = vec![PeakSource::Lightweight; indices.len()];
            report.peaks =
                PeakList::with_sources(indices, sources).expect("sorted by construction");
        }
        BenchKind::BayeSlope => {
            let mut state =
                bayeslope::init_state(&stream[..cfg.bayeslope.init_len], 0, &cfg.bayeslope)?;
            // Full windows only; the platform never ships a partial window.
            report.peaks = bayeslope::detect(
                &stream[..full_windows * geom.window_len],
                &mut state,
                &cfg.bayeslope,
            );
            report.trigger_fraction = 1.0;
        }
        BenchKind::Adaptive => {
            let thr = thresholds.ok_or(PipelineError::MissingThresholds)?;
            run_adaptive(&stream, &geom, thr, cfg, &mut report)?;
        }
    }
    Ok(report)
}

/// Convenience wrapper for the adaptive scheme.
pub fn process_record(
    rec: &EcgRecord,
    thr: &RrThresholds,
    cfg: &PipelineConfig,
) -> Result<DetectionReport, PipelineError> {
    run_bench(rec, BenchKind::Adaptive, Some(thr), cfg)
}

fn run_adaptive(
    stream: &[f64],
    geom: &WindowGeometry,
    thr: &RrThresholds,
    cfg: &PipelineConfig,
    report: &mut DetectionReport,
) -> Result<(), PipelineError> {
    let w = geom.window_len;
    let full = report.full_windows;

    // Lightweight pass over everything (including the trailing partial
    // window); window 0 seeds the thresholds and provides check context.
    let lw_indices = hysteresis::detect_stream(stream, geom, &cfg.hysteresis);
    let lw_sources = vec![PeakSource::Lightweight; lw_indices.len()];
    let lightweight =
        PeakList::with_sources(lw_indices.clone(), lw_sources).expect("sorted by construction");

    let mut bs_state: Option<BayeSlopeState> = None;
    let mut bayeslope_peaks = PeakList::default();
    let mut context: Vec<usize> = lw_indices.iter().copied().filter(|&p| p < w).collect();
    let mut prev_error = false;

    for k in 1..full {
        let span = k * w..(k + 1) * w;
        let lw_k: Vec<usize> = lw_indices
            .iter()
            .copied()
            .filter(|p| span.contains(p))
            .collect();
        let mut checked: Vec<usize> = Vec::with_capacity(lw_k.len() + 2);
        let ctx_start = context.len().saturating_sub(2);
        checked.extend_from_slice(&context[ctx_start..]);
        checked.extend_from_slice(&lw_k);
        let error = check_window(&checked, thr);

        let mut decision = WindowDecision {
            window_index: k,
            error_flag: error,
            bs_invoked: false,
            bs_window_count: 0,
            peaks_source: PeakSource::Lightweight,
        };
        if error {
            let (emitted, keep_from) = match bs_state.as_mut() {
                // consecutive failure: state carried, one window shipped; a
                // QRS opened near the previous window's end may close now,
                // and that window is triggered territory too, so keep
                // everything the detector emits
                Some(state) if prev_error && state.next_index() == span.start => {
                    decision.bs_window_count = 1;
                    let emitted = bayeslope::detect(&stream[span.clone()], state, &cfg.bayeslope);
                    (emitted, span.start.saturating_sub(w))
                }
                // fresh trigger: initialize on the prior (clean) window,
                // whose peaks stay with the lightweight detector
                _ => {
                    let init_start = (k - 1) * w;
                    let init_span = &stream[init_start..span.end];
                    let mut state = bayeslope::init_state(init_span, init_start, &cfg.bayeslope)?;
                    let emitted = bayeslope::detect(init_span, &mut state, &cfg.bayeslope);
                    bs_state = Some(state);
                    decision.bs_window_count = 2;
                    (emitted, span.start)
                }
            };
            decision.bs_invoked = true;
            decision.peaks_source = PeakSource::BayeSlope;
            let mut kept: Vec<usize> = Vec::new();
            for &p in emitted.indices() {
                if p >= keep_from && p < span.end {
                    kept.push(p);
                }
            }
            for p in &kept {
                bayeslope_peaks.push(*p, Some(PeakSource::BayeSlope));
            }
            context.extend(kept);
        } else {
            bs_state = None;
            context.extend(lw_k);
        }
        prev_error = error;
        report.decisions.push(decision);
    }

    let mut triggered = std::collections::BTreeSet::new();
    for d in &report.decisions {
        if d.bs_invoked {
            triggered.insert(d.window_index);
            if d.bs_window_count == 2 {
                triggered.insert(d.window_index - 1);
            }
        }
    }
    report.trigger_fraction = triggered.len() as f64 / full as f64;
    report.peaks = merge_peaks(
        &lightweight,
        &bayeslope_peaks,
        &report.decisions,
        w,
        cfg.bayeslope.min_rr_dist,
    );
    Ok(())
}

/// Merges the per-window winner of the two detectors: windows on which the
/// slope detector ran contribute its peaks, all others the lightweight
/// ones. Boundary duplicates closer than the refractory distance collapse,
/// keeping the slope detector's peak.
pub fn merge_peaks(
    lightweight: &PeakList,
    bayeslope: &PeakList,
    decisions: &[WindowDecision],
    window_len: usize,
    min_rr_dist: usize,
) -> PeakList {
    let triggered: std::collections::BTreeSet<usize> = decisions
        .iter()
        .filter(|d| d.bs_invoked)
        .map(|d| d.window_index)
        .collect();
    let mut candidates: Vec<(usize, PeakSource)> = Vec::new();
    for &p in lightweight.indices() {
        if !triggered.contains(&(p / window_len)) {
            candidates.push((p, PeakSource::Lightweight));
        }
    }
    for &p in bayeslope.indices() {
        if triggered.contains(&(p / window_len)) {
            candidates.push((p, PeakSource::BayeSlope));
        }
    }
    candidates.sort_by_key(|(p, _)| *p);

    let mut merged: Vec<(usize, PeakSource)> = Vec::with_capacity(candidates.len());
    for (p, src) in candidates {
        match merged.last() {
            Some(&(last, last_src)) if p < last + min_rr_dist => {
                // boundary duplicate: prefer the robust detector's location
                if src == PeakSource::BayeSlope && last_src == PeakSource::Lightweight {
                    merged.pop();
                    merged.push((p, src));
                }
            }
            _ => merged.push((p, src)),
        }
    }
    let (indices, sources): (Vec<usize>, Vec<PeakSource>) = merged.into_iter().unzip();
    PeakList::with_sources(indices, sources).expect("sorted by construction")
}

impl DetectionReport {
    /// Line-oriented report body (peaks are written separately in the
    /// annotation format).
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("bench={}\n", self.bench));
        out.push_str(&format!("fs={}\n", self.fs));
        out.push_str(&format!("record_len={}\n", self.record_len));
        out.push_str(&format!("stream_len={}\n", self.stream_len));
        out.push_str(&format!("window_len={}\n", self.window_len));
        out.push_str(&format!("full_windows={}\n", self.full_windows));
        out.push_str(&format!("trigger_fraction={:.6}\n", self.trigger_fraction));
        out.push_str(&format!("peaks={}\n", self.peaks.len()));
        out.push_str("decisions=window,error,bs_invoked,bs_windows,source\n");
        for d in &self.decisions {
            out.push_str(&format!(
                "d={},{},{},{},{}\n",
                d.window_index,
                d.error_flag as u8,
                d.bs_invoked as u8,
                d.bs_window_count,
                d.peaks_source
            ));
        }
        out
    }

    /// Parses a rendered report (without the peak list).
    pub fn parse(text: &str) -> Result<DetectionReport, PipelineError> {
        let mut bench = None;
        let mut fields = std::collections::BTreeMap::new();
        let mut decisions = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("decisions=") {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::BadReport(format!("bad line '{line}'")))?;
            if k == "bench" {
                bench = BenchKind::parse(v);
                continue;
            }
            if k == "d" {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 5 {
                    return Err(PipelineError::BadReport(format!("bad decision '{v}'")));
                }
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| PipelineError::BadReport(format!("bad number '{s}'")))
                };
                decisions.push(WindowDecision {
                    window_index: num(parts[0])?,
                    error_flag: num(parts[1])? != 0,
                    bs_invoked: num(parts[2])? != 0,
                    bs_window_count: num(parts[3])? as u8,
                    peaks_source: if parts[4] == "bayeslope" {
                        PeakSource::BayeSlope
                    } else {
                        PeakSource::Lightweight
                    },
                });
                continue;
            }
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<usize, PipelineError> {
            fields
                .get(k)
                .ok_or_else(|| PipelineError::BadReport(format!("missing '{k}'")))?
                .parse()
                .map_err(|_| PipelineError::BadReport(format!("bad '{k}'")))
        };
        let bench = bench.ok_or_else(|| PipelineError::BadReport("missing bench".into()))?;
        Ok(DetectionReport {
            bench,
            fs: get("fs")? as u32,
            record_len: get("record_len")?,
            stream_len: get("stream_len")?,
            window_len: get("window_len")?,
            full_windows: get("full_windows")?,
            peaks: PeakList::default(),
            decisions,
            trigger_fraction: fields
                .get("trigger_fraction")
                .and_then(|v| v.parse().ok())
                .unwrap_or(0.0),
        })
    }
}
