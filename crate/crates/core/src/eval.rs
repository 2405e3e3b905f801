//! Detector scoring against annotations: tolerance matching, F1 /
//! positive-predictive-value / sensitivity, and timing-offset statistics.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("undefined score: no peaks on either side")]
    UndefinedScore,
    #[error("undefined timing statistics: no matched peaks")]
    UndefinedTiming,
}

/// Standard matching tolerance between a detection and an annotation.
pub const DEFAULT_TOL_MS: f64 = 150.0;

/// Outcome of matching a detection list against annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// (detected - annotated) offsets of matched pairs, in milliseconds.
    pub time_diffs_ms: Vec<f64>,
}

impl MatchResult {
    /// Pools counts and offsets across segments (sum counts, then score).
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a MatchResult>) -> MatchResult {
        let mut out = MatchResult::default();
        for p in parts {
            out.tp += p.tp;
            out.fp += p.fp;
            out.fn_ += p.fn_;
            out.time_diffs_ms.extend_from_slice(&p.time_diffs_ms);
        }
        out
    }
}

/// Greedy nearest-neighbor matching in time order: each annotation takes
/// the nearest still-unmatched detection within the tolerance (earlier one
/// on ties). Unmatched detections count as false positives, unmatched
/// annotations as false negatives.
pub fn match_peaks(detected: &[usize], annotated: &[usize], tol_ms: f64, fs: u32) -> MatchResult {
    match_peaks_flags(detected, annotated, tol_ms, fs).0
}

/// [`match_peaks`] plus a per-detection matched flag, for callers that
/// score a sub-range and must not penalize out-of-range detections.
pub fn match_peaks_flags(
    detected: &[usize],
    annotated: &[usize],
    tol_ms: f64,
    fs: u32,
) -> (MatchResult, Vec<bool>) {
    let tol = tol_ms * fs as f64 / 1000.0;
    let mut used = vec![false; detected.len()];
    let mut result = MatchResult::default();
    for &ann in annotated {
        let mut best: Option<(usize, f64)> = None;
        for (k, &det) in detected.iter().enumerate() {
            let delta = det as f64 - ann as f64;
            if delta > tol {
                break;
            }
            if used[k] || delta < -tol {
                continue;
            }
            let dist = delta.abs();
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((k, dist));
            }
        }
        match best {
            Some((k, _)) => {
                used[k] = true;
                result.tp += 1;
                result
                    .time_diffs_ms
                    .push((detected[k] as f64 - ann as f64) * 1000.0 / fs as f64);
            }
            None => result.fn_ += 1,
        }
    }
    result.fp = used.iter().filter(|&&u| !u).count();
    (result, used)
}

/// Detection scores in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub f1: f64,
    pub ppv: f64,
    pub sensitivity: f64,
}

/// F1 = TP / (TP + (FP + FN)/2), with PPV and sensitivity alongside.
pub fn scores(m: &MatchResult) -> Result<Scores, EvalError> {
    let (tp, fp, fn_) = (m.tp as f64, m.fp as f64, m.fn_ as f64);
    if tp + fp + fn_ == 0.0 {
        return Err(EvalError::UndefinedScore);
    }
    let f1 = tp / (tp + 0.5 * (fp + fn_));
    let ppv = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let sensitivity = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    Ok(Scores {
        f1,
        ppv,
        sensitivity,
    })
}

/// Mean and sample standard deviation of the matched timing offsets (ms).
pub fn timing_stats(m: &MatchResult) -> Result<(f64, f64), EvalError> {
    if m.time_diffs_ms.is_empty() {
        return Err(EvalError::UndefinedTiming);
    }
    let n = m.time_diffs_ms.len() as f64;
    let mean = m.time_diffs_ms.iter().sum::<f64>() / n;
    let sd = if m.time_diffs_ms.len() >= 2 {
        let var = m
            .time_diffs_ms
            .iter()
            .map(|d| (d - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        var.sqrt()
    } else {
        0.0
    };
    Ok((mean, sd))
}

/// One row of a comparison table.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub detector: String,
    pub class: String,
    pub result: MatchResult,
}

/// Renders rows as a fixed-width text table with F1/PPV/Se percentages and
/// timing mean +/- sd, one line per detector x segment-class pair.
pub fn render_table(rows: &[ScoreRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<16} {:>7} {:>7} {:>7} {:>14} {:>6} {:>5} {:>5}\n",
        "detector", "class", "F1%", "PPV%", "Se%", "time(ms)", "tp", "fp", "fn"
    ));
    for row in rows {
        let s = scores(&row.result);
        let t = timing_stats(&row.result);
        let (f1, ppv, se) = match s {
            Ok(s) => (
                format!("{:.1}", s.f1 * 100.0),
                format!("{:.1}", s.ppv * 100.0),
                format!("{:.1}", s.sensitivity * 100.0),
            ),
            Err(_) => ("-".into(), "-".into(), "-".into()),
        };
        let timing = match t {
            Ok((mean, sd)) => format!("{mean:.1}+/-{sd:.1}"),
            Err(_) => "-".into(),
        };
        out.push_str(&format!(
            "{:<14} {:<16} {:>7} {:>7} {:>7} {:>14} {:>6} {:>5} {:>5}\n",
            row.detector,
            row.class,
            f1,
            ppv,
            se,
            timing,
            row.result.tp,
            row.result.fp,
            row.result.fn_
        ));
    }
    out
}
