//! Statistical detection-error checks over consecutive RR-interval ratios.
//!
//! The ratio RR(n)/RR(n-1) reacts to missed beats (doubling), spurious
//! beats (halving), and noisy stretches with a three-peak resolution. A
//! window is flagged when any of its ratios leaves the band between the
//! 0.5th and 99.5th percentiles of a reference distribution built offline,
//! leave-one-out, from all subjects except the one under analysis.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::signal::PeakList;

#[derive(Debug, Error)]
pub enum ErrdetError {
    #[error("empty ratio pool: no subject data to build thresholds from")]
    EmptyPool,
    #[error("invalid thresholds: {0}")]
    Invalid(String),
    #[error("failed to read {path}: {reason}")]
    File { path: String, reason: String },
}

/// Lower/upper RR-ratio percentile cutoffs plus their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RrThresholds {
    pub p_low: f64,
    pub p_high: f64,
    pub source_count: usize,
    pub excluded_subject: Option<String>,
}

impl RrThresholds {
    pub fn new(p_low: f64, p_high: f64) -> Result<Self, ErrdetError> {
        if p_low.is_nan() || p_high.is_nan() || p_low <= 0.0 || p_high < p_low {
            return Err(ErrdetError::Invalid(format!(
                "need 0 < p_low <= p_high, got ({p_low}, {p_high})"
            )));
        }
        Ok(Self {
            p_low,
            p_high,
            source_count: 0,
            excluded_subject: None,
        })
    }

    /// Reference cutoffs measured on pooled exercise recordings; used when
    /// no subject-specific threshold file is supplied.
    pub fn reference() -> Self {
        Self {
            p_low: 0.64,
            p_high: 1.47,
            source_count: 0,
            excluded_subject: None,
        }
    }

    /// Fewer pooled ratios than this and tail percentiles become unreliable.
    pub const MIN_RELIABLE_POOL: usize = 200;

    pub fn is_low_sample(&self) -> bool {
        self.source_count > 0 && self.source_count < Self::MIN_RELIABLE_POOL
    }

    pub fn save(&self, path: &Path) -> Result<(), ErrdetError> {
        let excluded = self.excluded_subject.as_deref().unwrap_or("none");
        let text = format!(
            "p_low={}\np_high={}\nsource_count={}\nexcluded_subject={}\n",
            self.p_low, self.p_high, self.source_count, excluded
        );
        fs::write(path, text).map_err(|e| ErrdetError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ErrdetError> {
        let text = fs::read_to_string(path).map_err(|e| ErrdetError::File {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            map.get(k).ok_or_else(|| ErrdetError::File {
                path: path.display().to_string(),
                reason: format!("missing key '{k}'"),
            })
        };
        let p_low: f64 = get("p_low")?
            .parse()
            .map_err(|_| ErrdetError::Invalid("unparseable p_low".into()))?;
        let p_high: f64 = get("p_high")?
            .parse()
            .map_err(|_| ErrdetError::Invalid("unparseable p_high".into()))?;
        let mut thr = Self::new(p_low, p_high)?;
        thr.source_count = get("source_count")?.parse().unwrap_or(0);
        let excluded = get("excluded_subject")?;
        thr.excluded_subject = if excluded == "none" {
            None
        } else {
            Some(excluded.clone())
        };
        Ok(thr)
    }
}

/// Consecutive RR ratios with the peak triple each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RrRatioSeries {
    pub ratios: Vec<f64>,
    pub anchors: Vec<[usize; 3]>,
}

/// Ratios `(p[k+2]-p[k+1]) / (p[k+1]-p[k])` over a peak list. Fewer than
/// three peaks yield an empty series.
pub fn rr_ratios(peaks: &PeakList) -> RrRatioSeries {
    rr_ratios_from_indices(peaks.indices())
}

pub fn rr_ratios_from_indices(indices: &[usize]) -> RrRatioSeries {
    let mut series = RrRatioSeries::default();
    if indices.len() < 3 {
        return series;
    }
    for w in indices.windows(3) {
        let rr_prev = (w[1] - w[0]) as f64;
        let rr_next = (w[2] - w[1]) as f64;
        series.ratios.push(rr_next / rr_prev);
        series.anchors.push([w[0], w[1], w[2]]);
    }
    series
}

/// Percentile by linear interpolation between order statistics over a
/// sorted slice: rank h = q/100 * (n-1), interpolated between floor(h) and
/// floor(h)+1. Tail percentiles are method-sensitive, so the method is
/// fixed here and shared by every caller.
pub fn percentile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (q / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Builds percentile thresholds from every subject's ratio series except
/// the excluded one. The excluded subject's data is never read.
pub fn build_thresholds(
    subjects: &BTreeMap<String, RrRatioSeries>,
    exclude: Option<&str>,
) -> Result<RrThresholds, ErrdetError> {
    let mut pool: Vec<f64> = Vec::new();
    for (id, series) in subjects {
        if Some(id.as_str()) == exclude {
            continue;
        }
        pool.extend(series.ratios.iter().copied());
    }
    if pool.is_empty() {
        return Err(ErrdetError::EmptyPool);
    }
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p_low = percentile_linear(&pool, 0.5);
    let p_high = percentile_linear(&pool, 99.5);
    Ok(RrThresholds {
        p_low,
        p_high,
        source_count: pool.len(),
        excluded_subject: exclude.map(str::to_string),
    })
}

/// Flags a window: true when any RR ratio over the given peaks (the
/// window's peaks prefixed with the last two peaks of prior context) falls
/// outside the threshold band, or when fewer than three peaks are available
/// at all — at the heart rates of interest a window always holds several
/// beats, so a shortage itself implies misses.
pub fn check_window(peaks_with_context: &[usize], thr: &RrThresholds) -> bool {
    if peaks_with_context.len() < 3 {
        return true;
    }
    rr_ratios_from_indices(peaks_with_context)
        .ratios
        .iter()
        .any(|&r| r < thr.p_low || r > thr.p_high)
}
