//! Lightweight per-window R-peak detector using two adaptive hysteresis
//! thresholds recomputed from each window's mean and extreme amplitude.
//!
//! This stage is deliberately simple: when consecutive peaks differ strongly
//! in amplitude within one window, the thresholds skew toward the large
//! peaks and the small ones are missed. The error detector exists to catch
//! exactly that failure mode.

use crate::signal::WindowGeometry;

/// Detector tuning. `high_frac` sets the initial high threshold as a
/// fraction of the window extreme and blends into the per-window update
/// `high = high_frac * (mean + max) / 2`; `low_frac` derives the low
/// threshold from the high one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig {
    pub high_frac: f64,
    pub low_frac: f64,
    pub floor_uv: f64,
    /// Minimum spacing between reported peaks, in samples (240 ms).
    pub refractory: usize,
}

impl HysteresisConfig {
    pub fn for_fs(fs: u32) -> Self {
        Self {
            high_frac: 0.6,
            low_frac: 0.5,
            floor_uv: 50.0,
            refractory: (240 * fs as usize) / 1000,
        }
    }
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        Self::for_fs(250)
    }
}

/// Sign of the dominant deflection the detector tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

/// Detector state threaded through consecutive windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisState {
    pub high_thr: f64,
    pub low_thr: f64,
    pub polarity: Polarity,
    pub last_peak: Option<usize>,
}

/// Seeds thresholds from the first window: high at `high_frac` of the
/// extreme magnitude, low at `low_frac` of high. A flat window leaves both
/// at the configured floor. Polarity follows the sign of the extreme value.
pub fn init_state(window: &[f64], cfg: &HysteresisConfig) -> HysteresisState {
    let (mut max_mag, mut extreme) = (0.0f64, 0.0f64);
    for &v in window {
        if v.abs() > max_mag {
            max_mag = v.abs();
            extreme = v;
        }
    }
    let polarity = if extreme < 0.0 {
        Polarity::Negative
    } else {
        Polarity::Positive
    };
    if max_mag == 0.0 {
        return HysteresisState {
            high_thr: cfg.floor_uv,
            low_thr: cfg.floor_uv,
            polarity,
            last_peak: None,
        };
    }
    let high_thr = (cfg.high_frac * max_mag).max(cfg.floor_uv);
    HysteresisState {
        high_thr,
        low_thr: cfg.low_frac * high_thr,
        polarity,
        last_peak: None,
    }
}

/// Detects peaks in one window (signal values with the window's absolute
/// start index), then recomputes the thresholds for the next window from
/// this window's statistics.
///
/// A peak is one full excursion: the polarity-adjusted signal crosses the
/// high threshold upward and later falls below the low threshold; the
/// excursion maximum is reported. An excursion still open at the window end
/// is closed there. Peaks closer than the refractory spacing to the
/// previous report are dropped.
pub fn detect_window(
    window: &[f64],
    start_index: usize,
    state: &mut HysteresisState,
    cfg: &HysteresisConfig,
) -> Vec<usize> {
    let sign = match state.polarity {
        Polarity::Positive => 1.0,
        Polarity::Negative => -1.0,
    };
    let mut peaks = Vec::new();
    let mut in_excursion = false;
    let mut best = f64::MIN;
    let mut best_idx = 0usize;
    let mut emit = |idx: usize, last: &mut Option<usize>| {
        if last.is_none_or(|l| idx >= l + cfg.refractory) {
            peaks.push(idx);
            *last = Some(idx);
        }
    };
    for (k, &raw) in window.iter().enumerate() {
        let v = sign * raw;
        if in_excursion {
            if v > best {
                best = v;
                best_idx = start_index + k;
            }
            if v < state.low_thr {
                emit(best_idx, &mut state.last_peak);
                in_excursion = false;
            }
        } else if v > state.high_thr {
            in_excursion = true;
            best = v;
            best_idx = start_index + k;
        }
    }
    if in_excursion {
        emit(best_idx, &mut state.last_peak);
    }

    // Adapt thresholds for the next window from this window's morphology.
    let n = window.len().max(1) as f64;
    let mean_mag = window.iter().map(|v| v.abs()).sum::<f64>() / n;
    let max_mag = window.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    state.high_thr = (cfg.high_frac * 0.5 * (mean_mag + max_mag)).max(cfg.floor_uv);
    state.low_thr = cfg.low_frac * state.high_thr;
    peaks
}

/// Runs the detector over a whole stream window by window (including any
/// trailing partial window), seeding the state from the first window.
pub fn detect_stream(stream: &[f64], geom: &WindowGeometry, cfg: &HysteresisConfig) -> Vec<usize> {
    let w = geom.window_len;
    if stream.len() < w {
        return Vec::new();
    }
    let mut state = init_state(&stream[..w], cfg);
    let mut peaks = Vec::new();
    let mut start = 0;
    while start < stream.len() {
        let end = (start + w).min(stream.len());
        peaks.extend(detect_window(&stream[start..end], start, &mut state, cfg));
        start = end;
    }
    peaks
}
