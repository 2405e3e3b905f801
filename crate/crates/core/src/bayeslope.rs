//! Slope-domain R-peak detector combining a Gaussian expectation prior, a
//! generalized-logistic normalization of the derivative magnitude, and
//! streaming 2-means labeling of slope samples.
//!
//! Processing is strictly sequential. Per sample: take the first difference
//! of the enhanced signal, weight its magnitude by a Gaussian centered on
//! the expected next-peak position (from the last five peaks), push it
//! through a sigmoid bounded by the high-slope centroid, and keep the
//! maximum of the raw and boosted values. The boosted value is assigned to
//! the high- or low-slope cluster; a run of high labels outside the
//! refractory distance opens a QRS search interval, and when it closes the
//! peak is located between the maximum upslope and downslope positions.
//!
//! The boost floor is scale-aware by construction: the sigmoid crosses the
//! cluster decision boundary exactly at twice the low centroid, so small
//! expected peaks are raised to the high cluster while off-schedule noise
//! is not.

use std::collections::VecDeque;

use thiserror::Error;

use crate::signal::{PeakList, PeakSource, WindowGeometry};

#[derive(Debug, Error)]
pub enum BayeSlopeError {
    #[error("init span must be {need} samples, got {have}")]
    BadInitSpan { need: usize, have: usize },
    #[error("degenerate initialization: high centroid {hcentr} not above low centroid {lcentr}")]
    DegenerateInit { hcentr: f64, lcentr: f64 },
}

/// Steepness policy for the sigmoid normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogisticBPolicy {
    /// B = gain / (hcentr - lcentr), refreshed whenever the centroids move.
    /// Larger gains sharpen the sigmoid toward a step at twice the low
    /// centroid, which is what lets strongly attenuated expected peaks reach
    /// the high cluster.
    CentroidSpread {
        gain: f64,
    },
    Fixed(f64),
}

/// Where to place the reported peak inside a closed QRS interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakLocator {
    /// Extremum of the enhanced signal between the slope extrema (default).
    RelenExtremum,
    /// Midpoint of the up- and down-slope positions, kept for sensitivity
    /// analysis.
    SlopeMidpoint,
}

/// Fixed detector parameters, expressed in samples at the target rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayeSlopeParams {
    /// Minimum spacing between QRS complexes (240 ms).
    pub min_rr_dist: usize,
    /// Maximum QRS duration (140 ms).
    pub max_qrs_dur: usize,
    /// Low-label run length that closes an open QRS interval.
    pub zero_run_len: usize,
    /// Number of past peaks driving the expectation.
    pub history_len: usize,
    /// Lower bound on the expectation spread (10 ms).
    pub sd_floor: f64,
    /// Expected RR at start-up (75 bpm).
    pub init_mu: f64,
    /// Expectation spread at start-up (100 ms).
    pub init_sd: f64,
    /// Samples required by [`init_state`]: two analysis windows.
    pub init_len: usize,
    pub b_policy: LogisticBPolicy,
    pub peak_locator: PeakLocator,
}

impl BayeSlopeParams {
    pub fn for_fs(fs: u32) -> Self {
        let per_ms = |ms: usize| ms * fs as usize / 1000;
        Self {
            min_rr_dist: per_ms(240),
            max_qrs_dur: per_ms(140),
            zero_run_len: 30,
            history_len: 5,
            sd_floor: 10.0 * fs as f64 / 1000.0,
            init_mu: 60.0 / 75.0 * fs as f64,
            init_sd: 100.0 * fs as f64 / 1000.0,
            init_len: WindowGeometry::for_fs(fs).init_len(),
            b_policy: LogisticBPolicy::CentroidSpread { gain: 100.0 },
            peak_locator: PeakLocator::RelenExtremum,
        }
    }
}

impl Default for BayeSlopeParams {
    fn default() -> Self {
        Self::for_fs(250)
    }
}

#[derive(Debug, Clone, Copy)]
struct QrsSample {
    index: usize,
    /// st * sign(s2): signed normalized slope.
    st_signed: f64,
    /// Enhanced-signal value at this sample.
    value: f64,
}

/// Detector state; a value that streams through consecutive windows.
#[derive(Debug, Clone)]
pub struct BayeSlopeState {
    hcentr: f64,
    lcentr: f64,
    hcount: u64,
    lcount: u64,
    mu: f64,
    sd: f64,
    b: f64,
    last_peaks: VecDeque<usize>,
    last_peak: usize,
    in_qrs: bool,
    qrs_init: usize,
    zeroctr: usize,
    next_index: usize,
    prev_sample: Option<f64>,
    qrs_buf: Vec<QrsSample>,
}

impl BayeSlopeState {
    pub fn hcentr(&self) -> f64 {
        self.hcentr
    }
    pub fn lcentr(&self) -> f64 {
        self.lcentr
    }
    pub fn counts(&self) -> (u64, u64) {
        (self.hcount, self.lcount)
    }
    pub fn expectation(&self) -> (f64, f64) {
        (self.mu, self.sd)
    }
    pub fn last_peak(&self) -> usize {
        self.last_peak
    }
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    fn refresh_b(&mut self, policy: LogisticBPolicy) {
        self.b = match policy {
            LogisticBPolicy::CentroidSpread { gain } => gain / (self.hcentr - self.lcentr),
            LogisticBPolicy::Fixed(b) => b,
        };
    }

    /// Assigns a normalized slope value to the nearer centroid (ties to the
    /// low cluster) and folds it into that cluster's running mean. Returns
    /// the label: 1 for the high-slope cluster.
    pub fn assign_and_update(&mut self, st: f64, policy: LogisticBPolicy) -> u8 {
        let to_high = (st - self.hcentr).abs() < (st - self.lcentr).abs();
        if to_high {
            self.hcount += 1;
            self.hcentr += (st - self.hcentr) / self.hcount as f64;
        } else {
            self.lcount += 1;
            self.lcentr += (st - self.lcentr) / self.lcount as f64;
        }
        self.refresh_b(policy);
        to_high as u8
    }
}

/// Observation emitted per processed sample, for bookkeeping checks.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub index: usize,
    pub st: f64,
    pub label: u8,
    pub hcentr: f64,
    pub lcentr: f64,
}

/// Gaussian expectation weight in (0, 1]: exp(-(offset-mu)^2 / (2 sd^2)),
/// peaking at 1 when the offset since the last peak equals mu.
pub fn gaussian_prior(offset: f64, mu: f64, sd: f64) -> f64 {
    let z = (offset - mu) / sd;
    (-0.5 * z * z).exp()
}

/// Generalized logistic normalization of a slope magnitude:
/// `f(x) = hcentr / (1 + e^(-B (x - M)))` with the inflection placed at
/// `M = 2 lcentr + ln((hcentr-lcentr)/(hcentr+lcentr)) / B`, which pins the
/// supremum to the high centroid and the crossing of the cluster decision
/// boundary to twice the low centroid.
pub fn logistic_normalize(x: f64, lcentr: f64, hcentr: f64, b: f64) -> f64 {
    let m = 2.0 * lcentr + ((hcentr - lcentr) / (hcentr + lcentr)).ln() / b;
    hcentr / (1.0 + (-b * (x - m)).exp())
}

/// Posterior-style normalization: the boosted value never falls below the
/// observed one.
pub fn normalize_sample(x: f64, prior: f64, sigmoid: f64) -> f64 {
    x.max(sigmoid * prior)
}

/// Expectation update from the peak history ring: mean of consecutive RR
/// intervals and their sample standard deviation, floored. Returns None
/// when fewer than two peaks are available (callers keep the current
/// values).
pub fn update_expectation(ring: &VecDeque<usize>, sd_floor: f64) -> Option<(f64, f64)> {
    if ring.len() < 2 {
        return None;
    }
    let rr: Vec<f64> = ring
        .iter()
        .zip(ring.iter().skip(1))
        .map(|(a, b)| (b - a) as f64)
        .collect();
    let mu = rr.iter().sum::<f64>() / rr.len() as f64;
    let sd = if rr.len() >= 2 {
        let var = rr.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (rr.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    Some((mu, sd.max(sd_floor)))
}

/// Initializes the detector from exactly two analysis windows of enhanced
/// signal starting at absolute index `origin`: the high centroid is the
/// 99th percentile of the absolute first difference over the span, the low
/// centroid starts at 1. Fails if the span is flat enough that the high
/// centroid does not clear the low one.
pub fn init_state(
    init_span: &[f64],
    origin: usize,
    params: &BayeSlopeParams,
) -> Result<BayeSlopeState, BayeSlopeError> {
    if init_span.len() != params.init_len {
        return Err(BayeSlopeError::BadInitSpan {
            need: params.init_len,
            have: init_span.len(),
        });
    }
    let mut abs_diff: Vec<f64> = init_span.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    abs_diff.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let hcentr = crate::errdet::percentile_linear(&abs_diff, 99.0);
    let lcentr = 1.0;
    if hcentr <= lcentr {
        return Err(BayeSlopeError::DegenerateInit { hcentr, lcentr });
    }
    let mut state = BayeSlopeState {
        hcentr,
        lcentr,
        hcount: 0,
        lcount: 0,
        mu: params.init_mu,
        sd: params.init_sd,
        b: 0.0,
        last_peaks: VecDeque::with_capacity(params.history_len + 1),
        last_peak: origin,
        in_qrs: false,
        qrs_init: 0,
        zeroctr: 0,
        next_index: origin,
        prev_sample: None,
        qrs_buf: Vec::new(),
    };
    state.refresh_b(params.b_policy);
    Ok(state)
}

/// Streams enhanced-signal samples through the detector, emitting R peaks.
/// Consecutive calls continue where the previous one stopped; feed the init
/// span itself first so the detector covers it.
pub fn detect(samples: &[f64], state: &mut BayeSlopeState, params: &BayeSlopeParams) -> PeakList {
    detect_observed(samples, state, params, &mut |_| {})
}

/// Same as [`detect`] but reporting every processed sample's normalized
/// value, label, and centroids to `observer`.
pub fn detect_observed(
    samples: &[f64],
    state: &mut BayeSlopeState,
    params: &BayeSlopeParams,
    observer: &mut dyn FnMut(Observation),
) -> PeakList {
    let mut peaks = PeakList::default();
    for &v in samples {
        let i = state.next_index;
        let prev = match state.prev_sample.replace(v) {
            Some(p) => p,
            None => {
                state.next_index += 1;
                continue;
            }
        };
        let s2 = v - prev;
        let x = s2.abs();
        let prior = gaussian_prior((i - state.last_peak) as f64, state.mu, state.sd);
        let sigmoid = logistic_normalize(x, state.lcentr, state.hcentr, state.b);
        let st = normalize_sample(x, prior, sigmoid);
        let label = state.assign_and_update(st, params.b_policy);
        observer(Observation {
            index: i,
            st,
            label,
            hcentr: state.hcentr,
            lcentr: state.lcentr,
        });

        if state.in_qrs {
            if label == 0 {
                state.zeroctr += 1;
            } else {
                state.zeroctr = 0;
            }
            state.qrs_buf.push(QrsSample {
                index: i,
                st_signed: st * sign(s2),
                value: v,
            });
            if state.zeroctr >= params.zero_run_len || i - state.qrs_init > params.max_qrs_dur {
                if let Some(peak) = locate_peak(&state.qrs_buf, params.peak_locator) {
                    peaks.push(peak, Some(PeakSource::BayeSlope));
                    state.last_peak = peak;
                    state.last_peaks.push_back(peak);
                    while state.last_peaks.len() > params.history_len {
                        state.last_peaks.pop_front();
                    }
                    if let Some((mu, sd)) = update_expectation(&state.last_peaks, params.sd_floor) {
                        state.mu = mu;
                        state.sd = sd;
                    }
                }
                state.in_qrs = false;
                state.zeroctr = 0;
                state.qrs_buf.clear();
            }
        } else if label == 1 && i > state.last_peak + params.min_rr_dist {
            state.in_qrs = true;
            state.qrs_init = i;
            state.zeroctr = 0;
            state.qrs_buf.push(QrsSample {
                index: i,
                st_signed: st * sign(s2),
                value: v,
            });
        }
        state.next_index += 1;
    }
    peaks
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Finds the peak inside a closed QRS interval. The maximum and minimum of
/// the signed normalized slope mark the dominant up- and down-slopes; the
/// peak is the extremum of the enhanced signal between them (maximum for a
/// normal complex, minimum when the slopes are inverted).
fn locate_peak(buf: &[QrsSample], locator: PeakLocator) -> Option<usize> {
    if buf.is_empty() {
        return None;
    }
    let mut up = 0usize;
    let mut down = 0usize;
    for (k, s) in buf.iter().enumerate() {
        if s.st_signed > buf[up].st_signed {
            up = k;
        }
        if s.st_signed < buf[down].st_signed {
            down = k;
        }
    }
    match locator {
        PeakLocator::SlopeMidpoint => Some((buf[up].index + buf[down].index) / 2),
        PeakLocator::RelenExtremum => {
            let inverted = up > down;
            let (a, b) = if inverted { (down, up) } else { (up, down) };
            let mut best = a;
            for k in a..=b {
                let better = if inverted {
                    buf[k].value < buf[best].value
                } else {
                    buf[k].value > buf[best].value
                };
                if better {
                    best = k;
                }
            }
            Some(buf[best].index)
        }
    }
}
