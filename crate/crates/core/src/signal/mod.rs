//! Core signal types shared by every processing stage: sampled ECG records,
//! ordered peak lists, the canonical windowing geometry, and the synthetic
//! record generator used for ground-truth testing.

mod io;
mod synth;

pub use io::{downsample, load_annotations, load_ecg, save_annotations, save_ecg_csv, EcgFormat};
pub use synth::{synthesize_ecg, SynthesisSpec};

use thiserror::Error;

/// Errors raised while loading, validating, or resampling signal data.
#[derive(Debug, Error)]
pub enum SignalError {
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("non-finite sample at line {line} of {path}")]
    Data { path: String, line: usize },
    #[error("sampling rate {from} Hz is not an integer multiple of {to} Hz")]
    UnsupportedRate { from: u32, to: u32 },
    #[error("record too short: {have} samples, need at least {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

/// A uniformly sampled single-lead ECG record. Amplitudes are in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    samples: Vec<f64>,
    fs: u32,
    label: String,
}

impl EcgRecord {
    /// Builds a record, rejecting a zero sampling rate and non-finite samples.
    pub fn new(samples: Vec<f64>, fs: u32, label: impl Into<String>) -> Result<Self, SignalError> {
        if fs == 0 {
            return Err(SignalError::Invalid {
                what: "sampling rate",
                reason: "fs must be positive".into(),
            });
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::Invalid {
                what: "sample stream",
                reason: format!("non-finite value at index {pos}"),
            });
        }
        Ok(Self {
            samples,
            fs,
            label: label.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fs(&self) -> u32 {
        self.fs
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs as f64
    }
}

/// Per-peak provenance tag: which detector produced the peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakSource {
    Lightweight,
    BayeSlope,
}

impl std::fmt::Display for PeakSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PeakSource::Lightweight => write!(f, "lightweight"),
            PeakSource::BayeSlope => write!(f, "bayeslope"),
        }
    }
}

/// Strictly increasing R-peak sample indices with optional per-peak source tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeakList {
    indices: Vec<usize>,
    sources: Option<Vec<PeakSource>>,
}

impl PeakList {
    /// Builds a list from indices that must be strictly increasing.
    pub fn new(indices: Vec<usize>) -> Result<Self, SignalError> {
        if let Some(w) = indices.windows(2).find(|w| w[1] <= w[0]) {
            return Err(SignalError::Invalid {
                what: "peak list",
                reason: format!("indices not strictly increasing near {}", w[0]),
            });
        }
        Ok(Self {
            indices,
            sources: None,
        })
    }

    /// Same as [`PeakList::new`] but with one source tag per index.
    pub fn with_sources(
        indices: Vec<usize>,
        sources: Vec<PeakSource>,
    ) -> Result<Self, SignalError> {
        if indices.len() != sources.len() {
            return Err(SignalError::Invalid {
                what: "peak list",
                reason: "sources length does not match indices".into(),
            });
        }
        let mut list = Self::new(indices)?;
        list.sources = Some(sources);
        Ok(list)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn sources(&self) -> Option<&[PeakSource]> {
        self.sources.as_deref()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// Appends a peak; panics if ordering would be violated (detector bug).
    pub fn push(&mut self, index: usize, source: Option<PeakSource>) {
        assert!(
            self.indices.last().is_none_or(|&l| index > l),
            "peak {index} does not extend the list"
        );
        self.indices.push(index);
        match (&mut self.sources, source) {
            (Some(tags), Some(s)) => tags.push(s),
            (None, Some(s)) => {
                let mut tags = vec![PeakSource::Lightweight; self.indices.len() - 1];
                tags.push(s);
                self.sources = Some(tags);
            }
            (Some(tags), None) => tags.push(PeakSource::Lightweight),
            (None, None) => {}
        }
    }

    /// The peaks whose index falls in `range`, keeping source tags.
    pub fn clipped(&self, range: std::ops::Range<usize>) -> PeakList {
        let keep: Vec<usize> = (0..self.indices.len())
            .filter(|&k| range.contains(&self.indices[k]))
            .collect();
        let indices = keep.iter().map(|&k| self.indices[k]).collect();
        let sources = self
            .sources
            .as_ref()
            .map(|s| keep.iter().map(|&k| s[k]).collect());
        PeakList { indices, sources }
    }

    /// Consecutive sample distances between peaks.
    pub fn rr_intervals(&self) -> Vec<usize> {
        self.indices.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Canonical sample-count geometry of the analysis pipeline at a given rate:
/// 1.75 s analysis windows, 0.6 s of filter delay, 0.95 s of enhancement delay.
///
/// All window math uses integer sample counts (1.75 = 7/4, 0.6 = 3/5,
/// 0.95 = 19/20, truncating), never float seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowGeometry {
    pub window_len: usize,
    pub mf_delay: usize,
    pub relen_delay: usize,
}

impl WindowGeometry {
    pub fn for_fs(fs: u32) -> Self {
        let fs = fs as usize;
        Self {
            window_len: 7 * fs / 4,
            mf_delay: 3 * fs / 5,
            relen_delay: 19 * fs / 20,
        }
    }

    /// Total group delay of the preprocessing chain in samples.
    pub fn preprocess_delay(&self) -> usize {
        self.mf_delay + self.relen_delay
    }

    /// Span used to initialize the slope detector: two analysis windows.
    pub fn init_len(&self) -> usize {
        2 * self.window_len
    }
}
