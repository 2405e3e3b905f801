//! File formats: ECG CSV (mandatory `fs=<int>` header, one µV sample or
//! `index,value` pair per line), WFDB-style text dumps, annotation files
//! (one ascending peak index per line), and rate conversion.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EcgRecord, PeakList, SignalError};

/// Supported on-disk record encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcgFormat {
    /// Header line `fs=<int>`, then `value` or `index,value` lines.
    Csv,
    /// Whitespace-separated `index value` lines as produced by text dumps of
    /// waveform databases. The rate comes from a `# fs=<int>` comment or a
    /// `<file>.fs` sidecar.
    WfdbText,
}

fn read_to_string(path: &Path) -> Result<String, SignalError> {
    fs::read_to_string(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_sample(tok: &str, path: &Path, line_no: usize) -> Result<f64, SignalError> {
    let v: f64 = tok.trim().parse().map_err(|_| SignalError::Format {
        path: path.display().to_string(),
        reason: format!("unparseable sample '{}' at line {}", tok.trim(), line_no),
    })?;
    if !v.is_finite() {
        return Err(SignalError::Data {
            path: path.display().to_string(),
            line: line_no,
        });
    }
    Ok(v)
}

fn parse_fs_token(tok: &str) -> Option<u32> {
    let tok = tok.trim();
    let rest = tok.strip_prefix("fs=")?;
    rest.trim().parse().ok().filter(|&v| v > 0)
}

/// Loads an ECG record, validating the sampling-rate declaration and every
/// sample. Amplitudes are taken to be microvolts.
pub fn load_ecg(path: &Path, fmt: EcgFormat) -> Result<EcgRecord, SignalError> {
    let text = read_to_string(path)?;
    match fmt {
        EcgFormat::Csv => load_csv(path, &text),
        EcgFormat::WfdbText => load_wfdb_text(path, &text),
    }
}

fn load_csv(path: &Path, text: &str) -> Result<EcgRecord, SignalError> {
    let mut lines = text.lines().enumerate();
    let fs = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((n, l)) => match parse_fs_token(l) {
                Some(fs) => break fs,
                None => {
                    return Err(SignalError::Format {
                        path: path.display().to_string(),
                        reason: format!(
                            "expected 'fs=<int>' header, found '{}' at line {}",
                            l,
                            n + 1
                        ),
                    })
                }
            },
            None => {
                return Err(SignalError::Format {
                    path: path.display().to_string(),
                    reason: "empty file".into(),
                })
            }
        }
    };
    let mut samples = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tok = match line.split_once(',') {
            Some((_idx, value)) => value,
            None => line,
        };
        samples.push(parse_sample(tok, path, n + 1)?);
    }
    EcgRecord::new(samples, fs, path.display().to_string())
}

fn load_wfdb_text(path: &Path, text: &str) -> Result<EcgRecord, SignalError> {
    let mut fs: Option<u32> = None;
    let mut samples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if fs.is_none() {
                fs = comment.split_whitespace().find_map(parse_fs_token);
            }
            continue;
        }
        let mut cols = line.split_whitespace();
        let first = cols.next().unwrap_or("");
        let tok = cols.next().unwrap_or(first);
        samples.push(parse_sample(tok, path, n + 1)?);
    }
    let fs = match fs {
        Some(fs) => fs,
        None => sidecar_fs(path)?,
    };
    EcgRecord::new(samples, fs, path.display().to_string())
}

fn sidecar_fs(path: &Path) -> Result<u32, SignalError> {
    let sidecar = path.with_extension("fs");
    let text = fs::read_to_string(&sidecar).map_err(|_| SignalError::Format {
        path: path.display().to_string(),
        reason: "sampling rate missing: no '# fs=<int>' comment and no .fs sidecar".into(),
    })?;
    let tok = text.trim();
    parse_fs_token(tok)
        .or_else(|| tok.parse().ok().filter(|&v| v > 0))
        .ok_or_else(|| SignalError::Format {
            path: sidecar.display().to_string(),
            reason: format!("unparseable sampling rate '{tok}'"),
        })
}

/// Writes a record in the CSV format accepted by [`load_ecg`]. Samples are
/// printed with the shortest round-trippable representation, so a
/// load/save/load cycle reproduces the sample stream exactly.
pub fn save_ecg_csv(rec: &EcgRecord, path: &Path) -> Result<(), SignalError> {
    let mut out = String::with_capacity(rec.len() * 8 + 16);
    out.push_str(&format!("fs={}\n", rec.fs()));
    for v in rec.samples() {
        out.push_str(&format!("{v}\n"));
    }
    write_all(path, out.as_bytes())
}

/// Loads an annotation file: one ascending peak sample index per line.
pub fn load_annotations(path: &Path) -> Result<PeakList, SignalError> {
    let text = read_to_string(path)?;
    let mut indices = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let idx: usize = line.parse().map_err(|_| SignalError::Format {
            path: path.display().to_string(),
            reason: format!("unparseable peak index '{}' at line {}", line, n + 1),
        })?;
        indices.push(idx);
    }
    PeakList::new(indices).map_err(|_| SignalError::Format {
        path: path.display().to_string(),
        reason: "peak indices not strictly ascending".into(),
    })
}

pub fn save_annotations(peaks: &PeakList, path: &Path) -> Result<(), SignalError> {
    let mut out = String::new();
    for idx in peaks.indices() {
        out.push_str(&format!("{idx}\n"));
    }
    write_all(path, out.as_bytes())
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<(), SignalError> {
    let mut f = fs::File::create(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(bytes).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Anti-alias filter length used by [`downsample`].
const AA_TAPS: usize = 63;

/// Integer-factor decimation with a linear-phase windowed-sinc low-pass
/// (63 taps, Hamming window, cutoff at 0.45 of the target rate) applied
/// first. Delay is compensated, so peak positions divide by the factor.
pub fn downsample(rec: &EcgRecord, target_fs: u32) -> Result<EcgRecord, SignalError> {
    if target_fs == 0 || !rec.fs().is_multiple_of(target_fs) {
        return Err(SignalError::UnsupportedRate {
            from: rec.fs(),
            to: target_fs,
        });
    }
    let factor = (rec.fs() / target_fs) as usize;
    if factor == 1 {
        return Ok(rec.clone());
    }

    // Windowed-sinc taps, normalized to unit DC gain.
    let cutoff_hz = 0.45 * target_fs as f64;
    let fc = cutoff_hz / rec.fs() as f64;
    let m = (AA_TAPS - 1) as f64 / 2.0;
    let mut taps = [0.0f64; AA_TAPS];
    for (k, t) in taps.iter_mut().enumerate() {
        let x = k as f64 - m;
        let sinc = if x == 0.0 {
            2.0 * fc
        } else {
            (2.0 * std::f64::consts::PI * fc * x).sin() / (std::f64::consts::PI * x)
        };
        let w = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * k as f64 / (AA_TAPS - 1) as f64).cos();
        *t = sinc * w;
    }
    let gain: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= gain;
    }

    let x = rec.samples();
    let n = x.len();
    let half = AA_TAPS / 2;
    let out_len = n / factor;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = i * factor;
        let mut acc = 0.0;
        for (k, t) in taps.iter().enumerate() {
            // Reflect at the edges to avoid amplitude droop.
            let j = center as isize + k as isize - half as isize;
            let j = if j < 0 {
                (-j) as usize
            } else if j as usize >= n {
                2 * (n - 1) - j as usize
            } else {
                j as usize
            };
            acc += t * x[j];
        }
        out.push(acc);
    }
    EcgRecord::new(
        out,
        target_fs,
        format!(
            "{} (downsampled {}->{} Hz)",
            rec.label(),
            rec.fs(),
            target_fs
        ),
    )
}
