//! Test-data management: deterministic synthetic fixture segments with
//! exact annotations, a line-oriented segment manifest
//! (`id,class,path,checksum`), and an optional downloader for the open
//! exercise dataset.
//!
//! Fixture records live next to their annotations: `<id>.csv` holds the
//! samples, `<id>.ann` the ground-truth peak indices. Checksums are FNV-1a
//! (64-bit, hex) over the record file bytes.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::signal::{save_annotations, save_ecg_csv, synthesize_ecg, SignalError, SynthesisSpec};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("manifest error in {path}: {reason}")]
    Manifest { path: String, reason: String },
    #[error("integrity error: {path} has checksum {got}, manifest says {want}")]
    Integrity {
        path: String,
        got: String,
        want: String,
    },
    #[error("fetch failed for {url}: {reason}")]
    Fetch { url: String, reason: String },
    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Exercise-intensity label attached to a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntensityClass {
    BeforeVt2,
    AfterVt2,
    BeforeVo2max,
    Vo2max,
    Recovery,
}

impl IntensityClass {
    pub const ALL: [IntensityClass; 5] = [
        IntensityClass::BeforeVt2,
        IntensityClass::AfterVt2,
        IntensityClass::BeforeVo2max,
        IntensityClass::Vo2max,
        IntensityClass::Recovery,
    ];

    pub fn parse(s: &str) -> Option<IntensityClass> {
        Some(match s {
            "before_VT2" => IntensityClass::BeforeVt2,
            "after_VT2" => IntensityClass::AfterVt2,
            "before_VO2max" => IntensityClass::BeforeVo2max,
            "VO2max" => IntensityClass::Vo2max,
            "recovery" => IntensityClass::Recovery,
            _ => return None,
        })
    }
}

impl fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            IntensityClass::BeforeVt2 => "before_VT2",
            IntensityClass::AfterVt2 => "after_VT2",
            IntensityClass::BeforeVo2max => "before_VO2max",
            IntensityClass::Vo2max => "VO2max",
            IntensityClass::Recovery => "recovery",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub class: IntensityClass,
    /// Record path, relative to the manifest location.
    pub path: PathBuf,
    /// FNV-1a 64 checksum of the record file, lowercase hex.
    pub checksum: String,
}

impl ManifestEntry {
    /// Annotations sit next to the record with the `.ann` extension.
    pub fn annotation_path(&self) -> PathBuf {
        self.path.with_extension("ann")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentManifest {
    pub entries: Vec<ManifestEntry>,
}

/// 64-bit FNV-1a over a byte stream.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn checksum_file(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

pub fn save_manifest(manifest: &SegmentManifest, path: &Path) -> Result<(), CorpusError> {
    let mut out = String::from("# id,class,path,checksum\n");
    for e in &manifest.entries {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.id,
            e.class,
            e.path.display(),
            e.checksum
        ));
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<SegmentManifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CorpusError::Manifest {
                path: path.display().to_string(),
                reason: format!("line {}: expected id,class,path,checksum", n + 1),
            });
        }
        let class = IntensityClass::parse(parts[1]).ok_or_else(|| CorpusError::Manifest {
            path: path.display().to_string(),
            reason: format!("line {}: unknown class '{}'", n + 1, parts[1]),
        })?;
        entries.push(ManifestEntry {
            id: parts[0].to_string(),
            class,
            path: PathBuf::from(parts[2]),
            checksum: parts[3].to_string(),
        });
    }
    Ok(SegmentManifest { entries })
}

/// Verifies every entry's checksum against the file on disk.
pub fn verify_manifest(manifest: &SegmentManifest, base_dir: &Path) -> Result<(), CorpusError> {
    for e in &manifest.entries {
        let path = base_dir.join(&e.path);
        let got = checksum_file(&path)?;
        if got != e.checksum {
            return Err(CorpusError::Integrity {
                path: path.display().to_string(),
                got,
                want: e.checksum.clone(),
            });
        }
    }
    Ok(())
}

/// The committed fixture set: one segment per stress class, each with a
/// deterministic spec and an intensity label for stratified scoring.
fn fixture_specs() -> Vec<(&'static str, IntensityClass, SynthesisSpec)> {
    let alternating = |start_s: f64, duration: f64, bpm: f64, low: f64| {
        let rr = 60.0 / bpm;
        let mut amp = vec![(0.0, 1.0), (start_s - 1e-4, 1.0)];
        let mut t = rr;
        let mut small = false;
        while t < duration {
            if t >= start_s {
                amp.push((t, if small { low } else { 1.0 }));
                small = !small;
            }
            t += rr;
        }
        amp
    };
    vec![
        (
            "stationary_80bpm",
            IntensityClass::BeforeVt2,
            SynthesisSpec {
                noise_sd_uv: 5.0,
                seed: 11,
                ..SynthesisSpec::constant(25.0, 250, 80.0)
            },
        ),
        (
            "hr_ramp_110_185",
            IntensityClass::AfterVt2,
            SynthesisSpec {
                hr_profile: vec![(0.0, 110.0), (25.0, 185.0)],
                noise_sd_uv: 5.0,
                seed: 12,
                ..SynthesisSpec::constant(25.0, 250, 110.0)
            },
        ),
        (
            "amp_alternating_170bpm",
            IntensityClass::BeforeVo2max,
            SynthesisSpec {
                amplitude_profile: alternating(10.0, 25.0, 170.0, 0.1),
                seed: 13,
                ..SynthesisSpec::constant(25.0, 250, 170.0)
            },
        ),
        (
            "dominant_t_165bpm",
            IntensityClass::Vo2max,
            SynthesisSpec {
                t_wave_gain: 1.5,
                amplitude_profile: vec![(0.0, 1.0), (12.0, 1.0), (12.5, 0.55)],
                noise_sd_uv: 4.0,
                seed: 14,
                ..SynthesisSpec::constant(25.0, 250, 165.0)
            },
        ),
        (
            "noisy_burst_150bpm",
            IntensityClass::Recovery,
            SynthesisSpec {
                noise_sd_uv: 35.0,
                seed: 15,
                ..SynthesisSpec::constant(25.0, 250, 150.0)
            },
        ),
    ]
}

/// Writes the fixture segments, annotations, and manifest into `dir`;
/// returns the verified manifest. Fully offline and deterministic.
pub fn prepare_fixtures(dir: &Path) -> Result<SegmentManifest, CorpusError> {
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut manifest = SegmentManifest::default();
    for (id, class, spec) in fixture_specs() {
        let (rec, truth) = synthesize_ecg(&spec)?;
        let rec_path = dir.join(format!("{id}.csv"));
        save_ecg_csv(&rec, &rec_path)?;
        save_annotations(&truth, &rec_path.with_extension("ann"))?;
        manifest.entries.push(ManifestEntry {
            id: id.to_string(),
            class,
            path: PathBuf::from(format!("{id}.csv")),
            checksum: checksum_file(&rec_path)?,
        });
    }
    save_manifest(&manifest, &dir.join("manifest.txt"))?;
    verify_manifest(&manifest, dir)?;
    Ok(manifest)
}

/// Copies or downloads the open-dataset archive contents into `dest` and
/// verifies them against the manifest file that ships with them.
///
/// `file://` URLs (and plain paths) are always supported; `http(s)://`
/// needs the `fetch` feature. The source must contain `manifest.txt` plus
/// the record and annotation files it lists.
pub fn fetch_open_dataset(url: &str, dest: &Path) -> Result<SegmentManifest, CorpusError> {
    fs::create_dir_all(dest).map_err(|source| CorpusError::Io {
        path: dest.display().to_string(),
        source,
    })?;
    if let Some(src) =
        url.strip_prefix("file://")
            .or_else(|| if url.contains("://") { None } else { Some(url) })
    {
        copy_tree(Path::new(src), dest)?;
    } else {
        fetch_http(url, dest)?;
    }
    let manifest = load_manifest(&dest.join("manifest.txt"))?;
    verify_manifest(&manifest, dest)?;
    Ok(manifest)
}

fn copy_tree(src: &Path, dest: &Path) -> Result<(), CorpusError> {
    let entries = fs::read_dir(src).map_err(|source| CorpusError::Io {
        path: src.display().to_string(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: src.display().to_string(),
            source,
        })?;
        if entry.path().is_file() {
            fs::copy(entry.path(), dest.join(entry.file_name())).map_err(|source| {
                CorpusError::Io {
                    path: entry.path().display().to_string(),
                    source,
                }
            })?;
        }
    }
    Ok(())
}

#[cfg(feature = "fetch")]
fn fetch_http(url: &str, dest: &Path) -> Result<(), CorpusError> {
    // The URL must point at a manifest; files listed there are fetched
    // relative to it.
    let fetch_one = |url: &str| -> Result<Vec<u8>, CorpusError> {
        let response = ureq::get(url).call().map_err(|e| CorpusError::Fetch {
            url: url.to_string(),
            reason: e.to_string(),
        })?;
        let mut bytes = Vec::new();
        std::io::Read::read_to_end(&mut response.into_reader(), &mut bytes).map_err(|e| {
            CorpusError::Fetch {
                url: url.to_string(),
                reason: e.to_string(),
            }
        })?;
        Ok(bytes)
    };
    let base = url.rsplit_once('/').map(|(b, _)| b).unwrap_or(url);
    let manifest_bytes = fetch_one(url)?;
    fs::write(dest.join("manifest.txt"), &manifest_bytes).map_err(|source| CorpusError::Io {
        path: dest.join("manifest.txt").display().to_string(),
        source,
    })?;
    let manifest = load_manifest(&dest.join("manifest.txt"))?;
    for e in &manifest.entries {
        for rel in [e.path.clone(), e.annotation_path()] {
            let bytes = fetch_one(&format!("{base}/{}", rel.display()))?;
            fs::write(dest.join(&rel), bytes).map_err(|source| CorpusError::Io {
                path: dest.join(&rel).display().to_string(),
                source,
            })?;
        }
    }
    Ok(())
}

#[cfg(not(feature = "fetch"))]
fn fetch_http(url: &str, _dest: &Path) -> Result<(), CorpusError> {
    Err(CorpusError::Fetch {
        url: url.to_string(),
        reason: "built without the 'fetch' feature; use a file:// source".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("rpeak-corpus-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn fixtures_build_offline_and_deterministically() {
        let a = tmpdir("a");
        let b = tmpdir("b");
        let ma = prepare_fixtures(&a).unwrap();
        let mb = prepare_fixtures(&b).unwrap();
        assert_eq!(ma.entries.len(), 5);
        let classes: Vec<IntensityClass> = ma.entries.iter().map(|e| e.class).collect();
        for class in IntensityClass::ALL {
            assert!(classes.contains(&class), "missing class {class}");
        }
        for (ea, eb) in ma.entries.iter().zip(&mb.entries) {
            assert_eq!(
                ea.checksum, eb.checksum,
                "fixture {} not deterministic",
                ea.id
            );
        }
    }

    #[test]
    fn corrupt_file_fails_integrity() {
        let dir = tmpdir("corrupt");
        let manifest = prepare_fixtures(&dir).unwrap();
        let victim = dir.join(&manifest.entries[0].path);
        let mut bytes = fs::read(&victim).unwrap();
        bytes[40] ^= 0x01;
        fs::write(&victim, bytes).unwrap();
        assert!(matches!(
            verify_manifest(&manifest, &dir),
            Err(CorpusError::Integrity { .. })
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tmpdir("rt");
        let manifest = prepare_fixtures(&dir).unwrap();
        let back = load_manifest(&dir.join("manifest.txt")).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn fetch_from_local_path_verifies() {
        let src = tmpdir("src");
        prepare_fixtures(&src).unwrap();
        let dest = tmpdir("dest");
        let manifest = fetch_open_dataset(src.to_str().unwrap(), &dest).unwrap();
        assert_eq!(manifest.entries.len(), 5);
        assert!(dest.join("stationary_80bpm.csv").exists());
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
