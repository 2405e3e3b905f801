//! Line-oriented `key=value` configuration files and the override keys
//! accepted by the detection pipeline.

use std::collections::BTreeMap;
use std::path::Path;

use crate::bayeslope::{LogisticBPolicy, PeakLocator};
use crate::pipeline::PipelineConfig;

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_kv(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => return Err(format!("line {}: expected key=value", n + 1)),
        }
    }
    Ok(map)
}

/// Applies documented override keys onto a pipeline configuration.
/// Millisecond-valued keys are converted at the given rate.
pub fn apply_overrides(
    cfg: &mut PipelineConfig,
    map: &BTreeMap<String, String>,
    fs: u32,
) -> Result<(), String> {
    let ms_to_samples = |ms: f64| (ms * fs as f64 / 1000.0).round() as usize;
    for (k, v) in map {
        let parse_f = || {
            v.parse::<f64>()
                .map_err(|_| format!("bad value for {k}: '{v}'"))
        };
        let parse_u = || {
            v.parse::<usize>()
                .map_err(|_| format!("bad value for {k}: '{v}'"))
        };
        match k.as_str() {
            "mf_short_len" => cfg.preprocess.mf_short_len = parse_u()?,
            "mf_long_len" => cfg.preprocess.mf_long_len = parse_u()?,
            "mf_smooth_len" => cfg.preprocess.mf_smooth_len = parse_u()?,
            "relen_short_len" => cfg.preprocess.relen_short_len = parse_u()?,
            "relen_long_len" => cfg.preprocess.relen_long_len = parse_u()?,
            "relen_energy_form" => {
                cfg.preprocess.relen_energy_form = match v.as_str() {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(format!("bad value for {k}: '{v}'")),
                }
            }
            "hyst_high_frac" => cfg.hysteresis.high_frac = parse_f()?,
            "hyst_low_frac" => cfg.hysteresis.low_frac = parse_f()?,
            "hyst_floor_uv" => cfg.hysteresis.floor_uv = parse_f()?,
            "min_rr_dist_ms" => cfg.bayeslope.min_rr_dist = ms_to_samples(parse_f()?),
            "max_qrs_dur_ms" => cfg.bayeslope.max_qrs_dur = ms_to_samples(parse_f()?),
            "zero_run_len" => cfg.bayeslope.zero_run_len = parse_u()?,
            "history_len" => cfg.bayeslope.history_len = parse_u()?,
            "sd_floor_ms" => cfg.bayeslope.sd_floor = parse_f()? * fs as f64 / 1000.0,
            "logistic_B_policy" => cfg.bayeslope.b_policy = parse_b_policy(v)?,
            "peak_locator" => {
                cfg.bayeslope.peak_locator = match v.as_str() {
                    "relen_extremum" => PeakLocator::RelenExtremum,
                    "slope_midpoint" => PeakLocator::SlopeMidpoint,
                    _ => return Err(format!("bad value for {k}: '{v}'")),
                }
            }
            _ => return Err(format!("unknown config key '{k}'")),
        }
    }
    Ok(())
}

/// `auto`, `auto:<gain>`, or `fixed:<B>`.
fn parse_b_policy(v: &str) -> Result<LogisticBPolicy, String> {
    if v == "auto" {
        return Ok(LogisticBPolicy::CentroidSpread { gain: 100.0 });
    }
    if let Some(gain) = v.strip_prefix("auto:") {
        let gain: f64 = gain.parse().map_err(|_| format!("bad gain '{gain}'"))?;
        return Ok(LogisticBPolicy::CentroidSpread { gain });
    }
    if let Some(b) = v.strip_prefix("fixed:") {
        let b: f64 = b.parse().map_err(|_| format!("bad B '{b}'"))?;
        return Ok(LogisticBPolicy::Fixed(b));
    }
    Err(format!("bad logistic_B_policy '{v}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_apply() {
        let dir = std::env::temp_dir().join(format!("rpeak-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.cfg");
        std::fs::write(
            &path,
            "# comment\nrelen_short_len=161\nhyst_floor_uv=25\nmin_rr_dist_ms=200\nlogistic_B_policy=auto:16\n",
        )
        .unwrap();
        let map = parse_kv(&path).unwrap();
        let mut cfg = PipelineConfig::for_fs(250);
        apply_overrides(&mut cfg, &map, 250).unwrap();
        assert_eq!(cfg.preprocess.relen_short_len, 161);
        assert_eq!(cfg.hysteresis.floor_uv, 25.0);
        assert_eq!(cfg.bayeslope.min_rr_dist, 50);
        assert_eq!(
            cfg.bayeslope.b_policy,
            LogisticBPolicy::CentroidSpread { gain: 16.0 }
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = PipelineConfig::for_fs(250);
        let mut map = BTreeMap::new();
        map.insert("not_a_key".to_string(), "1".to_string());
        assert!(apply_overrides(&mut cfg, &map, 250).is_err());
    }
}
