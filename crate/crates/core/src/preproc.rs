//! F0 contour preprocessing: outlier removal, interpolation over unvoiced
//! stretches, smoothing, base value computation, semitone conversion, and
//! the analysis/normalization window geometry shared by the feature sets.

use crate::annot::AnnotItem;
use crate::config::{OutlierCfg, Preproc, SmoothCfg};
use crate::dsp;
use crate::error::{Error, Result};
use crate::sigio::FileGroup;
use crate::stats;
use std::collections::BTreeMap;

/// Values at or below this count as undefined (unvoiced).
const VOICED_MIN: f64 = 1e-9;

fn voiced(y: f64) -> bool {
    y > VOICED_MIN
}

/// Interval of admissible values; anything outside is an outlier.
pub fn outlier_bounds(values: &[f64], spec: &OutlierCfg) -> (f64, f64) {
    let f = spec.f;
    match spec.m.as_str() {
        "mean" => {
            let m = stats::mean(values);
            let sd = stats::std_pop(values);
            (m - f * sd, m + f * sd)
        }
        "median" => {
            let med = stats::median(values);
            let iqr = stats::iqr(values);
            (med - f * iqr, med + f * iqr)
        }
        _ => {
            let q1 = stats::percentile(values, 25.0);
            let q3 = stats::percentile(values, 75.0);
            let iqr = q3 - q1;
            (q1 - f * iqr, q3 + f * iqr)
        }
    }
}

/// Zeroes outlying voiced samples. Contours with fewer than 4 voiced samples
/// pass through unchanged.
pub fn remove_outliers(y: &[f64], spec: &OutlierCfg) -> Vec<f64> {
    let vv: Vec<f64> = y.iter().copied().filter(|&v| voiced(v)).collect();
    if vv.len() < 4 {
        return y.to_vec();
    }
    let (lo, hi) = outlier_bounds(&vv, spec);
    y.iter()
        .map(|&v| if voiced(v) && (v < lo || v > hi) { 0.0 } else { v })
        .collect()
}

/// Fills unvoiced samples by linear interpolation between voiced neighbors,
/// with horizontal extrapolation at the edges.
pub fn interpolate_zeros(y: &[f64]) -> Result<Vec<f64>> {
    let xs: Vec<f64> = (0..y.len()).filter(|&i| voiced(y[i])).map(|i| i as f64).collect();
    if xs.is_empty() {
        return Err(Error::Data("f0 contour has no voiced samples".into()));
    }
    let ys: Vec<f64> = xs.iter().map(|&i| y[i as usize]).collect();
    let xq: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    Ok(dsp::interp_linear(&xq, &xs, &ys))
}

/// Running median with mirrored edges; even windows are shrunk by one.
pub fn median_smooth(y: &[f64], win: usize) -> Vec<f64> {
    if y.is_empty() {
        return vec![];
    }
    let mut win = win.min(if y.len() % 2 == 1 { y.len() } else { y.len() - 1 });
    if win % 2 == 0 {
        win -= 1;
    }
    if win < 3 {
        return y.to_vec();
    }
    let half = (win / 2) as isize;
    let n = y.len() as isize;
    let at = |i: isize| -> f64 {
        let j = if i < 0 {
            -i
        } else if i >= n {
            2 * (n - 1) - i
        } else {
            i
        };
        y[j as usize]
    };
    (0..n)
        .map(|c| {
            let w: Vec<f64> = (-half..=half).map(|d| at(c + d)).collect();
            stats::median(&w)
        })
        .collect()
}

pub fn smooth_contour(y: &[f64], spec: &SmoothCfg) -> Vec<f64> {
    match spec.mtd.as_str() {
        "med" => median_smooth(y, spec.win),
        _ => dsp::savgol_smooth(y, spec.win, spec.ord),
    }
}

/// Outlier removal, interpolation, smoothing — everything up to (but not
/// including) the base value conversion, which may pool across files.
pub fn clean_channel(y: &[f64], out: &OutlierCfg, smooth: &SmoothCfg) -> Result<Vec<f64>> {
    let y = remove_outliers(y, out);
    let y = interpolate_zeros(&y)?;
    Ok(smooth_contour(&y, smooth))
}

/// Base value: median of the values at or below the given percentile.
/// prct = 0 switches normalization off (base value 1).
pub fn base_value(values: &[f64], prct: f64) -> f64 {
    if prct <= 0.0 || values.is_empty() {
        return 1.0;
    }
    let thresh = stats::percentile(values, prct);
    let low: Vec<f64> = values.iter().copied().filter(|&v| v <= thresh).collect();
    stats::median(&low)
}

/// Pooling key for base values: channels with a grouping variable share one
/// base value per group level across the corpus; all others get one per
/// file and channel. `ci` is 0-based.
pub fn base_pool_key(
    fi: usize,
    ci: usize,
    grp: &FileGroup,
    base_prct_grp: &BTreeMap<String, String>,
) -> String {
    if let Some(var) = base_prct_grp.get(&(ci + 1).to_string()) {
        if let Some(level) = grp.get(var) {
            if !level.is_empty() {
                return format!("g:{level}");
            }
        }
        log::warn!("grouping variable '{var}' not derivable from file name; falling back to per-file base value");
    }
    format!("f:{fi}:{ci}")
}

/// Semitone conversion relative to a base value, or plain base value
/// subtraction when `st` is off.
pub fn convert_contour(y: &[f64], bv: f64, st: bool) -> Vec<f64> {
    if st {
        y.iter().map(|&v| 12.0 * (v.max(VOICED_MIN) / bv).log2()).collect()
    } else {
        y.iter().map(|&v| v - bv).collect()
    }
}

/// Symmetric time window attached to an annotation item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisWindow {
    pub t_on: f64,
    pub t_off: f64,
    pub center: f64,
}

impl AnalysisWindow {
    pub fn len(&self) -> f64 {
        self.t_off - self.t_on
    }
    pub fn is_empty(&self) -> bool {
        self.t_off <= self.t_on
    }
}

fn clip(t_on: f64, t_off: f64, center: f64, parent: (f64, f64)) -> AnalysisWindow {
    let t_on = t_on.max(parent.0);
    let t_off = t_off.min(parent.1).max(t_on);
    AnalysisWindow { t_on, t_off, center: center.clamp(t_on, t_off) }
}

/// Analysis window for an event: `win` seconds centered on the stamp,
/// clipped to the parent domain.
pub fn point_window(t: f64, win: f64, parent: (f64, f64)) -> AnalysisWindow {
    clip(t - win / 2.0, t + win / 2.0, t, parent)
}

/// Normalization window: centered on the segment midpoint (or the event
/// stamp), at least as long as the segment itself, clipped to the parent.
pub fn nrm_window(item: &AnnotItem, nrm_win: f64, parent: (f64, f64)) -> AnalysisWindow {
    let c = item.mid();
    let half = (nrm_win.max(item.dur())) / 2.0;
    clip(c - half, c + half, c, parent)
}

/// Normalization window for parallel segment + event input: centered on the
/// event stamp, clipped to the carrying segment's parent domain.
pub fn nrm_window_at(center: f64, seg_dur: f64, nrm_win: f64, parent: (f64, f64)) -> AnalysisWindow {
    let half = (nrm_win.max(seg_dur)) / 2.0;
    clip(center - half, center + half, center, parent)
}

/// One preprocessed f0 channel on the 10 ms grid.
#[derive(Debug, Clone)]
pub struct PreprocessedChannel {
    /// Converted contour (semitones, or Hz minus base value).
    pub y: Vec<f64>,
    /// Cleaned contour in Hz (outliers removed, interpolated, smoothed).
    pub y_hz: Vec<f64>,
    pub bv: f64,
}

/// Converts cleaned channels into their final scale. Keys of `pools` come
/// from [`base_pool_key`]; each pool concatenates the cleaned values of all
/// member channels before the base value is taken.
pub fn convert_channels(
    cleaned: Vec<(String, Vec<f64>)>,
    cfg: &Preproc,
) -> Vec<PreprocessedChannel> {
    let mut pools: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (key, y) in &cleaned {
        pools.entry(key).or_default().extend_from_slice(y);
    }
    let bvs: BTreeMap<&str, f64> =
        pools.iter().map(|(k, v)| (*k, base_value(v, cfg.base_prct))).collect();
    cleaned
        .iter()
        .map(|(key, y)| {
            let bv = bvs[key.as_str()];
            PreprocessedChannel { y: convert_contour(y, bv, cfg.st), y_hz: y.clone(), bv }
        })
        .collect()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn out_spec(m: &str, f: f64) -> OutlierCfg {
        OutlierCfg { m: m.into(), f }
    }

    #[test]
    fn mean_rule_flags_far_value() {
        // 49 x 100 plus one 500: mean 108, population sd 56, band [-4, 220]
        let mut y = vec![100.0; 49];
        y.push(500.0);
        let out = remove_outliers(&y, &out_spec("mean", 2.0));
        assert_eq!(out[49], 0.0);
        assert!(out[..49].iter().all(|&v| v == 100.0));
    }

    #[test]
    fn constant_contour_has_no_outliers() {
        let y = vec![120.0; 30];
        assert_eq!(remove_outliers(&y, &out_spec("mean", 2.0)), y);
        assert_eq!(remove_outliers(&y, &out_spec("median", 2.0)), y);
    }

    #[test]
    fn fence_rule_keeps_uniform_ramp() {
        let y: Vec<f64> = (0..100).map(f64::from).collect();
        let kept = remove_outliers(&y, &out_spec("fence", 2.0));
        // index 0 is unvoiced by convention, everything else must survive
        assert!(kept[1..].iter().zip(&y[1..]).all(|(a, b)| a == b));
    }

    #[test]
    fn median_rule_uses_iqr_band() {
        // median 100, iqr 0 -> only exact median survives
        let y = vec![100.0, 100.0, 100.0, 100.0, 101.0];
        let out = remove_outliers(&y, &out_spec("median", 2.0));
        assert_eq!(out, vec![100.0, 100.0, 100.0, 100.0, 0.0]);
    }

    #[test]
    fn few_voiced_samples_skip_outlier_pass() {
        let y = vec![0.0, 100.0, 0.0, 900.0, 0.0, 90.0];
        assert_eq!(remove_outliers(&y, &out_spec("mean", 1.0)), y);
    }

    #[test]
    fn interpolation_fills_gaps_linearly() {
        let y = vec![0.0, 100.0, 0.0, 200.0, 0.0];
        let out = interpolate_zeros(&y).unwrap();
        assert_eq!(out, vec![100.0, 100.0, 150.0, 200.0, 200.0]);
    }

    #[test]
    fn interpolation_handles_pure_extrapolation() {
        assert_eq!(interpolate_zeros(&[0.0, 0.0, 5.0]).unwrap(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn interpolation_keeps_dense_contours() {
        let y = vec![100.0, 110.0, 120.0];
        assert_eq!(interpolate_zeros(&y).unwrap(), y);
    }

    #[test]
    fn all_unvoiced_is_an_error() {
        assert!(interpolate_zeros(&[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn median_filter_removes_impulse() {
        let mut y = vec![1.0; 9];
        y[4] = 50.0;
        let out = median_smooth(&y, 3);
        assert_eq!(out, vec![1.0; 9]);
    }

    #[test]
    fn median_filter_even_window_shrinks() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(median_smooth(&y, 4), median_smooth(&y, 3));
    }

    #[test]
    fn sgolay_keeps_cubic_interior() {
        let y: Vec<f64> = (0..30).map(|i| {
            let t = i as f64 / 10.0;
            0.3 * t * t * t - t + 2.0
        }).collect();
        let spec = SmoothCfg { mtd: "sgolay".into(), ord: 3, win: 7 };
        let out = smooth_contour(&y, &spec);
        for i in 3..27 {
            assert_abs_diff_eq!(out[i], y[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sgolay_reduces_noise_variance() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = dsp::savgol_smooth(&y, 7, 3);
        let var = |v: &[f64]| {
            let s = stats::std_pop(v);
            s * s
        };
        assert!(var(&out) < var(&y));
    }

    #[test]
    fn base_value_examples() {
        assert_eq!(base_value(&[100.0, 200.0], 0.0), 1.0);
        assert_eq!(base_value(&[100.0; 20], 5.0), 100.0);
        let ramp: Vec<f64> = (0..=100).map(|i| 100.0 + f64::from(i)).collect();
        assert_abs_diff_eq!(base_value(&ramp, 50.0), 125.0, epsilon = 1e-12);
    }

    #[test]
    fn semitone_conversion_octaves() {
        let out = convert_contour(&[200.0, 100.0, 440.0], 100.0, true);
        assert_abs_diff_eq!(out[0], 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], 0.0, epsilon = 1e-12);
        let two_oct = convert_contour(&[440.0], 110.0, true);
        assert_abs_diff_eq!(two_oct[0], 24.0, epsilon = 1e-12);
    }

    #[test]
    fn base_subtraction_when_st_off() {
        assert_eq!(convert_contour(&[150.0, 90.0], 100.0, false), vec![50.0, -10.0]);
    }

    #[test]
    fn point_window_centers_and_clips() {
        let w = point_window(1.0, 0.3, (0.0, 10.0));
        assert_abs_diff_eq!(w.t_on, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t_off, 1.15, epsilon = 1e-12);
        let w = point_window(0.05, 0.3, (0.0, 10.0));
        assert_abs_diff_eq!(w.t_on, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t_off, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn nrm_window_respects_minimum_length() {
        let seg = AnnotItem::segment(1.0, 3.0, "x");
        let w = nrm_window(&seg, 0.6, (0.0, 10.0));
        assert_abs_diff_eq!(w.t_on, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t_off, 3.0, epsilon = 1e-12);

        let short = AnnotItem::segment(1.0, 1.2, "x");
        let w = nrm_window(&short, 0.6, (0.0, 10.0));
        assert_abs_diff_eq!(w.t_on, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t_off, 1.4, epsilon = 1e-12);
    }

    #[test]
    fn nrm_window_event_centers_on_stamp() {
        let ev = AnnotItem::event(2.0, "x");
        let w = nrm_window(&ev, 0.6, (0.0, 10.0));
        assert_abs_diff_eq!(w.t_on, 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(w.t_off, 2.3, epsilon = 1e-12);
        assert_abs_diff_eq!(w.center, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pool_keys_group_by_level() {
        let mut grp = FileGroup::new();
        grp.insert("spk".into(), "anna".into());
        let mut cfg = BTreeMap::new();
        cfg.insert("1".to_string(), "spk".to_string());

        // channel 0 (index "1") pools by speaker, channel 1 stays per file
        assert_eq!(base_pool_key(3, 0, &grp, &cfg), "g:anna");
        assert_eq!(base_pool_key(3, 1, &grp, &cfg), "f:3:1");
        // missing grouping value falls back
        assert_eq!(base_pool_key(2, 0, &FileGroup::new(), &cfg), "f:2:0");
    }

    #[test]
    fn pooled_conversion_shares_base_value() {
        let cfg = Preproc::default();
        let a = vec![100.0; 50];
        let b = vec![200.0; 50];
        let out = convert_channels(
            vec![("g:x".into(), a), ("g:x".into(), b)],
            &cfg,
        );
        assert_eq!(out[0].bv, out[1].bv);
        assert_eq!(out[0].bv, 100.0);
        assert_abs_diff_eq!(out[1].y[0], 12.0, epsilon = 1e-12);
    }

    #[test]
    fn full_clean_pass_leaves_no_gaps() {
        let mut y = vec![0.0; 200];
        for i in 20..180 {
            y[i] = 120.0 + 20.0 * ((i as f64) / 30.0).sin();
        }
        y[90] = 700.0;
        let out = clean_channel(&y, &out_spec("mean", 2.0), &SmoothCfg::default()).unwrap();
        assert_eq!(out.len(), 200);
        assert!(out.iter().all(|&v| v.is_finite() && v > 0.0));
        assert!(out.iter().all(|&v| v < 300.0));
    }

    #[test]
    fn semitone_conversion_is_monotone() {
        use proptest::prelude::*;
        proptest!(|(a in 50.0f64..500.0, d in 0.001f64..200.0)| {
            let y = convert_contour(&[a, a + d], 100.0, true);
            prop_assert!(y[1] > y[0]);
        });
    }
}
