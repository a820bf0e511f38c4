//! Time-varying register of an f0 segment: windowed median sequences for
//! base-, mid-, and topline, linear fits over normalized time, range line,
//! reset features, and the residual that feeds local contour stylization.

use crate::config::{NrmCfg, PrctCfg, StylGlobCfg};
use crate::dsp;
use crate::sigio::F0_STEP;
use crate::stats;

#[derive(Debug, Clone)]
pub struct MedianSequence {
    /// Window midpoints, segment-relative seconds.
    pub t: Vec<f64>,
    pub bl: Vec<f64>,
    pub ml: Vec<f64>,
    pub tl: Vec<f64>,
}

/// Windowed medians stepped at 10 ms: midline over all values, baseline over
/// values at or below the lower percentile, topline at or above the upper.
pub fn median_sequences(y: &[f64], decl_win: f64, prct: &PrctCfg) -> MedianSequence {
    let ts: Vec<f64> = (0..y.len()).map(|i| i as f64 * F0_STEP).collect();
    median_sequences_at(&ts, y, decl_win, prct)
}

/// Same as [`median_sequences`] over explicitly stamped samples; the window
/// midpoint is the mean of the first and last stamp in the window, so gaps
/// in the stamps (e.g. a pause cut out between two segments) survive into
/// the regression abscissa.
pub fn median_sequences_at(ts: &[f64], y: &[f64], decl_win: f64, prct: &PrctCfg) -> MedianSequence {
    let n = y.len();
    let win = ((decl_win / F0_STEP).round() as usize).max(1);
    let starts: Vec<usize> = if n < win {
        log::info!("segment shorter than register window; using one whole-segment window");
        vec![0]
    } else {
        (0..=n - win).collect()
    };
    let mut out = MedianSequence {
        t: Vec::with_capacity(starts.len()),
        bl: Vec::with_capacity(starts.len()),
        ml: Vec::with_capacity(starts.len()),
        tl: Vec::with_capacity(starts.len()),
    };
    for i in starts {
        let w = &y[i..(i + win).min(n)];
        out.t.push((ts[i] + ts[i + w.len() - 1]) / 2.0);
        out.ml.push(stats::median(w));
        let lo = stats::percentile(w, prct.bl);
        let hi = stats::percentile(w, prct.tl);
        let sub_lo: Vec<f64> = w.iter().copied().filter(|&v| v <= lo).collect();
        let sub_hi: Vec<f64> = w.iter().copied().filter(|&v| v >= hi).collect();
        out.bl.push(if sub_lo.is_empty() {
            log::info!("empty baseline window subset; falling back to full median");
            stats::median(w)
        } else {
            stats::median(&sub_lo)
        });
        out.tl.push(if sub_hi.is_empty() {
            log::info!("empty topline window subset; falling back to full median");
            stats::median(w)
        } else {
            stats::median(&sub_hi)
        });
    }
    out
}

#[derive(Debug, Clone)]
pub struct LineFit {
    /// Slope and intercept over normalized time.
    pub c: [f64; 2],
    /// Stylized values at the window midpoints.
    pub y: Vec<f64>,
    /// Slope per second of real time.
    pub rate: f64,
    /// Mean of the stylized line.
    pub m: f64,
}

#[derive(Debug, Clone)]
pub struct RegisterFit {
    pub tn: Vec<f64>,
    pub bl: LineFit,
    pub ml: LineFit,
    pub tl: LineFit,
    pub rng: LineFit,
    pub err: bool,
    /// Real-time span of the window midpoints (segment-relative seconds)
    /// and the normalized range they map onto.
    t_map: (f64, f64),
    nrm_rng: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Bl,
    Ml,
    Tl,
    Rng,
}

impl LineKind {
    pub const ALL: [LineKind; 4] = [LineKind::Bl, LineKind::Ml, LineKind::Tl, LineKind::Rng];
    pub fn name(self) -> &'static str {
        match self {
            LineKind::Bl => "bl",
            LineKind::Ml => "ml",
            LineKind::Tl => "tl",
            LineKind::Rng => "rng",
        }
    }
}

/// Residual mode selected by the register setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterMode {
    Bl,
    Ml,
    Tl,
    Rng,
    None,
}

impl RegisterMode {
    pub fn parse(s: &str) -> Self {
        match s {
            "bl" => RegisterMode::Bl,
            "ml" => RegisterMode::Ml,
            "tl" => RegisterMode::Tl,
            "rng" => RegisterMode::Rng,
            _ => RegisterMode::None,
        }
    }
}

fn minmax_map(t: &[f64], rng: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = (t[0], t[t.len() - 1]);
    if hi - lo <= 0.0 {
        return vec![rng.0; t.len()];
    }
    t.iter().map(|&x| rng.0 + (x - lo) / (hi - lo) * (rng.1 - rng.0)).collect()
}

fn fit_line(tn: &[f64], y: &[f64], t_span: f64, nrm_span: f64) -> LineFit {
    let c = if tn.len() < 2 || tn[tn.len() - 1] - tn[0] <= 0.0 {
        [0.0, stats::mean(y)]
    } else {
        let co = dsp::polyfit(tn, y, 1).unwrap_or_else(|_| vec![0.0, stats::mean(y)]);
        [co[0], co[1]]
    };
    let sy: Vec<f64> = tn.iter().map(|&x| c[0] * x + c[1]).collect();
    let rate = if t_span > 0.0 { c[0] * nrm_span / t_span } else { 0.0 };
    let m = stats::mean(&sy);
    LineFit { c, y: sy, rate, m }
}

/// Fits all four register lines to a median sequence.
pub fn fit_register(seq: &MedianSequence, nrm: &NrmCfg) -> RegisterFit {
    let rng_pair = (nrm.rng[0], nrm.rng[1]);
    let tn = minmax_map(&seq.t, rng_pair);
    let t_span = seq.t[seq.t.len() - 1] - seq.t[0];
    let nrm_span = rng_pair.1 - rng_pair.0;
    let bl = fit_line(&tn, &seq.bl, t_span, nrm_span);
    let ml = fit_line(&tn, &seq.ml, t_span, nrm_span);
    let tl = fit_line(&tn, &seq.tl, t_span, nrm_span);
    let dist: Vec<f64> = seq.tl.iter().zip(&seq.bl).map(|(a, b)| a - b).collect();
    let rng = fit_line(&tn, &dist, t_span, nrm_span);
    let err = bl.y.iter().zip(&tl.y).any(|(b, t)| t - b < 0.0);
    RegisterFit {
        tn,
        bl,
        ml,
        tl,
        rng,
        err,
        t_map: (seq.t[0], seq.t[seq.t.len() - 1]),
        nrm_rng: rng_pair,
    }
}

/// Register fit of one segment with config defaults applied.
pub fn fit_segment(y: &[f64], cfg: &StylGlobCfg) -> RegisterFit {
    let seq = median_sequences(y, cfg.decl_win, &cfg.prct);
    fit_register(&seq, &cfg.nrm)
}

impl RegisterFit {
    pub fn line(&self, kind: LineKind) -> &LineFit {
        match kind {
            LineKind::Bl => &self.bl,
            LineKind::Ml => &self.ml,
            LineKind::Tl => &self.tl,
            LineKind::Rng => &self.rng,
        }
    }

    /// Normalized time for a segment-relative second; extrapolates linearly
    /// beyond the window-midpoint span.
    pub fn tn_at(&self, t: f64) -> f64 {
        let (lo, hi) = self.t_map;
        if hi - lo <= 0.0 {
            return self.nrm_rng.0;
        }
        self.nrm_rng.0 + (t - lo) / (hi - lo) * (self.nrm_rng.1 - self.nrm_rng.0)
    }

    /// Stylized line value at a segment-relative second.
    pub fn line_at(&self, kind: LineKind, t: f64) -> f64 {
        let c = self.line(kind).c;
        c[0] * self.tn_at(t) + c[1]
    }
}

const RNG_EPS: f64 = 1e-10;

/// Removes the register from a segment contour. `y` are the f0 samples of
/// the segment on the 10 ms grid starting at the segment onset.
pub fn residual(y: &[f64], fit: &RegisterFit, mode: RegisterMode) -> Vec<f64> {
    match mode {
        RegisterMode::None => y.to_vec(),
        RegisterMode::Bl | RegisterMode::Ml | RegisterMode::Tl => {
            let kind = match mode {
                RegisterMode::Bl => LineKind::Bl,
                RegisterMode::Tl => LineKind::Tl,
                _ => LineKind::Ml,
            };
            y.iter()
                .enumerate()
                .map(|(i, &v)| v - fit.line_at(kind, i as f64 * F0_STEP))
                .collect()
        }
        RegisterMode::Rng => {
            let mut clamped = false;
            let out = y
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let t = i as f64 * F0_STEP;
                    let b = fit.line_at(LineKind::Bl, t);
                    let mut d = fit.line_at(LineKind::Tl, t) - b;
                    if d <= RNG_EPS {
                        d = RNG_EPS;
                        clamped = true;
                    }
                    (v - b) / d
                })
                .collect();
            if clamped {
                log::warn!("range residual: top- and baseline distance clamped to epsilon");
            }
            out
        }
    }
}

/// Re-adds the register: the inverse of [`residual`].
pub fn restore(res: &[f64], fit: &RegisterFit, mode: RegisterMode) -> Vec<f64> {
    match mode {
        RegisterMode::None => res.to_vec(),
        RegisterMode::Bl | RegisterMode::Ml | RegisterMode::Tl => {
            let kind = match mode {
                RegisterMode::Bl => LineKind::Bl,
                RegisterMode::Tl => LineKind::Tl,
                _ => LineKind::Ml,
            };
            res.iter()
                .enumerate()
                .map(|(i, &v)| v + fit.line_at(kind, i as f64 * F0_STEP))
                .collect()
        }
        RegisterMode::Rng => res
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let t = i as f64 * F0_STEP;
                let b = fit.line_at(LineKind::Bl, t);
                let d = (fit.line_at(LineKind::Tl, t) - b).max(RNG_EPS);
                b + v * d
            })
            .collect(),
    }
}

/// Onset resets between consecutive fits: initial stylized value of each
/// segment minus the final stylized value of its predecessor. The first
/// segment gets 0 for every line.
pub fn reset_features(fits: &[&RegisterFit]) -> Vec<[f64; 4]> {
    fits.iter()
        .enumerate()
        .map(|(i, fit)| {
            if i == 0 {
                return [0.0; 4];
            }
            let prev = fits[i - 1];
            let mut r = [0.0; 4];
            for (k, kind) in LineKind::ALL.iter().enumerate() {
                let cur = fit.line(*kind);
                let pre = prev.line(*kind);
                r[k] = cur.y.first().copied().unwrap_or(0.0)
                    - pre.y.last().copied().unwrap_or(0.0);
            }
            r
        })
        .collect()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn default_glob() -> StylGlobCfg {
        StylGlobCfg::default()
    }

    #[test]
    fn constant_contour_yields_flat_coincident_lines() {
        let y = vec![5.0; 100];
        let seq = median_sequences(&y, 0.1, &PrctCfg::default());
        assert!(seq.bl.iter().all(|&v| v == 5.0));
        assert!(seq.ml.iter().all(|&v| v == 5.0));
        assert!(seq.tl.iter().all(|&v| v == 5.0));
        let fit = fit_register(&seq, &NrmCfg::default());
        assert_abs_diff_eq!(fit.ml.c[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.ml.c[1], 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.rng.c[0], 0.0, epsilon = 1e-9);
        assert!(!fit.err);
    }

    #[test]
    fn ramp_midline_follows_ramp() {
        let y: Vec<f64> = (0..200).map(|i| 10.0 - 0.01 * i as f64).collect();
        let seq = median_sequences(&y, 0.1, &PrctCfg::default());
        for (i, &t) in seq.t.iter().enumerate() {
            let expect = 10.0 - 0.01 * (t / F0_STEP);
            assert_abs_diff_eq!(seq.ml[i], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn declining_band_recovers_slopes() {
        // band: midline falls 2 st over 2 s, spread alternates +-1 st
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                let mid = 10.0 - 1.0 * t;
                mid + if i % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        let fit = fit_segment(&y, &default_glob());
        // tn spans the window midpoints (1.9 s), over which the midline falls 1.9 st
        assert_abs_diff_eq!(fit.ml.c[0], -1.9, epsilon = 0.05);
        assert_abs_diff_eq!(fit.bl.c[0], fit.tl.c[0], epsilon = 0.1);
        assert_abs_diff_eq!(fit.rng.c[0], 0.0, epsilon = 0.1);
        assert!(!fit.err);
        // rate is per real second
        assert_abs_diff_eq!(fit.ml.rate, -1.0, epsilon = 0.05);
    }

    #[test]
    fn rng_fit_equals_line_difference() {
        let y: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                8.0 - 0.5 * t + if i % 3 == 0 { 1.5 } else { -(i % 2) as f64 }
            })
            .collect();
        let fit = fit_segment(&y, &default_glob());
        assert_abs_diff_eq!(fit.rng.c[0], fit.tl.c[0] - fit.bl.c[0], epsilon = 1e-9);
        assert_abs_diff_eq!(fit.rng.c[1], fit.tl.c[1] - fit.bl.c[1], epsilon = 1e-9);
    }

    #[test]
    fn constructed_crossing_sets_err() {
        // lower band rises steeply while upper band falls: lines cross
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                if i % 2 == 0 {
                    2.0 + 4.0 * t
                } else {
                    6.0 - 4.0 * t
                }
            })
            .collect();
        let fit = fit_segment(&y, &default_glob());
        assert!(fit.err);
    }

    #[test]
    fn short_segment_uses_single_window() {
        let y = vec![4.0, 5.0, 6.0];
        let seq = median_sequences(&y, 0.1, &PrctCfg::default());
        assert_eq!(seq.t.len(), 1);
        assert_eq!(seq.ml[0], 5.0);
        let fit = fit_register(&seq, &NrmCfg::default());
        assert_eq!(fit.ml.c[0], 0.0);
        assert_eq!(fit.ml.rate, 0.0);
    }

    #[test]
    fn residual_modes() {
        let y: Vec<f64> = (0..150).map(|i| 7.0 - 0.02 * i as f64).collect();
        let fit = fit_segment(&y, &default_glob());

        assert_eq!(residual(&y, &fit, RegisterMode::None), y);

        let res_ml = residual(&y, &fit, RegisterMode::Ml);
        assert!(stats::mean(&res_ml).abs() < 1e-6);
        for &v in &res_ml {
            assert!(v.abs() < 1e-6);
        }
    }

    #[test]
    fn rng_residual_maps_lines_to_unit_band() {
        // two-level band so bl and tl are distinct and parallel
        let y: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 10.0 } else { 6.0 }).collect();
        let fit = fit_segment(&y, &default_glob());
        let top = vec![10.0; 200];
        let res = residual(&top, &fit, RegisterMode::Rng);
        for &v in &res {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);
        }
        let bottom = vec![6.0; 200];
        let res = residual(&bottom, &fit, RegisterMode::Rng);
        for &v in &res {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn restore_inverts_residual() {
        let y: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                9.0 - 0.8 * t + (i % 5) as f64 * 0.3
            })
            .collect();
        let fit = fit_segment(&y, &default_glob());
        for mode in [RegisterMode::Bl, RegisterMode::Ml, RegisterMode::Tl, RegisterMode::Rng] {
            let res = residual(&y, &fit, mode);
            let back = restore(&res, &fit, mode);
            for (a, b) in back.iter().zip(&y) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn refit_on_ml_residual_is_flat() {
        let y: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                12.0 - 1.2 * t + ((i % 7) as f64 - 3.0) * 0.2
            })
            .collect();
        let fit = fit_segment(&y, &default_glob());
        let res = residual(&y, &fit, RegisterMode::Ml);
        let refit = fit_segment(&res, &default_glob());
        assert!(refit.ml.c[0].abs() < 1e-3, "slope {}", refit.ml.c[0]);
    }

    #[test]
    fn resets_between_consecutive_fits() {
        let flat = |level: f64| {
            let y = vec![level; 100];
            fit_segment(&y, &default_glob())
        };
        let a = flat(5.0);
        let b = flat(5.0);
        let c = flat(3.0);
        let d = flat(5.0);
        let rs = reset_features(&[&a, &b, &c, &d]);
        assert_eq!(rs[0], [0.0; 4]);
        for k in 0..4 {
            assert_abs_diff_eq!(rs[1][k], 0.0, epsilon = 1e-9);
        }
        // ml reset: 3 - 5 = -2, then 5 - 3 = 2
        assert_abs_diff_eq!(rs[2][1], -2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rs[3][1], 2.0, epsilon = 1e-9);
    }
}
