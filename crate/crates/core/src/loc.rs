//! Local contour stylization: pairing of accent-group segments and accent
//! events, piecewise time normalization, polynomial fits on the f0 residual,
//! gestalt comparison against the parent register, and resynthesis.

use crate::annot::{is_pause_label, Tier};
use crate::dsp;
use crate::error::{Error, Result};
use crate::register::{restore, LineKind, RegisterFit, RegisterMode};
use crate::sigio::F0_STEP;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalCase {
    /// Segment tier only; the center is the midpoint.
    Segment,
    /// Event tier only; the span is a symmetric window around the stamp.
    Event,
    /// Segment and event tier; the event stamp is the zero-center.
    Both,
}

#[derive(Debug, Clone)]
pub struct LocalSpan {
    pub t_on: f64,
    pub t_off: f64,
    pub center: f64,
    /// Original input stamps (1 event, 2 segment, 3 both).
    pub to: Vec<f64>,
    pub lab_ag: String,
    pub lab_acc: String,
}

impl LocalSpan {
    pub fn case(&self) -> LocalCase {
        match self.to.len() {
            1 => LocalCase::Event,
            2 => LocalCase::Segment,
            _ => LocalCase::Both,
        }
    }
}

/// Builds local segments from the configured tier layout: segments alone,
/// events alone (expanded by `point_win`), or both, where each segment
/// adopts one contained event as its center. Multiple contained events are
/// resolved by `align` (skip | left | right).
pub fn build_local_spans(
    ag: Option<&Tier>,
    acc: Option<&Tier>,
    point_win: f64,
    align: &str,
    pause_label: &str,
    file_dur: f64,
) -> Vec<LocalSpan> {
    let keep = |t: &Tier| {
        t.items
            .iter()
            .filter(|it| !is_pause_label(&it.label, pause_label))
            .cloned()
            .collect::<Vec<_>>()
    };
    match (ag, acc) {
        (Some(ag), None) => keep(ag)
            .into_iter()
            .map(|s| LocalSpan {
                t_on: s.t_start,
                t_off: s.t_end,
                center: s.mid(),
                to: vec![s.t_start, s.t_end],
                lab_ag: s.label,
                lab_acc: String::new(),
            })
            .collect(),
        (None, Some(acc)) => keep(acc)
            .into_iter()
            .map(|e| {
                let w = crate::preproc::point_window(e.t_start, point_win, (0.0, file_dur));
                LocalSpan {
                    t_on: w.t_on,
                    t_off: w.t_off,
                    center: e.t_start,
                    to: vec![e.t_start],
                    lab_ag: String::new(),
                    lab_acc: e.label,
                }
            })
            .collect(),
        (Some(ag), Some(acc)) => {
            let events = keep(acc);
            keep(ag)
                .into_iter()
                .filter_map(|s| {
                    let inside: Vec<_> = events
                        .iter()
                        .filter(|e| e.t_start >= s.t_start - 1e-9 && e.t_start <= s.t_end + 1e-9)
                        .collect();
                    let ev = match inside.len() {
                        0 => return None,
                        1 => inside[0],
                        _ => match align {
                            "left" => inside[0],
                            "right" => inside[inside.len() - 1],
                            _ => {
                                log::info!(
                                    "segment [{:.3} {:.3}] has {} centers; skipped",
                                    s.t_start,
                                    s.t_end,
                                    inside.len()
                                );
                                return None;
                            }
                        },
                    };
                    Some(LocalSpan {
                        t_on: s.t_start,
                        t_off: s.t_end,
                        center: ev.t_start.clamp(s.t_start, s.t_end),
                        to: vec![s.t_start, s.t_end, ev.t_start],
                        lab_ag: s.label.clone(),
                        lab_acc: ev.label.clone(),
                    })
                })
                .collect()
        }
        (None, None) => vec![],
    }
}

/// Index of the global segment that fully contains [t_on, t_off], if any.
pub fn find_parent(t_on: f64, t_off: f64, globals: &[(f64, f64)]) -> Option<usize> {
    globals
        .iter()
        .position(|&(g_on, g_off)| t_on >= g_on - 1e-9 && t_off <= g_off + 1e-9)
}

/// Normalized time for f0 sample stamps inside a local span. Plain segments
/// and events map min-max onto `rng`; with an off-center event stamp the
/// two halves map piecewise onto [-1, 0[ and [0, 1].
pub fn normalize_time(ts: &[f64], span: &LocalSpan, rng: (f64, f64)) -> Vec<f64> {
    match span.case() {
        LocalCase::Both => ts
            .iter()
            .map(|&t| {
                if t < span.center {
                    let d = span.center - span.t_on;
                    if d <= 0.0 {
                        0.0
                    } else {
                        (t - span.center) / d
                    }
                } else {
                    let d = span.t_off - span.center;
                    if d <= 0.0 {
                        0.0
                    } else {
                        (t - span.center) / d
                    }
                }
            })
            .collect(),
        _ => {
            let d = span.t_off - span.t_on;
            if d <= 0.0 {
                return vec![rng.0; ts.len()];
            }
            ts.iter().map(|&t| rng.0 + (t - span.t_on) / d * (rng.1 - rng.0)).collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolyFit {
    /// Coefficients, highest order first.
    pub c: Vec<f64>,
    /// Stylized values over the input time points.
    pub y: Vec<f64>,
}

/// Least-squares polynomial through the residual contour.
pub fn fit_local(tn: &[f64], y: &[f64], ord: usize) -> Result<PolyFit> {
    if y.len() < ord + 1 {
        return Err(Error::Data(format!(
            "{} samples cannot support an order-{ord} fit",
            y.len()
        )));
    }
    let c = dsp::polyfit(tn, y, ord)?;
    let sy = tn.iter().map(|&t| dsp::polyval(&c, t)).collect();
    Ok(PolyFit { c, y: sy })
}

/// RMSD between a stylization and its input.
pub fn fit_error(fit: &PolyFit, y: &[f64]) -> f64 {
    let d: Vec<f64> = fit.y.iter().zip(y).map(|(a, b)| a - b).collect();
    stats::rms(&d)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GestaltLine {
    pub rms: f64,
    pub sd: f64,
    pub d_init: f64,
    pub d_fin: f64,
}

/// Deviation of the local register from the parent register, per line kind
/// (bl, ml, tl, rng). `span` is the local segment relative to the parent
/// segment onset; lines are compared at the f0 sample grid.
pub fn gestalt_lines(
    local: &RegisterFit,
    global: &RegisterFit,
    span: (f64, f64),
    n_samples: usize,
) -> [GestaltLine; 4] {
    let mut out = [GestaltLine::default(); 4];
    let n = n_samples.max(1);
    for (k, kind) in LineKind::ALL.iter().enumerate() {
        let mut dev = Vec::with_capacity(n);
        for i in 0..n {
            let t_loc = i as f64 * F0_STEP;
            let t_glb = span.0 + t_loc;
            dev.push(local.line_at(*kind, t_loc) - global.line_at(*kind, t_glb));
        }
        out[k] = GestaltLine {
            rms: stats::rms(&dev),
            sd: local.line(*kind).rate - global.line(*kind).rate,
            d_init: dev[0],
            d_fin: dev[n - 1],
        };
    }
    out
}

/// Polynomial coefficient vectors for all four residual types of a local
/// contour against the parent register. `ts_glb` are the sample times
/// relative to the parent segment onset.
pub fn residual_coefs(
    y: &[f64],
    ts_glb: &[f64],
    global: &RegisterFit,
    tn: &[f64],
    ord: usize,
) -> Result<[Vec<f64>; 4]> {
    let mut out: [Vec<f64>; 4] = Default::default();
    for (k, kind) in LineKind::ALL.iter().enumerate() {
        let res: Vec<f64> = match kind {
            LineKind::Rng => y
                .iter()
                .zip(ts_glb)
                .map(|(&v, &t)| {
                    let b = global.line_at(LineKind::Bl, t);
                    let d = (global.line_at(LineKind::Tl, t) - b).max(1e-10);
                    (v - b) / d
                })
                .collect(),
            _ => y
                .iter()
                .zip(ts_glb)
                .map(|(&v, &t)| v - global.line_at(*kind, t))
                .collect(),
        };
        out[k] = fit_local(tn, &res, ord)?.c;
    }
    Ok(out)
}

/// Rebuilds a channel contour from the stylization: local polynomial values
/// inside local spans, zero residual elsewhere, the register restored per
/// global segment. Sample indices are on the 10 ms grid.
pub fn resynthesize_channel(
    n: usize,
    globals: &[(std::ops::Range<usize>, &RegisterFit)],
    locals: &[(std::ops::Range<usize>, &[f64])],
    mode: RegisterMode,
) -> Vec<f64> {
    let mut res = vec![0.0; n];
    for (range, vals) in locals {
        for (i, &v) in range.clone().zip(vals.iter()) {
            if i < n {
                res[i] = v;
            }
        }
    }
    let mut out = vec![0.0; n];
    for (range, fit) in globals {
        let seg: Vec<f64> = res[range.clone()].to_vec();
        let restored = restore(&seg, fit, mode);
        for (i, v) in range.clone().zip(restored) {
            if i < n {
                out[i] = v;
            }
        }
    }
    out
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::annot::{AnnotItem, Tier, TierKind};
    use crate::config::StylGlobCfg;
    use crate::register::fit_segment;
    use approx::assert_abs_diff_eq;

    fn seg_tier(items: &[(f64, f64, &str)]) -> Tier {
        Tier {
            name: "ag".into(),
            kind: TierKind::Segment,
            items: items.iter().map(|&(a, b, l)| AnnotItem::segment(a, b, l)).collect(),
            channel: 0,
        }
    }

    fn ev_tier(stamps: &[(f64, &str)]) -> Tier {
        Tier {
            name: "acc".into(),
            kind: TierKind::Event,
            items: stamps.iter().map(|&(t, l)| AnnotItem::event(t, l)).collect(),
            channel: 0,
        }
    }

    #[test]
    fn segment_only_spans() {
        let ag = seg_tier(&[(1.0, 3.0, "a"), (3.0, 4.0, "<P>")]);
        let spans = build_local_spans(Some(&ag), None, 0.3, "skip", "<P>", 10.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].case(), LocalCase::Segment);
        assert_abs_diff_eq!(spans[0].center, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn event_only_spans_use_point_window() {
        let acc = ev_tier(&[(1.0, "A")]);
        let spans = build_local_spans(None, Some(&acc), 0.3, "skip", "<P>", 10.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].case(), LocalCase::Event);
        assert_abs_diff_eq!(spans[0].t_on, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(spans[0].t_off, 1.15, epsilon = 1e-12);
    }

    #[test]
    fn multi_center_alignment() {
        let ag = seg_tier(&[(0.0, 2.0, "w")]);
        let acc = ev_tier(&[(0.5, "A"), (1.5, "B")]);
        assert!(build_local_spans(Some(&ag), Some(&acc), 0.3, "skip", "<P>", 5.0).is_empty());
        let left = build_local_spans(Some(&ag), Some(&acc), 0.3, "left", "<P>", 5.0);
        assert_abs_diff_eq!(left[0].center, 0.5, epsilon = 1e-12);
        assert_eq!(left[0].lab_acc, "A");
        let right = build_local_spans(Some(&ag), Some(&acc), 0.3, "right", "<P>", 5.0);
        assert_abs_diff_eq!(right[0].center, 1.5, epsilon = 1e-12);
        assert_eq!(right[0].case(), LocalCase::Both);
    }

    #[test]
    fn segment_without_center_is_dropped() {
        let ag = seg_tier(&[(0.0, 1.0, "w"), (1.0, 2.0, "v")]);
        let acc = ev_tier(&[(1.5, "A")]);
        let spans = build_local_spans(Some(&ag), Some(&acc), 0.3, "skip", "<P>", 5.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].lab_ag, "v");
    }

    #[test]
    fn parent_lookup_requires_full_containment() {
        let globals = vec![(0.0, 2.0), (2.0, 5.0)];
        assert_eq!(find_parent(0.5, 1.5, &globals), Some(0));
        assert_eq!(find_parent(2.5, 4.0, &globals), Some(1));
        assert_eq!(find_parent(1.5, 2.5, &globals), None);
        assert_eq!(find_parent(5.5, 6.0, &globals), None);
    }

    #[test]
    fn minmax_time_normalization() {
        let span = LocalSpan {
            t_on: 1.0,
            t_off: 3.0,
            center: 2.0,
            to: vec![1.0, 3.0],
            lab_ag: String::new(),
            lab_acc: String::new(),
        };
        let tn = normalize_time(&[1.0, 2.0, 3.0], &span, (-1.0, 1.0));
        assert_eq!(tn, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn piecewise_map_with_off_center_stamp() {
        let span = LocalSpan {
            t_on: 0.0,
            t_off: 3.0,
            center: 1.0,
            to: vec![0.0, 3.0, 1.0],
            lab_ag: String::new(),
            lab_acc: String::new(),
        };
        let tn = normalize_time(&[0.0, 0.5, 1.0, 2.0, 3.0], &span, (-1.0, 1.0));
        assert_abs_diff_eq!(tn[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tn[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(tn[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tn[3], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(tn[4], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn centered_stamp_equals_minmax() {
        let both = LocalSpan {
            t_on: 1.0,
            t_off: 3.0,
            center: 2.0,
            to: vec![1.0, 3.0, 2.0],
            lab_ag: String::new(),
            lab_acc: String::new(),
        };
        let seg = LocalSpan { to: vec![1.0, 3.0], ..both.clone() };
        let ts: Vec<f64> = (0..=20).map(|i| 1.0 + i as f64 * 0.1).collect();
        let a = normalize_time(&ts, &both, (-1.0, 1.0));
        let b = normalize_time(&ts, &seg, (-1.0, 1.0));
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_residual_fits_zero() {
        let tn: Vec<f64> = (0..20).map(|i| -1.0 + i as f64 / 9.5).collect();
        let fit = fit_local(&tn, &[0.0; 20], 3).unwrap();
        for &c in &fit.c {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn quadratic_residual_recovers_basis() {
        let tn: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 19.5).collect();
        let y: Vec<f64> = tn.iter().map(|&t| t * t).collect();
        let fit = fit_local(&tn, &y, 3).unwrap();
        assert_abs_diff_eq!(fit.c[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c[2], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c[3], 0.0, epsilon = 1e-9);
        assert!(fit_error(&fit, &y) < 1e-9);
    }

    #[test]
    fn concave_peak_has_negative_quadratic_coef() {
        let tn: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 19.5).collect();
        let y: Vec<f64> = tn.iter().map(|&t| 2.0 - 3.0 * t * t).collect();
        let fit = fit_local(&tn, &y, 3).unwrap();
        assert!(fit.c[1] < 0.0);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(fit_local(&[0.0, 1.0], &[1.0, 2.0], 3).is_err());
    }

    fn band(level: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| level + if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn identical_registers_have_zero_gestalt() {
        let cfg = StylGlobCfg::default();
        let g = fit_segment(&band(6.0, 300), &cfg);
        let l = fit_segment(&band(6.0, 100), &cfg);
        let gl = gestalt_lines(&l, &g, (1.0, 2.0), 100);
        for k in 0..4 {
            assert_abs_diff_eq!(gl[k].rms, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(gl[k].sd, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(gl[k].d_init, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(gl[k].d_fin, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn offset_register_shows_in_all_line_diffs() {
        let cfg = StylGlobCfg::default();
        let g = fit_segment(&band(6.0, 300), &cfg);
        let l = fit_segment(&band(8.0, 100), &cfg);
        let gl = gestalt_lines(&l, &g, (1.0, 2.0), 100);
        // bl, ml, tl shifted by 2; rng unchanged
        for k in 0..3 {
            assert_abs_diff_eq!(gl[k].rms, 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(gl[k].d_init, 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(gl[k].d_fin, 2.0, epsilon = 1e-6);
            assert_abs_diff_eq!(gl[k].sd, 0.0, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(gl[3].rms, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn slope_difference_uses_real_time_rates() {
        let cfg = StylGlobCfg::default();
        let gy: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                6.0 + 0.4 * t + if i % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        let ly: Vec<f64> = (0..100)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                6.4 + 1.0 * t + if i % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        let g = fit_segment(&gy, &cfg);
        let l = fit_segment(&ly, &cfg);
        let gl = gestalt_lines(&l, &g, (1.0, 2.0), 100);
        assert_abs_diff_eq!(gl[1].sd, 0.6, epsilon = 0.05);
    }

    #[test]
    fn residual_coef_vectors_match_line_kinds() {
        let cfg = StylGlobCfg::default();
        let g = fit_segment(&band(6.0, 300), &cfg);
        // local contour exactly on the global midline
        let ts: Vec<f64> = (0..100).map(|i| 1.0 + i as f64 * F0_STEP).collect();
        let y: Vec<f64> = ts.iter().map(|&t| g.line_at(LineKind::Ml, t)).collect();
        let tn: Vec<f64> = (0..100).map(|i| -1.0 + i as f64 / 49.5).collect();
        let cs = residual_coefs(&y, &ts, &g, &tn, 3).unwrap();
        // ml residual fits zero; rng residual fits the constant 1/2
        for &c in &cs[1] {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(cs[3][3], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn resynthesis_restores_midline_and_range_ends() {
        let cfg = StylGlobCfg::default();
        let y = band(6.0, 300);
        let g = fit_segment(&y, &cfg);

        let out = resynthesize_channel(300, &[(0..300, &g)], &[], RegisterMode::Ml);
        for (i, &v) in out.iter().enumerate() {
            assert_abs_diff_eq!(v, g.line_at(LineKind::Ml, i as f64 * F0_STEP), epsilon = 1e-9);
        }

        let ones = vec![1.0; 50];
        let out = resynthesize_channel(
            300,
            &[(0..300, &g)],
            &[(100..150, ones.as_slice())],
            RegisterMode::Rng,
        );
        for i in 100..150 {
            assert_abs_diff_eq!(
                out[i],
                g.line_at(LineKind::Tl, i as f64 * F0_STEP),
                epsilon = 1e-6
            );
        }
        for i in 0..100 {
            assert_abs_diff_eq!(
                out[i],
                g.line_at(LineKind::Bl, i as f64 * F0_STEP),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn stylization_round_trip_within_fit_error() {
        let cfg = StylGlobCfg::default();
        // global declining band with a local parabolic bump
        let mut y: Vec<f64> = (0..300)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                8.0 - 0.6 * t + if i % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        for i in 100..150 {
            let u = (i as f64 - 125.0) / 25.0;
            y[i] += 2.0 * (1.0 - u * u);
        }
        let g = fit_segment(&y, &cfg);
        let res = crate::register::residual(&y, &g, RegisterMode::Ml);
        let seg_res = &res[100..150];
        let tn: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 / 24.5).collect();
        let fit = fit_local(&tn, seg_res, 3).unwrap();
        let out = resynthesize_channel(
            300,
            &[(0..300, &g)],
            &[(100..150, fit.y.as_slice())],
            RegisterMode::Ml,
        );
        let err = fit_error(&fit, seg_res);
        for i in 100..150 {
            assert!((out[i] - y[i]).abs() <= err * 4.0 + 1.2);
        }
    }
}
