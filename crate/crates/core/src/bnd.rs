//! Boundary discontinuity features: the f0 stretches before and after a
//! prosodic boundary are register-stylized separately and jointly, and the
//! mismatch between the separate and joint fits is parameterized per register
//! line (RMSD, reset, slope differences, correlation distance, fit error
//! ratio, AIC gain).

use crate::annot::Tier;
use crate::config::StylBndCfg;
use crate::register::{self, LineKind, MedianSequence};
use crate::sigio;
use crate::stats;

/// How the pre- and post-boundary units are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BndWindowing {
    /// The adjacent annotation units themselves (inter-stamp intervals for
    /// event tiers).
    Std,
    /// Fixed-length windows flanking the boundary.
    Win,
    /// From the chunk start to the boundary and from the boundary to the
    /// chunk end (file bounds without chunking).
    Trend,
}

impl BndWindowing {
    pub fn name(self) -> &'static str {
        match self {
            BndWindowing::Std => "std",
            BndWindowing::Win => "win",
            BndWindowing::Trend => "trend",
        }
    }
}

/// One boundary with its pre/post analysis spans resolved for a windowing.
#[derive(Debug, Clone)]
pub struct BoundaryContext {
    /// Index of the pre-boundary unit among the tier's content items (for
    /// event tiers: index of the boundary stamp).
    pub ii: usize,
    pub seg1: (f64, f64),
    pub seg2: (f64, f64),
    /// Pause between the adjacent units; 0 for event tiers.
    pub p: f64,
    pub lab: String,
    pub lab_next: String,
    /// Offset of the pre-boundary unit.
    pub t_off: f64,
    /// Onset of the post-boundary unit.
    pub t_on: f64,
}

fn chunk_bounds(
    chunks: Option<&Tier>,
    t: f64,
    file_dur: f64,
    pause_label: &str,
    prefer_post: bool,
) -> (f64, f64) {
    let Some(ch) = chunks else {
        return (0.0, file_dur);
    };
    let items = ch.content_items(pause_label);
    if items.is_empty() {
        return (0.0, file_dur);
    }
    let eps = 1e-9;
    let containing: Vec<_> =
        items.iter().filter(|it| t >= it.t_start - eps && t <= it.t_end + eps).collect();
    if let Some(it) = if prefer_post { containing.last() } else { containing.first() } {
        return (it.t_start, it.t_end);
    }
    let near = items
        .iter()
        .min_by(|a, b| {
            let da = (t - a.t_start).abs().min((t - a.t_end).abs());
            let db = (t - b.t_start).abs().min((t - b.t_end).abs());
            da.total_cmp(&db)
        })
        .unwrap();
    (near.t_start, near.t_end)
}

/// Builds one context per boundary of `tier`: between adjacent content
/// segments, or at the interior stamps of an event tier. The boundary set is
/// the same for every windowing so that features of all windowings line up
/// row by row.
pub fn make_contexts(
    tier: &Tier,
    windowing: BndWindowing,
    cfg: &StylBndCfg,
    point_win: f64,
    chunks: Option<&Tier>,
    file_dur: f64,
    pause_label: &str,
) -> Vec<BoundaryContext> {
    let items = tier.content_items(pause_label);
    let mut out = Vec::new();
    if tier.is_event() {
        if items.len() < 3 {
            return out;
        }
        for j in 1..items.len() - 1 {
            let t = items[j].t_start;
            let half = point_win / 2.0;
            let (seg1, seg2) = match windowing {
                BndWindowing::Std => ((items[j - 1].t_start, t), (t, items[j + 1].t_start)),
                BndWindowing::Win => ((t - half, t), (t, t + half)),
                BndWindowing::Trend => {
                    let b1 = chunk_bounds(chunks, t, file_dur, pause_label, false);
                    let b2 = chunk_bounds(chunks, t, file_dur, pause_label, true);
                    ((b1.0, t), (t, b2.1))
                }
            };
            out.push(BoundaryContext {
                ii: j,
                seg1,
                seg2,
                p: 0.0,
                lab: items[j].label.clone(),
                lab_next: items[j + 1].label.clone(),
                t_off: t,
                t_on: t,
            });
        }
    } else {
        for i in 0..items.len().saturating_sub(1) {
            let a = items[i];
            let b = items[i + 1];
            let half = cfg.win / 2.0;
            let (seg1, seg2) = match windowing {
                BndWindowing::Std => ((a.t_start, a.t_end), (b.t_start, b.t_end)),
                BndWindowing::Win => ((a.t_end - half, a.t_end), (b.t_start, b.t_start + half)),
                BndWindowing::Trend => {
                    let b1 = chunk_bounds(chunks, a.t_end, file_dur, pause_label, false);
                    let b2 = chunk_bounds(chunks, b.t_start, file_dur, pause_label, true);
                    ((b1.0, a.t_end), (b.t_start, b2.1))
                }
            };
            out.push(BoundaryContext {
                ii: i,
                seg1,
                seg2,
                p: (b.t_start - a.t_end).max(0.0),
                lab: a.label.clone(),
                lab_next: b.label.clone(),
                t_off: a.t_end,
                t_on: b.t_start,
            });
        }
    }
    for ctx in &mut out {
        if windowing == BndWindowing::Win {
            ctx.seg1.0 = ctx.seg1.0.max(0.0);
            ctx.seg2.1 = ctx.seg2.1.min(file_dur);
            if !cfg.cross_chunk && chunks.is_some() {
                let b1 = chunk_bounds(chunks, ctx.seg1.1, file_dur, pause_label, false);
                let b2 = chunk_bounds(chunks, ctx.seg2.0, file_dur, pause_label, true);
                ctx.seg1.0 = ctx.seg1.0.max(b1.0);
                ctx.seg2.1 = ctx.seg2.1.min(b2.1);
            }
        }
    }
    out
}

/// Discontinuity measures of one register line at one boundary.
#[derive(Debug, Clone)]
pub struct LineDisc {
    /// RMSD between the separate lines and the joint line: over both units,
    /// the pre unit, the post unit.
    pub rms: f64,
    pub rms_pre: f64,
    pub rms_post: f64,
    /// Reset: post line at its onset minus pre line at its offset.
    pub r: f64,
    /// Onset difference: pre line at the pre onset minus post line at the
    /// post onset.
    pub d_o: f64,
    /// Mean difference of the two separate lines.
    pub d_m: f64,
    /// Slope differences per second: joint minus pre, joint minus post,
    /// pre minus post.
    pub sd_pre: f64,
    pub sd_post: f64,
    pub sd_prepost: f64,
    /// Correlation distances (1-r)/2 between separate and joint lines.
    pub corr_d: f64,
    pub corr_d_pre: f64,
    pub corr_d_post: f64,
    /// Fit error of the joint line divided by the error of the separate
    /// fits, measured against the windowed-median input.
    pub rms_r: f64,
    pub rms_r_pre: f64,
    pub rms_r_post: f64,
    /// AIC of the joint fit minus AIC of the separate fits.
    pub aic_i: f64,
    pub aic_i_pre: f64,
    pub aic_i_post: f64,
}

impl LineDisc {
    pub const NAMES: [&'static str; 18] = [
        "rms",
        "rms_pre",
        "rms_post",
        "r",
        "d_o",
        "d_m",
        "sd_pre",
        "sd_post",
        "sd_prepost",
        "corrD",
        "corrD_pre",
        "corrD_post",
        "rmsR",
        "rmsR_pre",
        "rmsR_post",
        "aicI",
        "aicI_pre",
        "aicI_post",
    ];

    pub fn values(&self) -> [f64; 18] {
        [
            self.rms,
            self.rms_pre,
            self.rms_post,
            self.r,
            self.d_o,
            self.d_m,
            self.sd_pre,
            self.sd_post,
            self.sd_prepost,
            self.corr_d,
            self.corr_d_pre,
            self.corr_d_post,
            self.rms_r,
            self.rms_r_pre,
            self.rms_r_post,
            self.aic_i,
            self.aic_i_pre,
            self.aic_i_post,
        ]
    }

    fn missing() -> Self {
        LineDisc {
            rms: f64::NAN,
            rms_pre: f64::NAN,
            rms_post: f64::NAN,
            r: f64::NAN,
            d_o: f64::NAN,
            d_m: f64::NAN,
            sd_pre: f64::NAN,
            sd_post: f64::NAN,
            sd_prepost: f64::NAN,
            corr_d: f64::NAN,
            corr_d_pre: f64::NAN,
            corr_d_post: f64::NAN,
            rms_r: f64::NAN,
            rms_r_pre: f64::NAN,
            rms_r_post: f64::NAN,
            aic_i: f64::NAN,
            aic_i_pre: f64::NAN,
            aic_i_post: f64::NAN,
        }
    }
}

/// Per-line discontinuities at one boundary, in [`LineKind::ALL`] order.
#[derive(Debug, Clone)]
pub struct DiscontinuitySet {
    pub lines: [LineDisc; 4],
    pub p: f64,
}

impl DiscontinuitySet {
    pub fn line(&self, kind: LineKind) -> &LineDisc {
        &self.lines[LineKind::ALL.iter().position(|&k| k == kind).unwrap()]
    }

    fn missing(p: f64) -> Self {
        DiscontinuitySet {
            lines: [LineDisc::missing(), LineDisc::missing(), LineDisc::missing(), LineDisc::missing()],
            p,
        }
    }
}

/// Residual sums of squares below this count as a perfect fit; they are
/// floored in the AIC so that two perfect fits compare as equal instead of
/// amplifying rounding noise through the log.
const RSS_FLOOR: f64 = 1e-12;
/// Fit errors (in semitones) below this count as zero.
const ZERO_ERR: f64 = 1e-9;
const LINE_PARAMS: usize = 3;

/// Akaike information criterion of a least-squares fit with `k` parameters
/// over `n` observations with residual sum of squares `rss`.
pub fn aic(k: usize, n: usize, rss: f64) -> f64 {
    2.0 * k as f64 + n as f64 * rss.max(RSS_FLOOR).ln()
}

fn err_ratio(num: f64, den: f64) -> f64 {
    if den < ZERO_ERR {
        if num < ZERO_ERR {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Correlation distance (1-r)/2 in [0, 1]; two flat sequences count as
/// perfectly correlated, a flat against a sloped one as uncorrelated.
pub fn corr_dist(a: &[f64], b: &[f64]) -> f64 {
    let flat = |x: &[f64]| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in x {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo < 1e-8
    };
    if flat(a) || flat(b) {
        return if flat(a) && flat(b) { 0.0 } else { 0.5 };
    }
    let r = stats::pearson(a, b);
    if r.is_nan() {
        return 0.5;
    }
    (1.0 - r) / 2.0
}

fn medians(seq: &MedianSequence, kind: LineKind) -> Vec<f64> {
    match kind {
        LineKind::Bl => seq.bl.clone(),
        LineKind::Ml => seq.ml.clone(),
        LineKind::Tl => seq.tl.clone(),
        LineKind::Rng => seq.tl.iter().zip(&seq.bl).map(|(t, b)| t - b).collect(),
    }
}

fn sum_sq(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

fn rms_of(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        f64::NAN
    } else {
        (sum_sq(residuals) / residuals.len() as f64).sqrt()
    }
}

/// Parameterizes the discontinuity of `y` (the full converted f0 contour on
/// the 10 ms grid) at one boundary context. Register lines are fitted to the
/// pre unit, the post unit, and their concatenation; the concatenated samples
/// keep their real time stamps, so a pause gap stays in the abscissa.
pub fn discontinuity(y: &[f64], ctx: &BoundaryContext, cfg: &StylBndCfg) -> DiscontinuitySet {
    let r1 = sigio::grid_range(ctx.seg1.0, ctx.seg1.1, y.len());
    let r2 = sigio::grid_range(ctx.seg2.0, ctx.seg2.1, y.len());
    if r1.len() < 2 || r2.len() < 2 {
        log::info!(
            "boundary unit too short for discontinuity features at {:.3}-{:.3}s",
            ctx.t_off,
            ctx.t_on
        );
        return DiscontinuitySet::missing(ctx.p);
    }
    let ts1: Vec<f64> = r1.clone().map(sigio::grid_time).collect();
    let ts2: Vec<f64> = r2.clone().map(sigio::grid_time).collect();
    let y1 = &y[r1];
    let y2 = &y[r2];
    // Adjacent units share the boundary grid sample; keep it out of the
    // concatenation once so the joint fit sees each sample a single time.
    let skip = ts2.iter().take_while(|&&t| t <= ts1[ts1.len() - 1] + 1e-9).count();
    let mut ts12 = ts1.clone();
    ts12.extend_from_slice(&ts2[skip..]);
    let mut y12 = y1.to_vec();
    y12.extend_from_slice(&y2[skip..]);

    let seq1 = register::median_sequences_at(&ts1, y1, cfg.decl_win, &cfg.prct);
    let seq2 = register::median_sequences_at(&ts2, y2, cfg.decl_win, &cfg.prct);
    let seq12 = register::median_sequences_at(&ts12, &y12, cfg.decl_win, &cfg.prct);
    let fit1 = register::fit_register(&seq1, &cfg.nrm);
    let fit2 = register::fit_register(&seq2, &cfg.nrm);
    let fit12 = register::fit_register(&seq12, &cfg.nrm);
    let split = (ctx.seg1.1 + ctx.seg2.0) / 2.0;
    let pre_idx: Vec<usize> =
        (0..seq12.t.len()).filter(|&i| seq12.t[i] <= split).collect();
    let post_idx: Vec<usize> =
        (0..seq12.t.len()).filter(|&i| seq12.t[i] > split).collect();

    let lines = LineKind::ALL.map(|kind| {
        let l1 = fit1.line(kind);
        let l2 = fit2.line(kind);
        let l12 = fit12.line(kind);
        let v1: Vec<f64> = ts1.iter().map(|&t| fit1.line_at(kind, t)).collect();
        let v2: Vec<f64> = ts2.iter().map(|&t| fit2.line_at(kind, t)).collect();
        let j1: Vec<f64> = ts1.iter().map(|&t| fit12.line_at(kind, t)).collect();
        let j2: Vec<f64> = ts2.iter().map(|&t| fit12.line_at(kind, t)).collect();
        let dev_pre: Vec<f64> = v1.iter().zip(&j1).map(|(a, b)| a - b).collect();
        let dev_post: Vec<f64> = v2.iter().zip(&j2).map(|(a, b)| a - b).collect();
        let dev_all: Vec<f64> = dev_pre.iter().chain(&dev_post).copied().collect();

        let piece: Vec<f64> = v1.iter().chain(&v2).copied().collect();
        let joint: Vec<f64> = j1.iter().chain(&j2).copied().collect();

        let m1 = medians(&seq1, kind);
        let m2 = medians(&seq2, kind);
        let m12 = medians(&seq12, kind);
        let e1: Vec<f64> = l1.y.iter().zip(&m1).map(|(a, b)| a - b).collect();
        let e2: Vec<f64> = l2.y.iter().zip(&m2).map(|(a, b)| a - b).collect();
        let e12: Vec<f64> = l12.y.iter().zip(&m12).map(|(a, b)| a - b).collect();
        let e12_pre: Vec<f64> = pre_idx.iter().map(|&i| e12[i]).collect();
        let e12_post: Vec<f64> = post_idx.iter().map(|&i| e12[i]).collect();
        let (rss1, rss2, rss12) = (sum_sq(&e1), sum_sq(&e2), sum_sq(&e12));
        let err_sep = ((rss1 + rss2) / (e1.len() + e2.len()) as f64).sqrt();

        LineDisc {
            rms: rms_of(&dev_all),
            rms_pre: rms_of(&dev_pre),
            rms_post: rms_of(&dev_post),
            r: fit2.line_at(kind, ctx.seg2.0) - fit1.line_at(kind, ctx.seg1.1),
            d_o: fit1.line_at(kind, ctx.seg1.0) - fit2.line_at(kind, ctx.seg2.0),
            d_m: l1.m - l2.m,
            sd_pre: l12.rate - l1.rate,
            sd_post: l12.rate - l2.rate,
            sd_prepost: l1.rate - l2.rate,
            corr_d: corr_dist(&piece, &joint),
            corr_d_pre: corr_dist(&v1, &j1),
            corr_d_post: corr_dist(&v2, &j2),
            rms_r: err_ratio(rms_of(&e12), err_sep),
            rms_r_pre: err_ratio(rms_of(&e12_pre), rms_of(&e1)),
            rms_r_post: err_ratio(rms_of(&e12_post), rms_of(&e2)),
            aic_i: aic(LINE_PARAMS, m12.len(), rss12)
                - (2.0 * (2 * LINE_PARAMS) as f64
                    + m12.len() as f64 * (rss1 + rss2).max(RSS_FLOOR).ln()),
            aic_i_pre: aic(LINE_PARAMS, e12_pre.len(), sum_sq(&e12_pre))
                - aic(LINE_PARAMS, e1.len(), rss1),
            aic_i_post: aic(LINE_PARAMS, e12_post.len(), sum_sq(&e12_post))
                - aic(LINE_PARAMS, e2.len(), rss2),
        }
    });

    DiscontinuitySet { lines, p: ctx.p }
}
