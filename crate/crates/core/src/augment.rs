//! Unsupervised prosodic annotation: energy-based chunking, syllable
//! nucleus and boundary detection, and bootstrapped nearest-centroid
//! classification of phrase boundaries and pitch accents over candidate
//! feature matrices.

use crate::annot::{AnnotItem, Tier, TierKind};
use crate::bnd::{self, BndWindowing, BoundaryContext, DiscontinuitySet};
use crate::cluster;
use crate::config::{AugChunkCfg, AugLocCfg, AugSylCfg, FltCfg, StylBndCfg, StylGlobCfg};
use crate::dsp::{self, EnergyContour, FilterSpec, WindowSpec};
use crate::error::{Error, Result};
use crate::gnl;
use crate::loc::{fit_local, gestalt_lines, residual_coefs};
use crate::preproc::{nrm_window_at, point_window};
use crate::register::{fit_segment, LineKind, RegisterFit, RegisterMode};
use crate::sigio::{grid_range, grid_time, F0_STEP};
use crate::stats;

/// Converts a filter config block into a runnable spec, dropping cutoffs
/// that the sample rate cannot support.
pub fn filter_spec(flt: &FltCfg, fs: f64) -> FilterSpec {
    let ny = fs / 2.0;
    let usable = |f: f64| f > 0.0 && f < ny;
    let degraded = |spec: FilterSpec| {
        log::warn!("filter {} {:?} unusable at fs {fs}; adjusted", flt.btype, flt.f);
        spec
    };
    match (flt.btype.as_str(), flt.f.as_slice()) {
        ("none", _) => FilterSpec::none(),
        ("low", &[f, ..]) if usable(f) => FilterSpec::low(f, flt.ord),
        ("high", &[f, ..]) if usable(f) => FilterSpec::high(f, flt.ord),
        ("band", &[lo, hi, ..]) if usable(lo) && usable(hi) && lo < hi => {
            FilterSpec::band(lo, hi, flt.ord)
        }
        ("band", &[lo, ..]) if usable(lo) => degraded(FilterSpec::high(lo, flt.ord)),
        ("band", &[_, hi, ..]) if usable(hi) => degraded(FilterSpec::low(hi, flt.ord)),
        _ => degraded(FilterSpec::none()),
    }
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

/// Interpausal chunking by relative energy. An analysis window slides over
/// the filtered signal; it counts as pause where its RMS stays below the
/// co-centered reference window's RMS times `e_rel`. A reference window
/// that is itself silent is replaced by the above-median-magnitude part of
/// the signal. Short pauses merge into chunks and short chunks into pauses,
/// `margin` moves chunk edges into the flanking pauses, `fbnd` protects
/// file-edge pauses from the length minimum, and `n >= 0` keeps only the
/// longest interior pauses.
pub fn detect_chunks(x: &[f64], fs: f64, cfg: &AugChunkCfg, pause_label: &str) -> Tier {
    let mut tier =
        Tier { name: String::new(), kind: TierKind::Segment, items: vec![], channel: 0 };
    if x.is_empty() {
        return tier;
    }
    let dur = x.len() as f64 / fs;
    let spec = filter_spec(&cfg.flt, fs);
    let y = dsp::butter_filter(x, fs, &spec).unwrap_or_else(|e| {
        log::warn!("chunking filter failed: {e}; using the raw signal");
        x.to_vec()
    });
    let n = y.len();
    let win = ((cfg.l * fs).round() as usize).max(1);
    let half_ref = ((cfg.l_ref * fs / 2.0).round() as usize).max(win / 2);
    let mags: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let med = stats::median(&mags);
    let loud: Vec<f64> = y.iter().copied().filter(|v| v.abs() > med).collect();
    let e_sel = if loud.is_empty() { 0.0 } else { stats::rms(&loud) };

    let mut runs: Vec<(f64, f64, bool)> = vec![];
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + win).min(n);
        let c = (i0 + i1) / 2;
        let r0 = c.saturating_sub(half_ref);
        let r1 = (c + half_ref).min(n);
        let e_a = stats::rms(&y[i0..i1]);
        let mut e_r = stats::rms(&y[r0..r1]);
        if e_r < e_sel * cfg.e_rel {
            e_r = e_sel;
        }
        let t1 = if i1 == n { dur } else { i1 as f64 / fs };
        push_run(&mut runs, i0 as f64 / fs, t1, e_a < e_r * cfg.e_rel || e_a <= 0.0);
        i0 = i1;
    }

    relabel_short(&mut runs, cfg.min_pau_l, true, cfg.fbnd, dur);
    relabel_short(&mut runs, cfg.min_chunk_l, false, false, dur);
    if cfg.n >= 0 {
        keep_longest_pauses(&mut runs, cfg.n as usize, cfg.fbnd, dur);
    }
    let pauses = shrink_by_margin(&runs, cfg.margin);

    let mut cursor = 0.0;
    for &(p0, p1) in &pauses {
        if p0 - cursor > 1e-9 {
            tier.items.push(AnnotItem::segment(cursor, p0, "x"));
        }
        tier.items.push(AnnotItem::segment(p0, p1, pause_label));
        cursor = p1;
    }
    if dur - cursor > 1e-9 {
        tier.items.push(AnnotItem::segment(cursor, dur, "x"));
    }
    tier
}

fn push_run(runs: &mut Vec<(f64, f64, bool)>, t0: f64, t1: f64, flag: bool) {
    if let Some(last) = runs.last_mut() {
        if last.2 == flag {
            last.1 = t1;
            return;
        }
    }
    runs.push((t0, t1, flag));
}

/// Flips too-short runs of one kind into the other and re-merges.
fn relabel_short(runs: &mut Vec<(f64, f64, bool)>, min_len: f64, target: bool, protect_edges: bool, dur: f64) {
    let flipped: Vec<(f64, f64, bool)> = runs
        .iter()
        .map(|&(t0, t1, f)| {
            let edge = protect_edges && (t0 <= 1e-9 || t1 >= dur - 1e-9);
            if f == target && t1 - t0 < min_len && !edge {
                (t0, t1, !f)
            } else {
                (t0, t1, f)
            }
        })
        .collect();
    runs.clear();
    for (t0, t1, f) in flipped {
        push_run(runs, t0, t1, f);
    }
}

fn keep_longest_pauses(runs: &mut Vec<(f64, f64, bool)>, n_keep: usize, fbnd: bool, dur: f64) {
    let mut ranked: Vec<(usize, f64)> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.2 && !(fbnd && (r.0 <= 1e-9 || r.1 >= dur - 1e-9)))
        .map(|(i, r)| (i, r.1 - r.0))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let drop: Vec<usize> = ranked.iter().skip(n_keep).map(|&(i, _)| i).collect();
    let flipped: Vec<(f64, f64, bool)> = runs
        .iter()
        .enumerate()
        .map(|(i, &(t0, t1, f))| (t0, t1, f && !drop.contains(&i)))
        .collect();
    runs.clear();
    for (t0, t1, f) in flipped {
        push_run(runs, t0, t1, f);
    }
}

/// Pause intervals after moving chunk edges `margin` seconds into them.
fn shrink_by_margin(runs: &[(f64, f64, bool)], margin: f64) -> Vec<(f64, f64)> {
    let mut out = vec![];
    for (i, &(t0, t1, p)) in runs.iter().enumerate() {
        if !p {
            continue;
        }
        let mut a = t0;
        let mut b = t1;
        if margin > 0.0 {
            if i > 0 && !runs[i - 1].2 {
                a += margin;
            }
            if i + 1 < runs.len() && !runs[i + 1].2 {
                b -= margin;
            }
        }
        if b - a > 1e-9 {
            out.push((a, b));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Syllable nuclei and boundaries
// ---------------------------------------------------------------------------

/// Syllable nucleus and boundary detection on the band-filtered energy
/// contour. Nuclei are local energy maxima that exceed the co-centered
/// reference window by `e_rel` and stay above `e_min` of their chunk's
/// energy; nuclei closer than `d_min` merge, keeping the stronger one.
/// Boundary stamps sit at the energy minimum between same-chunk neighbours.
pub fn detect_syllables(
    x: &[f64],
    fs: f64,
    chunks: &[(f64, f64)],
    cfg: &AugSylCfg,
) -> (Tier, Tier) {
    let event_tier =
        || Tier { name: String::new(), kind: TierKind::Event, items: vec![], channel: 0 };
    let mut nuclei = event_tier();
    let mut bounds = event_tier();
    if x.is_empty() {
        return (nuclei, bounds);
    }
    let dur = x.len() as f64 / fs;
    let spans: Vec<(f64, f64)> =
        if chunks.is_empty() { vec![(0.0, dur)] } else { chunks.to_vec() };
    let spec = filter_spec(&cfg.flt, fs);
    let y = dsp::butter_filter(x, fs, &spec).unwrap_or_else(|e| {
        log::warn!("syllable filter failed: {e}; using the raw signal");
        x.to_vec()
    });
    const STS: f64 = 0.01;
    let w = WindowSpec::rectangular();
    let e = dsp::rms_energy(&y, fs, cfg.l, STS, &w);
    let e_ref = dsp::rms_energy(&y, fs, cfg.l_ref, STS, &w);
    if e.e.len() < 3 {
        return (nuclei, bounds);
    }

    // (time, energy, chunk index)
    let mut cands: Vec<(f64, f64, usize)> = vec![];
    for (ci, &(c0, c1)) in spans.iter().enumerate() {
        let s0 = ((c0 * fs).round() as usize).min(y.len());
        let s1 = ((c1 * fs).round() as usize).min(y.len());
        if s1 <= s0 {
            continue;
        }
        let e_chunk = stats::rms(&y[s0..s1]);
        let i_lo = ((c0 / STS).ceil() as usize).max(1);
        let i_hi = ((c1 / STS).floor() as usize).min(e.e.len() - 2);
        for i in i_lo..=i_hi {
            if e.e[i] > e.e[i - 1]
                && e.e[i] > e.e[i + 1]
                && e.e[i] > e_ref.e[i] * cfg.e_rel
                && e.e[i] >= e_chunk * cfg.e_min
            {
                cands.push((e.t[i], e.e[i], ci));
            }
        }
    }

    loop {
        let pair = (0..cands.len().saturating_sub(1))
            .map(|k| (k, cands[k + 1].0 - cands[k].0))
            .filter(|&(_, dt)| dt < cfg.d_min)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        match pair {
            Some((k, _)) => {
                let drop = if cands[k].1 >= cands[k + 1].1 { k + 1 } else { k };
                cands.remove(drop);
            }
            None => break,
        }
    }

    for k in 0..cands.len() {
        nuclei.items.push(AnnotItem::event(cands[k].0, "x"));
        if k + 1 < cands.len() && cands[k].2 == cands[k + 1].2 {
            let i1 = e.index_at(cands[k].0);
            let i2 = e.index_at(cands[k + 1].0);
            if i2 > i1 + 1 {
                let seg = &e.e[i1 + 1..i2];
                let vm = seg.iter().copied().fold(f64::INFINITY, f64::min);
                let flat: Vec<usize> =
                    (0..seg.len()).filter(|&j| seg[j] <= vm + 1e-12).collect();
                let j = flat[flat.len() / 2];
                bounds.items.push(AnnotItem::event(e.t[i1 + 1 + j], "x"));
            }
        }
    }
    (nuclei, bounds)
}

// ---------------------------------------------------------------------------
// Candidate feature matrices
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum FeatVal {
    Scalar(f64),
    List(Vec<f64>),
}

/// One selected feature branch: colon path split into segments, with the
/// configured weight (scalar or per-coefficient list).
#[derive(Debug, Clone)]
pub struct WeightBranch {
    pub path: Vec<String>,
    pub w: Vec<f64>,
}

/// Expands a `wgt` config subtree into branches, dropping ones that need
/// resources this build does not provide (phone-tier vowel length).
pub fn weight_branches(wgt: &serde_json::Value) -> Vec<WeightBranch> {
    crate::config::flatten_weights(wgt)
        .into_iter()
        .filter(|(p, _)| {
            if p == "pho" || p.starts_with("pho:") {
                log::warn!("wgt:pho needs a phone segment tier; branch ignored");
                return false;
            }
            true
        })
        .map(|(p, w)| WeightBranch { path: p.split(':').map(str::to_string).collect(), w })
        .collect()
}

fn branch_err(scope: &str, b: &WeightBranch) -> Error {
    Error::Config(format!("augment:{scope}:wgt:{}: no such feature", b.path.join(":")))
}

fn windowing_of(name: &str) -> Option<BndWindowing> {
    match name {
        "std" => Some(BndWindowing::Std),
        "win" => Some(BndWindowing::Win),
        "trend" => Some(BndWindowing::Trend),
        _ => None,
    }
}

fn line_kind_of(name: &str) -> Option<LineKind> {
    LineKind::ALL.into_iter().find(|k| k.name() == name)
}

fn disc_index(name: &str) -> Option<usize> {
    bnd::LineDisc::NAMES.iter().position(|&n| n == name)
}

/// Boundary candidates of a tier with their selected discontinuity
/// features. The contexts come from the plain adjacent-pair windowing and
/// describe the candidate set shared by all three windowings.
#[derive(Debug)]
pub struct GlobCandidates {
    pub ctxs: Vec<BoundaryContext>,
    pub rows: Vec<Vec<FeatVal>>,
}

#[allow(clippy::too_many_arguments)]
pub fn glob_candidates(
    tier: &Tier,
    y: &[f64],
    branches: &[WeightBranch],
    bnd_cfg: &StylBndCfg,
    point_win: f64,
    chunks: Option<&Tier>,
    file_dur: f64,
    pause_label: &str,
) -> Result<GlobCandidates> {
    let mut needed: Vec<BndWindowing> = vec![];
    for b in branches {
        let ws = b
            .path
            .first()
            .and_then(|s| windowing_of(s))
            .ok_or_else(|| branch_err("glob", b))?;
        let ok = match b.path.len() {
            2 => b.path[1] == "p",
            3 => line_kind_of(&b.path[1]).is_some() && disc_index(&b.path[2]).is_some(),
            _ => false,
        };
        if !ok {
            return Err(branch_err("glob", b));
        }
        if !needed.contains(&ws) {
            needed.push(ws);
        }
    }
    let ctxs =
        bnd::make_contexts(tier, BndWindowing::Std, bnd_cfg, point_win, chunks, file_dur, pause_label);
    let mut sets: Vec<(BndWindowing, Vec<DiscontinuitySet>)> = vec![];
    for ws in needed {
        let wctxs = if ws == BndWindowing::Std {
            ctxs.clone()
        } else {
            bnd::make_contexts(tier, ws, bnd_cfg, point_win, chunks, file_dur, pause_label)
        };
        let discs = wctxs.iter().map(|c| bnd::discontinuity(y, c, bnd_cfg)).collect();
        sets.push((ws, discs));
    }
    let rows = (0..ctxs.len())
        .map(|i| {
            branches
                .iter()
                .map(|b| {
                    let ws = windowing_of(&b.path[0]).unwrap();
                    let set = &sets.iter().find(|(w, _)| *w == ws).unwrap().1[i];
                    if b.path.len() == 2 {
                        FeatVal::Scalar(set.p)
                    } else {
                        let kind = line_kind_of(&b.path[1]).unwrap();
                        let fi = disc_index(&b.path[2]).unwrap();
                        FeatVal::Scalar(set.line(kind).values()[fi])
                    }
                })
                .collect()
        })
        .collect();
    Ok(GlobCandidates { ctxs, rows })
}

/// Inputs for accent-candidate feature extraction: the prepared f0 contour,
/// an optional energy contour, parent segments limiting the analysis and
/// normalization windows, and the stylization settings to apply.
pub struct AccSource<'a> {
    pub f0: &'a [f64],
    pub en: Option<&'a EnergyContour>,
    pub parents: Vec<(f64, f64)>,
    pub point_win: f64,
    pub nrm_win: f64,
    pub glob_cfg: &'a StylGlobCfg,
    pub loc_ord: usize,
    pub loc_rng: (f64, f64),
    pub mode: RegisterMode,
    pub quot_win: f64,
    pub file_dur: f64,
}

const GNL_FIELDS: [&str; 21] = [
    "m", "sd", "med", "iqr", "max", "min", "rms", "m_nrm", "sd_nrm", "med_nrm", "iqr_nrm",
    "max_nrm", "min_nrm", "rms_nrm", "dur", "dur_nrm", "qi", "qf", "qb", "qm", "c",
];

fn gnl_field(s: &gnl::StandardFeatures, name: &str) -> FeatVal {
    let v = match name {
        "m" => s.m,
        "sd" => s.sd,
        "med" => s.med,
        "iqr" => s.iqr,
        "max" => s.max,
        "min" => s.min,
        "rms" => s.rms,
        "m_nrm" => s.m_nrm,
        "sd_nrm" => s.sd_nrm,
        "med_nrm" => s.med_nrm,
        "iqr_nrm" => s.iqr_nrm,
        "max_nrm" => s.max_nrm,
        "min_nrm" => s.min_nrm,
        "rms_nrm" => s.rms_nrm,
        "dur" => s.dur,
        "dur_nrm" => s.dur_nrm,
        "qi" => s.qi,
        "qf" => s.qf,
        "qb" => s.qb,
        "qm" => s.qm,
        // ascending coefficient order
        "c" => return FeatVal::List(vec![s.c[2], s.c[1], s.c[0]]),
        _ => unreachable!(),
    };
    FeatVal::Scalar(v)
}

fn gst_field(g: &crate::loc::GestaltLine, name: &str) -> f64 {
    match name {
        "rms" => g.rms,
        "sd" => g.sd,
        "d_init" => g.d_init,
        _ => g.d_fin,
    }
}

/// Feature rows for accent candidates. Each stamp is analysed inside a
/// `point_win` window clipped to its parent segment; `acc:c` carries the
/// residual polynomial, `gst:*` the register deviation from the parent,
/// `gst:res:*:c` the per-line residual polynomials, and `gnl_f0`/`gnl_en`
/// the standard feature sets.
pub fn acc_candidates(
    stamps: &[f64],
    src: &AccSource,
    branches: &[WeightBranch],
) -> Result<Vec<Vec<FeatVal>>> {
    let mut need_local = false;
    let mut need_res = false;
    let mut need_acc = false;
    for b in branches {
        let ok = match b.path[0].as_str() {
            "acc" => {
                need_acc = true;
                b.path.len() == 2 && b.path[1] == "c"
            }
            "gst" if b.path.len() == 3 => {
                need_local = true;
                line_kind_of(&b.path[1]).is_some()
                    && ["rms", "sd", "d_init", "d_fin"].contains(&b.path[2].as_str())
            }
            "gst" if b.path.len() == 4 => {
                need_res = true;
                b.path[1] == "res" && line_kind_of(&b.path[2]).is_some() && b.path[3] == "c"
            }
            "gnl_f0" | "gnl_en" => {
                if b.path[0] == "gnl_en" && src.en.is_none() {
                    return Err(Error::Config(format!(
                        "augment:loc:wgt:{}: energy features need an audio file",
                        b.path.join(":")
                    )));
                }
                b.path.len() == 2 && GNL_FIELDS.contains(&b.path[1].as_str())
            }
            _ => false,
        };
        if !ok {
            return Err(branch_err("loc", b));
        }
    }
    let need_parent = need_local || need_res || need_acc;
    let nan_list = |n: usize| FeatVal::List(vec![f64::NAN; n]);
    let mut parent_fits: Vec<Option<RegisterFit>> = vec![None; src.parents.len() + 1];

    let mut rows = Vec::with_capacity(stamps.len());
    for &t in stamps {
        let (pi, parent) = src
            .parents
            .iter()
            .position(|&(a, b)| t >= a - 1e-9 && t <= b + 1e-9)
            .map_or((src.parents.len(), (0.0, src.file_dur)), |i| (i, src.parents[i]));
        let w = point_window(t, src.point_win, parent);
        let gi = grid_range(w.t_on, w.t_off, src.f0.len());
        let yw = &src.f0[gi.clone()];
        let pfit = if need_parent && !yw.is_empty() {
            if parent_fits[pi].is_none() {
                let gp = grid_range(parent.0, parent.1, src.f0.len());
                if !gp.is_empty() {
                    parent_fits[pi] = Some(fit_segment(&src.f0[gp], src.glob_cfg));
                }
            }
            parent_fits[pi].clone()
        } else {
            None
        };
        let ts_glb: Vec<f64> = gi.clone().map(|i| grid_time(i) - parent.0).collect();
        let span_w = w.t_off - w.t_on;
        let tn: Vec<f64> = gi
            .clone()
            .map(|i| {
                if span_w <= 0.0 {
                    src.loc_rng.0
                } else {
                    src.loc_rng.0
                        + (grid_time(i) - w.t_on) / span_w * (src.loc_rng.1 - src.loc_rng.0)
                }
            })
            .collect();

        let acc_c: Vec<f64> = match (&pfit, need_acc) {
            (Some(p), true) => {
                let res: Vec<f64> = match src.mode {
                    RegisterMode::None => yw.to_vec(),
                    RegisterMode::Rng => yw
                        .iter()
                        .zip(&ts_glb)
                        .map(|(&v, &tg)| {
                            let b = p.line_at(LineKind::Bl, tg);
                            let d = (p.line_at(LineKind::Tl, tg) - b).max(1e-10);
                            (v - b) / d
                        })
                        .collect(),
                    m => {
                        let kind = match m {
                            RegisterMode::Bl => LineKind::Bl,
                            RegisterMode::Tl => LineKind::Tl,
                            _ => LineKind::Ml,
                        };
                        yw.iter().zip(&ts_glb).map(|(&v, &tg)| v - p.line_at(kind, tg)).collect()
                    }
                };
                fit_local(&tn, &res, src.loc_ord)
                    .map(|f| f.c.into_iter().rev().collect())
                    .unwrap_or_else(|_| vec![f64::NAN; src.loc_ord + 1])
            }
            _ => vec![f64::NAN; src.loc_ord + 1],
        };
        let lfit = (need_local && !yw.is_empty()).then(|| fit_segment(yw, src.glob_cfg));
        let gls = match (&lfit, &pfit) {
            (Some(l), Some(p)) => {
                Some(gestalt_lines(l, p, (w.t_on - parent.0, w.t_off - parent.0), gi.len()))
            }
            _ => None,
        };
        let rescs: Option<[Vec<f64>; 4]> = match (&pfit, need_res) {
            (Some(p), true) => residual_coefs(yw, &ts_glb, p, &tn, src.loc_ord).ok(),
            _ => None,
        };
        let (gf, ge) = {
            let nw = nrm_window_at(t, span_w, src.nrm_win, parent);
            let f0_feats = branches.iter().any(|b| b.path[0] == "gnl_f0").then(|| {
                let gn = grid_range(nw.t_on, nw.t_off, src.f0.len());
                gnl::segment_features(
                    yw,
                    &src.f0[gn],
                    F0_STEP,
                    span_w,
                    nw.t_off - nw.t_on,
                    src.quot_win,
                )
            });
            let en_feats = src.en.and_then(|en| {
                branches.iter().any(|b| b.path[0] == "gnl_en").then(|| {
                    let ew = contour_slice(en, w.t_on, w.t_off);
                    let enr = contour_slice(en, nw.t_on, nw.t_off);
                    gnl::segment_features(
                        &ew,
                        &enr,
                        en.sts,
                        span_w,
                        nw.t_off - nw.t_on,
                        src.quot_win,
                    )
                })
            });
            (f0_feats, en_feats)
        };

        let row: Vec<FeatVal> = branches
            .iter()
            .map(|b| match b.path[0].as_str() {
                "acc" => FeatVal::List(acc_c.clone()),
                "gst" if b.path.len() == 3 => {
                    let kind = line_kind_of(&b.path[1]).unwrap();
                    let k = LineKind::ALL.iter().position(|x| *x == kind).unwrap();
                    FeatVal::Scalar(
                        gls.as_ref().map_or(f64::NAN, |g| gst_field(&g[k], &b.path[2])),
                    )
                }
                "gst" => {
                    let kind = line_kind_of(&b.path[2]).unwrap();
                    let k = LineKind::ALL.iter().position(|x| *x == kind).unwrap();
                    rescs.as_ref().map_or(nan_list(src.loc_ord + 1), |r| {
                        FeatVal::List(r[k].iter().rev().copied().collect())
                    })
                }
                "gnl_f0" => gf.as_ref().map_or(FeatVal::Scalar(f64::NAN), |s| {
                    gnl_field(s, &b.path[1])
                }),
                _ => ge.as_ref().map_or(FeatVal::Scalar(f64::NAN), |s| {
                    gnl_field(s, &b.path[1])
                }),
            })
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

fn contour_slice(en: &EnergyContour, t0: f64, t1: f64) -> Vec<f64> {
    en.t
        .iter()
        .zip(&en.e)
        .filter(|(t, _)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9)
        .map(|(_, e)| *e)
        .collect()
}

/// Candidate matrix: one z-scored column per scalar feature or coefficient,
/// with NaNs imputed by the column median and per-column weights.
#[derive(Debug, Clone, Default)]
pub struct CandidateMatrix {
    pub m: Vec<Vec<f64>>,
    pub cols: Vec<String>,
    pub w: Vec<f64>,
}

/// Assembles the matrix from feature rows. List values become one column
/// per coefficient (absolute values, weight broadcast or per-element);
/// `measure` keeps plain values, first differences, or both.
pub fn build_matrix(
    rows: &[Vec<FeatVal>],
    branches: &[WeightBranch],
    measure: &str,
) -> Result<CandidateMatrix> {
    let mut out = CandidateMatrix::default();
    if rows.is_empty() {
        return Ok(out);
    }
    // column-major assembly
    let mut cols: Vec<(String, f64, Vec<f64>)> = vec![];
    for (bi, b) in branches.iter().enumerate() {
        let name = b.path.join(":");
        match &rows[0][bi] {
            FeatVal::Scalar(_) => {
                if b.w.len() > 1 {
                    return Err(Error::Config(format!(
                        "augment wgt:{name}: scalar feature cannot take a weight list"
                    )));
                }
                let vals = rows
                    .iter()
                    .map(|r| match &r[bi] {
                        FeatVal::Scalar(v) => *v,
                        FeatVal::List(_) => f64::NAN,
                    })
                    .collect();
                cols.push((name, b.w.first().copied().unwrap_or(1.0), vals));
            }
            FeatVal::List(first) => {
                let len = first.len();
                let ws: Vec<f64> = if b.w.len() == 1 {
                    vec![b.w[0]; len]
                } else if b.w.len() == len {
                    b.w.clone()
                } else {
                    return Err(Error::Config(format!(
                        "augment wgt:{name}: weight list of {} entries against {len} coefficients",
                        b.w.len()
                    )));
                };
                for (k, &wk) in ws.iter().enumerate() {
                    let vals = rows
                        .iter()
                        .map(|r| match &r[bi] {
                            FeatVal::List(v) => v.get(k).copied().map(f64::abs).unwrap_or(f64::NAN),
                            FeatVal::Scalar(_) => f64::NAN,
                        })
                        .collect();
                    cols.push((format!("{name}:{k}"), wk, vals));
                }
            }
        }
    }
    if measure == "delta" || measure == "abs+delta" {
        let deltas: Vec<(String, f64, Vec<f64>)> = cols
            .iter()
            .map(|(n, w, v)| {
                let mut d = vec![0.0];
                d.extend(v.windows(2).map(|p| p[1] - p[0]));
                (format!("{n}:d"), *w, d)
            })
            .collect();
        if measure == "delta" {
            cols = deltas;
        } else {
            cols.extend(deltas);
        }
    }
    for (name, w, vals) in &mut cols {
        let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        let fill = if finite.is_empty() {
            log::warn!("feature column {name} has no usable values");
            0.0
        } else {
            stats::median(&finite)
        };
        for v in vals.iter_mut() {
            if !v.is_finite() {
                *v = fill;
            }
        }
        let m = stats::mean(vals);
        let s = stats::std_pop(vals);
        for v in vals.iter_mut() {
            *v = if s > 0.0 { (*v - m) / s } else { 0.0 };
        }
        if *w < 0.0 {
            log::warn!("feature column {name}: negative weight clamped to 0");
            *w = 0.0;
        }
    }
    out.m = (0..rows.len()).map(|i| cols.iter().map(|(_, _, v)| v[i]).collect()).collect();
    for (name, w, _) in cols {
        out.cols.push(name);
        out.w.push(w);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Feature weighting and classification
// ---------------------------------------------------------------------------

/// Feature weights by method: the user-configured weights, correlation of
/// each column with the row medians (negatives dropped, rest normalized to
/// sum 1), or the per-feature silhouette over the seed rows, minmax-scaled
/// to [0, 1].
pub fn weight_features(
    m: &CandidateMatrix,
    mtd: &str,
    seeds: Option<(&[usize], &[usize])>,
) -> Vec<f64> {
    let nc = m.cols.len();
    let uniform = || vec![1.0; nc];
    if nc == 0 || m.m.is_empty() {
        return m.w.clone();
    }
    match mtd {
        "user" => m.w.clone(),
        "correlation" => {
            let meds: Vec<f64> = m.m.iter().map(|r| stats::median(r)).collect();
            let mut ws: Vec<f64> = (0..nc)
                .map(|j| {
                    let col: Vec<f64> = m.m.iter().map(|r| r[j]).collect();
                    let r = stats::pearson(&col, &meds);
                    if r.is_finite() && r > 0.0 {
                        r
                    } else {
                        0.0
                    }
                })
                .collect();
            let s: f64 = ws.iter().sum();
            if s > 0.0 {
                for w in &mut ws {
                    *w /= s;
                }
                ws
            } else {
                log::warn!("no feature correlates positively with the medians; uniform weights");
                uniform()
            }
        }
        "silhouette" => {
            let Some((pos, neg)) = seeds.filter(|(p, n)| !p.is_empty() && !n.is_empty()) else {
                log::warn!("silhouette weighting needs seed centroids; uniform weights");
                return uniform();
            };
            let idx: Vec<usize> = pos.iter().chain(neg).copied().collect();
            let labels: Vec<usize> =
                (0..idx.len()).map(|i| usize::from(i < pos.len())).collect();
            let raw: Vec<f64> = (0..nc)
                .map(|j| {
                    let x: Vec<Vec<f64>> = idx.iter().map(|&i| vec![m.m[i][j]]).collect();
                    let s = cluster::silhouette_mean(&x, &labels);
                    if s.is_finite() {
                        s
                    } else {
                        0.0
                    }
                })
                .collect();
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-12 {
                raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
            } else {
                uniform()
            }
        }
        other => {
            log::warn!("unknown weighting method '{other}'; uniform weights");
            uniform()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classified {
    pub pos: Vec<bool>,
    /// Weighted distance to the negative centroid; the tie-break strength
    /// for boundary and accent pruning.
    pub strength: Vec<f64>,
    /// Method actually applied after any seed fallback.
    pub mtd: String,
}

/// Two-class bootstrap classification of candidate rows. `split` derives
/// centroids from per-column percentile splits and assigns in one pass;
/// `seed_kmeans` runs kMeans from the seed-row centroids; `seed_prct` marks
/// rows whose distance to the negative seed centroid exceeds the
/// percentile. Seed methods fall back to `split` when no seeds exist.
pub fn bootstrap_and_classify(
    m: &CandidateMatrix,
    w: &[f64],
    mtd: &str,
    prct: f64,
    seeds: Option<(Vec<usize>, Vec<usize>)>,
    max_iter: usize,
) -> Classified {
    let n = m.m.len();
    if n == 0 {
        return Classified { pos: vec![], strength: vec![], mtd: mtd.into() };
    }
    let scaled: Vec<Vec<f64>> = m
        .m
        .iter()
        .map(|r| r.iter().zip(w).map(|(v, wi)| v * wi.max(0.0).sqrt()).collect())
        .collect();
    let have_seeds = seeds.as_ref().is_some_and(|(p, g)| !p.is_empty() && !g.is_empty());
    let mut used = mtd.to_string();
    if mtd.starts_with("seed") && !have_seeds {
        log::warn!("{mtd}: seed centroids cannot be built; falling back to split");
        used = "split".into();
    }
    let centroid = |idx: &[usize]| -> Vec<f64> {
        let nc = scaled[0].len();
        let mut c = vec![0.0; nc];
        for &i in idx {
            for (s, v) in c.iter_mut().zip(&scaled[i]) {
                *s += v;
            }
        }
        c.iter().map(|s| s / idx.len() as f64).collect()
    };
    let (pos, strength) = match used.as_str() {
        "seed_kmeans" => {
            let (p, g) = seeds.unwrap();
            let init = vec![centroid(&g), centroid(&p)];
            let fit = cluster::kmeans_seeded(&scaled, &init, max_iter);
            let neg_c = fit.centroids[0].clone();
            (
                fit.labels.iter().map(|&l| l == 1).collect(),
                scaled.iter().map(|r| cluster::dist(r, &neg_c)).collect(),
            )
        }
        "seed_prct" => {
            let (_, g) = seeds.unwrap();
            let neg_c = centroid(&g);
            let d: Vec<f64> = scaled.iter().map(|r| cluster::dist(r, &neg_c)).collect();
            let thr = stats::percentile(&d, prct);
            (d.iter().map(|&v| v > thr).collect(), d)
        }
        _ => {
            let nc = scaled[0].len();
            let mut pos_c = vec![0.0; nc];
            let mut neg_c = vec![0.0; nc];
            for j in 0..nc {
                let col: Vec<f64> = scaled.iter().map(|r| r[j]).collect();
                let sp = stats::percentile(&col, prct);
                let above: Vec<f64> = col.iter().copied().filter(|&v| v > sp).collect();
                let below: Vec<f64> = col.iter().copied().filter(|&v| v <= sp).collect();
                pos_c[j] = if above.is_empty() {
                    col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    stats::median(&above)
                };
                neg_c[j] = if below.is_empty() {
                    col.iter().copied().fold(f64::INFINITY, f64::min)
                } else {
                    stats::median(&below)
                };
            }
            let d: Vec<f64> = scaled.iter().map(|r| cluster::dist(r, &neg_c)).collect();
            (
                scaled
                    .iter()
                    .map(|r| cluster::dist(r, &pos_c) < cluster::dist(r, &neg_c))
                    .collect(),
                d,
            )
        }
    };
    Classified { pos, strength, mtd: used }
}

/// Weighted row norms of the z-scored matrix; the prominence proxy used
/// when seeds have to pick the "most prominent" candidate.
pub fn row_norms(m: &CandidateMatrix, w: &[f64]) -> Vec<f64> {
    m.m.iter()
        .map(|r| r.iter().zip(w).map(|(v, wi)| wi.max(0.0) * v * v).sum::<f64>().sqrt())
        .collect()
}

// ---------------------------------------------------------------------------
// Seed bootstrapping
// ---------------------------------------------------------------------------

/// Boundary seeds: pause-adjacent candidates are positive; candidates
/// within `min_l` of a pause or file edge (but not pause-adjacent
/// themselves) are negative. None when either side stays empty.
pub fn bnd_seeds(
    ctxs: &[BoundaryContext],
    min_l: f64,
    file_dur: f64,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let t_mid = |c: &BoundaryContext| (c.t_off + c.t_on) / 2.0;
    let pos: Vec<usize> = (0..ctxs.len()).filter(|&i| ctxs[i].p > 1e-6).collect();
    if pos.is_empty() {
        return None;
    }
    let mut anchors: Vec<f64> = pos.iter().map(|&i| t_mid(&ctxs[i])).collect();
    anchors.push(0.0);
    anchors.push(file_dur);
    let neg: Vec<usize> = (0..ctxs.len())
        .filter(|&i| {
            ctxs[i].p <= 1e-6
                && anchors.iter().any(|&a| (t_mid(&ctxs[i]) - a).abs() <= min_l)
        })
        .collect();
    if neg.is_empty() {
        return None;
    }
    Some((pos, neg))
}

fn select_candidate(group: &[usize], acc_select: &str, prominence: &[f64]) -> usize {
    match acc_select {
        "left" => group[0],
        "right" => group[group.len() - 1],
        _ => group
            .iter()
            .copied()
            .max_by(|&a, &b| prominence[a].partial_cmp(&prominence[b]).unwrap())
            .unwrap(),
    }
}

/// Accent seeds from word lengths: every word longer than `min_l_a`
/// contributes its `acc_select` candidate as positive; every candidate in a
/// word shorter than `max_l_na` is negative.
pub fn acc_seeds(
    stamps: &[f64],
    words: &[(f64, f64)],
    min_l_a: f64,
    max_l_na: f64,
    acc_select: &str,
    prominence: &[f64],
) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut pos = vec![];
    let mut neg = vec![];
    for &(a, b) in words {
        let inside: Vec<usize> = (0..stamps.len())
            .filter(|&i| stamps[i] >= a - 1e-9 && stamps[i] <= b + 1e-9)
            .collect();
        if inside.is_empty() {
            continue;
        }
        let d = b - a;
        if d > min_l_a {
            pos.push(select_candidate(&inside, acc_select, prominence));
        } else if d < max_l_na {
            neg.extend(inside);
        }
    }
    (!pos.is_empty() && !neg.is_empty()).then_some((pos, neg))
}

// ---------------------------------------------------------------------------
// Post-processing and output tiers
// ---------------------------------------------------------------------------

/// Enforces a minimum distance between kept events: the weaker of the
/// closest offending pair is dropped until all gaps reach `min_l`.
pub fn prune_close(times: &[f64], strength: &[f64], keep: &mut [bool], min_l: f64) {
    loop {
        let kept: Vec<usize> = (0..times.len()).filter(|&i| keep[i]).collect();
        let worst = kept
            .windows(2)
            .map(|p| (p[0], p[1], times[p[1]] - times[p[0]]))
            .filter(|&(_, _, dt)| dt < min_l)
            .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
        match worst {
            Some((a, b, _)) => {
                let drop = if strength[a] >= strength[b] { b } else { a };
                keep[drop] = false;
            }
            None => break,
        }
    }
}

/// Word-orthography heuristic: boundaries following a unit shorter than
/// `thr` (likely a function word) are rejected.
pub fn ort_filter(pre_durs: &[f64], thr: f64, keep: &mut [bool]) {
    for (k, &d) in keep.iter_mut().zip(pre_durs) {
        if d < thr {
            *k = false;
        }
    }
}

/// Builds the phrase tier from classified boundary candidates: segments
/// labeled "x" span between kept boundaries, input pauses carry over as
/// pause segments, and event-tier input splits the file at kept stamps.
pub fn bnd_output_tier(
    tier: &Tier,
    ctxs: &[BoundaryContext],
    keep: &[bool],
    pause_label: &str,
    file_dur: f64,
) -> Tier {
    let mut items = vec![];
    match tier.kind {
        TierKind::Segment => {
            let content = tier.content_items(pause_label);
            if content.is_empty() {
                return Tier {
                    name: String::new(),
                    kind: TierKind::Segment,
                    items,
                    channel: tier.channel,
                };
            }
            let first_on = content[0].t_start;
            let last_off = content[content.len() - 1].t_end;
            if first_on > 1e-9 {
                items.push(AnnotItem::segment(0.0, first_on, pause_label));
            }
            let mut phrase_start = first_on;
            for (i, ctx) in ctxs.iter().enumerate() {
                if ctx.p > 1e-6 {
                    items.push(AnnotItem::segment(phrase_start, ctx.t_off, "x"));
                    items.push(AnnotItem::segment(ctx.t_off, ctx.t_on, pause_label));
                    phrase_start = ctx.t_on;
                } else if keep[i] {
                    items.push(AnnotItem::segment(phrase_start, ctx.t_off, "x"));
                    phrase_start = ctx.t_on;
                }
            }
            items.push(AnnotItem::segment(phrase_start, last_off, "x"));
            if file_dur - last_off > 1e-9 {
                items.push(AnnotItem::segment(last_off, file_dur, pause_label));
            }
        }
        TierKind::Event => {
            let mut cursor = 0.0;
            for (i, ctx) in ctxs.iter().enumerate() {
                if keep[i] {
                    items.push(AnnotItem::segment(cursor, ctx.t_off, "x"));
                    cursor = ctx.t_off;
                }
            }
            items.push(AnnotItem::segment(cursor, file_dur, "x"));
        }
    }
    Tier { name: String::new(), kind: TierKind::Segment, items, channel: tier.channel }
}

/// Reduces classified accent candidates to output stamps: one candidate
/// per word (all words, or only those with a positive candidate), then a
/// minimum-distance pruning by prominence.
pub fn acc_output(
    stamps: &[f64],
    pos: &[bool],
    strength: &[f64],
    words: Option<&[(f64, f64)]>,
    cfg: &AugLocCfg,
) -> Vec<f64> {
    let mut keep = vec![false; stamps.len()];
    match words {
        Some(words) => {
            for &(a, b) in words {
                let inside: Vec<usize> = (0..stamps.len())
                    .filter(|&i| stamps[i] >= a - 1e-9 && stamps[i] <= b + 1e-9)
                    .collect();
                let group: Vec<usize> = if cfg.ag_select == "all" {
                    inside
                } else {
                    inside.into_iter().filter(|&i| pos[i]).collect()
                };
                if !group.is_empty() {
                    keep[select_candidate(&group, &cfg.acc_select, strength)] = true;
                }
            }
        }
        None => keep.copy_from_slice(pos),
    }
    prune_close(stamps, strength, &mut keep, cfg.min_l);
    (0..stamps.len()).filter(|&i| keep[i]).map(|i| stamps[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AugGlobCfg;
    use approx::assert_abs_diff_eq;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 16000.0;

    fn noise(dur: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..(dur * FS) as usize).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    fn assert_tiles(tier: &Tier, dur: f64) {
        let mut cursor = 0.0;
        for it in &tier.items {
            assert_abs_diff_eq!(it.t_start, cursor, epsilon = 1e-9);
            assert!(it.t_end > it.t_start - 1e-9);
            cursor = it.t_end;
        }
        assert_abs_diff_eq!(cursor, dur, epsilon = 1e-9);
    }

    fn chunk_labels(tier: &Tier) -> Vec<&str> {
        tier.items.iter().map(|i| i.label.as_str()).collect()
    }

    #[test]
    fn noise_silence_noise_gives_two_chunks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = noise(1.0, &mut rng);
        x.extend(std::iter::repeat_n(0.0, FS as usize));
        x.extend(noise(1.0, &mut rng));
        let tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        assert_tiles(&tier, 3.0);
        let chunks: Vec<_> =
            tier.items.iter().filter(|i| i.label == "x").collect();
        assert_eq!(chunks.len(), 2);
        assert!(chunks[0].t_end > 0.9 && chunks[0].t_end < 1.2);
        assert!(chunks[1].t_start > 1.8 && chunks[1].t_start < 2.1);
    }

    #[test]
    fn silence_is_one_pause_and_no_chunk() {
        let x = vec![0.0; 2 * FS as usize];
        let tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        assert_tiles(&tier, 2.0);
        assert_eq!(chunk_labels(&tier), vec!["<P>"]);
    }

    #[test]
    fn steady_noise_is_a_single_chunk() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = noise(2.0, &mut rng);
        let tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        assert_eq!(chunk_labels(&tier), vec!["x"]);
    }

    #[test]
    fn short_pause_is_bridged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = noise(1.0, &mut rng);
        x.extend(std::iter::repeat_n(0.0, (0.25 * FS) as usize));
        x.extend(noise(1.0, &mut rng));
        let tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        assert_eq!(chunk_labels(&tier), vec!["x"]);
    }

    #[test]
    fn fbnd_protects_short_edge_pauses() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = vec![0.0; (0.2 * FS) as usize];
        x.extend(noise(1.5, &mut rng));
        let tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        assert_eq!(chunk_labels(&tier)[0], "<P>");
        let cfg = AugChunkCfg { fbnd: false, ..Default::default() };
        let tier = detect_chunks(&x, FS, &cfg, "<P>");
        assert_eq!(chunk_labels(&tier)[0], "x");
    }

    #[test]
    fn margin_moves_chunk_edges_into_the_pause() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = noise(1.0, &mut rng);
        x.extend(std::iter::repeat_n(0.0, FS as usize));
        x.extend(noise(1.0, &mut rng));
        let plain = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
        let cfg = AugChunkCfg { margin: 0.1, ..Default::default() };
        let padded = detect_chunks(&x, FS, &cfg, "<P>");
        assert_tiles(&padded, 3.0);
        let p0 = plain.items.iter().find(|i| i.label == "<P>").unwrap();
        let p1 = padded.items.iter().find(|i| i.label == "<P>").unwrap();
        assert_abs_diff_eq!(p1.t_start, p0.t_start + 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(p1.t_end, p0.t_end - 0.1, epsilon = 1e-9);
    }

    #[test]
    fn pause_count_limit_keeps_the_longest() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = noise(1.0, &mut rng);
        x.extend(std::iter::repeat_n(0.0, (0.4 * FS) as usize));
        x.extend(noise(1.0, &mut rng));
        x.extend(std::iter::repeat_n(0.0, (0.8 * FS) as usize));
        x.extend(noise(1.0, &mut rng));
        let cfg = AugChunkCfg { n: 1, ..Default::default() };
        let tier = detect_chunks(&x, FS, &cfg, "<P>");
        let pauses: Vec<_> = tier.items.iter().filter(|i| i.label == "<P>").collect();
        assert_eq!(pauses.len(), 1);
        assert!(pauses[0].t_start > 2.0);
    }

    fn burst(x: &mut [f64], t_c: f64, dur: f64) {
        let n0 = ((t_c - dur / 2.0) * FS) as usize;
        let n1 = ((t_c + dur / 2.0) * FS) as usize;
        for i in n0..n1.min(x.len()) {
            let t = i as f64 / FS;
            let u = (t - (t_c - dur / 2.0)) / dur;
            let env = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
            x[i] += env
                * (0.5 * (2.0 * std::f64::consts::PI * 300.0 * t).sin()
                    + 0.25 * (2.0 * std::f64::consts::PI * 600.0 * t).sin());
        }
    }

    #[test]
    fn two_bursts_give_two_nuclei_and_one_boundary() {
        let mut x = vec![0.0; FS as usize];
        burst(&mut x, 0.3, 0.1);
        burst(&mut x, 0.6, 0.1);
        let (nuc, bnd) = detect_syllables(&x, FS, &[], &AugSylCfg::default());
        assert_eq!(nuc.items.len(), 2);
        assert!((nuc.items[0].t_start - 0.3).abs() < 0.05);
        assert!((nuc.items[1].t_start - 0.6).abs() < 0.05);
        assert_eq!(bnd.items.len(), 1);
        let tb = bnd.items[0].t_start;
        assert!(tb > 0.35 && tb < 0.55, "boundary at {tb}");
    }

    #[test]
    fn close_bursts_merge_into_one_nucleus() {
        let mut x = vec![0.0; FS as usize];
        burst(&mut x, 0.30, 0.02);
        burst(&mut x, 0.33, 0.02);
        let cfg = AugSylCfg { l: 0.02, ..Default::default() };
        let (nuc, bnd) = detect_syllables(&x, FS, &[], &cfg);
        assert_eq!(nuc.items.len(), 1, "expected merge, got {:?}", nuc.items);
        assert!(bnd.items.is_empty());
    }

    #[test]
    fn silent_chunk_has_no_nuclei() {
        let x = vec![0.0; FS as usize];
        let (nuc, bnd) = detect_syllables(&x, FS, &[(0.0, 1.0)], &AugSylCfg::default());
        assert!(nuc.items.is_empty());
        assert!(bnd.items.is_empty());
    }

    #[test]
    fn nuclei_respect_the_minimum_distance() {
        let mut x = vec![0.0; 2 * FS as usize];
        for k in 0..8 {
            burst(&mut x, 0.2 + 0.2 * k as f64, 0.08);
        }
        let (nuc, _) = detect_syllables(&x, FS, &[], &AugSylCfg::default());
        for p in nuc.items.windows(2) {
            assert!(p[1].t_start - p[0].t_start >= AugSylCfg::default().d_min);
        }
    }

    // -- candidate matrices -------------------------------------------------

    fn scalar_branch(path: &[&str], w: f64) -> WeightBranch {
        WeightBranch { path: path.iter().map(|s| s.to_string()).collect(), w: vec![w] }
    }

    #[test]
    fn scalar_rows_become_zscored_columns() {
        let rows: Vec<Vec<FeatVal>> =
            (0..5).map(|i| vec![FeatVal::Scalar(i as f64)]).collect();
        let br = [scalar_branch(&["std", "ml", "rms"], 1.0)];
        let m = build_matrix(&rows, &br, "abs").unwrap();
        assert_eq!(m.cols, vec!["std:ml:rms"]);
        let col: Vec<f64> = m.m.iter().map(|r| r[0]).collect();
        assert_abs_diff_eq!(stats::mean(&col), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stats::std_pop(&col), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_of_a_constant_feature_is_zero() {
        let rows: Vec<Vec<FeatVal>> = (0..4).map(|_| vec![FeatVal::Scalar(2.0)]).collect();
        let br = [scalar_branch(&["std", "ml", "r"], 1.0)];
        let m = build_matrix(&rows, &br, "delta").unwrap();
        assert_eq!(m.cols, vec!["std:ml:r:d"]);
        assert!(m.m.iter().all(|r| r[0] == 0.0));
        let both = build_matrix(&rows, &br, "abs+delta").unwrap();
        assert_eq!(both.cols.len(), 2);
    }

    #[test]
    fn list_features_expand_with_absolute_values() {
        let rows = vec![
            vec![FeatVal::List(vec![-1.0, 2.0])],
            vec![FeatVal::List(vec![3.0, -4.0])],
        ];
        let br = [WeightBranch {
            path: vec!["acc".into(), "c".into()],
            w: vec![1.0],
        }];
        let m = build_matrix(&rows, &br, "abs").unwrap();
        assert_eq!(m.cols, vec!["acc:c:0", "acc:c:1"]);
        assert_eq!(m.w, vec![1.0, 1.0]);
        // |-1| < |3| keeps the ordering after z-scoring
        assert!(m.m[0][0] < m.m[1][0]);
        // per-element weights must match the list length
        let bad = [WeightBranch {
            path: vec!["acc".into(), "c".into()],
            w: vec![1.0, 2.0, 3.0],
        }];
        assert!(build_matrix(&rows, &bad, "abs").is_err());
        let per = [WeightBranch {
            path: vec!["acc".into(), "c".into()],
            w: vec![0.5, 2.0],
        }];
        assert_eq!(build_matrix(&rows, &per, "abs").unwrap().w, vec![0.5, 2.0]);
    }

    #[test]
    fn missing_values_take_the_column_median() {
        let rows = vec![
            vec![FeatVal::Scalar(1.0)],
            vec![FeatVal::Scalar(f64::NAN)],
            vec![FeatVal::Scalar(3.0)],
        ];
        let br = [scalar_branch(&["std", "ml", "rms"], 1.0)];
        let m = build_matrix(&rows, &br, "abs").unwrap();
        // imputed to the median 2.0, which z-scores to 0
        assert_abs_diff_eq!(m.m[1][0], 0.0, epsilon = 1e-12);
    }

    // -- weighting ----------------------------------------------------------

    fn matrix_from(cols: Vec<Vec<f64>>) -> CandidateMatrix {
        let n = cols[0].len();
        CandidateMatrix {
            m: (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
            cols: (0..cols.len()).map(|j| format!("f{j}")).collect(),
            w: vec![1.0; cols.len()],
        }
    }

    #[test]
    fn correlation_weights_follow_the_medians() {
        let a = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let single = matrix_from(vec![a.clone()]);
        assert_eq!(weight_features(&single, "correlation", None), vec![1.0]);

        let twin = matrix_from(vec![a.clone(), a.clone()]);
        let w = weight_features(&twin, "correlation", None);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-12);

        let anti: Vec<f64> = a.iter().map(|v| -v).collect();
        let mixed = matrix_from(vec![a.clone(), a.clone(), anti]);
        let w = weight_features(&mixed, "correlation", None);
        assert_eq!(w[2], 0.0);
        assert_abs_diff_eq!(w[0] + w[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn silhouette_weights_rank_separating_features() {
        // column 0 separates seeds cleanly, column 1 is noise
        let c0 = vec![0.0, 0.1, 0.2, 5.0, 5.1, 5.2];
        let c1 = vec![0.0, 5.0, 1.0, 4.0, 2.0, 3.0];
        let m = matrix_from(vec![c0, c1]);
        let pos = [3, 4, 5];
        let neg = [0, 1, 2];
        let w = weight_features(&m, "silhouette", Some((&pos, &neg)));
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-12);
        // no seeds: uniform
        assert_eq!(weight_features(&m, "silhouette", None), vec![1.0, 1.0]);
    }

    // -- classification -----------------------------------------------------

    fn blob_matrix(seed: u64, n_pos: usize, n_neg: usize) -> (CandidateMatrix, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![];
        let mut truth = vec![];
        for _ in 0..n_neg {
            rows.push(vec![
                FeatVal::Scalar(rng.random_range(-1.0..1.0)),
                FeatVal::Scalar(rng.random_range(-1.0..1.0)),
            ]);
            truth.push(false);
        }
        for _ in 0..n_pos {
            rows.push(vec![
                FeatVal::Scalar(6.0 + rng.random_range(-1.0..1.0)),
                FeatVal::Scalar(6.0 + rng.random_range(-1.0..1.0)),
            ]);
            truth.push(true);
        }
        let br = [scalar_branch(&["std", "ml", "rms"], 1.0), scalar_branch(&["std", "ml", "r"], 1.0)];
        (build_matrix(&rows, &br, "abs").unwrap(), truth)
    }

    #[test]
    fn seed_kmeans_recovers_blob_membership() {
        let (m, truth) = blob_matrix(8, 30, 50);
        let w = vec![1.0; m.cols.len()];
        let seeds = Some((vec![50usize, 51, 52], vec![0usize, 1, 2]));
        let c = bootstrap_and_classify(&m, &w, "seed_kmeans", 95.0, seeds, 300);
        let hits = c.pos.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / truth.len() as f64 >= 0.95);
        assert_eq!(c.mtd, "seed_kmeans");
    }

    #[test]
    fn split_classifies_the_upper_blob_as_positive() {
        let (m, truth) = blob_matrix(9, 20, 60);
        let w = vec![1.0; m.cols.len()];
        let c = bootstrap_and_classify(&m, &w, "split", 75.0, None, 300);
        let hits = c.pos.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(hits as f64 / truth.len() as f64 >= 0.95);
    }

    #[test]
    fn seed_prct_at_the_top_percentile_marks_nothing() {
        let (m, _) = blob_matrix(10, 20, 20);
        let w = vec![1.0; m.cols.len()];
        let seeds = Some((vec![20usize], vec![0usize, 1]));
        let c = bootstrap_and_classify(&m, &w, "seed_prct", 100.0, seeds, 300);
        assert!(c.pos.iter().all(|&p| !p));
    }

    #[test]
    fn missing_seeds_fall_back_to_split() {
        let (m, _) = blob_matrix(11, 10, 10);
        let w = vec![1.0; m.cols.len()];
        let c = bootstrap_and_classify(&m, &w, "seed_kmeans", 95.0, None, 300);
        assert_eq!(c.mtd, "split");
    }

    #[test]
    fn raising_the_percentile_never_adds_positives() {
        for seed in 0..10u64 {
            let (m, _) = blob_matrix(seed, 15, 35);
            let w = vec![1.0; m.cols.len()];
            let seeds = (vec![40usize, 41], vec![0usize, 1, 2]);
            let mut prev = usize::MAX;
            for prct in [80.0, 85.0, 90.0, 95.0, 99.0] {
                let c = bootstrap_and_classify(
                    &m,
                    &w,
                    "seed_prct",
                    prct,
                    Some(seeds.clone()),
                    300,
                );
                let k = c.pos.iter().filter(|&&p| p).count();
                assert!(k <= prev, "positives rose from {prev} to {k} at prct {prct}");
                prev = k;
            }
        }
    }

    // -- seeds and post-processing -------------------------------------------

    fn ctx_at(t: f64, p: f64, ii: usize) -> BoundaryContext {
        BoundaryContext {
            ii,
            seg1: (t - 1.0, t),
            seg2: (t + p, t + p + 1.0),
            p,
            lab: "a".into(),
            lab_next: "b".into(),
            t_off: t,
            t_on: t + p,
        }
    }

    #[test]
    fn pause_adjacency_seeds_the_positive_class() {
        let ctxs = vec![
            ctx_at(0.7, 0.0, 0),
            ctx_at(2.0, 0.5, 1),
            ctx_at(3.0, 0.0, 2),
            ctx_at(6.0, 0.0, 3),
        ];
        let (pos, neg) = bnd_seeds(&ctxs, 0.8, 10.0).unwrap();
        assert_eq!(pos, vec![1]);
        // 0.7 is near the file start anchor, 3.0 near the pause at 2.25
        assert_eq!(neg, vec![0, 2]);
        // no pauses at all: no seeds
        let flat = vec![ctx_at(1.0, 0.0, 0), ctx_at(2.0, 0.0, 1)];
        assert!(bnd_seeds(&flat, 0.5, 10.0).is_none());
    }

    #[test]
    fn word_lengths_seed_the_accent_classes() {
        let stamps = vec![0.2, 0.5, 0.8, 1.25, 1.62];
        let words = vec![(0.0, 1.0), (1.2, 1.3), (1.5, 1.7)];
        let prom = vec![0.1, 0.9, 0.5, 0.2, 0.3];
        let (pos, neg) =
            acc_seeds(&stamps, &words, 0.6, 0.15, "max", &prom).unwrap();
        assert_eq!(pos, vec![1]);
        assert_eq!(neg, vec![3]);
        let (pos, _) = acc_seeds(&stamps, &words, 0.6, 0.15, "left", &prom).unwrap();
        assert_eq!(pos, vec![0]);
        let (pos, _) = acc_seeds(&stamps, &words, 0.6, 0.15, "right", &prom).unwrap();
        assert_eq!(pos, vec![2]);
    }

    #[test]
    fn close_boundaries_keep_the_stronger() {
        let times = vec![1.0, 1.2, 3.0];
        let strength = vec![0.4, 0.9, 0.5];
        let mut keep = vec![true, true, true];
        prune_close(&times, &strength, &mut keep, 0.5);
        assert_eq!(keep, vec![false, true, true]);
    }

    #[test]
    fn boundaries_after_short_words_are_rejected() {
        let mut keep = vec![true, true];
        ort_filter(&[0.05, 0.5], 0.1, &mut keep);
        assert_eq!(keep, vec![false, true]);
    }

    #[test]
    fn phrase_tier_carries_pauses_and_splits_at_kept_boundaries() {
        let tier = Tier {
            name: "wrd".into(),
            kind: TierKind::Segment,
            items: vec![
                AnnotItem::segment(0.5, 1.0, "w1"),
                AnnotItem::segment(1.0, 2.0, "w2"),
                AnnotItem::segment(2.5, 3.5, "w3"),
            ],
            channel: 0,
        };
        let ctxs = vec![
            BoundaryContext {
                ii: 0,
                seg1: (0.5, 1.0),
                seg2: (1.0, 2.0),
                p: 0.0,
                lab: "w1".into(),
                lab_next: "w2".into(),
                t_off: 1.0,
                t_on: 1.0,
            },
            BoundaryContext {
                ii: 1,
                seg1: (1.0, 2.0),
                seg2: (2.5, 3.5),
                p: 0.5,
                lab: "w2".into(),
                lab_next: "w3".into(),
                t_off: 2.0,
                t_on: 2.5,
            },
        ];
        let out = bnd_output_tier(&tier, &ctxs, &[true, false], "<P>", 4.0);
        assert_tiles(&out, 4.0);
        let labs: Vec<&str> = out.items.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labs, vec!["<P>", "x", "x", "<P>", "x", "<P>"]);
        assert_abs_diff_eq!(out.items[1].t_end, 1.0, epsilon = 1e-12);
        // without the kept boundary the first phrase spans both words
        let out = bnd_output_tier(&tier, &ctxs, &[false, false], "<P>", 4.0);
        let labs: Vec<&str> = out.items.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labs, vec!["<P>", "x", "<P>", "x", "<P>"]);
    }

    #[test]
    fn event_candidates_split_the_file() {
        let tier = Tier {
            name: "syl".into(),
            kind: TierKind::Event,
            items: vec![
                AnnotItem::event(1.0, "x"),
                AnnotItem::event(2.0, "x"),
                AnnotItem::event(3.0, "x"),
            ],
            channel: 0,
        };
        let ctxs = vec![BoundaryContext {
            ii: 1,
            seg1: (1.0, 2.0),
            seg2: (2.0, 3.0),
            p: 0.0,
            lab: "x".into(),
            lab_next: "x".into(),
            t_off: 2.0,
            t_on: 2.0,
        }];
        let out = bnd_output_tier(&tier, &ctxs, &[true], "<P>", 4.0);
        assert_tiles(&out, 4.0);
        assert_eq!(out.items.len(), 2);
        assert_abs_diff_eq!(out.items[0].t_end, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn accent_output_reduces_per_word() {
        let stamps = vec![0.2, 0.5, 0.8, 1.3, 1.8];
        let pos = vec![true, true, false, false, true];
        let strength = vec![0.2, 0.9, 0.5, 0.1, 0.7];
        let words = vec![(0.0, 1.0), (1.1, 1.5), (1.6, 2.0)];
        // prominent-word mode: word 2 has no positive candidate
        let mut cfg = AugLocCfg {
            min_l: 0.2,
            ag_select: "max".into(),
            acc_select: "max".into(),
            ..Default::default()
        };
        let out = acc_output(&stamps, &pos, &strength, Some(&words), &cfg);
        assert_eq!(out, vec![0.5, 1.8]);
        // every word gets one accent, leftmost candidate
        cfg.ag_select = "all".into();
        cfg.acc_select = "left".into();
        let out = acc_output(&stamps, &pos, &strength, Some(&words), &cfg);
        assert_eq!(out, vec![0.2, 1.3, 1.8]);
        // without words only positives survive
        cfg.min_l = 0.0;
        let out = acc_output(&stamps, &pos, &strength, None, &cfg);
        assert_eq!(out, vec![0.2, 0.5, 1.8]);
    }

    // -- feature extraction over synthetic contours ---------------------------

    fn reset_f0(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 * F0_STEP;
                if t < 2.0 {
                    7.0 + if i % 2 == 0 { 0.3 } else { -0.3 }
                } else {
                    10.0 + if i % 2 == 0 { 0.3 } else { -0.3 }
                }
            })
            .collect()
    }

    fn word_tier() -> Tier {
        Tier {
            name: "wrd".into(),
            kind: TierKind::Segment,
            items: vec![
                AnnotItem::segment(0.0, 1.0, "w1"),
                AnnotItem::segment(1.0, 1.99, "w2"),
                AnnotItem::segment(2.0, 3.0, "w3"),
                AnnotItem::segment(3.0, 4.0, "w4"),
            ],
            channel: 0,
        }
    }

    #[test]
    fn boundary_candidates_feel_the_register_reset() {
        let y = reset_f0(400);
        let tier = word_tier();
        let branches = vec![
            scalar_branch(&["std", "ml", "r"], 1.0),
            scalar_branch(&["std", "ml", "rms"], 1.0),
            scalar_branch(&["std", "p"], 1.0),
        ];
        let cfg = StylBndCfg::default();
        let g = glob_candidates(&tier, &y, &branches, &cfg, 0.3, None, 4.0, "<P>").unwrap();
        assert_eq!(g.ctxs.len(), 3);
        assert_eq!(g.rows.len(), 3);
        // the reset candidate scores highest on all three features
        let m = build_matrix(&g.rows, &branches, "abs").unwrap();
        let w = vec![1.0; m.cols.len()];
        let norms = row_norms(&m, &w);
        assert!(norms[1] > norms[0] && norms[1] > norms[2]);
    }

    #[test]
    fn unresolvable_branches_name_the_path() {
        let y = reset_f0(400);
        let tier = word_tier();
        let bad = vec![scalar_branch(&["std", "ml", "nope"], 1.0)];
        let err =
            glob_candidates(&tier, &y, &bad, &StylBndCfg::default(), 0.3, None, 4.0, "<P>")
                .unwrap_err();
        assert!(err.to_string().contains("std:ml:nope"));
        let cfg = AugGlobCfg::default();
        assert_eq!(cfg.cntr_mtd, "seed_prct");
    }

    #[test]
    fn accent_rows_resolve_all_feature_sets() {
        let n = 400;
        let mut y = reset_f0(n);
        // put a bump on the second word
        for (i, v) in y.iter_mut().enumerate() {
            let t = i as f64 * F0_STEP;
            if (1.2..1.6).contains(&t) {
                let u = (t - 1.4) / 0.2;
                *v += 2.0 * (1.0 - u * u);
            }
        }
        let glob_cfg = StylGlobCfg::default();
        let en = EnergyContour {
            t: (0..n).map(|i| i as f64 * F0_STEP).collect(),
            e: (0..n).map(|i| 0.1 + 0.001 * i as f64).collect(),
            sts: F0_STEP,
        };
        let src = AccSource {
            f0: &y,
            en: Some(&en),
            parents: vec![(0.0, 2.0), (2.0, 4.0)],
            point_win: 0.4,
            nrm_win: 1.0,
            glob_cfg: &glob_cfg,
            loc_ord: 3,
            loc_rng: (-1.0, 1.0),
            mode: RegisterMode::Ml,
            quot_win: 0.05,
            file_dur: 4.0,
        };
        let stamps = vec![0.5, 1.4, 2.5];
        let branches = vec![
            WeightBranch { path: vec!["acc".into(), "c".into()], w: vec![1.0] },
            scalar_branch(&["gst", "ml", "rms"], 1.0),
            WeightBranch {
                path: vec!["gst".into(), "res".into(), "bl".into(), "c".into()],
                w: vec![1.0],
            },
            scalar_branch(&["gnl_f0", "m"], 1.0),
            scalar_branch(&["gnl_en", "m_nrm"], 1.0),
        ];
        let rows = acc_candidates(&stamps, &src, &branches).unwrap();
        assert_eq!(rows.len(), 3);
        let m = build_matrix(&rows, &branches, "abs").unwrap();
        // acc:c (4) + gst rms (1) + res bl c (4) + gnl m (1) + gnl_en (1)
        assert_eq!(m.cols.len(), 11);
        // the bump candidate deviates most from the parent midline
        let w = vec![1.0; m.cols.len()];
        let norms = row_norms(&m, &w);
        assert!(norms[1] > norms[0]);

        let bad = vec![scalar_branch(&["gst", "ml", "nope"], 1.0)];
        assert!(acc_candidates(&stamps, &src, &bad).is_err());
        let no_en = AccSource { en: None, ..src };
        let needs_en = vec![scalar_branch(&["gnl_en", "m"], 1.0)];
        assert!(acc_candidates(&stamps, &no_en, &needs_en).is_err());
    }

    #[test]
    fn pho_branches_are_dropped_with_a_warning() {
        let wgt = serde_json::json!({
            "std": {"ml": {"rms": 1.0}},
            "pho": 1.0
        });
        let branches = weight_branches(&wgt);
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].path, vec!["std", "ml", "rms"]);
        assert_eq!(branches[0].w, vec![1.0]);
    }
}
