//! Standard descriptive features of f0 and energy contours: location and
//! dispersion statistics with local normalization, initial/final part
//! quotients, a shape polynomial over normalized time, and spectral balance
//! for energy segments.

use crate::config::SbCfg;
use crate::dsp::{self, FilterSpec, WindowSpec};
use crate::stats;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Per-segment statistics. `*_nrm` values are the segment statistic divided
/// by the same statistic over the normalization window; file-level feature
/// rows leave them NaN.
#[derive(Debug, Clone)]
pub struct StandardFeatures {
    pub m: f64,
    pub sd: f64,
    pub med: f64,
    pub iqr: f64,
    pub max: f64,
    pub min: f64,
    pub rms: f64,
    pub m_nrm: f64,
    pub sd_nrm: f64,
    pub med_nrm: f64,
    pub iqr_nrm: f64,
    pub max_nrm: f64,
    pub min_nrm: f64,
    pub rms_nrm: f64,
    pub dur: f64,
    pub dur_nrm: f64,
    pub qi: f64,
    pub qf: f64,
    pub qb: f64,
    pub qm: f64,
    /// Shape polynomial over time normalized to [0, 1], coefficients in
    /// descending order of power.
    pub c: [f64; 3],
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 || b.is_nan() {
        f64::NAN
    } else {
        a / b
    }
}

/// Initial/final part quotients of a contour sampled every `step` seconds.
/// `win` is the initial/final window length in seconds.
pub fn part_quotients(y: &[f64], step: f64, win: f64) -> (f64, f64, f64, f64) {
    let n = y.len();
    let wl = (win / step).round() as usize;
    if wl == 0 || wl >= n {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let m_init = stats::mean(&y[..wl]);
    let m_fin = stats::mean(&y[n - wl..]);
    let qi = ratio(m_init, stats::mean(&y[wl..]));
    let qf = ratio(m_fin, stats::mean(&y[..n - wl]));
    let qb = ratio(m_init, m_fin);
    let qm = if n > 2 * wl {
        ratio(m_init.max(m_fin), stats::mean(&y[wl..n - wl]))
    } else {
        f64::NAN
    };
    (qi, qf, qb, qm)
}

/// Second-order least squares over time normalized to [0, 1]; descending
/// coefficients, NaN when fewer than 3 samples.
pub fn shape_poly(y: &[f64]) -> [f64; 3] {
    if y.len() < 3 {
        return [f64::NAN; 3];
    }
    let n = y.len();
    let tn: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    match dsp::polyfit(&tn, y, 2) {
        Ok(c) => [c[0], c[1], c[2]],
        Err(_) => [f64::NAN; 3],
    }
}

/// Features of one analysis window `y` against its normalization window
/// `y_nrm`; both sampled every `step` seconds. `quot_win` is the length of
/// the initial/final windows for the part quotients.
pub fn segment_features(
    y: &[f64],
    y_nrm: &[f64],
    step: f64,
    dur: f64,
    nrm_dur: f64,
    quot_win: f64,
) -> StandardFeatures {
    let (qi, qf, qb, qm) = part_quotients(y, step, quot_win);
    StandardFeatures {
        m: stats::mean(y),
        sd: stats::std_pop(y),
        med: stats::median(y),
        iqr: stats::iqr(y),
        max: stats::max(y),
        min: stats::min(y),
        rms: stats::rms(y),
        m_nrm: ratio(stats::mean(y), stats::mean(y_nrm)),
        sd_nrm: ratio(stats::std_pop(y), stats::std_pop(y_nrm)),
        med_nrm: ratio(stats::median(y), stats::median(y_nrm)),
        iqr_nrm: ratio(stats::iqr(y), stats::iqr(y_nrm)),
        max_nrm: ratio(stats::max(y), stats::max(y_nrm)),
        min_nrm: ratio(stats::min(y), stats::min(y_nrm)),
        rms_nrm: ratio(stats::rms(y), stats::rms(y_nrm)),
        dur,
        dur_nrm: ratio(dur, nrm_dur),
        qi,
        qf,
        qb,
        qm,
        c: shape_poly(y),
    }
}

/// Whole-channel statistics; normalization variants stay NaN.
pub fn file_features(y: &[f64], step: f64, dur: f64, quot_win: f64) -> StandardFeatures {
    let mut f = segment_features(y, &[], step, dur, f64::NAN, quot_win);
    f.dur_nrm = f64::NAN;
    f
}

/// Pre-emphasis factor: values above 1 are read as the lower boundary
/// frequency in Hz and converted for the given sample rate.
pub fn preemphasis_alpha(alpha: f64, fs: f64) -> f64 {
    if alpha > 1.0 {
        (-2.0 * std::f64::consts::PI * alpha / fs).exp()
    } else {
        alpha
    }
}

fn fant_weight(f: f64) -> f64 {
    (1.0 + f * f / (200.0 * 200.0)) / (1.0 + f * f / (5000.0 * 5000.0))
}

fn sb_filter(cfg: &SbCfg) -> FilterSpec {
    let f: Vec<f64> = cfg.f.iter().copied().filter(|&v| v > 0.0).collect();
    match (cfg.btype.as_str(), f.as_slice()) {
        ("low", [hi, ..]) => FilterSpec::low(*hi, 5),
        ("high", [lo, ..]) => FilterSpec::high(*lo, 5),
        ("band", [lo, hi, ..]) => FilterSpec::band(*lo, *hi, 5),
        ("none", _) => FilterSpec::none(),
        _ => {
            log::warn!("ignoring spectral balance band restriction: unusable cutoff list");
            FilterSpec::none()
        }
    }
}

/// Spectral balance of a signal segment as the level difference after and
/// before pre-emphasis (SPLH - SPL). Time domain: first-order differencing
/// with the pre-emphasis factor. Frequency domain: the spectrum is tilted by
/// 10*log10((1+f^2/200^2)/(1+f^2/5000^2)) before level integration.
/// Returns NaN for silent input.
pub fn spectral_balance(x: &[f64], fs: f64, cfg: &SbCfg, w: &WindowSpec) -> f64 {
    let mut seg: Vec<f64> = x.to_vec();
    if cfg.win > 0.0 {
        let wl = (cfg.win * fs).round() as usize;
        if wl > 0 && wl < seg.len() {
            let start = (seg.len() - wl) / 2;
            seg = seg[start..start + wl].to_vec();
        }
    }
    let spec = sb_filter(cfg);
    let seg = match dsp::butter_filter(&seg, fs, &spec) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("spectral balance band restriction failed: {e}");
            seg
        }
    };
    if seg.is_empty() || stats::rms(&seg) == 0.0 {
        return f64::NAN;
    }
    match cfg.domain.as_str() {
        "freq" => {
            let n = seg.len();
            let weights = dsp::window(w, n);
            let mut buf: Vec<Complex<f64>> = seg
                .iter()
                .zip(&weights)
                .map(|(v, wj)| Complex::new(v * wj, 0.0))
                .collect();
            FftPlanner::new().plan_fft_forward(n).process(&mut buf);
            let mut p_tot = 0.0;
            let mut p_emph = 0.0;
            for (k, c) in buf.iter().take(n / 2 + 1).enumerate() {
                let p = c.norm_sqr();
                let f = k as f64 * fs / n as f64;
                p_tot += p;
                p_emph += p * fant_weight(f);
            }
            if p_tot <= 0.0 {
                return f64::NAN;
            }
            10.0 * (p_emph / p_tot).log10()
        }
        _ => {
            let alpha = preemphasis_alpha(cfg.alpha, fs);
            let mut emph = Vec::with_capacity(seg.len());
            emph.push(seg[0]);
            for i in 1..seg.len() {
                emph.push(seg[i] - alpha * seg[i - 1]);
            }
            let spl = 20.0 * stats::rms(&seg).log10();
            let splh = 20.0 * stats::rms(&emph).log10();
            splh - spl
        }
    }
}
