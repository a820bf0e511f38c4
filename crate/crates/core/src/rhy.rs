//! Rhythm features of f0 and energy contours: a band-limited DCT spectrum
//! with spectral moments and peak statistics, event rates of other tiers
//! within the analyzed span, and the influence of those rates on the contour
//! (coefficient weight around the rate, reconstruction error, distance to
//! spectral peaks).

use crate::annot::Tier;
use crate::config::RhyCfg;
use crate::dsp::{self, WindowSpec};

/// Band-limited DCT description of one contour.
#[derive(Debug, Clone)]
pub struct RhythmSpectrum {
    /// Coefficients with frequencies inside [lb, ub] (coefficient 0 dropped
    /// when `rmo` is set) and their frequencies.
    pub c: Vec<f64>,
    pub f: Vec<f64>,
    /// The full coefficient set.
    pub c_orig: Vec<f64>,
    pub f_orig: Vec<f64>,
    /// Absolute coefficient mass summed into 1 Hz bins; `fbin` holds the
    /// lower bin boundaries.
    pub cbin: Vec<f64>,
    pub fbin: Vec<f64>,
    /// First `nsm` spectral moments of the |c| weight distribution over f:
    /// mean, variance, then standardized higher moments.
    pub sm: Vec<f64>,
    /// Weighted coefficient mean and standard deviation.
    pub m: f64,
    pub sd: f64,
    /// Mean absolute error between the band-limited reconstruction and the
    /// windowed contour.
    pub mae: f64,
    pub n_peak: usize,
    /// Frequency of the band coefficient with maximum amplitude.
    pub f_max: f64,
    /// Frequencies of the counted peaks.
    pub peak_f: Vec<f64>,
    pub dur: f64,
    /// Window-weighted contour the spectrum was computed from.
    pub input: Vec<f64>,
    band_idx: Vec<usize>,
}

const MASS_EPS: f64 = 1e-12;

/// DCT analysis of a contour sampled at `fs` Hz.
pub fn rhythm_spectrum(y: &[f64], fs: f64, cfg: &RhyCfg, w: &WindowSpec) -> RhythmSpectrum {
    let n = y.len();
    let weights = dsp::window(w, n);
    let input: Vec<f64> = y.iter().zip(&weights).map(|(v, wj)| v * wj).collect();
    let c_orig = dsp::dct_transform(&input);
    let f_orig: Vec<f64> = (0..n).map(|k| dsp::bin_frequency(k, fs, n)).collect();
    let band_idx: Vec<usize> = (0..n)
        .filter(|&k| {
            f_orig[k] >= cfg.lb && f_orig[k] <= cfg.ub && !(cfg.rmo && k == 0)
        })
        .collect();
    let c: Vec<f64> = band_idx.iter().map(|&k| c_orig[k]).collect();
    let f: Vec<f64> = band_idx.iter().map(|&k| f_orig[k]).collect();
    let mass: Vec<f64> = c.iter().map(|v| v.abs()).collect();
    let total: f64 = mass.iter().sum();

    let n_bins = ((cfg.ub - cfg.lb).ceil() as usize).max(1);
    let fbin: Vec<f64> = (0..n_bins).map(|j| cfg.lb + j as f64).collect();
    let mut cbin = vec![0.0; n_bins];
    for (fi, mi) in f.iter().zip(&mass) {
        let j = (((fi - cfg.lb).floor() as isize).max(0) as usize).min(n_bins - 1);
        cbin[j] += mi;
    }

    let (sm, m, sd) = if total < MASS_EPS {
        (vec![f64::NAN; cfg.nsm], f64::NAN, f64::NAN)
    } else {
        let wgt: Vec<f64> = mass.iter().map(|v| v / total).collect();
        let mu: f64 = f.iter().zip(&wgt).map(|(a, b)| a * b).sum();
        let var: f64 = f.iter().zip(&wgt).map(|(a, b)| (a - mu) * (a - mu) * b).sum();
        let sigma = var.sqrt();
        let mut sm = Vec::with_capacity(cfg.nsm);
        for k in 1..=cfg.nsm {
            sm.push(match k {
                1 => mu,
                2 => var,
                _ => {
                    if sigma < MASS_EPS {
                        f64::NAN
                    } else {
                        f.iter()
                            .zip(&wgt)
                            .map(|(a, b)| ((a - mu) / sigma).powi(k as i32) * b)
                            .sum()
                    }
                }
            });
        }
        (sm, mu, sigma)
    };

    let (n_peak, peak_f, f_max) = if total < MASS_EPS {
        (0, vec![], f64::NAN)
    } else {
        let i_max = (0..mass.len())
            .max_by(|&a, &b| mass[a].total_cmp(&mass[b]))
            .unwrap();
        let cog = m;
        let i_cog = (0..f.len())
            .min_by(|&a, &b| (f[a] - cog).abs().total_cmp(&(f[b] - cog).abs()))
            .unwrap();
        let thr = mass[i_cog];
        let mut peaks = Vec::new();
        for i in 0..mass.len() {
            let left_ok = i == 0 || mass[i] > mass[i - 1];
            let right_ok = i + 1 == mass.len() || mass[i] > mass[i + 1];
            if left_ok && right_ok && mass[i] >= thr && mass.len() > 1 {
                peaks.push(f[i]);
            }
        }
        (peaks.len(), peaks, f[i_max])
    };

    let recon = dsp::idct_transform(&c_orig, Some(&band_idx));
    let mae = if n == 0 {
        f64::NAN
    } else {
        input.iter().zip(&recon).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64
    };

    RhythmSpectrum {
        c,
        f,
        c_orig,
        f_orig,
        cbin,
        fbin,
        sm,
        m,
        sd,
        mae,
        n_peak,
        f_max,
        peak_f,
        dur: n as f64 / fs,
        input,
        band_idx,
    }
}

/// Rate of tier items within [t_on, t_off] in Hz. Event stamps are counted
/// when they fall inside; segments contribute the proportion of their own
/// length that the analysis span covers.
pub fn event_rate(tier: &Tier, t_on: f64, t_off: f64, pause_label: &str) -> f64 {
    let dur = t_off - t_on;
    if dur <= 0.0 {
        return f64::NAN;
    }
    let eps = 1e-9;
    let mut count = 0.0;
    for it in tier.content_items(pause_label) {
        if tier.is_event() {
            if it.t_start >= t_on - eps && it.t_start <= t_off + eps {
                count += 1.0;
            }
        } else if it.dur() > 0.0 {
            let ov = (it.t_end.min(t_off) - it.t_start.max(t_on)).max(0.0);
            count += ov / it.dur();
        } else if it.t_start >= t_on - eps && it.t_start <= t_off + eps {
            count += 1.0;
        }
    }
    count / dur
}

/// Influence of one event rate on the analyzed contour.
#[derive(Debug, Clone)]
pub struct RateInfluence {
    pub rate: f64,
    /// Share of the absolute coefficient mass within rate +/- rb Hz.
    pub prop: f64,
    /// Mean absolute error of the reconstruction from just that band.
    pub mae: f64,
    /// Rate minus the frequency of the maximum coefficient.
    pub dgm: f64,
    /// Rate minus the frequency of the nearest counted peak.
    pub dlm: f64,
}

impl RateInfluence {
    pub fn missing() -> Self {
        RateInfluence {
            rate: f64::NAN,
            prop: f64::NAN,
            mae: f64::NAN,
            dgm: f64::NAN,
            dlm: f64::NAN,
        }
    }
}

pub fn rate_influence(sp: &RhythmSpectrum, rate: f64, rb: f64) -> RateInfluence {
    let total: f64 = sp.c.iter().map(|v| v.abs()).sum();
    if total < MASS_EPS || !rate.is_finite() {
        return RateInfluence { rate, ..RateInfluence::missing() };
    }
    let in_band: Vec<usize> = (0..sp.f.len())
        .filter(|&i| sp.f[i] >= rate - rb && sp.f[i] <= rate + rb)
        .collect();
    let prop = in_band.iter().map(|&i| sp.c[i].abs()).sum::<f64>() / total;
    let keep: Vec<usize> = in_band.iter().map(|&i| sp.band_idx[i]).collect();
    let recon = dsp::idct_transform(&sp.c_orig, Some(&keep));
    let mae = sp
        .input
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / sp.input.len().max(1) as f64;
    let dlm = sp
        .peak_f
        .iter()
        .map(|&pf| rate - pf)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(f64::NAN);
    RateInfluence { rate, prop, mae, dgm: rate - sp.f_max, dlm }
}
