//! Voice quality from pulse marks and audio: relative local jitter, local
//! shimmer, and order-3 polynomial time courses of both.

use crate::config::JitCfg;
use crate::dsp;
use crate::stats;

/// Period durations extracted from consecutive pulse marks, with the pairs
/// that survive the duration and ratio constraints.
#[derive(Debug, Clone)]
pub struct PeriodSequence {
    /// Midpoint times of the valid periods.
    pub t: Vec<f64>,
    pub periods: Vec<f64>,
    /// Time of each valid adjacent pair (the shared pulse) and the absolute
    /// period difference there.
    pub pair_t: Vec<f64>,
    pub pair_d: Vec<f64>,
    /// Per pair: the two indices into `periods`.
    pairs: Vec<(usize, usize)>,
    /// Index into the raw pulse list for each valid period.
    idx: Vec<usize>,
}

/// Consecutive pulse differences filtered by the jitter constraints: periods
/// outside [t_min, t_max] are dropped, and an adjacent pair only counts when
/// the longer period is at most fac_max times the shorter. Exclusions break
/// the difference chain.
pub fn periods(pulses: &[f64], cfg: &JitCfg) -> PeriodSequence {
    let mut seq = PeriodSequence {
        t: vec![],
        periods: vec![],
        pair_t: vec![],
        pair_d: vec![],
        pairs: vec![],
        idx: vec![],
    };
    if pulses.len() < 2 {
        return seq;
    }
    for i in 0..pulses.len() - 1 {
        let d = pulses[i + 1] - pulses[i];
        if d >= cfg.t_min && d <= cfg.t_max {
            seq.t.push((pulses[i] + pulses[i + 1]) / 2.0);
            seq.periods.push(d);
            seq.idx.push(i);
        }
    }
    for j in 1..seq.periods.len() {
        // adjacent means sharing a pulse
        if seq.idx[j] != seq.idx[j - 1] + 1 {
            continue;
        }
        let (a, b) = (seq.periods[j - 1], seq.periods[j]);
        if a.max(b) / a.min(b) > cfg.fac_max {
            continue;
        }
        seq.pair_t.push(pulses[seq.idx[j]]);
        seq.pair_d.push((b - a).abs());
        seq.pairs.push((j - 1, j));
    }
    seq
}

/// Relative local jitter: mean absolute difference of valid adjacent periods
/// divided by the mean of all valid periods.
pub fn jitter(seq: &PeriodSequence) -> f64 {
    if seq.pair_d.is_empty() || seq.periods.is_empty() {
        log::info!("too few valid periods for jitter");
        return f64::NAN;
    }
    stats::mean(&seq.pair_d) / stats::mean(&seq.periods)
}

/// Peak absolute amplitude inside each valid period.
pub fn period_amplitudes(x: &[f64], fs: f64, pulses: &[f64], seq: &PeriodSequence) -> Vec<f64> {
    seq.idx
        .iter()
        .map(|&i| {
            let a = ((pulses[i] * fs).round() as usize).min(x.len());
            let b = ((pulses[i + 1] * fs).round() as usize).min(x.len());
            x[a..b].iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect()
}

/// Local shimmer over the valid pairs of `seq`: mean absolute amplitude
/// difference divided by the mean period amplitude. Also returns the per-pair
/// normalized distances for the time course.
pub fn shimmer(x: &[f64], fs: f64, pulses: &[f64], seq: &PeriodSequence) -> (f64, Vec<f64>) {
    let amps = period_amplitudes(x, fs, pulses, seq);
    let mean_a = stats::mean(&amps);
    if amps.is_empty() || mean_a == 0.0 || mean_a.is_nan() {
        log::info!("silent or empty periods; shimmer unavailable");
        return (f64::NAN, vec![]);
    }
    let diffs: Vec<f64> =
        seq.pairs.iter().map(|&(a, b)| (amps[b] - amps[a]).abs() / mean_a).collect();
    if diffs.is_empty() {
        return (f64::NAN, vec![]);
    }
    (stats::mean(&diffs), diffs)
}

/// Order-3 least squares over pair times minmax-normalized to [-1, 1];
/// descending coefficients, NaN with fewer than 4 points.
pub fn time_course(d: &[f64], t: &[f64]) -> [f64; 4] {
    if d.len() < 4 || t.len() != d.len() {
        return [f64::NAN; 4];
    }
    let tn = stats::minmax_nrm(t, (-1.0, 1.0));
    match dsp::polyfit(&tn, d, 3) {
        Ok(c) => [c[0], c[1], c[2], c[3]],
        Err(_) => [f64::NAN; 4],
    }
}

#[derive(Debug, Clone)]
pub struct VoiceFeatures {
    pub jit: f64,
    pub shim: f64,
    /// Time courses, descending coefficients.
    pub jit_c: [f64; 4],
    pub shim_c: [f64; 4],
}

/// All voice features of one analysis span. `pulses` are the pulse times
/// inside the span; `x`/`fs` the audio it indexes into.
pub fn voice_features(x: &[f64], fs: f64, pulses: &[f64], cfg: &JitCfg) -> VoiceFeatures {
    let seq = periods(pulses, cfg);
    let jit = jitter(&seq);
    let mean_period = stats::mean(&seq.periods);
    let jit_course: Vec<f64> = seq.pair_d.iter().map(|d| d / mean_period).collect();
    let (shim, shim_course) = shimmer(x, fs, pulses, &seq);
    VoiceFeatures {
        jit,
        shim,
        jit_c: time_course(&jit_course, &seq.pair_t),
        shim_c: time_course(&shim_course, &seq.pair_t),
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pulse_train(step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.1 + i as f64 * step).collect()
    }

    #[test]
    fn uniform_pulses_have_zero_jitter() {
        let seq = periods(&pulse_train(0.01, 50), &JitCfg::default());
        assert_eq!(seq.periods.len(), 49);
        assert_abs_diff_eq!(jitter(&seq), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn alternating_periods_give_point_two() {
        let mut pulses = vec![0.0];
        for i in 0..40 {
            let step = if i % 2 == 0 { 0.009 } else { 0.011 };
            pulses.push(pulses.last().unwrap() + step);
        }
        let seq = periods(&pulses, &JitCfg::default());
        assert_abs_diff_eq!(jitter(&seq), 0.2, epsilon = 1e-9);
    }

    #[test]
    fn out_of_range_periods_are_discarded() {
        let mut pulses = pulse_train(0.01, 10);
        pulses.push(pulses.last().unwrap() + 0.05);
        for _ in 0..9 {
            pulses.push(pulses.last().unwrap() + 0.01);
        }
        let seq = periods(&pulses, &JitCfg::default());
        assert!(seq.periods.iter().all(|&p| p <= 0.02));
        assert_abs_diff_eq!(jitter(&seq), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn extreme_ratio_pairs_break_the_chain() {
        let pulses = vec![0.0, 0.010, 0.024, 0.034, 0.044, 0.054];
        let seq = periods(&pulses, &JitCfg::default());
        // both pairs involving the 0.014 period exceed fac_max 1.3
        assert_eq!(seq.periods.len(), 5);
        assert_eq!(seq.pair_d.len(), 2);
        assert!(seq.pair_d.iter().all(|&d| d < 0.0041));
    }

    #[test]
    fn too_few_pulses_yield_missing_jitter() {
        let seq = periods(&[0.0, 0.01], &JitCfg::default());
        assert!(jitter(&seq).is_nan());
    }

    fn spike_signal(fs: f64, pulses: &[f64], amps: &[f64]) -> Vec<f64> {
        let n = ((pulses.last().unwrap() + 0.02) * fs) as usize;
        let mut x = vec![0.0; n];
        for (p, a) in pulses.iter().zip(amps) {
            let i = (p * fs).round() as usize + 3;
            if i < n {
                x[i] = *a;
            }
        }
        x
    }

    #[test]
    fn constant_amplitudes_have_zero_shimmer() {
        let fs = 16000.0;
        let pulses = pulse_train(0.01, 30);
        let x = spike_signal(fs, &pulses, &vec![0.8; 30]);
        let seq = periods(&pulses, &JitCfg::default());
        let (shim, _) = shimmer(&x, fs, &pulses, &seq);
        assert_abs_diff_eq!(shim, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn alternating_amplitudes_give_point_two() {
        let fs = 16000.0;
        let pulses = pulse_train(0.01, 41);
        let amps: Vec<f64> = (0..41).map(|i| if i % 2 == 0 { 0.9 } else { 1.1 }).collect();
        let x = spike_signal(fs, &pulses, &amps);
        let seq = periods(&pulses, &JitCfg::default());
        let (shim, _) = shimmer(&x, fs, &pulses, &seq);
        assert_abs_diff_eq!(shim, 0.2, epsilon = 1e-6);
    }

    #[test]
    fn growing_amplitudes_match_arithmetic() {
        let fs = 16000.0;
        let pulses = pulse_train(0.01, 11);
        let amps: Vec<f64> = (0..11).map(|i| 1.0 + 0.1 * i as f64).collect();
        let x = spike_signal(fs, &pulses, &amps);
        let seq = periods(&pulses, &JitCfg::default());
        let (shim, _) = shimmer(&x, fs, &pulses, &seq);
        let mean_a = stats::mean(&amps[..10]);
        assert_abs_diff_eq!(shim, 0.1 / mean_a, epsilon = 1e-9);
    }

    #[test]
    fn silent_signal_has_no_shimmer() {
        let fs = 16000.0;
        let pulses = pulse_train(0.01, 10);
        let x = vec![0.0; 4000];
        let seq = periods(&pulses, &JitCfg::default());
        let (shim, _) = shimmer(&x, fs, &pulses, &seq);
        assert!(shim.is_nan());
    }

    #[test]
    fn time_course_fits_polynomials() {
        let t: Vec<f64> = (0..21).map(|i| i as f64 * 0.01).collect();
        let flat = time_course(&[0.3; 21], &t);
        assert_abs_diff_eq!(flat[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(flat[3], 0.3, epsilon = 1e-9);

        let tn: Vec<f64> = (0..21).map(|i| -1.0 + i as f64 / 10.0).collect();
        let cubic: Vec<f64> = tn.iter().map(|v| v.powi(3)).collect();
        let c = time_course(&cubic, &t);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-9);

        let falling: Vec<f64> = (0..21).map(|i| 1.0 - 0.04 * i as f64).collect();
        let cf = time_course(&falling, &t);
        assert!(cf[2] < 0.0, "linear coefficient {}", cf[2]);

        assert!(time_course(&[1.0, 2.0, 3.0], &[0.0, 0.1, 0.2])[0].is_nan());
    }

    #[test]
    fn jitter_is_invariant_to_time_scaling() {
        let mut pulses = vec![0.0];
        for i in 0..30 {
            pulses.push(pulses.last().unwrap() + if i % 2 == 0 { 0.008 } else { 0.010 });
        }
        let scaled: Vec<f64> = pulses.iter().map(|p| p * 1.5).collect();
        let cfg = JitCfg::default();
        let cfg2 = JitCfg { t_min: cfg.t_min * 1.5, t_max: cfg.t_max * 1.5, ..cfg.clone() };
        let j1 = jitter(&periods(&pulses, &cfg));
        let j2 = jitter(&periods(&scaled, &cfg2));
        assert_abs_diff_eq!(j1, j2, epsilon = 1e-9);
    }

    #[test]
    fn full_feature_set_on_a_clean_train() {
        let fs = 16000.0;
        let pulses = pulse_train(0.01, 60);
        let x = spike_signal(fs, &pulses, &vec![1.0; 60]);
        let vf = voice_features(&x, fs, &pulses, &JitCfg::default());
        assert_abs_diff_eq!(vf.jit, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vf.shim, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vf.jit_c[3], 0.0, epsilon = 1e-9);
    }
}
