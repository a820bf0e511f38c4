//! Signal and table I/O: WAV audio, whitespace-separated f0 tables on a
//! 100 Hz grid, pulse time-stamp tables, and file-name based grouping.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const F0_STEP: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl AudioSignal {
    pub fn duration(&self) -> f64 {
        match self.channels.first() {
            Some(c) => c.len() as f64 / self.sample_rate,
            None => 0.0,
        }
    }
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
    /// Channel by index, clamped to the last available one so that mono
    /// files serve any requested channel.
    pub fn channel(&self, i: usize) -> &[f64] {
        let i = i.min(self.channels.len().saturating_sub(1));
        &self.channels[i]
    }
}

/// Raw f0 per channel on the common 0.01 s grid; 0 marks unvoiced samples.
#[derive(Debug, Clone)]
pub struct F0Track {
    pub t: Vec<f64>,
    pub y_hz: Vec<Vec<f64>>,
}

impl F0Track {
    pub fn n_channels(&self) -> usize {
        self.y_hz.len()
    }
    pub fn channel(&self, i: usize) -> &[f64] {
        let i = i.min(self.y_hz.len().saturating_sub(1));
        &self.y_hz[i]
    }
}

#[derive(Debug, Clone, Default)]
pub struct PulseTrack {
    /// Ascending pulse stamps in seconds, one list per channel.
    pub channels: Vec<Vec<f64>>,
}

impl PulseTrack {
    pub fn channel(&self, i: usize) -> &[f64] {
        static EMPTY: Vec<f64> = Vec::new();
        if self.channels.is_empty() {
            return &EMPTY;
        }
        let i = i.min(self.channels.len() - 1);
        &self.channels[i]
    }
}

/// Grouping label -> value pairs derived from a file name stem.
pub type FileGroup = BTreeMap<String, String>;

// ---------------------------------------------------------------------------
// WAV
// ---------------------------------------------------------------------------

pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let mut reader = hound::WavReader::open(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::Parse(format!("{}: zero channels", path.display())));
    }
    let mut channels = vec![Vec::new(); n_ch];
    match spec.sample_format {
        hound::SampleFormat::Float => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                let s = s.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                channels[i % n_ch].push(s as f64);
            }
        }
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            for (i, s) in reader.samples::<i32>().enumerate() {
                let s = s.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                channels[i % n_ch].push(s as f64 / scale);
            }
        }
    }
    Ok(AudioSignal { sample_rate: spec.sample_rate as f64, channels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn write_wav(path: &Path, sig: &AudioSignal, enc: WavEncoding) -> Result<()> {
    let spec = hound::WavSpec {
        channels: sig.channels.len() as u16,
        sample_rate: sig.sample_rate as u32,
        bits_per_sample: match enc {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match enc {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut w = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let n = sig.channels.iter().map(|c| c.len()).max().unwrap_or(0);
    for i in 0..n {
        for ch in &sig.channels {
            let v = ch.get(i).copied().unwrap_or(0.0);
            match enc {
                WavEncoding::Pcm16 => {
                    let q = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                    w.write_sample(q).map_err(|e| Error::Parse(e.to_string()))?;
                }
                WavEncoding::Float32 => {
                    w.write_sample(v as f32).map_err(|e| Error::Parse(e.to_string()))?;
                }
            }
        }
    }
    w.finalize().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Numeric tables
// ---------------------------------------------------------------------------

fn parse_table(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = vec![];
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|w| {
                w.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: non-numeric field '{w}'", ln + 1)))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "row {}: {} columns, expected {}",
                    ln + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a time + per-channel f0 table and snaps it to the 0.01 s grid by
/// nearest-sample lookup; grid points farther than half the input step from
/// any sample stay 0 (unvoiced). Interpolation is deliberately avoided here
/// so unvoiced stretches are not smeared before preprocessing.
pub fn read_f0_table(text: &str) -> Result<F0Track> {
    let rows = parse_table(text)?;
    if rows.is_empty() {
        return Ok(F0Track { t: vec![], y_hz: vec![] });
    }
    if rows[0].len() < 2 {
        return Err(Error::Parse("f0 table needs a time column plus >= 1 f0 column".into()));
    }
    let n_ch = rows[0].len() - 1;
    let t_in: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    for w in t_in.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Parse(format!(
                "f0 table times not increasing at t={}",
                w[1]
            )));
        }
    }
    let in_step = if t_in.len() > 1 {
        (t_in[t_in.len() - 1] - t_in[0]) / (t_in.len() - 1) as f64
    } else {
        F0_STEP
    };
    let tol = (in_step / 2.0) + 1e-9;
    let t_last = *t_in.last().unwrap();
    let n_out = (t_last / F0_STEP).round() as usize + 1;
    let mut t = Vec::with_capacity(n_out);
    let mut y_hz = vec![Vec::with_capacity(n_out); n_ch];
    let mut j = 0usize;
    for k in 0..n_out {
        let g = k as f64 * F0_STEP;
        while j + 1 < t_in.len() && (t_in[j + 1] - g).abs() <= (t_in[j] - g).abs() {
            j += 1;
        }
        t.push(g);
        for (c, ych) in y_hz.iter_mut().enumerate() {
            let v = if (t_in[j] - g).abs() <= tol { rows[j][c + 1] } else { 0.0 };
            ych.push(v);
        }
    }
    Ok(F0Track { t, y_hz })
}

/// Reads per-channel pulse stamps; −1 padding entries are dropped.
pub fn read_pulse_table(text: &str) -> Result<PulseTrack> {
    let rows = parse_table(text)?;
    if rows.is_empty() {
        return Ok(PulseTrack::default());
    }
    let n_ch = rows[0].len();
    let mut channels = vec![Vec::new(); n_ch];
    for row in &rows {
        for (c, &v) in row.iter().enumerate() {
            if v != -1.0 {
                channels[c].push(v);
            }
        }
    }
    for (c, ch) in channels.iter().enumerate() {
        for w in ch.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Parse(format!(
                    "pulse channel {}: stamps not increasing at {}",
                    c + 1,
                    w[1]
                )));
            }
        }
        if ch.first().is_some_and(|&v| v < 0.0) {
            return Err(Error::Parse(format!("pulse channel {}: negative stamp", c + 1)));
        }
    }
    Ok(PulseTrack { channels })
}

// ---------------------------------------------------------------------------
// File grouping and corpus listing
// ---------------------------------------------------------------------------

/// Splits a file stem by the separator pattern and aligns the parts with the
/// grouping labels; parts whose label is empty are dropped.
pub fn derive_grouping(stem: &str, sep: &str, labels: &[String]) -> Result<FileGroup> {
    let mut out = FileGroup::new();
    if labels.is_empty() {
        return Ok(out);
    }
    let re = regex::Regex::new(sep)
        .map_err(|e| Error::Config(format!("bad grouping separator '{sep}': {e}")))?;
    let parts: Vec<&str> = re.split(stem).collect();
    if parts.len() < labels.iter().filter(|l| !l.is_empty()).count() {
        log::warn!(
            "stem '{stem}' splits into {} parts, fewer than the {} grouping labels",
            parts.len(),
            labels.len()
        );
    }
    for (i, lab) in labels.iter().enumerate() {
        if lab.is_empty() {
            continue;
        }
        out.insert(lab.clone(), parts.get(i).copied().unwrap_or("").to_string());
    }
    Ok(out)
}

/// Files with the given extension in `dir`, sorted by name. Corresponding
/// audio/f0/annotation files across directories are matched by this order.
pub fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let ext_norm = ext.trim_start_matches('.').to_ascii_lowercase();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = vec![];
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file()
            && p.extension()
                .map(|e| e.to_string_lossy().to_ascii_lowercase() == ext_norm)
                .unwrap_or(false)
        {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// File name without directory or extension.
pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Index range of 10 ms grid samples falling inside [t_on, t_off], clamped
/// to a contour of length `n`. Both endpoints are inclusive.
pub fn grid_range(t_on: f64, t_off: f64, n: usize) -> std::ops::Range<usize> {
    const EPS: f64 = 1e-9;
    let lo = (((t_on - EPS) / F0_STEP).ceil().max(0.0) as usize).min(n);
    let hi_incl = ((t_off + EPS) / F0_STEP).floor().max(-1.0) as isize;
    let hi = if hi_incl < 0 { 0 } else { ((hi_incl as usize) + 1).min(n) };
    lo..hi.max(lo)
}

/// Grid time of sample `i`.
pub fn grid_time(i: usize) -> f64 {
    i as f64 * F0_STEP
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_ranges_are_inclusive_and_clamped() {
        assert_eq!(grid_range(1.0, 2.0, 500), 100..201);
        assert_eq!(grid_range(0.0, 0.02, 500), 0..3);
        assert_eq!(grid_range(4.99, 7.0, 500), 499..500);
        assert_eq!(grid_range(9.0, 10.0, 500), 500..500);
        assert_eq!(grid_range(0.005, 0.015, 500), 1..2);
    }

    #[test]
    fn f0_table_mono() {
        let f = read_f0_table("0.00 120\n0.01 0\n0.02 121\n").unwrap();
        assert_eq!(f.n_channels(), 1);
        assert_eq!(f.y_hz[0], vec![120.0, 0.0, 121.0]);
        assert_eq!(f.t, vec![0.0, 0.01, 0.02]);
    }

    #[test]
    fn f0_table_stereo_has_two_channels() {
        let f = read_f0_table("0.00 120 220\n0.01 119 0\n").unwrap();
        assert_eq!(f.n_channels(), 2);
        assert_eq!(f.y_hz[1], vec![220.0, 0.0]);
    }

    #[test]
    fn f0_table_200hz_keeps_every_second_row() {
        // ramp at 0.005 s steps; grid keeps rows 0, 2, 4, ...
        let mut s = String::new();
        for i in 0..11 {
            s.push_str(&format!("{} {}\n", i as f64 * 0.005, 100 + i));
        }
        let f = read_f0_table(&s).unwrap();
        assert_eq!(f.t.len(), 6);
        assert_eq!(f.y_hz[0], vec![100.0, 102.0, 104.0, 106.0, 108.0, 110.0]);
        for (k, &tk) in f.t.iter().enumerate() {
            assert_abs_diff_eq!(tk, k as f64 * 0.01, epsilon = 1e-12);
        }
    }

    #[test]
    fn f0_table_zeros_survive_resampling() {
        let mut s = String::new();
        for i in 0..21 {
            let v = if (5..=9).contains(&i) { 0.0 } else { 140.0 };
            s.push_str(&format!("{} {}\n", i as f64 * 0.005, v));
        }
        let f = read_f0_table(&s).unwrap();
        assert!(f.y_hz[0].iter().filter(|&&v| v == 0.0).count() >= 2);
        assert!(f.y_hz[0].iter().all(|&v| v == 0.0 || v == 140.0));
    }

    #[test]
    fn f0_table_ragged_row_errors_with_number() {
        let err = read_f0_table("0.00 120\n0.01 120 220\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "got: {err}");
    }

    #[test]
    fn f0_table_single_column_rejected() {
        assert!(read_f0_table("0.0\n0.01\n").is_err());
    }

    #[test]
    fn pulse_padding_stripped() {
        let p = read_pulse_table("0.1 0.1\n0.2 -1\n").unwrap();
        assert_eq!(p.channels[0], vec![0.1, 0.2]);
        assert_eq!(p.channels[1], vec![0.1]);
    }

    #[test]
    fn pulse_empty_and_mono() {
        assert_eq!(read_pulse_table("").unwrap().channels.len(), 0);
        let p = read_pulse_table("0.1\n0.2\n0.35\n").unwrap();
        assert_eq!(p.channels.len(), 1);
        assert_eq!(p.channels[0].len(), 3);
    }

    #[test]
    fn pulse_non_monotone_errors_with_channel() {
        let err = read_pulse_table("0.2 0.1\n0.1 0.2\n").unwrap_err().to_string();
        assert!(err.contains("channel 1"), "got: {err}");
    }

    #[test]
    fn grouping_drops_empty_labels() {
        let labels = vec!["spk".into(), "".into(), "stim".into()];
        let g = derive_grouping("a_b_2", "_", &labels).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g["spk"], "a");
        assert_eq!(g["stim"], "2");
    }

    #[test]
    fn grouping_single_label() {
        let g = derive_grouping("x", "_", &["spk".to_string()]).unwrap();
        assert_eq!(g["spk"], "x");
    }

    #[test]
    fn grouping_with_regex_separator() {
        let labels = vec!["p".into(), "q".into()];
        let g = derive_grouping("a.b", r"(_|\.)", &labels).unwrap();
        assert_eq!(g["p"], "a");
        assert_eq!(g["q"], "b");
    }

    #[test]
    fn grouping_missing_parts_are_empty() {
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let g = derive_grouping("x_y", "_", &labels).unwrap();
        assert_eq!(g["c"], "");
    }

    #[test]
    fn wav_round_trip_pcm16_and_float() {
        let dir = tempfile::tempdir().unwrap();
        let fs = 16000.0;
        let n = 1600;
        let ch0: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / fs).sin() * 0.5).collect();
        let ch1: Vec<f64> = ch0.iter().map(|v| -v).collect();
        let sig = AudioSignal { sample_rate: fs, channels: vec![ch0.clone(), ch1] };
        for (enc, tol) in [(WavEncoding::Pcm16, 1e-4), (WavEncoding::Float32, 1e-7)] {
            let p = dir.path().join(format!("t_{tol}.wav"));
            write_wav(&p, &sig, enc).unwrap();
            let back = read_wav(&p).unwrap();
            assert_eq!(back.n_channels(), 2);
            assert_eq!(back.channels[0].len(), n);
            assert_abs_diff_eq!(back.sample_rate, fs, epsilon = 0.0);
            for (a, b) in ch0.iter().zip(&back.channels[0]) {
                assert!((a - b).abs() < tol);
            }
        }
    }

    #[test]
    fn list_files_sorted_by_name() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.f0", "a.f0", "c.txt", "a2.f0"] {
            std::fs::write(dir.path().join(name), "0 1\n").unwrap();
        }
        let files = list_files(dir.path(), "f0").unwrap();
        let names: Vec<String> = files.iter().map(|p| stem(p)).collect();
        assert_eq!(names, vec!["a", "a2", "b"]);
    }
}
