//! Speech chunking and syllable detection on a synthesized signal.
//!
//! Builds 3 s of "speech" (two noise phrases separated by a pause, with
//! vowel-like bursts inside), then runs pause-based chunking and
//! energy-based syllable nucleus detection and prints the resulting tiers.

use copasul::augment::{detect_chunks, detect_syllables};
use copasul::config::{AugChunkCfg, AugSylCfg};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = 16000.0;

fn add_burst(x: &mut [f64], t_c: f64, dur: f64) {
    let n0 = ((t_c - dur / 2.0) * FS) as usize;
    let n1 = (((t_c + dur / 2.0) * FS) as usize).min(x.len());
    for (i, v) in x.iter_mut().enumerate().take(n1).skip(n0) {
        let t = i as f64 / FS;
        let u = (t - (t_c - dur / 2.0)) / dur;
        let env = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * u).cos());
        *v += env
            * (0.6 * (2.0 * std::f64::consts::PI * 300.0 * t).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * 620.0 * t).sin());
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = vec![0.0; (3.0 * FS) as usize];

    // phrase 1: 0.2-1.3 s, three syllables; phrase 2: 1.9-2.8 s, two
    let mut noise = |x: &mut [f64], a: f64, b: f64| {
        for v in &mut x[(a * FS) as usize..(b * FS) as usize] {
            *v += rng.random_range(-0.03..0.03);
        }
    };
    noise(&mut x, 0.2, 1.3);
    noise(&mut x, 1.9, 2.8);
    for t in [0.4, 0.75, 1.1, 2.1, 2.55] {
        add_burst(&mut x, t, 0.14);
    }

    let chunk_tier = detect_chunks(&x, FS, &AugChunkCfg::default(), "<P>");
    println!("chunk tier:");
    for it in &chunk_tier.items {
        println!("  {:>6.3} .. {:>6.3}  {}", it.t_start, it.t_end, it.label);
    }

    let chunks: Vec<(f64, f64)> = chunk_tier
        .items
        .iter()
        .filter(|i| i.label != "<P>")
        .map(|i| (i.t_start, i.t_end))
        .collect();
    let (nuclei, bounds) = detect_syllables(&x, FS, &chunks, &AugSylCfg::default());
    println!("syllable nuclei:");
    for it in &nuclei.items {
        println!("  {:>6.3}", it.t_start);
    }
    println!("syllable boundaries:");
    for it in &bounds.items {
        println!("  {:>6.3}", it.t_start);
    }
}
