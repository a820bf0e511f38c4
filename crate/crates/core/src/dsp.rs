//! Shared numeric kernels: window functions, zero-phase Butterworth filtering,
//! RMS energy contours, orthonormal DCT, and least-squares polynomial fits.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Butterworth pass-band type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterType {
    Low,
    High,
    Band,
    None,
}

impl std::str::FromStr for FilterType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(FilterType::Low),
            "high" => Ok(FilterType::High),
            "band" => Ok(FilterType::Band),
            "none" => Ok(FilterType::None),
            other => Err(Error::Config(format!("unknown filter type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterSpec {
    pub btype: FilterType,
    /// Cutoff frequencies in Hz: one for low/high, two ascending for band.
    pub f: Vec<f64>,
    pub ord: usize,
}

impl FilterSpec {
    pub fn low(f: f64, ord: usize) -> Self {
        FilterSpec { btype: FilterType::Low, f: vec![f], ord }
    }
    pub fn high(f: f64, ord: usize) -> Self {
        FilterSpec { btype: FilterType::High, f: vec![f], ord }
    }
    pub fn band(f_lo: f64, f_hi: f64, ord: usize) -> Self {
        FilterSpec { btype: FilterType::Band, f: vec![f_lo, f_hi], ord }
    }
    pub fn none() -> Self {
        FilterSpec { btype: FilterType::None, f: vec![], ord: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hamming,
    Hanning,
    Kaiser,
    Rectangular,
    Blackman,
}

impl std::str::FromStr for WindowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(WindowKind::Hamming),
            "hanning" | "hann" => Ok(WindowKind::Hanning),
            "kaiser" => Ok(WindowKind::Kaiser),
            "rectangular" | "rect" | "boxcar" => Ok(WindowKind::Rectangular),
            "blackman" => Ok(WindowKind::Blackman),
            other => Err(Error::Config(format!("unsupported window type '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowSpec {
    pub wintyp: WindowKind,
    /// Shape parameter; only Kaiser uses it (beta, default 1).
    pub winparam: Option<f64>,
}

impl WindowSpec {
    pub fn new(wintyp: WindowKind, winparam: Option<f64>) -> Self {
        WindowSpec { wintyp, winparam }
    }
    pub fn rectangular() -> Self {
        WindowSpec { wintyp: WindowKind::Rectangular, winparam: None }
    }
}

/// Symmetric window of length `n`.
pub fn window(spec: &WindowSpec, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = i as f64;
            match spec.wintyp {
                WindowKind::Rectangular => 1.0,
                WindowKind::Hamming => 0.54 - 0.46 * (2.0 * PI * x / m).cos(),
                WindowKind::Hanning => 0.5 - 0.5 * (2.0 * PI * x / m).cos(),
                WindowKind::Blackman => {
                    0.42 - 0.5 * (2.0 * PI * x / m).cos() + 0.08 * (4.0 * PI * x / m).cos()
                }
                WindowKind::Kaiser => {
                    let beta = spec.winparam.unwrap_or(1.0);
                    let r = 2.0 * x / m - 1.0;
                    bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / bessel_i0(beta)
                }
            }
        })
        .collect()
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for m in 1..200 {
        term *= (half / m as f64) * (half / m as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// Butterworth design and zero-phase filtering
// ---------------------------------------------------------------------------

/// Zero-phase (forward-backward) Butterworth filter.
/// `btype=none` passes the signal through unchanged.
pub fn butter_filter(x: &[f64], fs: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    if spec.btype == FilterType::None {
        return Ok(x.to_vec());
    }
    let (b, a) = butter_ba(spec.ord, fs, spec.btype, &spec.f)?;
    Ok(filtfilt(&b, &a, x))
}

/// Digital Butterworth transfer-function coefficients (b, a), a[0] == 1.
pub fn butter_ba(ord: usize, fs: f64, btype: FilterType, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if ord == 0 {
        return Err(Error::Numeric("filter order must be >= 1".into()));
    }
    let nyq = fs / 2.0;
    let expect = if btype == FilterType::Band { 2 } else { 1 };
    if f.len() != expect {
        return Err(Error::Numeric(format!(
            "filter type needs {expect} cutoff(s), got {}",
            f.len()
        )));
    }
    for &fc in f {
        if fc <= 0.0 || fc >= nyq {
            return Err(Error::Numeric(format!(
                "cutoff {fc} Hz outside (0, Nyquist={nyq}) at fs={fs}"
            )));
        }
    }
    if btype == FilterType::Band && f[0] >= f[1] {
        return Err(Error::Numeric("band cutoffs must ascend".into()));
    }

    // analog low-pass prototype: poles on the unit circle, no zeros
    let n = ord as i64;
    let poles: Vec<Complex64> = (0..ord)
        .map(|i| {
            let m = (-n + 1 + 2 * i as i64) as f64;
            -(Complex64::new(0.0, PI * m / (2.0 * n as f64))).exp()
        })
        .collect();
    let zeros: Vec<Complex64> = vec![];
    let gain = 1.0;

    // pre-warped angular cutoffs for the bilinear transform at internal fs=2
    let fs_i = 2.0;
    let warped: Vec<f64> = f
        .iter()
        .map(|fc| 2.0 * fs_i * (PI * (fc / nyq) / fs_i).tan())
        .collect();

    let (z, p, k) = match btype {
        FilterType::Low => lp2lp_zpk(&zeros, &poles, gain, warped[0]),
        FilterType::High => lp2hp_zpk(&zeros, &poles, gain, warped[0]),
        FilterType::Band => {
            let bw = warped[1] - warped[0];
            let wo = (warped[0] * warped[1]).sqrt();
            lp2bp_zpk(&zeros, &poles, gain, wo, bw)
        }
        FilterType::None => unreachable!(),
    };
    let (z, p, k) = bilinear_zpk(&z, &p, k, fs_i);
    let b = poly_from_roots(&z).iter().map(|c| (c * k).re).collect();
    let a = poly_from_roots(&p).iter().map(|c| c.re).collect();
    Ok((b, a))
}

fn lp2lp_zpk(z: &[Complex64], p: &[Complex64], k: f64, wo: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = p.len() - z.len();
    (
        z.iter().map(|v| v * wo).collect(),
        p.iter().map(|v| v * wo).collect(),
        k * wo.powi(degree as i32),
    )
}

fn lp2hp_zpk(z: &[Complex64], p: &[Complex64], k: f64, wo: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = p.len() - z.len();
    let mut z_hp: Vec<Complex64> = z.iter().map(|v| wo / v).collect();
    let p_hp: Vec<Complex64> = p.iter().map(|v| wo / v).collect();
    let num: Complex64 = z.iter().map(|v| -v).product();
    let den: Complex64 = p.iter().map(|v| -v).product();
    z_hp.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    (z_hp, p_hp, k * (num / den).re)
}

fn lp2bp_zpk(z: &[Complex64], p: &[Complex64], k: f64, wo: f64, bw: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let degree = p.len() - z.len();
    let scale = |v: &Complex64| v * (bw / 2.0);
    let split = |v: Complex64| {
        let root = (v * v - wo * wo).sqrt();
        (v + root, v - root)
    };
    let mut z_bp = Vec::with_capacity(2 * z.len() + degree);
    let mut z_hi = Vec::with_capacity(z.len());
    for v in z.iter().map(scale) {
        let (a, b) = split(v);
        z_bp.push(a);
        z_hi.push(b);
    }
    z_bp.extend(z_hi);
    let mut p_bp = Vec::with_capacity(2 * p.len());
    let mut p_hi = Vec::with_capacity(p.len());
    for v in p.iter().map(scale) {
        let (a, b) = split(v);
        p_bp.push(a);
        p_hi.push(b);
    }
    p_bp.extend(p_hi);
    z_bp.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
    (z_bp, p_bp, k * bw.powi(degree as i32))
}

fn bilinear_zpk(z: &[Complex64], p: &[Complex64], k: f64, fs: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let fs2 = Complex64::new(2.0 * fs, 0.0);
    let mut z_d: Vec<Complex64> = z.iter().map(|v| (fs2 + v) / (fs2 - v)).collect();
    let p_d: Vec<Complex64> = p.iter().map(|v| (fs2 + v) / (fs2 - v)).collect();
    let num: Complex64 = z.iter().map(|v| fs2 - v).product();
    let den: Complex64 = p.iter().map(|v| fs2 - v).product();
    z_d.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), p.len() - z.len()));
    (z_d, p_d, k * (num / den).re)
}

/// Monic polynomial coefficients (descending) from roots.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        c.push(Complex64::new(0.0, 0.0));
        for i in (1..c.len()).rev() {
            let prev = c[i - 1];
            c[i] -= r * prev;
        }
    }
    c
}

/// Direct-form II transposed IIR filter with initial conditions.
fn lfilter(b: &[f64], a: &[f64], x: &[f64], zi: &[f64]) -> Vec<f64> {
    let n = b.len().max(a.len());
    let mut bp = b.to_vec();
    let mut ap = a.to_vec();
    bp.resize(n, 0.0);
    ap.resize(n, 0.0);
    let mut z = zi.to_vec();
    z.resize(n - 1, 0.0);
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = bp[0] * xi + z.first().copied().unwrap_or(0.0);
        for j in 0..z.len() {
            let znext = if j + 1 < z.len() { z[j + 1] } else { 0.0 };
            z[j] = bp[j + 1] * xi + znext - ap[j + 1] * yi;
        }
        y.push(yi);
    }
    y
}

/// Steady-state initial conditions for a unit-step input.
fn lfilter_zi(b: &[f64], a: &[f64]) -> Vec<f64> {
    let n = b.len().max(a.len());
    let mut bp = b.to_vec();
    let mut ap = a.to_vec();
    bp.resize(n, 0.0);
    ap.resize(n, 0.0);
    // (I - companion(a)^T) zi = b[1:] - a[1:] * b[0]
    let m = n - 1;
    let mut mat = vec![vec![0.0; m]; m];
    for (i, row) in mat.iter_mut().enumerate() {
        row[0] = ap[i + 1];
        if i + 1 < m {
            row[i + 1] -= 1.0;
        }
        row[i] += 1.0;
    }
    let rhs: Vec<f64> = (0..m).map(|i| bp[i + 1] - ap[i + 1] * bp[0]).collect();
    solve_linear(mat, rhs).expect("singular steady-state system")
}

/// Zero-phase filtering: forward pass, backward pass, with odd-symmetric
/// edge extension and steady-state initial conditions on both passes.
pub fn filtfilt(b: &[f64], a: &[f64], x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return vec![];
    }
    let pad = (3 * b.len().max(a.len())).min(x.len().saturating_sub(1));
    let mut ext = Vec::with_capacity(x.len() + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    let last = *x.last().unwrap();
    for i in 1..=pad {
        ext.push(2.0 * last - x[x.len() - 1 - i]);
    }
    let zi = lfilter_zi(b, a);
    let scaled: Vec<f64> = zi.iter().map(|v| v * ext[0]).collect();
    let mut y = lfilter(b, a, &ext, &scaled);
    y.reverse();
    let scaled: Vec<f64> = zi.iter().map(|v| v * y[0]).collect();
    let mut y = lfilter(b, a, &y, &scaled);
    y.reverse();
    y[pad..y.len() - pad].to_vec()
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Numeric("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(row);
            for (ck, pk) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *ck -= f * pk;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// RMS energy contour
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EnergyContour {
    /// Window center times in seconds, uniform step `sts`.
    pub t: Vec<f64>,
    /// RMS of the window-weighted signal at each step.
    pub e: Vec<f64>,
    pub sts: f64,
}

impl EnergyContour {
    /// Nearest contour index for time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        if self.t.is_empty() {
            return 0;
        }
        ((t / self.sts).round() as usize).min(self.t.len() - 1)
    }
}

/// Windowed RMS energy, stepped at `sts` seconds, edges zero-padded.
pub fn rms_energy(x: &[f64], fs: f64, win: f64, sts: f64, w: &WindowSpec) -> EnergyContour {
    assert!(win > 0.0 && sts > 0.0, "window and step must be positive");
    if x.is_empty() {
        return EnergyContour { t: vec![], e: vec![], sts };
    }
    let mut wl = (win * fs).round() as usize;
    if wl == 0 {
        wl = 1;
    }
    if wl.is_multiple_of(2) {
        wl += 1;
    }
    let weights = window(w, wl);
    let half = wl / 2;
    let t_last = (x.len() - 1) as f64 / fs;
    let n_steps = (t_last / sts).floor() as usize + 1;
    let mut t = Vec::with_capacity(n_steps);
    let mut e = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let tc = k as f64 * sts;
        let c = (tc * fs).round() as isize;
        let mut acc = 0.0;
        for (j, wj) in weights.iter().enumerate() {
            let idx = c + j as isize - half as isize;
            if idx >= 0 && (idx as usize) < x.len() {
                let v = wj * x[idx as usize];
                acc += v * v;
            }
        }
        t.push(tc);
        e.push((acc / wl as f64).sqrt());
    }
    EnergyContour { t, e, sts }
}

// ---------------------------------------------------------------------------
// Orthonormal DCT-II
// ---------------------------------------------------------------------------

/// Orthonormal DCT-II coefficients of `y`.
pub fn dct_transform(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return vec![];
    }
    let nf = n as f64;
    let s0 = (1.0 / nf).sqrt();
    let sk = (2.0 / nf).sqrt();
    (0..n)
        .map(|k| {
            let sum: f64 = y
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            sum * if k == 0 { s0 } else { sk }
        })
        .collect()
}

/// Inverse orthonormal DCT-II. With `keep` given, all other coefficients are
/// zeroed before inversion (band-limited reconstruction).
pub fn idct_transform(c: &[f64], keep: Option<&[usize]>) -> Vec<f64> {
    let n = c.len();
    if n == 0 {
        return vec![];
    }
    let nf = n as f64;
    let s0 = (1.0 / nf).sqrt();
    let sk = (2.0 / nf).sqrt();
    let kept: Vec<(usize, f64)> = match keep {
        Some(idx) => idx.iter().filter(|&&k| k < n).map(|&k| (k, c[k])).collect(),
        None => c.iter().copied().enumerate().collect(),
    };
    (0..n)
        .map(|i| {
            kept.iter()
                .map(|&(k, ck)| {
                    let scale = if k == 0 { s0 } else { sk };
                    scale * ck * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
                })
                .sum()
        })
        .collect()
}

/// Frequency in Hz represented by DCT coefficient `k` for a contour of
/// length `n` sampled at `fs`.
pub fn bin_frequency(k: usize, fs: f64, n: usize) -> f64 {
    k as f64 * fs / (2.0 * n as f64)
}

// ---------------------------------------------------------------------------
// Polynomial least squares
// ---------------------------------------------------------------------------

/// Least-squares polynomial fit; coefficients in descending order of power.
pub fn polyfit(t: &[f64], y: &[f64], ord: usize) -> Result<Vec<f64>> {
    assert_eq!(t.len(), y.len());
    if t.len() < ord + 1 {
        return Err(Error::Numeric(format!(
            "polyfit needs at least {} points, got {}",
            ord + 1,
            t.len()
        )));
    }
    let m = ord + 1;
    // normal equations over power sums
    let mut pow_sums = vec![0.0; 2 * ord + 1];
    for &ti in t {
        let mut p = 1.0;
        for s in pow_sums.iter_mut() {
            *s += p;
            p *= ti;
        }
    }
    let mut ata = vec![vec![0.0; m]; m];
    for (r, row) in ata.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            // descending powers: row r ~ t^(ord-r), col c ~ t^(ord-c)
            *cell = pow_sums[2 * ord - r - c];
        }
    }
    let mut aty = vec![0.0; m];
    for (&ti, &yi) in t.iter().zip(y) {
        let mut p = 1.0;
        for r in (0..m).rev() {
            aty[r] += yi * p;
            p *= ti;
        }
    }
    solve_linear(ata, aty).map_err(|_| Error::Numeric("degenerate polynomial fit (all abscissae equal?)".into()))
}

/// Evaluate a polynomial with descending coefficients at `t`.
pub fn polyval(c: &[f64], t: f64) -> f64 {
    c.iter().fold(0.0, |acc, &ci| acc * t + ci)
}

/// Center row of the Savitzky-Golay least-squares projection matrix for an
/// odd window of length `win` and polynomial order `ord`. Convolving with
/// this kernel smooths the window's midpoint.
pub fn savgol_kernel(win: usize, ord: usize) -> Vec<f64> {
    assert!(win % 2 == 1 && win > ord, "window must be odd and exceed the order");
    let half = (win / 2) as f64;
    let t: Vec<f64> = (0..win).map(|i| i as f64 - half).collect();
    // kernel row k solves the LS fit evaluated at t=0: e_k = sum_j H[c][j]
    // where H = A (A^T A)^{-1} A^T; column j of H at the center equals the
    // weight of sample j. Obtain it by fitting each unit impulse.
    let m = ord + 1;
    let mut ata = vec![vec![0.0; m]; m];
    for &ti in &t {
        let mut pr = 1.0;
        let mut pows = Vec::with_capacity(m);
        for _ in 0..m {
            pows.push(pr);
            pr *= ti;
        }
        for r in 0..m {
            for c in 0..m {
                ata[r][c] += pows[r] * pows[c];
            }
        }
    }
    // solve (A^T A) g = e_0 so that kernel[j] = sum_r g[r] * t_j^r
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let g = solve_linear(ata, rhs).expect("SG normal equations singular");
    t.iter()
        .map(|&ti| {
            let mut pr = 1.0;
            let mut acc = 0.0;
            for &gr in &g {
                acc += gr * pr;
                pr *= ti;
            }
            acc
        })
        .collect()
}

/// Savitzky-Golay smoothing with mirrored edges.
pub fn savgol_smooth(y: &[f64], win: usize, ord: usize) -> Vec<f64> {
    if y.is_empty() {
        return vec![];
    }
    let win = win.min(if y.len() % 2 == 1 { y.len() } else { y.len() - 1 });
    if win <= ord || win < 3 {
        return y.to_vec();
    }
    let k = savgol_kernel(win, ord);
    let half = win / 2;
    let n = y.len() as isize;
    // mirror without repeating the edge sample: index -i -> i, n-1+i -> n-1-i
    let at = |i: isize| -> f64 {
        let j = if i < 0 { -i } else if i >= n { 2 * (n - 1) - i } else { i };
        y[j as usize]
    };
    (0..y.len())
        .map(|c| {
            k.iter()
                .enumerate()
                .map(|(j, &w)| w * at(c as isize + j as isize - half as isize))
                .sum()
        })
        .collect()
}

/// Linear interpolation of `y(x)` at query points `xq`; clamps to the first
/// and last value outside the covered range. `x` must ascend.
pub fn interp_linear(xq: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty());
    xq.iter()
        .map(|&q| {
            if q <= x[0] {
                return y[0];
            }
            if q >= x[x.len() - 1] {
                return y[y.len() - 1];
            }
            let j = match x.binary_search_by(|v| v.partial_cmp(&q).unwrap()) {
                Ok(i) => return y[i],
                Err(i) => i,
            };
            let f = (q - x[j - 1]) / (x[j] - x[j - 1]);
            y[j - 1] + f * (y[j] - y[j - 1])
        })
        .collect()
}
