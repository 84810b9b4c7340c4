//! Periodic signal frames and exact spectral operations.
//!
//! All signals live on one period of length `N*T` seconds. Discrete-time
//! frames hold one complex sample per symbol interval `T`; continuous time is
//! represented on a uniform grid of step `T/R` (`R` samples per symbol), so a
//! CT frame holds `N*R` samples. Periodicity makes circular convolution and
//! ideal (infinite-memory) filters exact on a single period.
//!
//! Spectral convention: the forward transform is unnormalized and the inverse
//! carries `1/len`, so `||transform(x)||^2 = len * ||x||^2`. Frequency bins
//! map to the signed half-open range `(-F/2, F/2]`: for a length-`L` spectrum
//! the bin at index `L/2` (even `L`) represents `+F/2`, never `-F/2`. Band
//! selections inherit the same convention: a band `(f_lo, f_hi]` zeroes bins
//! landing exactly on `f_lo` and passes bins landing exactly on `f_hi`.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::FftPlanner;
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Tolerance (in grid units) for deciding that a time or frequency value
/// lies exactly on the discretization grid.
const GRID_TOL: f64 = 1e-6;

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

fn fft_forward(buf: &mut [Complex64]) {
    let fft = PLANNER.lock().unwrap().plan_fft_forward(buf.len());
    fft.process(buf);
}

fn fft_inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.lock().unwrap().plan_fft_inverse(buf.len());
    fft.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Parameters of the simulated chain: symbol interval, carrier ratio,
/// oversampling factor and frame length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    t: f64,
    m: u32,
    r: u32,
    n: usize,
}

impl ChainParams {
    /// Creates validated parameters.
    ///
    /// `t` is the symbol interval in seconds, `m` the carrier-to-symbol-rate
    /// ratio (carrier `f_c = m/t`), `r` the number of grid samples per symbol
    /// interval, `n` the frame length in symbols. Requires `r >= 4*m` so the
    /// grid resolves the carrier with at least four samples per cycle, and
    /// `n >= 2`.
    pub fn new(t: f64, m: u32, r: u32, n: usize) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParams(format!("symbol interval T = {t}")));
        }
        if m == 0 {
            return Err(Error::InvalidParams("carrier ratio M must be positive".into()));
        }
        if r < 4 * m {
            return Err(Error::InvalidParams(format!(
                "oversampling R = {r} must be at least 4*M = {}",
                4 * m
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParams(format!("frame length N = {n} must be >= 2")));
        }
        Ok(Self { t, m, r, n })
    }

    /// Symbol interval `T` in seconds.
    pub fn symbol_interval(&self) -> f64 {
        self.t
    }

    /// Carrier-to-symbol-rate ratio `M`.
    pub fn carrier_ratio(&self) -> u32 {
        self.m
    }

    /// Oversampling factor `R` (grid samples per symbol interval).
    pub fn oversampling(&self) -> u32 {
        self.r
    }

    /// Frame length `N` in symbols.
    pub fn frame_len(&self) -> usize {
        self.n
    }

    /// Carrier frequency `f_c = M/T` in Hz.
    pub fn carrier_hz(&self) -> f64 {
        self.m as f64 / self.t
    }

    /// Symbol-rate Nyquist frequency `f_N = 0.5/T` in Hz.
    pub fn nyquist_hz(&self) -> f64 {
        0.5 / self.t
    }

    /// Grid step `T/R` in seconds.
    pub fn grid_step(&self) -> f64 {
        self.t / self.r as f64
    }

    /// Number of grid samples in one frame period, `N*R`.
    pub fn ct_len(&self) -> usize {
        self.n * self.r as usize
    }

    /// Frame period `N*T` in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.t
    }

    /// Frequency resolution of the frame, `1/(N*T)` in Hz.
    pub fn freq_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    /// Nyquist frequency of the CT grid, `R/(2T)` in Hz.
    pub fn grid_nyquist_hz(&self) -> f64 {
        self.r as f64 / (2.0 * self.t)
    }

    /// Converts a time offset in seconds to a (signed) number of grid steps.
    /// Errors unless the offset is an integer multiple of `T/R`.
    pub fn grid_index(&self, seconds: f64) -> Result<i64> {
        let x = seconds / self.grid_step();
        let k = x.round();
        if (x - k).abs() > GRID_TOL {
            return Err(Error::OffGridDelay(seconds));
        }
        Ok(k as i64)
    }

    /// Converts a frequency in Hz to a (signed) number of frequency bins of
    /// width `1/(N*T)`. Errors unless the frequency lies on a bin.
    pub fn freq_bin(&self, hz: f64) -> Result<i64> {
        let x = hz * self.frame_duration();
        let k = x.round();
        if (x - k).abs() > GRID_TOL {
            return Err(Error::OffGridFrequency(hz));
        }
        Ok(k as i64)
    }
}

/// Which sampling domain a frame or spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Symbol-rate frame of length `N`.
    Dt,
    /// Oversampled grid frame of length `N*R`.
    Ct,
}

/// Discrete-time frame: one complex sample per symbol, length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtFrame {
    samples: Vec<Complex64>,
    params: ChainParams,
}

/// Continuous-time frame on the grid of step `T/R`, length `N*R`.
/// Real signals are stored with zero imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CtFrame {
    samples: Vec<Complex64>,
    params: ChainParams,
}

/// Unnormalized spectrum of a frame, same length as the originating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumFrame {
    bins: Vec<Complex64>,
    params: ChainParams,
    kind: FrameKind,
}

/// Maps a bin index of a length-`len` spectrum to its signed position in
/// `(-len/2, len/2]`.
pub(crate) fn signed_bin(idx: usize, len: usize) -> i64 {
    if 2 * idx <= len {
        idx as i64
    } else {
        idx as i64 - len as i64
    }
}

impl DtFrame {
    /// Wraps samples into a frame; the length must equal `params.frame_len()`.
    pub fn new(params: ChainParams, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != params.frame_len() {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: params.frame_len(),
            });
        }
        Ok(Self { samples, params })
    }

    /// All-zero frame.
    pub fn zeros(params: ChainParams) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); params.frame_len()],
            params,
        }
    }

    /// Builds a frame from a function of the symbol index.
    pub fn from_fn(params: ChainParams, f: impl FnMut(usize) -> Complex64) -> Self {
        Self {
            samples: (0..params.frame_len()).map(f).collect(),
            params,
        }
    }

    pub fn params(&self) -> ChainParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Sample at a circular (wrapping) symbol index.
    pub fn cyclic(&self, idx: i64) -> Complex64 {
        let n = self.samples.len() as i64;
        self.samples[idx.rem_euclid(n) as usize]
    }

    /// Frame circularly shifted right by `symbols` (delay for positive values).
    pub fn shifted(&self, symbols: i64) -> Self {
        let n = self.samples.len() as i64;
        Self::from_fn(self.params, |i| self.samples[(i as i64 - symbols).rem_euclid(n) as usize])
    }

    /// Real parts of the symbols (in-phase track).
    pub fn re(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    /// Imaginary parts of the symbols (quadrature track).
    pub fn im(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.im).collect()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Unnormalized forward transform.
    pub fn transform(&self) -> SpectrumFrame {
        let mut bins = self.samples.clone();
        fft_forward(&mut bins);
        SpectrumFrame {
            bins,
            params: self.params,
            kind: FrameKind::Dt,
        }
    }
}

impl CtFrame {
    /// Wraps samples into a frame; the length must equal `params.ct_len()`.
    pub fn new(params: ChainParams, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != params.ct_len() {
            return Err(Error::LengthMismatch {
                got: samples.len(),
                expected: params.ct_len(),
            });
        }
        Ok(Self { samples, params })
    }

    /// All-zero frame.
    pub fn zeros(params: ChainParams) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); params.ct_len()],
            params,
        }
    }

    /// Builds a frame from a function of the grid index (time `g*T/R`).
    pub fn from_fn(params: ChainParams, f: impl FnMut(usize) -> Complex64) -> Self {
        Self {
            samples: (0..params.ct_len()).map(f).collect(),
            params,
        }
    }

    /// Builds a real frame from a function of time in seconds.
    pub fn from_real_fn(params: ChainParams, mut f: impl FnMut(f64) -> f64) -> Self {
        let h = params.grid_step();
        Self::from_fn(params, |g| Complex64::new(f(g as f64 * h), 0.0))
    }

    pub fn params(&self) -> ChainParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Sum of squared magnitudes over the grid (no grid-step weighting).
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// True when the imaginary content is negligible relative to the frame
    /// magnitude (both exactly zero counts as real).
    pub fn is_effectively_real(&self) -> bool {
        let im_max = self.samples.iter().map(|s| s.im.abs()).fold(0.0, f64::max);
        let re_max = self.samples.iter().map(|s| s.re.abs()).fold(0.0, f64::max);
        im_max <= 1e-9 * re_max.max(1e-300)
    }

    /// Drops any residual imaginary round-off, keeping the real track.
    pub fn into_real(mut self) -> Self {
        for s in self.samples.iter_mut() {
            s.im = 0.0;
        }
        self
    }

    /// Unnormalized forward transform.
    pub fn transform(&self) -> SpectrumFrame {
        let mut bins = self.samples.clone();
        fft_forward(&mut bins);
        SpectrumFrame {
            bins,
            params: self.params,
            kind: FrameKind::Ct,
        }
    }
}

impl SpectrumFrame {
    pub fn params(&self) -> ChainParams {
        self.params
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    /// Signed frequency of a bin in Hz: bin spacing is `1/(N*T)` for both
    /// frame kinds, with indices mapped to `(-len/2, len/2]` bins.
    pub fn frequency_hz(&self, idx: usize) -> f64 {
        signed_bin(idx, self.bins.len()) as f64 * self.params.freq_resolution()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Inverse transform back to a DT frame (scales by `1/len`).
    pub fn inverse_dt(&self) -> Result<DtFrame> {
        if self.kind != FrameKind::Dt {
            return Err(Error::SpectrumKindMismatch { expected: "discrete-time" });
        }
        let mut samples = self.bins.clone();
        fft_inverse(&mut samples);
        DtFrame::new(self.params, samples)
    }

    /// Inverse transform back to a CT frame (scales by `1/len`).
    pub fn inverse_ct(&self) -> Result<CtFrame> {
        if self.kind != FrameKind::Ct {
            return Err(Error::SpectrumKindMismatch { expected: "continuous-time" });
        }
        let mut samples = self.bins.clone();
        fft_inverse(&mut samples);
        CtFrame::new(self.params, samples)
    }

    /// Applies the half-open magnitude band `(f_lo, f_hi]`: bins with
    /// `f_lo < |f| <= f_hi` are scaled by `gain`, all others zeroed. Bins
    /// landing exactly on `f_lo` are zeroed; bins exactly on `f_hi` pass.
    /// Idempotent for `gain = 1`.
    pub(crate) fn apply_band_mask(&mut self, f_lo: f64, f_hi: f64, gain: f64) {
        let len = self.bins.len();
        let res = self.params.freq_resolution();
        let lo = f_lo / res;
        let hi = f_hi / res;
        for (idx, bin) in self.bins.iter_mut().enumerate() {
            let a = signed_bin(idx, len).unsigned_abs() as f64;
            let on_lo = (a - lo).abs() <= GRID_TOL;
            let on_hi = (a - hi).abs() <= GRID_TOL;
            let pass = if on_lo {
                false
            } else if on_hi {
                true
            } else {
                a > lo && a < hi
            };
            if pass {
                *bin *= gain;
            } else {
                *bin = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Applies the signed half-open band `(-f_hi, f_hi]` (DC included):
    /// the bin exactly at `+f_hi` passes, the one at `-f_hi` is zeroed.
    pub(crate) fn apply_lowpass_mask(&mut self, f_hi: f64, gain: f64) {
        let len = self.bins.len();
        let res = self.params.freq_resolution();
        let hi = f_hi / res;
        for (idx, bin) in self.bins.iter_mut().enumerate() {
            let k = signed_bin(idx, len) as f64;
            let on_pos = (k - hi).abs() <= GRID_TOL;
            let on_neg = (k + hi).abs() <= GRID_TOL;
            let pass = if on_neg {
                false
            } else if on_pos {
                true
            } else {
                k.abs() < hi
            };
            if pass {
                *bin *= gain;
            } else {
                *bin = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Circularly delays a CT frame by `delay` seconds. The delay must be an
/// integer multiple of the grid step `T/R`; no interpolation is applied.
pub fn grid_delay(frame: &CtFrame, delay: f64) -> Result<CtFrame> {
    let shift = frame.params().grid_index(delay)?;
    let len = frame.len() as i64;
    Ok(CtFrame::from_fn(frame.params(), |g| {
        frame.samples()[(g as i64 - shift).rem_euclid(len) as usize]
    }))
}

/// Ideal band filter: scales spectrum bins with `f_lo < |f| <= f_hi` by
/// `gain` and zeroes everything else (see the module notes for the edge
/// convention). Requires `0 <= f_lo < f_hi <= R/(2T)`.
pub fn brickwall(frame: &CtFrame, f_lo: f64, f_hi: f64, gain: f64) -> Result<CtFrame> {
    let limit = frame.params().grid_nyquist_hz();
    let res = frame.params().freq_resolution();
    if !(0.0..limit + GRID_TOL * res).contains(&f_lo) || f_lo >= f_hi || f_hi > limit + GRID_TOL * res {
        return Err(Error::InvalidBand { f_lo, f_hi });
    }
    let mut spectrum = frame.transform();
    spectrum.apply_band_mask(f_lo, f_hi, gain);
    spectrum.inverse_ct()
}

/// Ideal low-pass over the signed band `(-f_hi, f_hi]` with DC included.
pub fn lowpass(frame: &CtFrame, f_hi: f64, gain: f64) -> Result<CtFrame> {
    let limit = frame.params().grid_nyquist_hz();
    let res = frame.params().freq_resolution();
    if f_hi <= 0.0 || f_hi > limit + GRID_TOL * res {
        return Err(Error::InvalidBand { f_lo: 0.0, f_hi });
    }
    let mut spectrum = frame.transform();
    spectrum.apply_lowpass_mask(f_hi, gain);
    spectrum.inverse_ct()
}

/// Multiplies a CT frame by the complex exponential `exp(sign*j*2*pi*f*t)`.
/// `f` must be an integer multiple of the frame resolution `1/(N*T)` so the
/// mixer is exactly periodic over the frame.
pub fn mix(frame: &CtFrame, f_hz: f64, sign: i32) -> Result<CtFrame> {
    let kf = frame.params().freq_bin(f_hz)?;
    let len = frame.len();
    let step = 2.0 * std::f64::consts::PI / len as f64;
    // Roots of unity indexed modulo the frame length keep the mixer exactly
    // periodic even for large products kf*g.
    let roots: Vec<Complex64> = (0..len).map(|i| Complex64::from_polar(1.0, step * i as f64)).collect();
    let dir = if sign >= 0 { 1i64 } else { -1i64 };
    Ok(CtFrame::from_fn(frame.params(), |g| {
        let idx = (dir * kf * g as i64).rem_euclid(len as i64) as usize;
        frame.samples()[g] * roots[idx]
    }))
}

/// Samples a CT frame at symbol instants `n*T + phase_offset`.
/// The phase offset must lie on the grid inside `[0, T)`.
pub fn sample_to_dt(frame: &CtFrame, phase_offset: f64) -> Result<DtFrame> {
    let params = frame.params();
    let g0 = params.grid_index(phase_offset)?;
    if g0 < 0 || g0 >= params.oversampling() as i64 {
        return Err(Error::InvalidSamplePhase(phase_offset));
    }
    let r = params.oversampling() as usize;
    Ok(DtFrame::from_fn(params, |n| frame.samples()[n * r + g0 as usize]))
}

/// Zero-order-hold expansion of a DT frame onto the CT grid: every symbol is
/// held constant over its interval `[nT, (n+1)T)`. No amplitude scaling.
pub fn zoh_expand(frame: &DtFrame) -> CtFrame {
    let r = frame.params().oversampling() as usize;
    CtFrame::from_fn(frame.params(), |g| frame.samples()[g / r])
}
