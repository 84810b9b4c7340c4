//! Reference transmit/receive chain.
//!
//! The chain maps a complex symbol frame `w` through an ideal zero-order-hold
//! quadrature modulator `M`, a continuous-time Volterra distortion `F`, an
//! ideal band-pass `H` around the carrier, and an ideal demodulator `D`
//! (down-mix, low-pass, symbol-rate sampler, optional equalizer), producing
//! the end-to-end symbol map `S = D H F M`. Everything is evaluated exactly
//! on the periodic oversampled grid, which makes this the brute-force oracle
//! that the closed-form evaluation in [`crate::closed_form`] is checked
//! against.
//!
//! With the equalizer enabled `D` is the exact left inverse of `H M`, so
//! `S` is the identity whenever the distortion is. The equalizer has to undo
//! an R-linear (not C-linear) map: the real mixer leaks a conjugate image
//! whose spectral tail folds in band, so each bin pair `(k, -k)` is solved as
//! a 2x2 complex system instead of a plain division.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frames::{brickwall, grid_delay, lowpass, mix, sample_to_dt, signed_bin};
use crate::frames::{ChainParams, CtFrame, DtFrame};

/// One continuous-time Volterra monomial: a coefficient and the delays of the
/// input copies it multiplies together.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraTerm {
    coeff: f64,
    delays: Vec<f64>,
}

impl VolterraTerm {
    /// Creates a term `coeff * prod_i x(t - delays[i])`. Delays must be
    /// non-negative and there must be at least one.
    pub fn new(coeff: f64, delays: Vec<f64>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::InvalidParams("Volterra term needs at least one delay".into()));
        }
        if let Some(&d) = delays.iter().find(|d| **d < 0.0 || !d.is_finite()) {
            return Err(Error::NegativeDelay(d));
        }
        Ok(Self { coeff, delays })
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// Degree of the monomial (number of multiplied input copies).
    pub fn degree(&self) -> usize {
        self.delays.len()
    }
}

/// Finite continuous-time Volterra model `y = b0 + sum_k b_k prod_i x(t - t_ki)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraModel {
    b0: f64,
    terms: Vec<VolterraTerm>,
}

impl VolterraModel {
    pub fn new(b0: f64, terms: Vec<VolterraTerm>) -> Self {
        Self { b0, terms }
    }

    /// The identity system `y = x`.
    pub fn identity() -> Self {
        Self::new(0.0, vec![VolterraTerm::new(1.0, vec![0.0]).unwrap()])
    }

    /// Cubic self-interference model `y = x - delta * x(t-t1) x(t-t2) x(t-t3)`.
    pub fn cubic_distortion(delta: f64, taus: [f64; 3]) -> Self {
        Self::new(
            0.0,
            vec![
                VolterraTerm::new(1.0, vec![0.0]).unwrap(),
                VolterraTerm::new(-delta, taus.to_vec()).unwrap(),
            ],
        )
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn terms(&self) -> &[VolterraTerm] {
        &self.terms
    }

    /// Largest monomial degree in the model.
    pub fn degree(&self) -> usize {
        self.terms.iter().map(VolterraTerm::degree).max().unwrap_or(0)
    }

    /// Largest delay in the model, in seconds.
    pub fn memory_depth(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.delays.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Demodulator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodConfig {
    /// Apply the exact inverse of the modulate/band-pass/demodulate response
    /// after sampling, making `D H M` the identity.
    pub equalize: bool,
    /// Sampling instant offset within the symbol window, seconds in `[0, T)`,
    /// on the grid.
    pub sample_phase: f64,
    /// Gain of the demodulator low-pass. The factor 2 undoes the 1/2 from
    /// mixing a real passband signal; any residual constant is absorbed by
    /// the equalizer when it is enabled.
    pub lpf_gain: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        Self {
            equalize: true,
            sample_phase: 0.0,
            lpf_gain: 2.0,
        }
    }
}

impl DemodConfig {
    /// Equalizer disabled, otherwise default settings.
    pub fn raw() -> Self {
        Self {
            equalize: false,
            ..Self::default()
        }
    }
}

/// Ideal modulator: zero-order hold to the grid, quadrature mix to the
/// carrier, real part, amplitude `1/T`. For `t` in `[nT, (n+1)T)` the output
/// is `(1/T) * Re(exp(j*2*pi*M*t/T) * u[n])`.
pub fn modulate(u: &DtFrame) -> CtFrame {
    let params = u.params();
    let r = params.oversampling() as usize;
    let inv_t = 1.0 / params.symbol_interval();
    // The carrier phase repeats every symbol interval because f_c*T = M.
    let carrier: Vec<Complex64> = (0..r)
        .map(|g| Complex64::from_polar(1.0, 2.0 * PI * params.carrier_ratio() as f64 * g as f64 / r as f64))
        .collect();
    CtFrame::from_fn(params, |g| {
        let s = u.samples()[g / r] * carrier[g % r];
        Complex64::new(inv_t * s.re, 0.0)
    })
}

/// Applies a CT Volterra model pointwise on the grid with circular delays.
pub fn distort(x: &CtFrame, model: &VolterraModel) -> Result<CtFrame> {
    let params = x.params();
    let mut acc = vec![Complex64::new(model.b0(), 0.0); params.ct_len()];
    for term in model.terms() {
        let delayed: Vec<CtFrame> = term
            .delays()
            .iter()
            .map(|&tau| grid_delay(x, tau))
            .collect::<Result<_>>()?;
        for g in 0..acc.len() {
            let mut p = Complex64::new(term.coeff(), 0.0);
            for d in &delayed {
                p *= d.samples()[g];
            }
            acc[g] += p;
        }
    }
    CtFrame::new(params, acc)
}

/// Ideal band-pass around the carrier: passes `|f|` in
/// `(f_c - f_N, f_c + f_N]`, zeroes everything else.
pub fn bandselect(y: &CtFrame) -> Result<CtFrame> {
    let params = y.params();
    let fc = params.carrier_hz();
    let fnyq = params.nyquist_hz();
    brickwall(y, fc - fnyq, fc + fnyq, 1.0)
}

/// Exact chain response of the demodulator input seen from the DT input, on
/// the simulation grid, with the distortion replaced by the identity.
///
/// The demodulated spectrum of a frame `w` is
/// `V[k] = A[k] * W[k] + C[k] * conj(W[-k])`; `A` is the in-band
/// zero-order-hold (Dirichlet) response and `C` the conjugate-image leakage
/// folded down from twice the carrier. Both are returned on the `N` DT bins.
pub(crate) fn demod_response(params: ChainParams, cfg: &DemodConfig) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = params.frame_len();
    let r = params.oversampling() as usize;
    let l = (n * r) as i64;
    let mn = params.carrier_ratio() as i64 * n as i64;
    let g0 = (cfg.sample_phase / params.grid_step()).round();
    let scale = cfg.lpf_gain / (2.0 * params.symbol_interval() * r as f64);

    // Dirichlet kernel of the length-R hold, as a function of the grid bin.
    let dirichlet = |k: i64| -> Complex64 {
        let k = k.rem_euclid(l);
        if k == 0 {
            return Complex64::new(r as f64, 0.0);
        }
        let num = 1.0 - Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64);
        let den = 1.0 - Complex64::from_polar(1.0, -2.0 * PI * k as f64 / l as f64);
        num / den
    };

    let mut a = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for nu in 0..n {
        let k_star = signed_bin(nu, n);
        let phase = Complex64::from_polar(1.0, 2.0 * PI * k_star as f64 * g0 / l as f64);
        a.push(dirichlet(k_star) * phase * scale);
        c.push(dirichlet(-k_star - 2 * mn).conj() * phase * scale);
    }
    (a, c)
}

/// Inverse of the demodulator response as an R-linear spectral kernel: the
/// equalized spectrum is `W[k] = A~[k] V[k] + C~[k] conj(V[-k])`.
pub(crate) fn equalizer_kernel(params: ChainParams, cfg: &DemodConfig) -> (Vec<Complex64>, Vec<Complex64>) {
    let (a, c) = demod_response(params, cfg);
    let n = a.len();
    let mut a_inv = Vec::with_capacity(n);
    let mut c_inv = Vec::with_capacity(n);
    for nu in 0..n {
        let mu = (n - nu) % n;
        let det = a[nu] * a[mu].conj() - c[nu] * c[mu].conj();
        a_inv.push(a[mu].conj() / det);
        c_inv.push(-c[nu] / det);
    }
    (a_inv, c_inv)
}

/// Applies an R-linear spectral kernel `(A, C)` in place:
/// `out[k] = A[k] in[k] + C[k] conj(in[-k])`.
pub(crate) fn apply_rlinear_kernel(bins: &mut [Complex64], a: &[Complex64], c: &[Complex64]) {
    let n = bins.len();
    let input = bins.to_vec();
    for nu in 0..n {
        let mu = (n - nu) % n;
        bins[nu] = a[nu] * input[nu] + c[nu] * input[mu].conj();
    }
}

/// Ideal demodulator: down-mix by the carrier, ideal low-pass over
/// `(-f_N, f_N]` with gain `cfg.lpf_gain`, sample at `nT + sample_phase`,
/// and (optionally) equalize so that demodulate(bandselect(modulate(u)))
/// reproduces `u` exactly. The input must be real-valued.
pub fn demodulate(q: &CtFrame, cfg: &DemodConfig) -> Result<DtFrame> {
    if !q.is_effectively_real() {
        return Err(Error::ComplexInput);
    }
    let params = q.params();
    let phase_idx = params.grid_index(cfg.sample_phase)?;
    if phase_idx < 0 || phase_idx >= params.oversampling() as i64 {
        return Err(Error::InvalidSamplePhase(cfg.sample_phase));
    }
    let down = mix(q, params.carrier_hz(), -1)?;
    let base = lowpass(&down, params.nyquist_hz(), cfg.lpf_gain)?;
    let sampled = sample_to_dt(&base, cfg.sample_phase)?;
    if !cfg.equalize {
        return Ok(sampled);
    }
    let (a_inv, c_inv) = equalizer_kernel(params, cfg);
    let mut spectrum = sampled.transform();
    apply_rlinear_kernel(spectrum.bins_mut(), &a_inv, &c_inv);
    spectrum.inverse_dt()
}

/// End-to-end symbol map `S`: modulate, distort, band-select, demodulate.
pub fn chain_s(w: &DtFrame, model: &VolterraModel, cfg: &DemodConfig) -> Result<DtFrame> {
    let x = modulate(w);
    let y = distort(&x, model)?;
    let q = bandselect(&y)?;
    demodulate(&q, cfg)
}

/// First-order inverse `2I - S` applied to `u`: the benchmark "ideal
/// compensator" input. Feeding the result back through `S` leaves a residual
/// that is second order in the distortion strength.
pub fn ideal_compensate(u: &DtFrame, model: &VolterraModel, cfg: &DemodConfig) -> Result<DtFrame> {
    let su = chain_s(u, model, cfg)?;
    let samples = u
        .samples()
        .iter()
        .zip(su.samples())
        .map(|(a, b)| 2.0 * a - b)
        .collect();
    DtFrame::new(u.params(), samples)
}
