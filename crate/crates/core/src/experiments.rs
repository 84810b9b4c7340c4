//! Experiment harness: QAM sources, the EVM metric, the compensation
//! benchmark sweep, closed-form verification and report emission.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::frames::{ChainParams, DtFrame};

/// Draws a frame of uniformly random square-QAM symbols, scaled to unit
/// average constellation power. Deterministic for a given seed.
pub fn qam_source(order: usize, params: ChainParams, seed: u64) -> Result<DtFrame> {
    let side = match order {
        4 => 2usize,
        16 => 4,
        64 => 8,
        256 => 16,
        _ => return Err(Error::InvalidQamOrder(order)),
    };
    // Mean power of the unscaled constellation {+-1, +-3, ...}^2.
    let axis_power = (order as f64 - 1.0) * 2.0 / 3.0;
    let scale = 1.0 / axis_power.sqrt();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut level = || (2 * rng.gen_range(0..side) as i64 - (side as i64 - 1)) as f64;
    Ok(DtFrame::from_fn(params, |_| {
        Complex64::new(level() * scale, level() * scale)
    }))
}

/// Error vector magnitude in dB: `20*log10(||u - u_hat|| / ||u||)`.
/// Returns negative infinity when the signals agree exactly; errors when the
/// reference has zero norm.
pub fn evm(u: &DtFrame, u_hat: &DtFrame) -> Result<f64> {
    if u.len() != u_hat.len() {
        return Err(Error::LengthMismatch {
            got: u_hat.len(),
            expected: u.len(),
        });
    }
    let ref_norm = u.norm();
    if ref_norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let err_norm = u
        .samples()
        .iter()
        .zip(u_hat.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(20.0 * (err_norm / ref_norm).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChainParams {
        ChainParams::new(1.0, 10, 40, 1024).unwrap()
    }

    #[test]
    fn qam4_symbols_have_unit_power_exactly() {
        let frame = qam_source(4, params(), 1).unwrap();
        for s in frame.samples() {
            assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            assert!((s.re.abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn qam64_average_power_near_unity() {
        let frame = qam_source(64, params(), 2).unwrap();
        let mean_power = frame.energy() / frame.len() as f64;
        assert!((mean_power - 1.0).abs() < 0.05);
    }

    #[test]
    fn qam_source_is_deterministic() {
        let a = qam_source(64, params(), 3).unwrap();
        let b = qam_source(64, params(), 3).unwrap();
        let c = qam_source(64, params(), 4).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn qam_rejects_bad_order() {
        assert!(matches!(qam_source(32, params(), 0), Err(Error::InvalidQamOrder(32))));
    }

    #[test]
    fn evm_exact_match_is_minus_infinity() {
        let u = qam_source(64, params(), 5).unwrap();
        assert_eq!(evm(&u, &u).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn evm_analytic_cases() {
        let u = qam_source(64, params(), 6).unwrap();
        let scaled = DtFrame::from_fn(u.params(), |i| 0.9 * u.samples()[i]);
        assert!((evm(&u, &scaled).unwrap() + 20.0).abs() < 1e-12);
        let zero = DtFrame::zeros(u.params());
        assert!(evm(&u, &zero).unwrap().abs() < 1e-12);
    }

    #[test]
    fn evm_rejects_zero_reference() {
        let z = DtFrame::zeros(params());
        assert!(matches!(evm(&z, &z), Err(Error::ZeroReference)));
    }
}
