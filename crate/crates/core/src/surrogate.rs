//! Concave lower bounds used by the iterative solver.
//!
//! Around an expansion point `w^k` the rate of each user is bounded from
//! below by an affine function `a - b * gamma` of an epigraph variable
//! `gamma` that overestimates the inverse SINR, valid on the trust region
//! where the linearized signal term `2 Re{h^H w} - t_ref` stays positive.
//! The bilinear selection/power coupling `alpha * rho` is bounded from above
//! by the convex split `alpha^2 / (2 r) + (r / 2) * rho^2`, tight at the
//! expansion ratio `r = alpha / rho`.

use num_complex::Complex;
use thiserror::Error;

use crate::model::{inner, interference_at_pu, BeamformingMatrix, ChannelSet};
use crate::{real, Real};

/// Bounds on the expansion ratio used by [`coupling_ratio`].
pub const RATIO_MIN: f64 = 1e-7;
pub const RATIO_MAX: f64 = 1e7;

/// Floor applied to the previous power level before forming the ratio.
pub const RHO_FLOOR: f64 = 1e-9;

/// Domain failures when forming bounds at an expansion point.
#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("user {user}: expansion point has non-positive signal part {value:.3e}")]
    NonPositiveSignal { user: usize, value: f64 },
    #[error("user {user}: candidate leaves the trust region ({value:.3e} <= 0)")]
    OutsideTrustRegion { user: usize, value: f64 },
    #[error("inverse-SINR argument must be positive, got {value:.3e}")]
    NonPositiveVarphi { value: f64 },
}

/// Coefficients of the affine rate bound `a - b * gamma` in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateCoefficients<T: Real> {
    pub a: T,
    pub b: T,
}

/// Per-user expansion data: the real signal part `t_ref = Re{h^H w}` and the
/// inverse SINR `varphi` evaluated at the expansion point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpigraphVars<T: Real> {
    pub t_ref: T,
    pub varphi: T,
}

fn signal_part<T: Real>(ch: &ChannelSet<T>, w: &BeamformingMatrix<T>, k: usize) -> T {
    inner(ch.su(k), w.user(k)).re
}

fn interference_plus_noise<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> T {
    let h = ch.su(k);
    let mut acc = noise_power;
    for j in 0..w.n_users() {
        if j != k {
            acc += inner(h, w.user(j)).norm_sqr();
        }
    }
    acc
}

/// Inverse SINR of user `k` built from the real part of the signal term:
/// `(interference + noise) / Re{h_k^H w_k}^2`.
///
/// Fails when the real part is not strictly positive; the solver keeps all
/// iterates phase-aligned so this only happens on malformed expansion points.
pub fn varphi<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> Result<T, SurrogateError> {
    let t = signal_part(ch, w, k);
    if !(t > T::zero()) {
        return Err(SurrogateError::NonPositiveSignal {
            user: k,
            value: t.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(interference_plus_noise(ch, w, k, noise_power) / (t * t))
}

/// Expansion data of user `k` at the current iterate.
pub fn expansion_vars<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> Result<EpigraphVars<T>, SurrogateError> {
    Ok(EpigraphVars {
        t_ref: signal_part(ch, w, k),
        varphi: varphi(ch, w, k, noise_power)?,
    })
}

/// Coefficients of the bound `ln(1 + 1/gamma) >= a - b * gamma`, tangent at
/// `gamma = varphi`:
/// `a = ln(1 + 1/varphi) + 1/(1 + varphi)`, `b = 1/(varphi^2 + varphi)`.
pub fn surrogate_coeffs<T: Real>(varphi: T) -> Result<SurrogateCoefficients<T>, SurrogateError> {
    if !(varphi > T::zero()) {
        return Err(SurrogateError::NonPositiveVarphi {
            value: varphi.to_f64().unwrap_or(f64::NAN),
        });
    }
    let one = T::one();
    Ok(SurrogateCoefficients {
        a: (one + one / varphi).ln() + one / (one + varphi),
        b: one / (varphi * varphi + varphi),
    })
}

/// Value of the affine rate bound at a given epigraph value.
pub fn surrogate_rate<T: Real>(coeffs: SurrogateCoefficients<T>, gamma: T) -> T {
    coeffs.a - coeffs.b * gamma
}

/// Linearized signal term `2 Re{h_k^H w_k} - t_ref` whose positivity defines
/// the trust region around the expansion point `w_prev`.
pub fn trust_region_value<T: Real>(
    ch: &ChannelSet<T>,
    w_prev: &BeamformingMatrix<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
) -> T {
    let two = T::one() + T::one();
    two * signal_part(ch, w, k) - signal_part(ch, w_prev, k)
}

/// Convex overestimate of the inverse SINR at a candidate `w`, using the
/// linearization of the squared signal around `w_prev`:
/// `(interference + noise) / (t_ref * (2 Re{h^H w} - t_ref))`.
pub fn linearized_varphi<T: Real>(
    ch: &ChannelSet<T>,
    w_prev: &BeamformingMatrix<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> Result<T, SurrogateError> {
    let t_ref = signal_part(ch, w_prev, k);
    if !(t_ref > T::zero()) {
        return Err(SurrogateError::NonPositiveSignal {
            user: k,
            value: t_ref.to_f64().unwrap_or(f64::NAN),
        });
    }
    let lin = trust_region_value(ch, w_prev, w, k);
    if !(lin > T::zero()) {
        return Err(SurrogateError::OutsideTrustRegion {
            user: k,
            value: lin.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(interference_plus_noise(ch, w, k, noise_power) / (t_ref * lin))
}

/// Full surrogate rate of user `k` at a candidate `w` on the trust region of
/// `w_prev`: the affine bound evaluated at the linearized inverse SINR. This
/// is the value the subproblem optimizes once its epigraph constraints are
/// tight, and it never exceeds the true rate.
pub fn surrogate_rate_at<T: Real>(
    ch: &ChannelSet<T>,
    w_prev: &BeamformingMatrix<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> Result<T, SurrogateError> {
    let coeffs = surrogate_coeffs(varphi(ch, w_prev, k, noise_power)?)?;
    Ok(surrogate_rate(
        coeffs,
        linearized_varphi(ch, w_prev, w, k, noise_power)?,
    ))
}

/// Expansion ratio `r = alpha_prev / rho_prev` for [`chi_bound`], with the
/// power level floored at [`RHO_FLOOR`] and the result clamped to
/// `[RATIO_MIN, RATIO_MAX]`. The bound below is valid for every positive
/// ratio, so clamping affects tightness only.
pub fn coupling_ratio<T: Real>(alpha_prev: T, rho_prev: T) -> T {
    let rho = rho_prev.max(real(RHO_FLOOR));
    (alpha_prev / rho)
        .max(real(RATIO_MIN))
        .min(real(RATIO_MAX))
}

/// Convex upper bound on the bilinear product:
/// `alpha * rho <= alpha^2 / (2 r) + (r / 2) * rho^2` for any `r > 0`,
/// with equality at `alpha / rho = r`.
pub fn chi_bound<T: Real>(alpha: T, rho: T, r: T) -> T {
    debug_assert!(r > T::zero());
    let two = T::one() + T::one();
    alpha * alpha / (two * r) + r / two * rho * rho
}

/// True rate of user `k` with the signal power replaced by the square of the
/// real part `Re{h_k^H w_k}^2`. Lies between the surrogate and the true rate;
/// equals the true rate on phase-aligned beamformers.
pub fn real_part_rate<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> T {
    let t = signal_part(ch, w, k);
    let t = t.max(T::zero());
    (T::one() + t * t / interference_plus_noise(ch, w, k, noise_power)).ln()
}

/// Interference at every primary user, convenience for feasibility reports.
pub fn pu_interference_vector<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
) -> Vec<T> {
    (0..ch.n_pus())
        .map(|m| interference_at_pu(ch, w, m))
        .collect()
}

/// Scales unit-norm directions `d_k` into beamformers `c * d_k`; used by the
/// solver's starting point and handy in tests.
pub fn scaled_directions<T: Real>(directions: &[Vec<Complex<T>>], c: T) -> BeamformingMatrix<T> {
    BeamformingMatrix::new(
        directions
            .iter()
            .map(|d| d.iter().map(|x| *x * c).collect())
            .collect(),
    )
    .expect("scaling preserves shape")
}
