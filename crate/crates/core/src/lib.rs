//! Joint transmit beamforming and antenna selection for the downlink of an
//! underlay cognitive-radio network.
//!
//! A secondary base station with `N_t` antennas serves `K` single-antenna
//! secondary users while keeping the interference it leaks towards `M`
//! primary users below per-user caps. Antenna selection is modelled with a
//! relaxed indicator `alpha_n in [0, 1]` coupled to a per-antenna soft power
//! level `rho_n`, and the nonconvex sum-rate maximization is solved by an
//! inner-approximation loop: every iteration builds a convex cone program
//! that lower-bounds the true rates, is tight at the current iterate, and is
//! solved by the bundled interior-point solver.
//!
//! Module map:
//! * [`model`]: channels, beamformers, exact rate/interference/power evaluation;
//! * [`surrogate`]: the concave rate lower bounds and the bilinear power bound;
//! * [`conic`]: a small self-contained cone-program solver (linear, second-order
//!   and rotated second-order cones);
//! * [`sca`]: the iterative solver (feasibility phase + main loop, rounding);
//! * [`baselines`]: sum-power, per-antenna-power, zero-forcing and exhaustive
//!   antenna-subset reference designs;
//! * [`harness`]: seeded Monte Carlo sweeps and file outputs used by the CLI.
//!
//! Rates are handled in nats internally and converted to bps/Hz only at
//! reporting boundaries.

pub mod baselines;
pub mod conic;
pub mod harness;
pub mod model;
pub mod sca;
pub mod surrogate;

/// Scalar type the numeric core is generic over (`f32` or `f64`).
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssignOps
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal must be representable in the scalar type")
}

/// Converts a rate in nats to bps/Hz.
#[inline]
pub fn nats_to_bits<T: Real>(nats: T) -> T {
    nats / real::<T>(std::f64::consts::LN_2)
}

/// Converts a rate in bps/Hz to nats.
#[inline]
pub fn bits_to_nats<T: Real>(bits: T) -> T {
    bits * real::<T>(std::f64::consts::LN_2)
}

/// Converts a power in dB (relative to unit noise power) to linear scale.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    real::<T>(10.0).powf(db / real::<T>(10.0))
}

// Double-precision aliases for the generic core types.
pub type ChannelSet = model::ChannelSet<f64>;
pub type ProblemConfig = model::ProblemConfig<f64>;
pub type BeamformingMatrix = model::BeamformingMatrix<f64>;
pub type SelectionState = model::SelectionState<f64>;
pub type SurrogateCoefficients = surrogate::SurrogateCoefficients<f64>;
pub type EpigraphVars = surrogate::EpigraphVars<f64>;
pub type ConicProgram = conic::ConicProgram<f64>;
pub type ConeSolution = conic::ConeSolution<f64>;
pub type ConeSolverOptions = conic::ConeSolverOptions<f64>;
pub type ScaState = sca::ScaState<f64>;
pub type SolveOptions = sca::SolveOptions<f64>;
pub type SolveResult = sca::SolveResult<f64>;
