//! Physical model of the secondary downlink: channel vectors, beamformers,
//! achievable rates, primary-user interference and per-antenna powers.
//!
//! Everything here is an exact evaluation of the communication model; the
//! convex bounds used by the iterative solver live in [`crate::surrogate`].
//! Rates are in nats. User, antenna and primary-user indices are 0-based.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::{real, Real};

/// Validation failures for model types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least one secondary user")]
    NoUsers,
    #[error("need at least one transmit antenna")]
    NoAntennas,
    #[error("{which} channel {index} has length {got}, expected {expected}")]
    ChannelLength {
        which: &'static str,
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("secondary-user channel {index} is identically zero")]
    ZeroChannel { index: usize },
    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },
    #[error("{what} must be strictly positive")]
    NonPositive { what: String },
    #[error("{what} has {got} entries, expected {expected}")]
    BadLength {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("rate floors must be nonnegative")]
    NegativeRateFloor,
    #[error("channel uncertainty must lie in [0, 1), got {got}")]
    BadUncertainty { got: f64 },
    #[error("channel set has {got} {what}, configuration expects {expected}")]
    ChannelMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Downlink channels: one vector per secondary user (`su`) and one per
/// primary user (`pu`), each of length `N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    su: Vec<Vec<Complex<T>>>,
    pu: Vec<Vec<Complex<T>>>,
}

impl<T: Real> ChannelSet<T> {
    /// Builds a channel set, rejecting ragged lengths, non-finite entries and
    /// identically zero secondary-user channels (their rates and the solver's
    /// expansion points would be undefined).
    pub fn new(su: Vec<Vec<Complex<T>>>, pu: Vec<Vec<Complex<T>>>) -> Result<Self, ModelError> {
        if su.is_empty() {
            return Err(ModelError::NoUsers);
        }
        let n_t = su[0].len();
        if n_t == 0 {
            return Err(ModelError::NoAntennas);
        }
        for (index, h) in su.iter().enumerate() {
            if h.len() != n_t {
                return Err(ModelError::ChannelLength {
                    which: "secondary-user",
                    index,
                    got: h.len(),
                    expected: n_t,
                });
            }
            if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: "secondary-user channel",
                });
            }
            if h.iter().all(|c| c.re == T::zero() && c.im == T::zero()) {
                return Err(ModelError::ZeroChannel { index });
            }
        }
        for (index, g) in pu.iter().enumerate() {
            if g.len() != n_t {
                return Err(ModelError::ChannelLength {
                    which: "primary-user",
                    index,
                    got: g.len(),
                    expected: n_t,
                });
            }
            if g.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: "primary-user channel",
                });
            }
        }
        Ok(Self { su, pu })
    }

    pub fn n_antennas(&self) -> usize {
        self.su[0].len()
    }

    pub fn n_sus(&self) -> usize {
        self.su.len()
    }

    pub fn n_pus(&self) -> usize {
        self.pu.len()
    }

    /// Channel of secondary user `k`.
    pub fn su(&self, k: usize) -> &[Complex<T>] {
        &self.su[k]
    }

    /// Channel towards primary user `m`.
    pub fn pu(&self, m: usize) -> &[Complex<T>] {
        &self.pu[m]
    }

    /// Restriction of every channel to the given antenna subset (used by
    /// antenna-selection re-solves). Indices must be strictly increasing.
    pub fn restrict(&self, antennas: &[usize]) -> Result<Self, ModelError> {
        let pick = |v: &Vec<Complex<T>>| antennas.iter().map(|&n| v[n]).collect::<Vec<_>>();
        Self::new(
            self.su.iter().map(&pick).collect(),
            self.pu.iter().map(&pick).collect(),
        )
    }
}

/// Static problem data: dimensions, budgets, caps, floors and noise powers.
///
/// Powers are linear (noise-normalized); rate floors are in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig<T: Real> {
    pub n_antennas: usize,
    pub n_sus: usize,
    pub n_pus: usize,
    /// Total transmit power budget `P_bs`.
    pub power_budget: T,
    /// Interference cap `I_m` per primary user (length `n_pus`).
    pub interference_caps: Vec<T>,
    /// Per-user rate floor in nats (length `n_sus`).
    pub rate_floors: Vec<T>,
    /// Per-user noise power (length `n_sus`).
    pub noise_powers: Vec<T>,
    /// Slope of the selection/power coupling `alpha_n <= omega * rho_n`
    /// enforced by the improved solver mode.
    pub omega: T,
}

impl<T: Real> ProblemConfig<T> {
    /// Builds a validated configuration with the default coupling slope
    /// `omega = 100`.
    pub fn new(
        n_antennas: usize,
        n_sus: usize,
        n_pus: usize,
        power_budget: T,
        interference_caps: Vec<T>,
        rate_floors: Vec<T>,
        noise_powers: Vec<T>,
    ) -> Result<Self, ModelError> {
        let cfg = Self {
            n_antennas,
            n_sus,
            n_pus,
            power_budget,
            interference_caps,
            rate_floors,
            noise_powers,
            omega: real(100.0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`ProblemConfig::new`] with an explicit coupling slope.
    pub fn with_omega(mut self, omega: T) -> Result<Self, ModelError> {
        self.omega = omega;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_sus == 0 {
            return Err(ModelError::NoUsers);
        }
        if self.n_antennas == 0 {
            return Err(ModelError::NoAntennas);
        }
        if !(self.power_budget > T::zero()) || !self.power_budget.is_finite() {
            return Err(ModelError::NonPositive {
                what: "power budget".into(),
            });
        }
        if self.interference_caps.len() != self.n_pus {
            return Err(ModelError::BadLength {
                what: "interference caps",
                got: self.interference_caps.len(),
                expected: self.n_pus,
            });
        }
        for (m, cap) in self.interference_caps.iter().enumerate() {
            if !(*cap > T::zero()) || !cap.is_finite() {
                return Err(ModelError::NonPositive {
                    what: format!("interference cap {m}"),
                });
            }
        }
        if self.rate_floors.len() != self.n_sus {
            return Err(ModelError::BadLength {
                what: "rate floors",
                got: self.rate_floors.len(),
                expected: self.n_sus,
            });
        }
        if self
            .rate_floors
            .iter()
            .any(|r| *r < T::zero() || !r.is_finite())
        {
            return Err(ModelError::NegativeRateFloor);
        }
        if self.noise_powers.len() != self.n_sus {
            return Err(ModelError::BadLength {
                what: "noise powers",
                got: self.noise_powers.len(),
                expected: self.n_sus,
            });
        }
        for (k, s) in self.noise_powers.iter().enumerate() {
            if !(*s > T::zero()) || !s.is_finite() {
                return Err(ModelError::NonPositive {
                    what: format!("noise power {k}"),
                });
            }
        }
        if !(self.omega > T::zero()) || !self.omega.is_finite() {
            return Err(ModelError::NonPositive {
                what: "omega".into(),
            });
        }
        Ok(())
    }

    /// Checks that a channel set has the dimensions this configuration expects.
    pub fn check_channels(&self, ch: &ChannelSet<T>) -> Result<(), ModelError> {
        if ch.n_sus() != self.n_sus {
            return Err(ModelError::ChannelMismatch {
                what: "secondary users",
                got: ch.n_sus(),
                expected: self.n_sus,
            });
        }
        if ch.n_pus() != self.n_pus {
            return Err(ModelError::ChannelMismatch {
                what: "primary users",
                got: ch.n_pus(),
                expected: self.n_pus,
            });
        }
        if ch.n_antennas() != self.n_antennas {
            return Err(ModelError::ChannelMismatch {
                what: "antennas",
                got: ch.n_antennas(),
                expected: self.n_antennas,
            });
        }
        Ok(())
    }
}

/// One transmit beamformer per secondary user, each of length `N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix<T: Real> {
    vectors: Vec<Vec<Complex<T>>>,
}

impl<T: Real> BeamformingMatrix<T> {
    pub fn new(vectors: Vec<Vec<Complex<T>>>) -> Result<Self, ModelError> {
        if vectors.is_empty() {
            return Err(ModelError::NoUsers);
        }
        let n_t = vectors[0].len();
        if n_t == 0 {
            return Err(ModelError::NoAntennas);
        }
        for (index, w) in vectors.iter().enumerate() {
            if w.len() != n_t {
                return Err(ModelError::ChannelLength {
                    which: "beamformer",
                    index,
                    got: w.len(),
                    expected: n_t,
                });
            }
            if w.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ModelError::NonFinite { what: "beamformer" });
            }
        }
        Ok(Self { vectors })
    }

    /// All-zero beamformers for `n_users` users over `n_antennas` antennas.
    pub fn zeros(n_users: usize, n_antennas: usize) -> Self {
        Self {
            vectors: vec![vec![Complex::new(T::zero(), T::zero()); n_antennas]; n_users],
        }
    }

    pub fn n_users(&self) -> usize {
        self.vectors.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.vectors[0].len()
    }

    /// Beamformer of user `k`.
    pub fn user(&self, k: usize) -> &[Complex<T>] {
        &self.vectors[k]
    }

    pub fn user_mut(&mut self, k: usize) -> &mut [Complex<T>] {
        &mut self.vectors[k]
    }

    /// The `n`-th entry of every user's beamformer (the signal leaving
    /// antenna `n`).
    pub fn antenna(&self, n: usize) -> Vec<Complex<T>> {
        self.vectors.iter().map(|w| w[n]).collect()
    }

    /// Transmit power of user `k`'s beamformer.
    pub fn user_power(&self, k: usize) -> T {
        self.vectors[k]
            .iter()
            .fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }

    /// Total transmit power, summed antenna by antenna (so it agrees with
    /// summing [`antenna_power`] over all antennas term for term).
    pub fn total_power(&self) -> T {
        (0..self.n_antennas()).fold(T::zero(), |acc, n| acc + antenna_power(self, n))
    }
}

/// Relaxed antenna-selection state: indicator `alpha_n in [0, 1]` and soft
/// per-antenna power level `rho_n >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState<T: Real> {
    pub alpha: Vec<T>,
    pub rho: Vec<T>,
}

impl<T: Real> SelectionState<T> {
    pub fn new(alpha: Vec<T>, rho: Vec<T>) -> Result<Self, ModelError> {
        if alpha.len() != rho.len() {
            return Err(ModelError::BadLength {
                what: "selection state",
                got: rho.len(),
                expected: alpha.len(),
            });
        }
        if alpha.iter().chain(rho.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                what: "selection state",
            });
        }
        Ok(Self { alpha, rho })
    }

    pub fn n_antennas(&self) -> usize {
        self.alpha.len()
    }
}

/// Hermitian inner product `a^H b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * *y
        })
}

/// Draws i.i.d. circularly-symmetric complex Gaussian channels with unit
/// variance per entry. The same seed reproduces the same channels bit for bit.
pub fn generate_channels<T: Real>(cfg: &ProblemConfig<T>, seed: u64) -> ChannelSet<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let vector = |rng: &mut ChaCha8Rng| {
        (0..cfg.n_antennas)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(real::<T>(re * scale), real::<T>(im * scale))
            })
            .collect::<Vec<_>>()
    };
    let su = (0..cfg.n_sus).map(|_| vector(&mut rng)).collect();
    let pu = (0..cfg.n_pus).map(|_| vector(&mut rng)).collect();
    ChannelSet::new(su, pu).expect("continuous draws produce valid channels")
}

/// Achievable rate of user `k` in nats:
/// `ln(1 + |h_k^H w_k|^2 / (sum_{j != k} |h_k^H w_j|^2 + noise))`.
pub fn achievable_rate<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    k: usize,
    noise_power: T,
) -> T {
    let h = ch.su(k);
    let signal = inner(h, w.user(k)).norm_sqr();
    let mut interference = T::zero();
    for j in 0..w.n_users() {
        if j != k {
            interference += inner(h, w.user(j)).norm_sqr();
        }
    }
    (T::one() + signal / (interference + noise_power)).ln()
}

/// Sum of all users' achievable rates in nats.
pub fn sum_rate<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    cfg: &ProblemConfig<T>,
) -> T {
    (0..cfg.n_sus).fold(T::zero(), |acc, k| {
        acc + achievable_rate(ch, w, k, cfg.noise_powers[k])
    })
}

/// Aggregate interference received by primary user `m`:
/// `sum_k |g_m^H w_k|^2`.
pub fn interference_at_pu<T: Real>(
    ch: &ChannelSet<T>,
    w: &BeamformingMatrix<T>,
    m: usize,
) -> T {
    let g = ch.pu(m);
    (0..w.n_users()).fold(T::zero(), |acc, k| acc + inner(g, w.user(k)).norm_sqr())
}

/// Power radiated by antenna `n` across all users: `sum_k |[w_k]_n|^2`.
pub fn antenna_power<T: Real>(w: &BeamformingMatrix<T>, n: usize) -> T {
    w.vectors
        .iter()
        .fold(T::zero(), |acc, wk| acc + wk[n].norm_sqr())
}

/// Rotates every beamformer by a unit-modulus scalar so that `h_k^H w_k` is
/// real and nonnegative. Rates, interference and antenna powers are invariant
/// under this rotation; a zero inner product leaves the beamformer unchanged.
pub fn phase_align<T: Real>(ch: &ChannelSet<T>, w: &BeamformingMatrix<T>) -> BeamformingMatrix<T> {
    let mut vectors = w.vectors.clone();
    for (k, wk) in vectors.iter_mut().enumerate() {
        let p = inner(ch.su(k), wk);
        let mag = p.norm_sqr().sqrt();
        if mag > T::zero() {
            let rot = p.conj() / mag;
            for c in wk.iter_mut() {
                *c = *c * rot;
            }
        }
    }
    BeamformingMatrix { vectors }
}

/// Adds an error term to every channel, drawn uniformly from the complex ball
/// `||delta||^2 <= eps * ||f||^2` (`eps_s` for secondary users, `eps_p` for
/// primary users). Deterministic given the seed.
///
/// Panics if either uncertainty lies outside `[0, 1)`.
pub fn perturb_channels<T: Real>(
    ch: &ChannelSet<T>,
    eps_s: T,
    eps_p: T,
    seed: u64,
) -> ChannelSet<T> {
    for eps in [eps_s, eps_p] {
        assert!(
            eps >= T::zero() && eps < T::one(),
            "channel uncertainty must lie in [0, 1)"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturb = |f: &Vec<Complex<T>>, eps: T, rng: &mut ChaCha8Rng| {
        if eps == T::zero() {
            return f.clone();
        }
        let norm_sq = f.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr());
        let radius_max = (eps * norm_sq).sqrt();
        // Uniform in the ball: uniform direction on the (2 N_t - 1)-sphere and
        // radius with density proportional to r^(2 N_t - 1).
        let dim = 2 * f.len();
        let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if dn > 0.0 {
            for v in dir.iter_mut() {
                *v /= dn;
            }
        }
        let u: f64 = rng.gen::<f64>();
        let radius = radius_max * real::<T>(u.powf(1.0 / dim as f64));
        f.iter()
            .enumerate()
            .map(|(i, c)| {
                Complex::new(
                    c.re + radius * real::<T>(dir[2 * i]),
                    c.im + radius * real::<T>(dir[2 * i + 1]),
                )
            })
            .collect()
    };
    let su = ch.su.iter().map(|f| perturb(f, eps_s, &mut rng)).collect();
    let pu = ch.pu.iter().map(|f| perturb(f, eps_p, &mut rng)).collect();
    ChannelSet { su, pu }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn cfg(n_t: usize, k: usize, m: usize) -> ProblemConfig<f64> {
        ProblemConfig::new(
            n_t,
            k,
            m,
            10.0,
            vec![1.0; m],
            vec![0.0; k],
            vec![1.0; k],
        )
        .unwrap()
    }

    #[test]
    fn generated_channels_have_requested_shape() {
        let ch = generate_channels(&cfg(6, 3, 3), 7);
        assert_eq!(ch.n_sus(), 3);
        assert_eq!(ch.n_pus(), 3);
        assert_eq!(ch.n_antennas(), 6);
        for k in 0..3 {
            assert_eq!(ch.su(k).len(), 6);
            assert_eq!(ch.pu(k).len(), 6);
        }
    }

    #[test]
    fn same_seed_reproduces_channels_bit_for_bit() {
        let cfg = cfg(4, 2, 2);
        let a = generate_channels(&cfg, 42);
        let b = generate_channels(&cfg, 42);
        assert_eq!(a, b);
        let c = generate_channels(&cfg, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn channel_entries_have_unit_variance_and_zero_mean() {
        let cfg = cfg(4, 2, 1);
        let mut sum = Complex::new(0.0, 0.0);
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..10_000u64 {
            let ch = generate_channels(&cfg, seed);
            for k in 0..2 {
                for e in ch.su(k) {
                    sum += e;
                    sum_sq += e.norm_sqr();
                    count += 1;
                }
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64;
        assert!(mean.norm() < 0.05, "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "variance {var}");
    }

    #[test]
    fn zero_secondary_channel_is_rejected() {
        let err = ChannelSet::new(vec![vec![c(0.0, 0.0), c(0.0, 0.0)]], vec![]).unwrap_err();
        assert!(matches!(err, ModelError::ZeroChannel { index: 0 }));
    }

    #[test]
    fn ragged_channels_are_rejected() {
        let err = ChannelSet::new(
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0)]],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ChannelLength { index: 1, .. }));
    }

    #[test]
    fn config_validation_rejects_bad_data() {
        assert!(ProblemConfig::new(2, 1, 0, 0.0, vec![], vec![0.0], vec![1.0]).is_err());
        assert!(ProblemConfig::new(2, 1, 1, 1.0, vec![], vec![0.0], vec![1.0]).is_err());
        assert!(ProblemConfig::new(2, 1, 0, 1.0, vec![], vec![-0.1], vec![1.0]).is_err());
        assert!(ProblemConfig::new(2, 1, 0, 1.0, vec![], vec![0.0], vec![0.0]).is_err());
        assert!(cfg(2, 1, 0).with_omega(0.0).is_err());
    }

    #[test]
    fn single_user_rate_matches_closed_form() {
        let ch = ChannelSet::new(vec![vec![c(1.0, 0.0)]], vec![]).unwrap();
        let w = BeamformingMatrix::new(vec![vec![c(3.0, 0.0)]]).unwrap();
        let r = achievable_rate(&ch, &w, 0, 1.0);
        assert!((r - 9.0_f64.ln_1p()).abs() < 1e-15, "r = {r}");
    }

    #[test]
    fn zero_beamformer_gives_zero_rate() {
        let ch = ChannelSet::new(vec![vec![c(1.0, 0.0), c(0.5, -0.25)]], vec![]).unwrap();
        let w = BeamformingMatrix::zeros(1, 2);
        assert_eq!(achievable_rate(&ch, &w, 0, 1.0), 0.0);
    }

    #[test]
    fn two_user_rates_match_hand_computation() {
        let ch = ChannelSet::new(
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]],
            vec![],
        )
        .unwrap();
        let w = BeamformingMatrix::new(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ])
        .unwrap();
        let r0 = achievable_rate(&ch, &w, 0, 1.0);
        let r1 = achievable_rate(&ch, &w, 1, 1.0);
        assert!((r0 - 2.0_f64.ln()).abs() < 1e-15);
        assert!((r1 - 1.5_f64.ln()).abs() < 1e-15);
        let cfg = cfg(2, 2, 0);
        assert!((sum_rate(&ch, &w, &cfg) - (r0 + r1)).abs() < 1e-15);
    }

    #[test]
    fn interference_matches_hand_computation() {
        let ch = ChannelSet::new(
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)]],
            vec![vec![c(1.0, 0.0), c(0.0, 1.0)]],
        )
        .unwrap();
        let w = BeamformingMatrix::new(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0)],
        ])
        .unwrap();
        // |g^H w_1|^2 = 1 and |g^H w_2|^2 = |-i|^2 = 1.
        assert!((interference_at_pu(&ch, &w, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn interference_scales_quadratically() {
        let cfg = cfg(4, 2, 2);
        let ch = generate_channels(&cfg, 5);
        let w0 = generate_channels(&cfg, 6); // reuse gaussian draws as beamformers
        let w = BeamformingMatrix::new(vec![w0.su(0).to_vec(), w0.su(1).to_vec()]).unwrap();
        let scaled = BeamformingMatrix::new(
            (0..2)
                .map(|k| w.user(k).iter().map(|x| x * 3.0).collect())
                .collect(),
        )
        .unwrap();
        for m in 0..2 {
            let base = interference_at_pu(&ch, &w, m);
            let big = interference_at_pu(&ch, &scaled, m);
            assert!((big - 9.0 * base).abs() <= 1e-12 * big.max(1.0));
        }
    }

    #[test]
    fn antenna_powers_sum_to_user_powers() {
        let cfg = cfg(5, 3, 0);
        let draws = generate_channels(&cfg, 11);
        let w = BeamformingMatrix::new((0..3).map(|k| draws.su(k).to_vec()).collect()).unwrap();
        let by_antenna: f64 = (0..5).map(|n| antenna_power(&w, n)).sum();
        let by_user: f64 = (0..3).map(|k| w.user_power(k)).sum();
        assert!((by_antenna - by_user).abs() <= 1e-12 * by_user);
        assert!((w.total_power() - by_antenna).abs() == 0.0);
    }

    #[test]
    fn antenna_power_counts_all_users() {
        let w = BeamformingMatrix::new(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 2.0), c(1.0, 1.0)],
        ])
        .unwrap();
        assert!((antenna_power(&w, 0) - 5.0).abs() < 1e-15);
        assert!((antenna_power(&w, 1) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn phase_align_makes_inner_products_real() {
        let ch = ChannelSet::new(vec![vec![c(1.0, 0.0)]], vec![]).unwrap();
        let w = BeamformingMatrix::new(vec![vec![c(0.0, 1.0)]]).unwrap();
        let aligned = phase_align(&ch, &w);
        let p = inner(ch.su(0), aligned.user(0));
        assert!((p.re - 1.0).abs() < 1e-15 && p.im.abs() < 1e-15);
        // Already aligned input is unchanged.
        let again = phase_align(&ch, &aligned);
        assert_eq!(aligned, again);
    }

    #[test]
    fn phase_align_preserves_rates_interference_and_power() {
        let cfg = cfg(4, 3, 2);
        let ch = generate_channels(&cfg, 3);
        let raw = generate_channels(&cfg, 4);
        let w = BeamformingMatrix::new((0..3).map(|k| raw.su(k).to_vec()).collect()).unwrap();
        let aligned = phase_align(&ch, &w);
        for k in 0..3 {
            let p = inner(ch.su(k), aligned.user(k));
            assert!(p.re >= 0.0 && p.im.abs() <= 1e-12 * p.re.max(1.0));
            let a = achievable_rate(&ch, &w, k, 1.0);
            let b = achievable_rate(&ch, &aligned, k, 1.0);
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
        for m in 0..2 {
            let a = interference_at_pu(&ch, &w, m);
            let b = interference_at_pu(&ch, &aligned, m);
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
        for n in 0..4 {
            let a = antenna_power(&w, n);
            let b = antenna_power(&aligned, n);
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn perturbation_stays_in_the_prescribed_ball() {
        let cfg = cfg(4, 2, 2);
        let ch = generate_channels(&cfg, 9);
        let (eps_s, eps_p) = (0.04, 0.01);
        for seed in 0..200u64 {
            let p = perturb_channels(&ch, eps_s, eps_p, seed);
            for k in 0..2 {
                let num: f64 = ch
                    .su(k)
                    .iter()
                    .zip(p.su(k))
                    .map(|(a, b)| (b - a).norm_sqr())
                    .sum();
                let den: f64 = ch.su(k).iter().map(|a| a.norm_sqr()).sum();
                assert!(num <= eps_s * den * (1.0 + 1e-12));
            }
            for m in 0..2 {
                let num: f64 = ch
                    .pu(m)
                    .iter()
                    .zip(p.pu(m))
                    .map(|(a, b)| (b - a).norm_sqr())
                    .sum();
                let den: f64 = ch.pu(m).iter().map(|a| a.norm_sqr()).sum();
                assert!(num <= eps_p * den * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn perturbation_radii_cover_the_ball() {
        let cfg = cfg(4, 1, 0);
        let ch = generate_channels(&cfg, 21);
        let eps = 0.04;
        let den: f64 = ch.su(0).iter().map(|a| a.norm_sqr()).sum();
        let mut max_ratio = 0.0_f64;
        for seed in 0..1000u64 {
            let p = perturb_channels(&ch, eps, 0.0, seed);
            let num: f64 = ch
                .su(0)
                .iter()
                .zip(p.su(0))
                .map(|(a, b)| (b - a).norm_sqr())
                .sum();
            max_ratio = max_ratio.max(num / den);
        }
        assert!(max_ratio <= eps * (1.0 + 1e-12));
        assert!(max_ratio >= 0.5 * eps, "max ratio {max_ratio}");
    }

    #[test]
    fn zero_uncertainty_returns_identical_channels() {
        let cfg = cfg(3, 2, 1);
        let ch = generate_channels(&cfg, 2);
        let p = perturb_channels(&ch, 0.0, 0.0, 99);
        assert_eq!(ch, p);
    }

    #[test]
    fn perturbation_is_deterministic() {
        let cfg = cfg(3, 2, 1);
        let ch = generate_channels(&cfg, 2);
        let a = perturb_channels(&ch, 0.02, 0.01, 5);
        let b = perturb_channels(&ch, 0.02, 0.01, 5);
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic(expected = "uncertainty")]
    fn out_of_range_uncertainty_panics() {
        let cfg = cfg(3, 1, 0);
        let ch = generate_channels(&cfg, 2);
        let _ = perturb_channels(&ch, 1.0, 0.0, 5);
    }

    #[test]
    fn restrict_keeps_selected_antennas() {
        let ch = ChannelSet::new(
            vec![vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]],
            vec![vec![c(4.0, 0.0), c(5.0, 0.0), c(6.0, 0.0)]],
        )
        .unwrap();
        let r = ch.restrict(&[0, 2]).unwrap();
        assert_eq!(r.su(0), &[c(1.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(r.pu(0), &[c(4.0, 0.0), c(6.0, 0.0)]);
    }
}
