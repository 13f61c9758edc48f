//! Sweep configuration: the on-disk TOML format and the vocabulary shared by
//! the experiment drivers and the CLI.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ProblemConfig;
use crate::{bits_to_nats, db_to_linear};

use super::HarnessError;

/// A design that can be requested in a sweep or comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    #[serde(rename = "JBFAS_relaxed")]
    JbfasRelaxed,
    #[serde(rename = "JBFAS_improved")]
    JbfasImproved,
    #[serde(rename = "JBFAS_fixed_alpha1")]
    JbfasFixedAlpha,
    #[serde(rename = "SPC")]
    Spc,
    #[serde(rename = "PAPC")]
    Papc,
    #[serde(rename = "ZF_PAPC")]
    ZfPapc,
    #[serde(rename = "Oracle")]
    Oracle,
}

impl Design {
    pub const ALL: [Design; 7] = [
        Design::JbfasRelaxed,
        Design::JbfasImproved,
        Design::JbfasFixedAlpha,
        Design::Spc,
        Design::Papc,
        Design::ZfPapc,
        Design::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Design::JbfasRelaxed => "JBFAS_relaxed",
            Design::JbfasImproved => "JBFAS_improved",
            Design::JbfasFixedAlpha => "JBFAS_fixed_alpha1",
            Design::Spc => "SPC",
            Design::Papc => "PAPC",
            Design::ZfPapc => "ZF_PAPC",
            Design::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Design {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Design::ALL
            .into_iter()
            .find(|d| d.label() == s)
            .ok_or_else(|| {
                HarnessError::BadConfig(format!(
                    "unknown design '{s}'; expected one of {}",
                    Design::ALL.map(Design::label).join(", ")
                ))
            })
    }
}

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    /// Total power budget in dB relative to unit noise.
    #[serde(rename = "P_bs_dB")]
    PBsDb,
    /// Common interference cap in dB relative to unit noise.
    #[serde(rename = "I_dB")]
    IDb,
    /// Number of primary users.
    #[serde(rename = "M")]
    NumPus,
    /// Channel uncertainty pair `(eps_s, eps_p)`.
    #[serde(rename = "epsilon_pair")]
    EpsilonPair,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::PBsDb => "P_bs_dB",
            SweepVariable::IDb => "I_dB",
            SweepVariable::NumPus => "M",
            SweepVariable::EpsilonPair => "epsilon_pair",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepVariable {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepVariable::PBsDb,
            SweepVariable::IDb,
            SweepVariable::NumPus,
            SweepVariable::EpsilonPair,
        ]
        .into_iter()
        .find(|v| v.label() == s)
        .ok_or_else(|| {
            HarnessError::BadConfig(format!(
                "unknown sweep variable '{s}'; expected P_bs_dB, I_dB, M or epsilon_pair"
            ))
        })
    }
}

/// One point of a sweep: a scalar for dB/count sweeps, a pair for the CSI
/// uncertainty sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Scalar(f64),
    Pair([f64; 2]),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Scalar(v) => write!(f, "{v}"),
            SweepValue::Pair([a, b]) => write!(f, "{a}/{b}"),
        }
    }
}

/// Base problem data, mirroring the solver configuration field for field.
/// Powers are linear relative to unit noise; rate floors are in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub n_antennas: usize,
    pub n_sus: usize,
    pub n_pus: usize,
    pub power_budget: f64,
    pub interference_caps: Vec<f64>,
    pub rate_floors: Vec<f64>,
    pub noise_powers: Vec<f64>,
    #[serde(default = "default_omega")]
    pub omega: f64,
}

fn default_omega() -> f64 {
    100.0
}

impl BaseConfig {
    pub fn to_problem(&self) -> Result<ProblemConfig<f64>, HarnessError> {
        let cfg = ProblemConfig::new(
            self.n_antennas,
            self.n_sus,
            self.n_pus,
            self.power_budget,
            self.interference_caps.clone(),
            self.rate_floors.clone(),
            self.noise_powers.clone(),
        )?
        .with_omega(self.omega)?;
        Ok(cfg)
    }
}

/// A full sweep description, loadable from a TOML file whose keys mirror
/// these field names exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: BaseConfig,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<SweepValue>,
    pub n_trials: usize,
    pub seed: u64,
    pub designs: Vec<Design>,
    pub output_dir: PathBuf,
}

impl SweepConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: SweepConfig = toml::from_str(&text).map_err(|source| HarnessError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_trials == 0 {
            return Err(HarnessError::BadConfig("n_trials must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(HarnessError::BadConfig("sweep_values must be nonempty".into()));
        }
        if self.designs.is_empty() {
            return Err(HarnessError::BadConfig("designs must be nonempty".into()));
        }
        self.base.to_problem()?;
        for (i, &v) in self.sweep_values.iter().enumerate() {
            match (self.sweep_variable, v) {
                (SweepVariable::EpsilonPair, SweepValue::Pair([s, p])) => {
                    if !(0.0..1.0).contains(&s) || !(0.0..1.0).contains(&p) {
                        return Err(HarnessError::BadConfig(format!(
                            "sweep_values[{i}]: uncertainties must lie in [0, 1)"
                        )));
                    }
                }
                (SweepVariable::EpsilonPair, SweepValue::Scalar(_)) => {
                    return Err(HarnessError::BadConfig(format!(
                        "sweep_values[{i}]: epsilon_pair sweeps take [eps_s, eps_p] pairs"
                    )));
                }
                (_, SweepValue::Pair(_)) => {
                    return Err(HarnessError::BadConfig(format!(
                        "sweep_values[{i}]: {} sweeps take scalars",
                        self.sweep_variable
                    )));
                }
                (SweepVariable::NumPus, SweepValue::Scalar(x)) => {
                    if x < 0.0 || x.fract() != 0.0 {
                        return Err(HarnessError::BadConfig(format!(
                            "sweep_values[{i}]: M must be a nonnegative integer, got {x}"
                        )));
                    }
                    if x > 0.0 && self.base.interference_caps.is_empty() {
                        return Err(HarnessError::BadConfig(
                            "sweeping M needs at least one base interference cap to replicate"
                                .into(),
                        ));
                    }
                }
                (SweepVariable::PBsDb | SweepVariable::IDb, SweepValue::Scalar(_)) => {}
            }
        }
        Ok(())
    }
}

/// Applies one sweep point to the base problem. Returns the resolved problem
/// and the `(eps_s, eps_p)` uncertainty to apply after each design.
pub fn apply_sweep(
    base: &BaseConfig,
    variable: SweepVariable,
    value: SweepValue,
) -> Result<(ProblemConfig<f64>, (f64, f64)), HarnessError> {
    let mut b = base.clone();
    let mut eps = (0.0, 0.0);
    match (variable, value) {
        (SweepVariable::PBsDb, SweepValue::Scalar(db)) => {
            b.power_budget = db_to_linear(db);
        }
        (SweepVariable::IDb, SweepValue::Scalar(db)) => {
            let cap = db_to_linear(db);
            b.interference_caps = vec![cap; b.n_pus];
        }
        (SweepVariable::NumPus, SweepValue::Scalar(m)) => {
            let m = m as usize;
            let cap = b.interference_caps.first().copied();
            b.n_pus = m;
            b.interference_caps = match cap {
                Some(c) => vec![c; m],
                None if m == 0 => Vec::new(),
                None => {
                    return Err(HarnessError::BadConfig(
                        "sweeping M needs a base interference cap".into(),
                    ))
                }
            };
        }
        (SweepVariable::EpsilonPair, SweepValue::Pair([s, p])) => {
            eps = (s, p);
        }
        (v, x) => {
            return Err(HarnessError::BadConfig(format!(
                "sweep value {x:?} does not fit variable {v}"
            )));
        }
    }
    Ok((b.to_problem()?, eps))
}

/// Operating point used when no sweep configuration is given: a six-antenna
/// cell with three users and three primaries, floors of half a bit, caps of
/// 1 dB, sweeping the power budget.
pub fn default_sweep() -> SweepConfig {
    SweepConfig {
        base: BaseConfig {
            n_antennas: 6,
            n_sus: 3,
            n_pus: 3,
            power_budget: db_to_linear(20.0),
            interference_caps: vec![db_to_linear(1.0); 3],
            rate_floors: vec![bits_to_nats(0.5); 3],
            noise_powers: vec![1.0; 3],
            omega: 100.0,
        },
        sweep_variable: SweepVariable::PBsDb,
        sweep_values: [10.0, 15.0, 20.0, 25.0, 30.0]
            .into_iter()
            .map(SweepValue::Scalar)
            .collect(),
        n_trials: 20,
        seed: 1,
        designs: vec![
            Design::JbfasImproved,
            Design::JbfasRelaxed,
            Design::Spc,
            Design::Papc,
            Design::ZfPapc,
        ],
        output_dir: PathBuf::from("out"),
    }
}

/// Small operating point for comparing the rounded joint design against the
/// exhaustive subset search.
pub fn default_oracle_check() -> SweepConfig {
    SweepConfig {
        base: BaseConfig {
            n_antennas: 4,
            n_sus: 2,
            n_pus: 1,
            power_budget: db_to_linear(10.0),
            interference_caps: vec![db_to_linear(1.0)],
            rate_floors: vec![bits_to_nats(0.5); 2],
            noise_powers: vec![1.0; 2],
            omega: 100.0,
        },
        sweep_variable: SweepVariable::PBsDb,
        sweep_values: vec![SweepValue::Scalar(10.0)],
        n_trials: 50,
        seed: 1,
        designs: vec![Design::JbfasImproved, Design::Oracle],
        output_dir: PathBuf::from("out"),
    }
}
