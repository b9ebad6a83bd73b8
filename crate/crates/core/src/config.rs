//! Per-case constants and the scenario spaces they induce.
//!
//! Defaults follow the reference calibration; everything marked as a
//! stand-in (synthetic NDD shapes, the test-subject ACC law, the highway CAV
//! planner) is a local modelling choice kept here so a run is fully described
//! by one serializable document.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::space::{Dim, ScenarioSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    Cutin,
    HighwayExit,
    CarFollowing,
}

impl CaseId {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Cutin => "cutin",
            CaseId::HighwayExit => "highway_exit",
            CaseId::CarFollowing => "car_following",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cutin" | "cut-in" | "cut_in" => Ok(CaseId::Cutin),
            "highway_exit" | "highway-exit" | "highway" => Ok(CaseId::HighwayExit),
            "car_following" | "car-following" | "carfollowing" => Ok(CaseId::CarFollowing),
            other => Err(config_err!("unknown case id {:?}", other)),
        }
    }
}

/// Which driving model is placed in the ego seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectId {
    /// The surrogate model used to score scenarios (IDM follower, or the
    /// MOBIL-based exit planner on the highway).
    Surrogate,
    /// The vehicle under test (ACC+AEB follower, or the CAV exit planner).
    Cav,
}

impl FromStr for SubjectId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sm" | "surrogate" | "idm" => Ok(SubjectId::Surrogate),
            "cav" | "acc_aeb" | "acc-aeb" => Ok(SubjectId::Cav),
            other => Err(config_err!("unknown model id {:?}", other)),
        }
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubjectId::Surrogate => "sm",
            SubjectId::Cav => "cav",
        })
    }
}

/// Grid specification for one dimension, `[lower, upper]` with `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl GridSpec {
    pub const fn new(lower: f64, upper: f64, step: f64) -> Self {
        GridSpec { lower, upper, step }
    }
}

/// Intelligent-driver-model parameters with speed and acceleration limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Maximum acceleration of the free-road term, m/s^2.
    pub alpha: f64,
    /// Desired speed, m/s.
    pub desired_speed: f64,
    /// Free-road exponent.
    pub exponent: f64,
    /// Jam distance, m.
    pub s0: f64,
    /// Length offset subtracted from the range, m.
    pub length: f64,
    /// Time headway, s.
    pub headway: f64,
    /// Comfortable deceleration, m/s^2.
    pub comfortable_decel: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Accident range threshold, m.
    pub d_acci: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            alpha: 2.0,
            desired_speed: 18.0,
            exponent: 4.0,
            s0: 2.0,
            length: 4.0,
            headway: 1.0,
            comfortable_decel: 3.0,
            v_min: 2.0,
            v_max: 40.0,
            a_min: -4.0,
            a_max: 2.0,
            d_acci: 1.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.comfortable_decel > 0.0 && self.desired_speed > 0.0 && self.alpha > 0.0) {
            return Err(config_err!("IDM alpha, desired speed and comfortable deceleration must be > 0"));
        }
        if !(self.v_max > self.v_min && self.a_max > self.a_min) {
            return Err(config_err!("IDM speed/acceleration boxes are empty"));
        }
        if !(self.d_acci > 0.0) {
            return Err(config_err!("d_acci must be > 0"));
        }
        Ok(())
    }
}

/// Test subject for the longitudinal cases: IDM-family ACC plus an AEB
/// override that commands full braking below an ETTC trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccParams {
    pub idm: IdmParams,
    /// AEB fires when ETTC is strictly below this value, s.
    pub aeb_ettc: f64,
    /// Deceleration authority of the ACC law alone; only the AEB reaches
    /// `idm.a_min`, m/s^2.
    pub acc_min: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        AccParams {
            idm: IdmParams {
                headway: 0.6,
                desired_speed: 30.0,
                ..IdmParams::default()
            },
            aeb_ettc: 1.5,
            acc_min: -3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CutinParams {
    pub range: GridSpec,
    pub range_rate: GridSpec,
    pub ego_speed: f64,
    pub horizon: f64,
    pub dt: f64,
    /// ETTC normalization, s.
    pub u_i: f64,
    pub w: f64,
    pub common_set: CommonSetMode,
    /// Exposure threshold defining the common set.
    pub common_threshold: f64,
    pub exploration_m: f64,
    pub starts: usize,
    pub epsilon: f64,
    pub beta: f64,
}

impl Default for CutinParams {
    fn default() -> Self {
        CutinParams {
            range: GridSpec::new(0.0, 90.0, 2.0),
            range_rate: GridSpec::new(-20.0, 10.0, 0.4),
            ego_speed: 30.0,
            horizon: 10.0,
            dt: 0.1,
            u_i: 100.0,
            w: 1.0,
            common_set: CommonSetMode::Threshold,
            common_threshold: 1e-3,
            exploration_m: 1.0,
            starts: 50,
            epsilon: 0.05,
            beta: 0.3,
        }
    }
}

/// How the common set is drawn from the exposure histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommonSetMode {
    /// Bounding box of every cell above the exposure threshold.
    Threshold,
    /// The single most frequent cell.
    MostFrequent,
}

/// Lane-change planner shape: the constant accelerations it may hold and
/// the time gap it requires to both target-lane vehicles, and the hardest
/// braking a merge may impose on the ego or the new follower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub accels: Vec<f64>,
    pub t_min: f64,
    pub b_safe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HighwayParams {
    pub p0: f64,
    pub v0: f64,
    pub d_cf: f64,
    pub position: GridSpec,
    pub speed: GridSpec,
    pub dt: f64,
    pub dp: f64,
    pub t_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Distance to the off-ramp, m.
    pub exit_distance: f64,
    pub w: f64,
    pub t_min: f64,
    pub u_s: f64,
    pub politeness: f64,
    pub surrogate: PlannerParams,
    pub cav: PlannerParams,
    /// Range grid of the pairwise car-following histogram feeding P(x).
    pub pair_range: GridSpec,
    pub common_set: CommonSetMode,
    pub common_threshold: f64,
    pub starts: usize,
    pub exploration_m: f64,
    pub epsilon: f64,
    pub beta: f64,
}

impl Default for HighwayParams {
    fn default() -> Self {
        HighwayParams {
            p0: 0.0,
            v0: 30.0,
            d_cf: 2.0,
            position: GridSpec::new(-100.0, 200.0, 5.0),
            speed: GridSpec::new(20.0, 40.0, 1.0),
            dt: 0.1,
            dp: 5.0,
            t_max: 10.0,
            a_min: -4.0,
            a_max: 2.0,
            v_min: 20.0,
            v_max: 40.0,
            exit_distance: 200.0,
            w: 1.0,
            t_min: 0.5,
            u_s: 500.0,
            politeness: 0.1,
            surrogate: PlannerParams {
                accels: vec![-4.0, -2.0, 0.0, 2.0],
                t_min: 0.5,
                b_safe: 3.0,
            },
            // same profiles, tolerates harder braking in the new lane
            cav: PlannerParams {
                accels: vec![-4.0, -2.0, 0.0, 2.0],
                t_min: 0.5,
                b_safe: 3.5,
            },
            pair_range: GridSpec::new(0.0, 300.0, 5.0),
            common_set: CommonSetMode::MostFrequent,
            common_threshold: 1e-3,
            starts: 100,
            exploration_m: 1.0,
            epsilon: 0.10,
            beta: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarFollowingParams {
    pub speed: GridSpec,
    pub range: GridSpec,
    pub range_rate: GridSpec,
    pub action: GridSpec,
    /// Decision epoch of the lead vehicle, s.
    pub epoch: f64,
    pub dt: f64,
    /// Decision epochs per scenario.
    pub horizon: usize,
    pub alpha_lr: f64,
    pub delta0: f64,
    pub max_updates: u64,
    pub p_s_episodes: u64,
    pub epsilon: f64,
    pub beta: f64,
}

impl Default for CarFollowingParams {
    fn default() -> Self {
        CarFollowingParams {
            speed: GridSpec::new(20.0, 40.0, 1.0),
            range: GridSpec::new(0.0, 115.0, 1.0),
            range_rate: GridSpec::new(-10.0, 8.0, 1.0),
            action: GridSpec::new(-4.0, 2.0, 0.2),
            epoch: 1.0,
            dt: 0.1,
            horizon: 30,
            alpha_lr: 1.0,
            delta0: 1e-10,
            max_updates: 300_000_000,
            p_s_episodes: 1_000_000,
            epsilon: 0.1,
            beta: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationParams {
    pub confidence: f64,
    pub min_tests: u64,
    pub max_tests: u64,
    /// Largest space `exhaustive_truth` will enumerate.
    pub exhaustive_cap: usize,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        EvaluationParams {
            confidence: 0.95,
            min_tests: 30,
            max_tests: 20_000_000,
            exhaustive_cap: 10_000,
        }
    }
}

impl EvaluationParams {
    pub fn z_alpha(&self) -> f64 {
        crate::estimate::z_two_sided(self.confidence)
    }
}

/// One truncated normal component over (range, range rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub sd: [f64; 2],
}

/// Parametric shape of the synthetic naturalistic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NddParams {
    pub version: u32,
    pub cutin_events: usize,
    pub cutin_mixture: Vec<MixtureComponent>,
    /// Car-following points generated by default; each comes with one
    /// free-driving record.
    pub following_events: usize,
    pub lead_speed_mean: f64,
    pub lead_speed_sd: f64,
    /// Car-following ranges are `range_offset + Gamma(shape, scale)`, m.
    pub range_offset: f64,
    pub range_shape: f64,
    pub range_scale: f64,
    pub range_rate_sd: f64,
    pub action_sd: f64,
}

impl NddParams {
    /// Default record count for a case.
    pub fn default_events(&self, case: CaseId) -> usize {
        match case {
            CaseId::Cutin => self.cutin_events,
            _ => self.following_events,
        }
    }
}

impl Default for NddParams {
    fn default() -> Self {
        NddParams {
            version: 1,
            cutin_events: 414_770,
            cutin_mixture: vec![
                MixtureComponent {
                    weight: 0.65,
                    mean: [14.0, 0.0],
                    sd: [7.0, 0.8],
                },
                MixtureComponent {
                    weight: 0.34,
                    mean: [38.0, 0.4],
                    sd: [22.0, 1.8],
                },
                // short, fast-closing cut-ins
                MixtureComponent {
                    weight: 0.01,
                    mean: [3.0, -9.0],
                    sd: [1.0, 1.0],
                },
            ],
            following_events: 200_000,
            lead_speed_mean: 24.0,
            lead_speed_sd: 3.0,
            range_offset: 2.0,
            range_shape: 3.0,
            range_scale: 12.0,
            range_rate_sd: 1.5,
            action_sd: 1.0,
        }
    }
}

/// Every constant of a case study plus the campaign seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case: CaseId,
    pub seed: u64,
    #[serde(default)]
    pub idm: IdmParams,
    #[serde(default)]
    pub acc: AccParams,
    #[serde(default)]
    pub cutin: CutinParams,
    #[serde(default)]
    pub highway: HighwayParams,
    #[serde(default)]
    pub car_following: CarFollowingParams,
    #[serde(default)]
    pub evaluation: EvaluationParams,
    #[serde(default)]
    pub ndd: NddParams,
}

impl CaseConfig {
    pub fn new(case: CaseId) -> Self {
        CaseConfig {
            case,
            seed: 1,
            idm: IdmParams::default(),
            acc: AccParams::default(),
            cutin: CutinParams::default(),
            highway: HighwayParams::default(),
            car_following: CarFollowingParams::default(),
            evaluation: EvaluationParams::default(),
            ndd: NddParams::default(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self.case {
            CaseId::Cutin => self.cutin.epsilon,
            CaseId::HighwayExit => self.highway.epsilon,
            CaseId::CarFollowing => self.car_following.epsilon,
        }
    }

    pub fn beta(&self) -> f64 {
        match self.case {
            CaseId::Cutin => self.cutin.beta,
            CaseId::HighwayExit => self.highway.beta,
            CaseId::CarFollowing => self.car_following.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.idm.validate()?;
        self.acc.idm.validate()?;
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(config_err!("{} must lie in (0, 1), got {}", name, v))
            }
        };
        for (case, eps, beta) in [
            ("cutin", self.cutin.epsilon, self.cutin.beta),
            ("highway", self.highway.epsilon, self.highway.beta),
            ("car_following", self.car_following.epsilon, self.car_following.beta),
        ] {
            unit(&alloc::format!("{case}.epsilon"), eps)?;
            unit(&alloc::format!("{case}.beta"), beta)?;
        }
        unit("evaluation.confidence", self.evaluation.confidence)?;
        if !(self.cutin.w > 0.0 && self.cutin.w <= 1.0) {
            return Err(config_err!("cutin.w must lie in (0, 1]"));
        }
        if !(self.cutin.u_i > 0.0) {
            return Err(config_err!("cut-in normalization factors must be > 0"));
        }
        let hw = &self.highway;
        if !(hw.v_max > hw.v_min && hw.a_max > hw.a_min && hw.t_min > 0.0 && hw.u_s > 0.0) {
            return Err(config_err!("highway kinematic limits are inconsistent"));
        }
        if !(0.0..=1.0).contains(&hw.politeness) {
            return Err(config_err!("politeness must lie in [0, 1]"));
        }
        if hw.surrogate.accels.is_empty() || hw.cav.accels.is_empty() {
            return Err(config_err!("planner acceleration sets must be nonempty"));
        }
        let cf = &self.car_following;
        if !(cf.alpha_lr > 0.0 && cf.alpha_lr <= 1.0) {
            return Err(config_err!("alpha_lr must lie in (0, 1]"));
        }
        if cf.horizon == 0 || !(cf.delta0 > 0.0) {
            return Err(config_err!("car-following horizon and delta0 must be positive"));
        }
        if self.evaluation.min_tests < 2 {
            return Err(config_err!("evaluation.min_tests must be at least 2"));
        }
        Ok(())
    }
}

fn closed(name: &str, g: GridSpec, unit: &str) -> Result<Dim> {
    Dim::closed(name, g.lower, g.upper, g.step, unit)
}

fn half_open(name: &str, g: GridSpec, unit: &str) -> Result<Dim> {
    Dim::half_open(name, g.lower, g.upper, g.step, unit)
}

/// Decision-variable grid of a case. For the car-following case this is the
/// MDP state grid `(v_bv, R, R_dot)`; see [`action_space`] for its actions.
pub fn build_space(config: &CaseConfig) -> Result<ScenarioSpace> {
    match config.case {
        CaseId::Cutin => {
            let c = &config.cutin;
            Ok(ScenarioSpace::new(vec![
                half_open("range", c.range, "m")?,
                closed("range_rate", c.range_rate, "m/s")?,
            ])?
            .with_param("ego_speed", c.ego_speed))
        }
        CaseId::HighwayExit => {
            let h = &config.highway;
            Ok(ScenarioSpace::new(vec![
                closed("p1", h.position, "m")?,
                closed("v1", h.speed, "m/s")?,
                closed("p2", h.position, "m")?,
                closed("v2", h.speed, "m/s")?,
            ])?
            .with_param("p0", h.p0)
            .with_param("v0", h.v0)
            .with_param("exit_distance", h.exit_distance))
        }
        CaseId::CarFollowing => state_space(&config.car_following),
    }
}

pub fn state_space(cf: &CarFollowingParams) -> Result<ScenarioSpace> {
    ScenarioSpace::new(vec![
        closed("v_bv", cf.speed, "m/s")?,
        half_open("range", cf.range, "m")?,
        closed("range_rate", cf.range_rate, "m/s")?,
    ])
}

pub fn action_space(cf: &CarFollowingParams) -> Result<ScenarioSpace> {
    ScenarioSpace::new(vec![closed("u", cf.action, "m/s^2")?])
}

/// Grid of the pairwise `(v_lead, R, v_follow)` histogram behind the
/// highway exposure model.
pub fn pair_space(h: &HighwayParams) -> Result<ScenarioSpace> {
    ScenarioSpace::new(vec![
        closed("v_lead", h.speed, "m/s")?,
        half_open("range", h.pair_range, "m")?,
        closed("v_follow", h.speed, "m/s")?,
    ])
}

/// Human-readable names of the per-case constants, used by `inspect`.
pub fn describe(config: &CaseConfig) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut push = |k: &str, v: f64| out.push((String::from(k), v));
    push("epsilon", config.epsilon());
    push("beta", config.beta());
    push("confidence", config.evaluation.confidence);
    push("z_alpha", config.evaluation.z_alpha());
    out
}
