//! Runtime configuration. One file (TOML or JSON, by extension) with
//! tables `reward`, `uncertainty`, `arbitration`, `fusion`, `reasoner`,
//! and `kinematics`. Every field has a default so a partial file works.
//!
//! The CLI also honors the `DPD_CONFIG` environment variable as a config
//! path when `--config` is not given.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::RewardWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub reward: RewardWeights,
    pub uncertainty: UncertaintyConfig,
    pub arbitration: SwitchConfig,
    pub fusion: FusionConfig,
    pub reasoner: ReasonerConfig,
    pub kinematics: KinematicsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    /// Rolling residual window, in ticks.
    pub window_ticks: usize,
    /// Floor for the Laplace scale estimate.
    pub epsilon_b: f64,
    /// Weight of the candidate-reward IQR term in the uncertainty score.
    pub lambda_spread: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            window_ticks: 5,
            epsilon_b: 1e-6,
            lambda_spread: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchConfig {
    /// Reward threshold; the fast pathway requires best_reward > tau_reward.
    /// The default comes from the bundled-suite calibration procedure
    /// (25th percentile of fast-only best rewards).
    pub tau_reward: f64,
    /// Uncertainty threshold (75th percentile under the same calibration).
    pub tau_uncertainty: f64,
    pub low_reward_quantile: f64,
    pub slow_cooldown_ticks: u32,
    /// Spread below which a candidate reward distribution counts as flat.
    pub epsilon_flat: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            tau_reward: -7.414,
            tau_uncertainty: 8.571,
            low_reward_quantile: 0.25,
            slow_cooldown_ticks: 2,
            epsilon_flat: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Embedding dimension d_A shared by the ego token and action rows.
    pub d_a: usize,
    pub embedding_seed: u64,
    /// Stop constraint: maximum allowed final speed when a stop bit is set.
    pub stop_speed: f64,
    /// Margin held back from the stop reference (light/sign/pedestrian).
    pub stop_margin: f64,
    /// Mean |curvature| below which a candidate counts as lane-keeping.
    pub min_lane_change_curvature: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            d_a: 16,
            embedding_seed: 7,
            stop_speed: 0.5,
            stop_margin: 4.0,
            min_lane_change_curvature: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReasonerTransport {
    /// The deterministic built-in rule table.
    RuleBased,
    /// HTTP POST of the wire-format request to `url`.
    Http { url: String },
    /// One JSON line over a child process's stdin/stdout.
    Subprocess { command: String, args: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReasonerConfig {
    pub transport: ReasonerTransport,
    pub timeout_ms: u64,
    /// Forward pinhole camera used for the visual prompt.
    pub camera_fov: f64,
    pub camera_height: f64,
    /// Hazard corridor used by the rule table (pedestrians).
    pub corridor_length: f64,
    pub corridor_half_width: f64,
    /// Wider corridor used for vehicle conflicts.
    pub vehicle_corridor_half_width: f64,
    /// Look-ahead for controls (lights/signs/intersection detection).
    pub control_lookahead: f64,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            transport: ReasonerTransport::RuleBased,
            timeout_ms: 500,
            camera_fov: std::f64::consts::FRAC_PI_2,
            camera_height: 1.5,
            corridor_length: 20.0,
            corridor_half_width: 2.0,
            vehicle_corridor_half_width: 4.0,
            control_lookahead: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    /// Planning horizon T_s in steps; paired with the scenario dt.
    pub horizon_steps: usize,
    /// Candidates per navigation command.
    pub n_k: usize,
    /// Curvature bound, 1/m.
    pub kappa_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_max: f64,
    /// Latent layout: the first `curvature_knots` components map to
    /// curvature, the next `accel_knots` to acceleration.
    pub curvature_knots: usize,
    pub accel_knots: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Scale from latent units to curvature / acceleration.
    pub curvature_scale: f64,
    pub accel_scale: f64,
    /// Signed curvature bias applied for left/right commands.
    pub command_curvature_bias: f64,
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            horizon_steps: 6,
            n_k: 6,
            kappa_max: 0.2,
            a_min: -4.0,
            a_max: 2.0,
            v_max: 15.0,
            curvature_knots: 4,
            accel_knots: 4,
            mu: vec![0.0; 8],
            sigma: vec![1.0; 8],
            curvature_scale: 0.03,
            accel_scale: 1.5,
            command_curvature_bias: 0.08,
        }
    }
}

impl KinematicsConfig {
    pub fn d_z(&self) -> usize {
        self.curvature_knots + self.accel_knots
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_steps < 3 {
            return Err(Error::invariant("kinematics.horizon_steps", "must be >= 3"));
        }
        if self.mu.len() != self.d_z() || self.sigma.len() != self.d_z() {
            return Err(Error::invariant(
                "kinematics.mu/sigma",
                format!("must have length d_z = {}", self.d_z()),
            ));
        }
        if self.sigma.iter().any(|&s| s <= 0.0) {
            return Err(Error::invariant("kinematics.sigma", "components must be > 0"));
        }
        Ok(())
    }
}

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.kinematics.validate()?;
        self.reward.validate()?;
        if self.arbitration.tau_uncertainty <= 0.0 {
            return Err(Error::invariant("arbitration.tau_uncertainty", "must be > 0"));
        }
        let q = self.arbitration.low_reward_quantile;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::invariant(
                "arbitration.low_reward_quantile",
                "must lie in (0, 1]",
            ));
        }
        if self.uncertainty.epsilon_b <= 0.0 {
            return Err(Error::invariant("uncertainty.epsilon_b", "must be > 0"));
        }
        if !(self.reasoner.camera_fov > 0.0 && self.reasoner.camera_fov < std::f64::consts::PI) {
            return Err(Error::invariant("reasoner.camera_fov", "must lie in (0, pi)"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn partial_toml_overrides_one_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[arbitration]\ntau_reward = -3.25\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.arbitration.tau_reward, -3.25);
        assert_eq!(cfg.kinematics, KinematicsConfig::default());
    }

    #[test]
    fn bad_sigma_rejected() {
        let mut cfg = Config::default();
        cfg.kinematics.sigma[0] = 0.0;
        assert!(cfg.validate().is_err());
    }
}
