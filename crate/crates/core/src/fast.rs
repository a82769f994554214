//! Fast-pathway candidate generation: a Gaussian latent is mapped to
//! curvature and acceleration knot profiles and rolled out with point
//! kinematics, producing N_C x N_K multi-modal candidate trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::KinematicsConfig;
use crate::error::{Error, Result};
use crate::world::{NavigationCommand, Pose2D, Scenario, Trajectory, Waypoint, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub trajectory: Trajectory,
    pub command: NavigationCommand,
    pub latent: LatentSample,
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    pub n_k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Draw z ~ N(mu, sigma^2) componentwise, deterministically from the seed.
pub fn sample_latent(seed: u64, mu: &[f64], sigma: &[f64]) -> Result<LatentSample> {
    if mu.len() != sigma.len() {
        return Err(Error::LengthMismatch {
            detail: format!("mu has {} components, sigma {}", mu.len(), sigma.len()),
        });
    }
    if mu.is_empty() {
        return Err(Error::InvalidArgument("latent dimension must be >= 1".into()));
    }
    if let Some(s) = sigma.iter().find(|&&s| s <= 0.0) {
        return Err(Error::InvalidArgument(format!("non-positive sigma {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = mu
        .iter()
        .zip(sigma)
        .map(|(&m, &s)| Normal::new(m, s).unwrap().sample(&mut rng))
        .collect();
    Ok(LatentSample { z })
}

/// Piecewise-linear interpolation of `knots` over `n` steps.
fn interpolate_knots(knots: &[f64], n: usize) -> Vec<f64> {
    if knots.len() == 1 {
        return vec![knots[0]; n];
    }
    (0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64 * (knots.len() - 1) as f64
            };
            let k = (t.floor() as usize).min(knots.len() - 2);
            let frac = t - k as f64;
            knots[k] * (1.0 - frac) + knots[k + 1] * frac
        })
        .collect()
}

fn command_bias(command: NavigationCommand, cfg: &KinematicsConfig) -> f64 {
    match command {
        NavigationCommand::Left => cfg.command_curvature_bias,
        NavigationCommand::Straight => 0.0,
        NavigationCommand::Right => -cfg.command_curvature_bias,
    }
}

/// Roll out a single candidate from a latent: the first `curvature_knots`
/// components become a clamped curvature profile (biased by the command),
/// the rest a clamped acceleration profile.
pub fn rollout(
    ego: &Waypoint,
    latent: &LatentSample,
    command: NavigationCommand,
    cfg: &KinematicsConfig,
    dt: f64,
) -> Trajectory {
    let steps = cfg.horizon_steps - 1;
    let kappa_knots: Vec<f64> = latent.z[..cfg.curvature_knots]
        .iter()
        .map(|z| (command_bias(command, cfg) + z * cfg.curvature_scale).clamp(-cfg.kappa_max, cfg.kappa_max))
        .collect();
    let accel_knots: Vec<f64> = latent.z[cfg.curvature_knots..]
        .iter()
        .map(|z| (z * cfg.accel_scale).clamp(cfg.a_min, cfg.a_max))
        .collect();
    let kappa = interpolate_knots(&kappa_knots, steps);
    let accel = interpolate_knots(&accel_knots, steps);

    let mut waypoints = Vec::with_capacity(cfg.horizon_steps);
    waypoints.push(*ego);
    let mut pose = ego.pose;
    let mut v = ego.speed.max(0.0);
    for i in 0..steps {
        let yaw = pose.yaw + v * kappa[i] * dt;
        let (s, c) = pose.yaw.sin_cos();
        let x = pose.x + v * c * dt;
        let y = pose.y + v * s * dt;
        v = (v + accel[i] * dt).clamp(0.0, cfg.v_max);
        pose = Pose2D::new(x, y, yaw);
        waypoints.push(Waypoint { pose, speed: v });
    }
    Trajectory { waypoints, dt }
}

/// Generate n_k candidates for each of the three navigation commands.
/// Pure in (state, scenario, n_k, seed).
pub fn generate_candidates(
    state: &WorldState,
    scenario: &Scenario,
    cfg: &KinematicsConfig,
    n_k: usize,
    seed: u64,
) -> Result<CandidateSet> {
    if n_k == 0 {
        return Err(Error::InvalidArgument("n_k must be >= 1".into()));
    }
    cfg.validate()?;
    let ego = Waypoint {
        pose: state.ego.pose,
        speed: state.ego.velocity,
    };
    let mut candidates = Vec::with_capacity(3 * n_k);
    for (ci, &command) in NavigationCommand::ALL.iter().enumerate() {
        for k in 0..n_k {
            // distinct stream per (command, k), stable under n_k changes
            let sub_seed = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((ci as u64) << 32)
                .wrapping_add(k as u64);
            let latent = sample_latent(sub_seed, &cfg.mu, &cfg.sigma)?;
            let trajectory = rollout(&ego, &latent, command, cfg, scenario.dt);
            candidates.push(Candidate {
                trajectory,
                command,
                latent,
            });
        }
    }
    Ok(CandidateSet { candidates, n_k })
}

/// Mean signed curvature of a trajectory, finite-differenced from headings.
pub fn mean_curvature(traj: &Trajectory) -> f64 {
    if traj.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for w in traj.waypoints.windows(2) {
        let ds = w[0].speed * traj.dt;
        if ds > 1e-9 {
            sum += crate::world::normalize_angle(w[1].pose.yaw - w[0].pose.yaw) / ds;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
