//! The trajectory scoring model: a weighted sum of safety, comfort,
//! efficiency, and economic cost components, plus top-K selection.
//!
//! Sign convention: every component is a cost, `total_cost` is their
//! weighted sum, and `reward = -total_cost`, so "highest reward" selection
//! matches cheapest-cost selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fast::CandidateSet;
use crate::world::{distance_to_nearest_obstacle, Scenario, Trajectory, TrafficControlKind, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub alpha_safety: f64,
    pub alpha_comfort: f64,
    pub alpha_efficiency: f64,
    pub alpha_economic: f64,
    pub w_coll: f64,
    pub w_dist: f64,
    pub w_deviation: f64,
    pub w_speed_safety: f64,
    pub w_lat: f64,
    pub w_lon: f64,
    pub w_cent: f64,
    pub w_speed_eff: f64,
    pub w_time: f64,
    /// Exponential decay scale for the collision term, meters.
    pub sigma_coll: f64,
    pub k_v: f64,
    pub c_v: f64,
    pub k_a: f64,
    pub c_a: f64,
    /// Half-width of the lateral corridor around the nearest lane
    /// centerline used by the C_dist term.
    pub corridor_half_width: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            alpha_safety: 2.0,
            alpha_comfort: 1.0,
            alpha_efficiency: 1.0,
            alpha_economic: 1.0,
            w_coll: 1.0,
            w_dist: 1.0,
            w_deviation: 1.0,
            w_speed_safety: 1.0,
            w_lat: 1.0,
            w_lon: 1.0,
            w_cent: 1.0,
            w_speed_eff: 1.0,
            w_time: 1.0,
            sigma_coll: 2.0,
            k_v: 0.05,
            c_v: 0.1,
            k_a: 0.1,
            c_a: 0.05,
            corridor_half_width: 1.5,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_coll <= 0.0 {
            return Err(Error::invariant("reward.sigma_coll", "must be > 0"));
        }
        if self.corridor_half_width <= 0.0 {
            return Err(Error::invariant("reward.corridor_half_width", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-component costs and the total for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub c_coll: f64,
    pub c_dist: f64,
    pub c_deviation: f64,
    pub c_speed_safety: f64,
    pub c_safety: f64,
    pub c_lat: f64,
    pub c_lon: f64,
    pub c_cent: f64,
    pub c_comfort: f64,
    pub c_speed_eff: f64,
    pub c_time: f64,
    pub c_efficiency: f64,
    pub c_economic: f64,
    pub total_cost: f64,
    pub reward: f64,
}

impl RewardBreakdown {
    /// Recompute the total from the stored components (consistency check).
    pub fn recompose_total(&self, w: &RewardWeights) -> f64 {
        w.alpha_safety * self.c_safety
            + w.alpha_comfort * self.c_comfort
            + w.alpha_efficiency * self.c_efficiency
            + w.alpha_economic * self.c_economic
    }

    /// The four component costs as the reward vector used by the
    /// Laplace uncertainty model.
    pub fn component_vector(&self) -> [f64; 4] {
        [self.c_safety, self.c_comfort, self.c_efficiency, self.c_economic]
    }
}

/// Worst-case clearance over the horizon: min over waypoints of the
/// distance to the nearest obstacle in the time-aligned state.
pub fn min_clearance(traj: &Trajectory, states: &[WorldState]) -> f64 {
    traj.waypoints
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let s = &states[i.min(states.len() - 1)];
            distance_to_nearest_obstacle(w.pose.x, w.pose.y, s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// exp(-d_coll / sigma_coll), in (0, 1].
pub fn collision_cost(traj: &Trajectory, states: &[WorldState], sigma_coll: f64) -> f64 {
    (-min_clearance(traj, states) / sigma_coll).exp()
}

/// Sum of (1 - cos(theta_i - theta_target_i)) over waypoints.
pub fn deviation_cost(traj: &Trajectory, theta_target: &[f64]) -> Result<f64> {
    if theta_target.len() != traj.len() {
        return Err(Error::LengthMismatch {
            detail: format!(
                "trajectory has {} waypoints, theta_target {}",
                traj.len(),
                theta_target.len()
            ),
        });
    }
    Ok(traj
        .waypoints
        .iter()
        .zip(theta_target)
        .map(|(w, &t)| 1.0 - (w.pose.yaw - t).cos())
        .sum())
}

/// Mean normalized penetration beyond the lateral corridor around the
/// nearest lane centerline. 0 when the scenario has no lanes.
pub fn corridor_cost(traj: &Trajectory, scenario: &Scenario, half_width: f64) -> f64 {
    if scenario.lanes.is_empty() {
        return 0.0;
    }
    let sum: f64 = traj
        .waypoints
        .iter()
        .map(|w| {
            let lat = scenario
                .lanes
                .iter()
                .map(|l| l.project(w.pose.x, w.pose.y).0)
                .fold(f64::INFINITY, f64::min);
            (lat - half_width).max(0.0) / half_width
        })
        .sum();
    sum / traj.len() as f64
}

fn posted_limit_at(scenario: &Scenario, x: f64, y: f64) -> Option<f64> {
    let lane = scenario.nearest_lane(x, y)?;
    let mut limit = scenario.lanes[lane].speed_limit;
    for c in &scenario.controls {
        if c.applies_to_lane == lane {
            if let TrafficControlKind::SpeedLimit { value } = c.kind {
                limit = limit.min(value);
            }
        }
    }
    Some(limit)
}

/// Posted-limit violation averaged over waypoints:
/// mean(max(0, v - limit) / limit).
pub fn speed_limit_cost(traj: &Trajectory, scenario: &Scenario) -> f64 {
    let sum: f64 = traj
        .waypoints
        .iter()
        .map(|w| match posted_limit_at(scenario, w.pose.x, w.pose.y) {
            Some(limit) => (w.speed - limit).max(0.0) / limit,
            None => 0.0,
        })
        .sum();
    sum / traj.len() as f64
}

pub struct SafetyTerms {
    pub c_coll: f64,
    pub c_dist: f64,
    pub c_deviation: f64,
    pub c_speed_safety: f64,
    pub c_safety: f64,
}

pub fn safety_cost(
    traj: &Trajectory,
    states: &[WorldState],
    scenario: &Scenario,
    theta_target: &[f64],
    w: &RewardWeights,
) -> Result<SafetyTerms> {
    let c_coll = collision_cost(traj, states, w.sigma_coll);
    let c_dist = corridor_cost(traj, scenario, w.corridor_half_width);
    let c_deviation = deviation_cost(traj, theta_target)?;
    let c_speed_safety = speed_limit_cost(traj, scenario);
    Ok(SafetyTerms {
        c_coll,
        c_dist,
        c_deviation,
        c_speed_safety,
        c_safety: w.w_coll * c_coll
            + w.w_dist * c_dist
            + w.w_deviation * c_deviation
            + w.w_speed_safety * c_speed_safety,
    })
}

pub struct ComfortTerms {
    pub c_lat: f64,
    pub c_lon: f64,
    pub c_cent: f64,
    pub c_comfort: f64,
}

/// Finite-differenced accelerations over the waypoint sequence.
/// a_lon from speed differences, a_lat = v * yaw_rate, and the
/// centrifugal term v^2 * |kappa| with kappa = yaw_rate / v.
pub fn comfort_cost(traj: &Trajectory, w: &RewardWeights) -> Result<ComfortTerms> {
    if traj.len() < 3 {
        return Err(Error::InvalidArgument(
            "comfort cost needs at least 3 waypoints".into(),
        ));
    }
    let dt = traj.dt;
    let steps = traj.len() - 1;
    let mut sum_lat = 0.0;
    let mut sum_lon = 0.0;
    let mut sum_cent = 0.0;
    for win in traj.waypoints.windows(2) {
        let dv = win[1].speed - win[0].speed;
        let dyaw = crate::world::normalize_angle(win[1].pose.yaw - win[0].pose.yaw);
        let v = win[0].speed;
        sum_lon += (dv / dt).abs();
        sum_lat += (v * dyaw / dt).abs();
        // v^2 |kappa| with kappa = dyaw / (v dt); collapses to v |dyaw| / dt
        sum_cent += if v > 1e-9 { v * (dyaw / dt).abs() } else { 0.0 };
    }
    let n = steps as f64;
    let c_lat = sum_lat / n;
    let c_lon = sum_lon / n;
    let c_cent = sum_cent / n;
    Ok(ComfortTerms {
        c_lat,
        c_lon,
        c_cent,
        c_comfort: w.w_lat * c_lat + w.w_lon * c_lon + w.w_cent * c_cent,
    })
}

pub struct EfficiencyTerms {
    pub c_speed_eff: f64,
    pub c_time: f64,
    pub c_efficiency: f64,
}

/// Mean squared target-speed deviation plus a horizon-time term that is
/// constant across same-horizon candidates.
pub fn efficiency_cost(traj: &Trajectory, v_target: f64, w: &RewardWeights) -> Result<EfficiencyTerms> {
    if v_target <= 0.0 {
        return Err(Error::InvalidArgument("v_target must be > 0".into()));
    }
    let c_speed_eff = traj
        .waypoints
        .iter()
        .map(|wp| (wp.speed - v_target).powi(2))
        .sum::<f64>()
        / traj.len() as f64;
    let c_time = traj.len() as f64 * traj.dt;
    Ok(EfficiencyTerms {
        c_speed_eff,
        c_time,
        c_efficiency: w.w_speed_eff * c_speed_eff + w.w_time * c_time,
    })
}

/// Piecewise energy model: mean(k_v v + c_v) over waypoints plus
/// mean(k_a |a| + c_a) over steps.
pub fn economic_cost(traj: &Trajectory, w: &RewardWeights) -> f64 {
    let speed_term = traj
        .waypoints
        .iter()
        .map(|wp| w.k_v * wp.speed + w.c_v)
        .sum::<f64>()
        / traj.len() as f64;
    let accel_term = if traj.len() >= 2 {
        traj.waypoints
            .windows(2)
            .map(|win| w.k_a * ((win[1].speed - win[0].speed) / traj.dt).abs() + w.c_a)
            .sum::<f64>()
            / (traj.len() - 1) as f64
    } else {
        w.c_a
    };
    speed_term + accel_term
}

/// Desired heading per waypoint, taken from the nearest lane centerline;
/// with no lanes the waypoint's own heading is used (zero deviation).
pub fn target_headings(traj: &Trajectory, scenario: &Scenario) -> Vec<f64> {
    traj.waypoints
        .iter()
        .map(|w| {
            scenario
                .lanes
                .iter()
                .map(|l| l.project(w.pose.x, w.pose.y))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, heading, _)| heading)
                .unwrap_or(w.pose.yaw)
        })
        .collect()
}

pub fn total_reward(
    traj: &Trajectory,
    states: &[WorldState],
    scenario: &Scenario,
    w: &RewardWeights,
) -> Result<RewardBreakdown> {
    let theta = target_headings(traj, scenario);
    let s = safety_cost(traj, states, scenario, &theta, w)?;
    let c = comfort_cost(traj, w)?;
    let e = efficiency_cost(traj, scenario.v_target, w)?;
    let c_economic = economic_cost(traj, w);
    let total_cost = w.alpha_safety * s.c_safety
        + w.alpha_comfort * c.c_comfort
        + w.alpha_efficiency * e.c_efficiency
        + w.alpha_economic * c_economic;
    Ok(RewardBreakdown {
        c_coll: s.c_coll,
        c_dist: s.c_dist,
        c_deviation: s.c_deviation,
        c_speed_safety: s.c_speed_safety,
        c_safety: s.c_safety,
        c_lat: c.c_lat,
        c_lon: c.c_lon,
        c_cent: c.c_cent,
        c_comfort: c.c_comfort,
        c_speed_eff: e.c_speed_eff,
        c_time: e.c_time,
        c_efficiency: e.c_efficiency,
        c_economic,
        total_cost,
        reward: -total_cost,
    })
}

/// Score every candidate in the set; sequential reference path.
pub fn score_candidates_seq(
    set: &CandidateSet,
    states: &[WorldState],
    scenario: &Scenario,
    w: &RewardWeights,
) -> Result<Vec<RewardBreakdown>> {
    set.candidates
        .iter()
        .map(|c| total_reward(&c.trajectory, states, scenario, w))
        .collect()
}

/// Score every candidate in the set. With the `parallel` feature the
/// candidates are scored data-parallel; results are identical to the
/// sequential path.
#[cfg(feature = "parallel")]
pub fn score_candidates(
    set: &CandidateSet,
    states: &[WorldState],
    scenario: &Scenario,
    w: &RewardWeights,
) -> Result<Vec<RewardBreakdown>> {
    use rayon::prelude::*;
    set.candidates
        .par_iter()
        .map(|c| total_reward(&c.trajectory, states, scenario, w))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn score_candidates(
    set: &CandidateSet,
    states: &[WorldState],
    scenario: &Scenario,
    w: &RewardWeights,
) -> Result<Vec<RewardBreakdown>> {
    score_candidates_seq(set, states, scenario, w)
}

/// Indices of the k highest-reward candidates, descending. Ties break by
/// lower safety cost, then lower index.
pub fn select_top_k(scores: &[RewardBreakdown], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds candidate count {}",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .reward
            .total_cmp(&scores[a].reward)
            .then(scores[a].c_safety.total_cmp(&scores[b].c_safety))
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{AgentBox, AgentKind, Pose2D, Waypoint};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn straight_traj(n: usize, v: f64, dt: f64) -> Trajectory {
        Trajectory {
            dt,
            waypoints: (0..n)
                .map(|i| Waypoint {
                    pose: Pose2D::new(i as f64 * v * dt, 0.0, 0.0),
                    speed: v,
                })
                .collect(),
        }
    }

    fn empty_state() -> WorldState {
        WorldState {
            tick: 0,
            ego: AgentBox {
                pose: Pose2D::new(0.0, 0.0, 0.0),
                z: 0.0,
                length: 4.0,
                width: 1.8,
                height: 1.5,
                velocity: 0.0,
                kind: AgentKind::Vehicle,
            },
            agents: vec![],
            controls: vec![],
        }
    }

    fn scenario() -> Scenario {
        crate::suite::straight_road_scenario(20, 8.0, &[])
    }

    #[test]
    fn collision_cost_closed_forms() {
        let traj = straight_traj(4, 1.0, 0.5);
        let mut st = empty_state();
        // agent boundary touching the first waypoint: d_coll = 0
        st.agents.push(AgentBox {
            pose: Pose2D::new(0.5, 0.0, 0.0),
            z: 0.0,
            length: 1.0,
            width: 1.0,
            height: 1.0,
            velocity: 0.0,
            kind: AgentKind::Static,
        });
        let states = vec![st.clone(); 4];
        assert_relative_eq!(collision_cost(&traj, &states, 2.0), 1.0);

        // d_coll = sigma  =>  exp(-1)
        st.agents[0].pose = Pose2D::new(100.0, 2.5, 0.0);
        // nearest waypoint is (1.5, 0); keep it simple: place box so the
        // min clearance equals sigma exactly
        st.agents[0].pose = Pose2D::new(1.5, 2.5, 0.0);
        let states = vec![st.clone(); 4];
        let sigma = st.agents[0].clearance(1.5, 0.0);
        assert_relative_eq!(collision_cost(&traj, &states, sigma), (-1.0f64).exp(), epsilon = 1e-12);

        // empty world: exp(-sentinel / sigma) ~ 0
        let states = vec![empty_state(); 4];
        assert!(collision_cost(&traj, &states, 2.0) < 1e-300);
    }

    #[test]
    fn collision_cost_strictly_decreasing_in_distance() {
        let traj = straight_traj(2, 0.0, 0.5);
        let mut prev = f64::INFINITY;
        for d in [0.0, 0.5, 1.0, 3.0, 10.0] {
            let mut st = empty_state();
            st.agents.push(AgentBox {
                pose: Pose2D::new(0.5 + d + 0.5, 10.0, 0.0),
                z: 0.0,
                length: 1.0,
                width: 1.0,
                height: 1.0,
                velocity: 0.0,
                kind: AgentKind::Static,
            });
            let c = collision_cost(&traj, &vec![st; 2], 2.0);
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn deviation_cost_trivial_cases() {
        let traj = straight_traj(5, 1.0, 0.5);
        let aligned = vec![0.0; 5];
        assert_relative_eq!(deviation_cost(&traj, &aligned).unwrap(), 0.0);

        let one = Trajectory {
            dt: 0.5,
            waypoints: vec![Waypoint {
                pose: Pose2D::new(0.0, 0.0, 0.0),
                speed: 1.0,
            }],
        };
        let opposite = vec![std::f64::consts::PI];
        assert_relative_eq!(deviation_cost(&one, &opposite).unwrap(), 2.0, epsilon = 1e-12);

        assert!(deviation_cost(&traj, &[0.0; 3]).is_err());
    }

    #[test]
    fn deviation_cost_matches_direct_summation() {
        let headings = [0.3, -1.2, 2.8, -2.9, 0.0, 1.57];
        let targets = [0.1, 1.0, -2.8, 2.9, 3.1, -1.57];
        let traj = Trajectory {
            dt: 0.5,
            waypoints: headings
                .iter()
                .map(|&h| Waypoint {
                    pose: Pose2D::new(0.0, 0.0, h),
                    speed: 1.0,
                })
                .collect(),
        };
        let got = deviation_cost(&traj, &targets).unwrap();
        let oracle: f64 = headings
            .iter()
            .zip(&targets)
            .map(|(&h, &t)| 1.0 - (crate::world::normalize_angle(h) - t).cos())
            .sum();
        assert_relative_eq!(got, oracle, epsilon = 1e-12);
    }

    #[test]
    fn deviation_invariant_under_two_pi_shift() {
        let targets = [0.4, 0.4, 0.4, 0.4];
        let base = Trajectory {
            dt: 0.5,
            waypoints: (0..4)
                .map(|_| Waypoint {
                    pose: Pose2D::new(0.0, 0.0, 1.1),
                    speed: 1.0,
                })
                .collect(),
        };
        let shifted = Trajectory {
            dt: 0.5,
            waypoints: (0..4)
                .map(|_| Waypoint {
                    pose: Pose2D::new(0.0, 0.0, 1.1 + 2.0 * std::f64::consts::PI),
                    speed: 1.0,
                })
                .collect(),
        };
        assert_relative_eq!(
            deviation_cost(&base, &targets).unwrap(),
            deviation_cost(&shifted, &targets).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn comfort_cost_zero_for_constant_straight_line() {
        let w = RewardWeights::default();
        let t = comfort_cost(&straight_traj(6, 3.0, 0.5), &w).unwrap();
        assert_relative_eq!(t.c_comfort, 0.0);
    }

    #[test]
    fn comfort_centrifugal_closed_form_on_arc() {
        // constant speed v = 2 on a kappa = 0.1 arc: c_cent = v^2 kappa = 0.4
        let v = 2.0;
        let kappa = 0.1;
        let dt = 0.5;
        let mut wps = Vec::new();
        let mut pose = Pose2D::new(0.0, 0.0, 0.0);
        for _ in 0..8 {
            wps.push(Waypoint { pose, speed: v });
            let yaw = pose.yaw + v * kappa * dt;
            let (s, c) = pose.yaw.sin_cos();
            pose = Pose2D::new(pose.x + v * c * dt, pose.y + v * s * dt, yaw);
        }
        let traj = Trajectory { dt, waypoints: wps };
        let mut w = RewardWeights::default();
        w.w_lat = 0.0;
        w.w_lon = 0.0;
        w.w_cent = 1.0;
        let t = comfort_cost(&traj, &w).unwrap();
        assert_relative_eq!(t.c_cent, 0.4, epsilon = 1e-9);
        assert_relative_eq!(t.c_comfort, 0.4, epsilon = 1e-9);
    }

    #[test]
    fn comfort_matches_finite_difference_oracle() {
        let w = RewardWeights::default();
        let dt = 0.5;
        let speeds = [2.0, 3.5, 3.0, 4.2, 1.0, 0.5];
        let yaws = [0.0, 0.2, 0.15, -0.1, -0.4, -0.3];
        let traj = Trajectory {
            dt,
            waypoints: speeds
                .iter()
                .zip(&yaws)
                .enumerate()
                .map(|(i, (&v, &y))| Waypoint {
                    pose: Pose2D::new(i as f64, 0.0, y),
                    speed: v,
                })
                .collect(),
        };
        let got = comfort_cost(&traj, &w).unwrap();
        // independent re-differencing
        let n = speeds.len() - 1;
        let mut lat = 0.0;
        let mut lon = 0.0;
        let mut cent = 0.0;
        for i in 0..n {
            lon += ((speeds[i + 1] - speeds[i]) / dt).abs();
            let dyaw = yaws[i + 1] - yaws[i];
            lat += (speeds[i] * dyaw / dt).abs();
            cent += speeds[i].powi(2) * (dyaw / (speeds[i] * dt)).abs();
        }
        assert_relative_eq!(got.c_lon, lon / n as f64, epsilon = 1e-9);
        assert_relative_eq!(got.c_lat, lat / n as f64, epsilon = 1e-9);
        assert_relative_eq!(got.c_cent, cent / n as f64, epsilon = 1e-9);
        assert!(comfort_cost(&straight_traj(2, 1.0, dt), &w).is_err());
    }

    #[test]
    fn efficiency_cost_cases() {
        let mut w = RewardWeights::default();
        w.w_time = 0.0;
        let on_target = straight_traj(6, 8.0, 0.5);
        assert_relative_eq!(efficiency_cost(&on_target, 8.0, &w).unwrap().c_efficiency, 0.0);

        w.w_speed_eff = 1.0;
        let above = straight_traj(6, 9.0, 0.5);
        assert_relative_eq!(efficiency_cost(&above, 8.0, &w).unwrap().c_efficiency, 1.0, epsilon = 1e-12);

        let speeds = [2.0, 7.5, 8.0, 9.1, 3.3];
        let traj = Trajectory {
            dt: 0.5,
            waypoints: speeds
                .iter()
                .map(|&v| Waypoint {
                    pose: Pose2D::new(0.0, 0.0, 0.0),
                    speed: v,
                })
                .collect(),
        };
        let oracle = speeds.iter().map(|v| (v - 8.0f64).powi(2)).sum::<f64>() / speeds.len() as f64;
        assert_relative_eq!(efficiency_cost(&traj, 8.0, &w).unwrap().c_speed_eff, oracle, epsilon = 1e-12);
        assert!(efficiency_cost(&traj, 0.0, &w).is_err());
    }

    #[test]
    fn economic_cost_cases() {
        let mut w = RewardWeights::default();
        let at_rest = straight_traj(5, 0.0, 0.5);
        assert_relative_eq!(economic_cost(&at_rest, &w), w.c_v + w.c_a, epsilon = 1e-12);

        w.k_v = 1.0;
        w.c_v = 0.0;
        w.k_a = 0.0;
        w.c_a = 0.0;
        let cruising = straight_traj(5, 2.0, 0.5);
        assert_relative_eq!(economic_cost(&cruising, &w), 2.0, epsilon = 1e-12);

        // random profile vs direct summation
        let w = RewardWeights::default();
        let speeds = [1.0, 4.0, 2.5, 2.5, 0.0];
        let dt = 0.5;
        let traj = Trajectory {
            dt,
            waypoints: speeds
                .iter()
                .map(|&v| Waypoint {
                    pose: Pose2D::new(0.0, 0.0, 0.0),
                    speed: v,
                })
                .collect(),
        };
        let speed_term =
            speeds.iter().map(|&v| w.k_v * v + w.c_v).sum::<f64>() / speeds.len() as f64;
        let accel_term = speeds
            .windows(2)
            .map(|s| w.k_a * ((s[1] - s[0]) / dt).abs() + w.c_a)
            .sum::<f64>()
            / (speeds.len() - 1) as f64;
        assert_relative_eq!(economic_cost(&traj, &w), speed_term + accel_term, epsilon = 1e-12);
    }

    #[test]
    fn safety_cost_composition() {
        let sc = scenario();
        let w = RewardWeights::default();
        let traj = straight_traj(6, 8.0, 0.5);
        let states = vec![empty_state(); 6];
        let theta = vec![0.0; 6];
        let s = safety_cost(&traj, &states, &sc, &theta, &w).unwrap();
        // hand-composed sum of the four terms
        let expected = w.w_coll * s.c_coll
            + w.w_dist * s.c_dist
            + w.w_deviation * s.c_deviation
            + w.w_speed_safety * s.c_speed_safety;
        assert_relative_eq!(s.c_safety, expected, epsilon = 1e-12);
        // on the centerline at legal speed with aligned headings and no
        // agents, everything except the vanishing collision term is zero
        assert_relative_eq!(s.c_dist, 0.0);
        assert_relative_eq!(s.c_deviation, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.c_speed_safety, 0.0);
    }

    #[test]
    fn alpha_safety_scales_linearly() {
        let sc = scenario();
        let mut w1 = RewardWeights::default();
        w1.alpha_safety = 1.0;
        let mut w2 = w1;
        w2.alpha_safety = 2.0;
        let traj = straight_traj(6, 9.0, 0.5);
        let states = vec![empty_state(); 6];
        let b1 = total_reward(&traj, &states, &sc, &w1).unwrap();
        let b2 = total_reward(&traj, &states, &sc, &w2).unwrap();
        assert_relative_eq!(
            b2.total_cost - b1.total_cost,
            b1.c_safety,
            epsilon = 1e-12
        );
    }

    #[test]
    fn breakdown_recomposes() {
        let sc = scenario();
        let w = RewardWeights::default();
        let traj = straight_traj(6, 5.0, 0.5);
        let states = vec![empty_state(); 6];
        let b = total_reward(&traj, &states, &sc, &w).unwrap();
        assert_relative_eq!(b.total_cost, b.recompose_total(&w), epsilon = 1e-12);
        assert_relative_eq!(b.reward, -b.total_cost);
    }

    fn dummy_breakdown(reward: f64, c_safety: f64) -> RewardBreakdown {
        RewardBreakdown {
            c_coll: 0.0,
            c_dist: 0.0,
            c_deviation: 0.0,
            c_speed_safety: 0.0,
            c_safety,
            c_lat: 0.0,
            c_lon: 0.0,
            c_cent: 0.0,
            c_comfort: 0.0,
            c_speed_eff: 0.0,
            c_time: 0.0,
            c_efficiency: 0.0,
            c_economic: 0.0,
            total_cost: -reward,
            reward,
        }
    }

    #[test]
    fn top_k_full_sort_and_ties() {
        let scores: Vec<RewardBreakdown> = [3.0, 1.0, 2.0]
            .iter()
            .map(|&r| dummy_breakdown(r, 0.0))
            .collect();
        assert_eq!(select_top_k(&scores, 3).unwrap(), vec![0, 2, 1]);

        let equal: Vec<RewardBreakdown> = (0..4).map(|_| dummy_breakdown(1.0, 0.5)).collect();
        assert_eq!(select_top_k(&equal, 2).unwrap(), vec![0, 1]);

        // equal reward, safety breaks the tie
        let scores = vec![dummy_breakdown(1.0, 0.9), dummy_breakdown(1.0, 0.1)];
        assert_eq!(select_top_k(&scores, 2).unwrap(), vec![1, 0]);

        assert!(select_top_k(&scores, 3).is_err());
    }

    proptest! {
        #[test]
        fn top_k_matches_brute_force_sort(rewards in proptest::collection::vec(-100.0..100.0f64, 1..20)) {
            let scores: Vec<RewardBreakdown> =
                rewards.iter().map(|&r| dummy_breakdown(r, 0.0)).collect();
            let got = select_top_k(&scores, scores.len()).unwrap();
            let mut oracle: Vec<usize> = (0..scores.len()).collect();
            oracle.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn top_k_invariant_under_positive_affine(
            rewards in proptest::collection::vec(-10.0..10.0f64, 2..15),
            a in 0.01..50.0f64,
            b in -100.0..100.0f64,
        ) {
            let scores: Vec<RewardBreakdown> =
                rewards.iter().map(|&r| dummy_breakdown(r, 0.0)).collect();
            let scaled: Vec<RewardBreakdown> =
                rewards.iter().map(|&r| dummy_breakdown(a * r + b, 0.0)).collect();
            let k = rewards.len() / 2 + 1;
            prop_assert_eq!(select_top_k(&scores, k).unwrap(), select_top_k(&scaled, k).unwrap());
        }
    }

    #[test]
    fn parallel_and_sequential_scoring_agree() {
        let sc = scenario();
        let cfg = crate::config::KinematicsConfig::default();
        let st = sc.initial_state();
        let set = crate::fast::generate_candidates(&st, &sc, &cfg, 5, 9).unwrap();
        let states = crate::world::predict_states(&st, &sc, cfg.horizon_steps - 1);
        let w = RewardWeights::default();
        let par = score_candidates(&set, &states, &sc, &w).unwrap();
        let seq = score_candidates_seq(&set, &states, &sc, &w).unwrap();
        assert_eq!(par, seq);
    }
}
