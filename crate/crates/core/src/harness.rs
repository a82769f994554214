//! Closed-loop episode runner, per-episode logs, driving metrics, and
//! report export.
//!
//! Each tick: generate candidates, score them against predicted world
//! states, estimate uncertainty from the rolling residual window,
//! arbitrate, optionally run the slow pathway and replan, then execute
//! the first step of the chosen trajectory (receding horizon) and step
//! the world. The most recent slow-pathway response stays binding for
//! fast ticks (cooldown included) until arbitration genuinely clears or
//! a newer response replaces it.

use std::collections::VecDeque;
use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::arbitration::{decide, reward_distribution_check, DecisionReason, Pathway};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fast::generate_candidates;
use crate::fusion::{fuse_feedback, replan, zero_ego, EmbeddingTable};
use crate::reward::{score_candidates, select_top_k, total_reward, RewardBreakdown};
use crate::slow::{build_bev_prompt, build_visual_prompt, reason, MetaAction, PlanningState};
use crate::uncertainty::{iqr, uncertainty_score, RewardSeries};
use crate::world::{
    check_collision, predict_states, step_world, Pose2D, Scenario, Trajectory,
    TrafficControlKind, Waypoint,
};

pub const LOG_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Dual,
    FastOnly,
}

/// One planning tick of an episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    pub pathway: Pathway,
    pub reason: DecisionReason,
    pub best_reward: f64,
    pub uncertainty: f64,
    pub dist_flag: bool,
    /// Latched slow-pathway constraints applied on a fast tick.
    pub gated: bool,
    pub chosen: Trajectory,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub planning_state: Option<PlanningState>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub meta_actions: Option<Vec<MetaAction>>,
    /// External reasoner failed and the rule table answered instead.
    pub fallback: bool,
    /// Executed ego state after this tick: [x, y, yaw, v].
    pub ego: [f64; 4],
    pub collided: bool,
    pub red_light_violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub ticks: u32,
    pub collision_events: u32,
    pub red_light_violations: u32,
    pub slow_ticks: u32,
    pub route_completion: f64,
    pub infraction_score: f64,
    pub driving_score: f64,
    pub slow_activation_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub version: String,
    pub scenario: String,
    /// Full scenario embedded so logs are self-contained for `eval`.
    pub scenario_spec: Scenario,
    pub mode: RunMode,
    pub seed: u64,
    pub records: Vec<TickRecord>,
    pub summary: EpisodeSummary,
}

fn tick_seed(seed: u64, tick: u32) -> u64 {
    seed ^ (u64::from(tick) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Infraction penalty factors (documented defaults).
pub const COLLISION_PENALTY: f64 = 0.5;
pub const RED_LIGHT_PENALTY: f64 = 0.7;

/// Progress of the executed path along the expert route, in [0, 1]:
/// the farthest projected arclength divided by the expert route length.
pub fn route_completion(executed: &[Pose2D], expert: &Trajectory) -> f64 {
    let centerline: Vec<(f64, f64)> = expert
        .waypoints
        .iter()
        .map(|w| (w.pose.x, w.pose.y))
        .collect();
    if centerline.len() < 2 {
        return 0.0;
    }
    let lane = crate::world::LaneGeometry {
        centerline,
        speed_limit: 1.0,
    };
    let total = lane.total_length();
    if total <= 0.0 {
        return 0.0;
    }
    let best = executed
        .iter()
        .map(|p| lane.project(p.x, p.y).2)
        .fold(0.0f64, f64::max);
    (best / total).clamp(0.0, 1.0)
}

fn lane_progress(scenario: &Scenario, lane: usize, x: f64, y: f64) -> f64 {
    scenario.lanes[lane].project(x, y).2
}

/// Run one closed-loop episode. Deterministic in (scenario, config,
/// seed) for the rule-based reasoner transport.
pub fn run_episode(
    scenario: &Scenario,
    name: &str,
    cfg: &Config,
    mode: RunMode,
    seed: u64,
) -> Result<EpisodeLog> {
    scenario.validate()?;
    cfg.validate()?;
    let table = EmbeddingTable::new(cfg.fusion.d_a, cfg.fusion.embedding_seed)?;
    let mut ego_token = zero_ego(cfg.fusion.d_a);
    let mut latched: Option<crate::slow::ReasonerResponse> = None;
    let mut ticks_since_slow: Option<u32> = None;
    let mut window: VecDeque<(Vec<f64>, Vec<f64>)> =
        VecDeque::with_capacity(cfg.uncertainty.window_ticks);
    // previous tick's chosen trajectory and predicted component vector
    let mut pending: Option<(Trajectory, Vec<f64>)> = None;

    let mut state = scenario.initial_state();
    let mut records: Vec<TickRecord> = Vec::with_capacity(scenario.horizon_steps as usize);
    let mut collision_events = 0u32;
    let mut red_light_violations = 0u32;
    let mut prev_collided = false;

    for tick in 0..scenario.horizon_steps {
        let horizon = cfg.kinematics.horizon_steps.saturating_sub(1);
        let states = predict_states(&state, scenario, horizon);
        let seed_t = tick_seed(seed, tick);
        let set = generate_candidates(&state, scenario, &cfg.kinematics, cfg.kinematics.n_k, seed_t)?;
        let scores = score_candidates(&set, &states, scenario, &cfg.reward)?;
        let rewards: Vec<f64> = scores.iter().map(|s| s.reward).collect();
        let best = select_top_k(&scores, 1)?[0];
        let best_reward = rewards[best];

        // settle last tick's prediction against the newly observed world
        if let Some((traj, predicted)) = pending.take() {
            let obs_states = predict_states(&state, scenario, traj.len().saturating_sub(1));
            let observed = total_reward(&traj, &obs_states, scenario, &cfg.reward)?
                .component_vector()
                .to_vec();
            if window.len() == cfg.uncertainty.window_ticks {
                window.pop_front();
            }
            window.push_back((predicted, observed));
        }
        let uncertainty = if window.is_empty() {
            cfg.uncertainty.epsilon_b + cfg.uncertainty.lambda_spread * iqr(&rewards)
        } else {
            let series = RewardSeries {
                predicted: window.iter().map(|(p, _)| p.clone()).collect(),
                observed: window.iter().map(|(_, o)| o.clone()).collect(),
            };
            uncertainty_score(&series, &rewards, &cfg.uncertainty)?
        };
        let dist_flag = reward_distribution_check(&rewards, &cfg.arbitration)?;

        let decision = decide(best_reward, uncertainty, dist_flag, &cfg.arbitration, ticks_since_slow);
        let slow_tick = mode == RunMode::Dual && decision.pathway == Pathway::Slow;

        let mut planning_state = None;
        let mut meta_actions = None;
        let mut fallback = false;
        let mut gated = false;
        let (chosen, breakdown): (Trajectory, RewardBreakdown) = if slow_tick {
            let prompt = build_bev_prompt(&state, scenario);
            let visual = build_visual_prompt(&set.candidates[best].trajectory, &state.ego, &cfg.reasoner);
            let (resp, fb) = reason(&prompt, &visual, &cfg.reasoner);
            fallback = fb;
            let (traj, bd) = replan(&state, scenario, &resp, &ego_token, &table, cfg, seed_t)?;
            ego_token = fuse_feedback(&ego_token, &resp.meta_actions, &table)?;
            planning_state = Some(resp.planning_state);
            meta_actions = Some(resp.meta_actions.clone());
            latched = Some(resp);
            ticks_since_slow = Some(0);
            (traj, bd)
        } else {
            if mode == RunMode::Dual && decision.reason == DecisionReason::HighRewardLowUncertainty {
                // arbitration genuinely cleared: drop stale slow feedback
                latched = None;
            }
            match &latched {
                Some(resp) if !resp.planning_state.all_zero() => {
                    gated = true;
                    let (traj, bd) = replan(&state, scenario, resp, &ego_token, &table, cfg, seed_t)?;
                    (traj, bd)
                }
                _ => (
                    set.candidates[best].trajectory.clone(),
                    scores[best].clone(),
                ),
            }
        };
        if let Some(t) = ticks_since_slow.as_mut() {
            if !slow_tick {
                *t += 1;
            }
        }
        pending = Some((chosen.clone(), breakdown.component_vector().to_vec()));

        // receding horizon: execute the first planned step
        let prev_pose = state.ego.pose;
        let next = chosen.waypoints.get(1).ok_or_else(|| {
            Error::invariant("chosen trajectory", "needs at least two waypoints to execute")
        })?;
        state.ego.pose = next.pose;
        state.ego.velocity = next.speed;
        state = step_world(&state, scenario)?;

        let collided = state.agents.iter().any(|a| check_collision(&state.ego, a));
        if collided && !prev_collided {
            collision_events += 1;
        }
        prev_collided = collided;

        let red_light_violation = scenario
            .nearest_lane(state.ego.pose.x, state.ego.pose.y)
            .is_some_and(|lane| {
                state.controls.iter().any(|c| {
                    c.applies_to_lane == lane
                        && matches!(c.kind, TrafficControlKind::RedLight)
                        && {
                            let s_ctrl = lane_progress(scenario, lane, c.position.0, c.position.1);
                            let s_prev = lane_progress(scenario, lane, prev_pose.x, prev_pose.y);
                            let s_now = lane_progress(scenario, lane, state.ego.pose.x, state.ego.pose.y);
                            s_prev < s_ctrl && s_now >= s_ctrl
                        }
                })
            });
        if red_light_violation {
            red_light_violations += 1;
        }

        records.push(TickRecord {
            tick,
            pathway: if slow_tick { Pathway::Slow } else { Pathway::Fast },
            reason: if mode == RunMode::Dual {
                decision.reason
            } else {
                DecisionReason::HighRewardLowUncertainty
            },
            best_reward,
            uncertainty,
            dist_flag,
            gated,
            chosen,
            planning_state,
            meta_actions,
            fallback,
            ego: [state.ego.pose.x, state.ego.pose.y, state.ego.pose.yaw, state.ego.velocity],
            collided,
            red_light_violation,
        });
    }

    let executed: Vec<Pose2D> = std::iter::once(scenario.ego_init.box_.pose)
        .chain(records.iter().map(|r| Pose2D::new(r.ego[0], r.ego[1], r.ego[2])))
        .collect();
    let rc = route_completion(&executed, &scenario.expert_trajectory);
    let is = COLLISION_PENALTY.powi(collision_events as i32)
        * RED_LIGHT_PENALTY.powi(red_light_violations as i32);
    let slow_ticks = records.iter().filter(|r| r.pathway == Pathway::Slow).count() as u32;
    let summary = EpisodeSummary {
        ticks: records.len() as u32,
        collision_events,
        red_light_violations,
        slow_ticks,
        route_completion: rc,
        infraction_score: is,
        driving_score: rc * is,
        slow_activation_rate: slow_ticks as f64 / records.len().max(1) as f64,
    };
    Ok(EpisodeLog {
        version: LOG_VERSION.into(),
        scenario: name.to_string(),
        scenario_spec: scenario.clone(),
        mode,
        seed,
        records,
        summary,
    })
}

/// The pose track actually driven: the scenario start pose followed by
/// each tick's executed pose.
pub fn executed_trajectory(log: &EpisodeLog, scenario: &Scenario) -> Trajectory {
    let start = Waypoint {
        pose: scenario.ego_init.box_.pose,
        speed: scenario.ego_init.box_.velocity,
    };
    let waypoints = std::iter::once(start)
        .chain(log.records.iter().map(|r| Waypoint {
            pose: Pose2D::new(r.ego[0], r.ego[1], r.ego[2]),
            speed: r.ego[3],
        }))
        .collect();
    Trajectory {
        waypoints,
        dt: scenario.dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct HorizonMetric {
    #[serde(rename = "1s")]
    pub h1: f64,
    #[serde(rename = "2s")]
    pub h2: f64,
    #[serde(rename = "3s")]
    pub h3: f64,
    pub avg: f64,
}

/// Euclidean displacement between two trajectories at the 1 s / 2 s /
/// 3 s marks, plus their mean.
pub fn compute_l2(planned: &Trajectory, expert: &Trajectory) -> Result<HorizonMetric> {
    if planned.dt != expert.dt {
        return Err(Error::InvalidArgument(format!(
            "dt mismatch: {} vs {}",
            planned.dt, expert.dt
        )));
    }
    let need = (3.0 / planned.dt).round() as usize;
    if planned.len() <= need || expert.len() <= need {
        return Err(Error::InvalidArgument(
            "both trajectories must cover at least 3 s".into(),
        ));
    }
    let at = |seconds: f64| {
        let i = (seconds / planned.dt).round() as usize;
        let p = planned.waypoints[i].pose;
        let e = expert.waypoints[i].pose;
        (p.x - e.x).hypot(p.y - e.y)
    };
    let (h1, h2, h3) = (at(1.0), at(2.0), at(3.0));
    Ok(HorizonMetric {
        h1,
        h2,
        h3,
        avg: (h1 + h2 + h3) / 3.0,
    })
}

/// Fraction of episodes whose first collision happens within 1 s / 2 s /
/// 3 s of the episode start, plus the mean of the three buckets.
pub fn compute_collision_rate(logs: &[EpisodeLog], dt: f64) -> Result<HorizonMetric> {
    if logs.is_empty() {
        return Err(Error::InvalidArgument("collision rate needs >= 1 log".into()));
    }
    let mut within = [0usize; 3];
    for log in logs {
        let first = log
            .records
            .iter()
            .find(|r| r.collided)
            .map(|r| (r.tick + 1) as f64 * dt);
        if let Some(t) = first {
            for (slot, h) in within.iter_mut().zip([1.0, 2.0, 3.0]) {
                if t <= h {
                    *slot += 1;
                }
            }
        }
    }
    let n = logs.len() as f64;
    let (h1, h2, h3) = (
        within[0] as f64 / n,
        within[1] as f64 / n,
        within[2] as f64 / n,
    );
    Ok(HorizonMetric {
        h1,
        h2,
        h3,
        avg: (h1 + h2 + h3) / 3.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub l2: HorizonMetric,
    pub collision_rate: HorizonMetric,
    pub route_completion: f64,
    pub infraction_score: f64,
    pub driving_score: f64,
    pub slow_activation_rate: f64,
    /// Wall-clock seconds; excluded from serialized reports so exports
    /// stay byte-identical across runs.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Recompute route completion, infraction score, and driving score for
/// one finished episode.
pub fn compute_driving_score(log: &EpisodeLog, scenario: &Scenario) -> (f64, f64, f64) {
    let executed: Vec<Pose2D> = std::iter::once(scenario.ego_init.box_.pose)
        .chain(log.records.iter().map(|r| Pose2D::new(r.ego[0], r.ego[1], r.ego[2])))
        .collect();
    let rc = route_completion(&executed, &scenario.expert_trajectory);
    let is = COLLISION_PENALTY.powi(log.summary.collision_events as i32)
        * RED_LIGHT_PENALTY.powi(log.summary.red_light_violations as i32);
    (rc, is, rc * is)
}

/// Aggregate one episode into a full metrics row.
pub fn episode_metrics(log: &EpisodeLog, scenario: &Scenario) -> Result<MetricsReport> {
    let executed = executed_trajectory(log, scenario);
    let l2 = compute_l2(&executed, &scenario.expert_trajectory)?;
    let collision_rate = compute_collision_rate(std::slice::from_ref(log), scenario.dt)?;
    let (rc, is, ds) = compute_driving_score(log, scenario);
    Ok(MetricsReport {
        l2,
        collision_rate,
        route_completion: rc,
        infraction_score: is,
        driving_score: ds,
        slow_activation_rate: log.summary.slow_activation_rate,
        wall_time: 0.0,
    })
}

// ---------------------------------------------------------------------
// Log and report I/O

/// Line-delimited JSON: header, one line per tick record, summary line.
pub fn log_to_jsonl(log: &EpisodeLog) -> String {
    let mut out = String::new();
    let header = serde_json::json!({
        "version": log.version,
        "scenario": log.scenario,
        "scenario_spec": log.scenario_spec,
        "mode": log.mode,
        "seed": log.seed,
    });
    out.push_str(&header.to_string());
    out.push('\n');
    for r in &log.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&log.summary).expect("summary serializes"));
    out.push('\n');
    out
}

pub fn log_from_jsonl(text: &str) -> Result<EpisodeLog> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: serde_json::Value = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: "<log>".into(),
            detail: "empty log".into(),
        })
        .and_then(|l| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: "<log>".into(),
                detail: e.to_string(),
            })
        })?;
    let body: Vec<&str> = lines.collect();
    if body.is_empty() {
        return Err(Error::Parse {
            path: "<log>".into(),
            detail: "missing summary line".into(),
        });
    }
    let parse = |l: &str, what: &str| -> Result<serde_json::Value> {
        serde_json::from_str(l).map_err(|e| Error::Parse {
            path: "<log>".into(),
            detail: format!("{what}: {e}"),
        })
    };
    let summary: EpisodeSummary =
        serde_json::from_value(parse(body[body.len() - 1], "summary")?).map_err(|e| Error::Parse {
            path: "<log>".into(),
            detail: e.to_string(),
        })?;
    let mut records = Vec::with_capacity(body.len() - 1);
    for l in &body[..body.len() - 1] {
        let r: TickRecord = serde_json::from_value(parse(l, "record")?).map_err(|e| Error::Parse {
            path: "<log>".into(),
            detail: e.to_string(),
        })?;
        records.push(r);
    }
    Ok(EpisodeLog {
        version: header["version"].as_str().unwrap_or(LOG_VERSION).to_string(),
        scenario: header["scenario"].as_str().unwrap_or_default().to_string(),
        scenario_spec: serde_json::from_value(header["scenario_spec"].clone()).map_err(|e| {
            Error::Parse {
                path: "<log>".into(),
                detail: format!("scenario_spec: {e}"),
            }
        })?,
        mode: serde_json::from_value(header["mode"].clone()).map_err(|e| Error::Parse {
            path: "<log>".into(),
            detail: format!("mode: {e}"),
        })?,
        seed: header["seed"].as_u64().unwrap_or_default(),
        records,
        summary,
    })
}

pub fn save_log(log: &EpisodeLog, path: &std::path::Path) -> Result<()> {
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(log_to_jsonl(log).as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn load_log(path: &std::path::Path) -> Result<EpisodeLog> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    log_from_jsonl(&text).map_err(|e| match e {
        Error::Parse { detail, .. } => Error::Parse {
            path: path.display().to_string(),
            detail,
        },
        other => other,
    })
}

/// Write a JSON report at `path` and a CSV twin with a `.csv` extension.
/// Rows are sorted by scenario name for deterministic output.
pub fn export_report(reports: &[(String, MetricsReport)], path: &std::path::Path) -> Result<()> {
    let mut rows: Vec<&(String, MetricsReport)> = reports.iter().collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    let json = serde_json::json!({
        "version": LOG_VERSION,
        "rows": rows
            .iter()
            .map(|(name, m)| serde_json::json!({"scenario": name, "metrics": m}))
            .collect::<Vec<_>>(),
    });
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::write(path, serde_json::to_string_pretty(&json).expect("report serializes"))
        .map_err(io_err)?;

    let mut csv = String::from(
        "scenario,l2_1s,l2_2s,l2_3s,l2_avg,coll_1s,coll_2s,coll_3s,coll_avg,route_completion,infraction_score,driving_score,slow_activation_rate\n",
    );
    for (name, m) in &rows {
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            m.l2.h1,
            m.l2.h2,
            m.l2.h3,
            m.l2.avg,
            m.collision_rate.h1,
            m.collision_rate.h2,
            m.collision_rate.h3,
            m.collision_rate.avg,
            m.route_completion,
            m.infraction_score,
            m.driving_score,
            m.slow_activation_rate,
        ));
    }
    let csv_path = path.with_extension("csv");
    std::fs::write(&csv_path, csv).map_err(|source| Error::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    Ok(())
}

pub fn read_report(path: &std::path::Path) -> Result<Vec<(String, MetricsReport)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let rows = v["rows"].as_array().ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        detail: "missing rows array".into(),
    })?;
    rows.iter()
        .map(|r| {
            let name = r["scenario"].as_str().unwrap_or_default().to_string();
            let m: MetricsReport =
                serde_json::from_value(r["metrics"].clone()).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
            Ok((name, m))
        })
        .collect()
}

fn percentile(values: &mut [f64], frac: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = frac * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (pos - lo as f64)
}

/// Calibrate the arbitration thresholds on the benign bundled scenes:
/// tau_reward is the 25th percentile of per-tick best rewards under the
/// fast pathway, tau_uncertainty the 75th percentile of uncertainty.
pub fn calibrate_thresholds(cfg: &Config, seed: u64) -> Result<(f64, f64)> {
    let mut rewards = Vec::new();
    let mut uncertainties = Vec::new();
    for (name, sc) in crate::suite::nominal_suite() {
        let log = run_episode(&sc, &name, cfg, RunMode::FastOnly, seed)?;
        for r in &log.records {
            rewards.push(r.best_reward);
            uncertainties.push(r.uncertainty);
        }
    }
    if rewards.is_empty() {
        return Err(Error::InvalidArgument("calibration produced no ticks".into()));
    }
    Ok((
        percentile(&mut rewards, 0.25),
        percentile(&mut uncertainties, 0.75),
    ))
}
