//! Bundled scenario constructors: nominal roads for threshold
//! calibration, single-bit probe scenes for the planning-state schema,
//! the signalized-intersection scene, and the 20-scenario hazard suite
//! used by the dual-vs-fast behavioral comparison.

use std::f64::consts::FRAC_PI_2;

use crate::world::{
    AgentBox, AgentKind, AgentMotion, EgoInit, LaneGeometry, NavigationCommand, Pose2D, Scenario,
    ScenarioAgent, Trajectory, TrafficControl, TrafficControlKind, Waypoint,
};

pub const SUITE_DT: f64 = 0.5;
const URBAN_LIMIT: f64 = 13.9;

fn vehicle_box(x: f64, y: f64, yaw: f64, velocity: f64) -> AgentBox {
    AgentBox {
        pose: Pose2D::new(x, y, yaw),
        z: 0.0,
        length: 4.6,
        width: 1.8,
        height: 1.5,
        velocity,
        kind: AgentKind::Vehicle,
    }
}

fn pedestrian_box(x: f64, y: f64, yaw: f64, velocity: f64) -> AgentBox {
    AgentBox {
        pose: Pose2D::new(x, y, yaw),
        z: 0.0,
        length: 0.6,
        width: 0.5,
        height: 1.7,
        velocity,
        kind: AgentKind::Pedestrian,
    }
}

fn static_box(x: f64, y: f64) -> AgentBox {
    AgentBox {
        pose: Pose2D::new(x, y, 0.0),
        z: 0.0,
        length: 2.0,
        width: 1.0,
        height: 1.0,
        velocity: 0.0,
        kind: AgentKind::Static,
    }
}

fn constant_agent(init: AgentBox) -> ScenarioAgent {
    let v = init.velocity;
    ScenarioAgent {
        init,
        motion: AgentMotion::ConstantVelocity(v),
    }
}

fn straight_lane() -> LaneGeometry {
    LaneGeometry {
        centerline: vec![(-10.0, 0.0), (120.0, 0.0)],
        speed_limit: URBAN_LIMIT,
    }
}

fn crossing_lane(x: f64) -> LaneGeometry {
    LaneGeometry {
        centerline: vec![(x, -30.0), (x, 0.0), (x, 30.0)],
        speed_limit: URBAN_LIMIT,
    }
}

fn straight_expert(horizon_steps: u32, v: f64) -> Trajectory {
    let waypoints = (0..horizon_steps)
        .map(|i| Waypoint {
            pose: Pose2D::new(i as f64 * v * SUITE_DT, 0.0, 0.0),
            speed: v,
        })
        .collect();
    Trajectory {
        waypoints,
        dt: SUITE_DT,
    }
}

/// Straight-line expert that brakes at `decel` until stopped.
fn braking_expert(horizon_steps: u32, v0: f64, decel: f64) -> Trajectory {
    let mut waypoints = Vec::with_capacity(horizon_steps as usize);
    let mut x = 0.0;
    let mut v = v0;
    for _ in 0..horizon_steps {
        waypoints.push(Waypoint {
            pose: Pose2D::new(x, 0.0, 0.0),
            speed: v,
        });
        x += v * SUITE_DT;
        v = (v - decel * SUITE_DT).max(0.0);
    }
    Trajectory {
        waypoints,
        dt: SUITE_DT,
    }
}

fn base_scenario(horizon_steps: u32, v_target: f64, agents: Vec<ScenarioAgent>) -> Scenario {
    Scenario {
        dt: SUITE_DT,
        horizon_steps,
        ego_init: EgoInit {
            box_: vehicle_box(0.0, 0.0, 0.0, v_target),
        },
        agents,
        lanes: vec![straight_lane()],
        controls: vec![],
        navigation_command: NavigationCommand::Straight,
        expert_trajectory: straight_expert(horizon_steps, v_target),
        v_target,
    }
}

/// A single straight lane along +x with the ego starting at the origin at
/// `v_target`, no controls, and a constant-speed expert.
pub fn straight_road_scenario(horizon_steps: u32, v_target: f64, agents: &[ScenarioAgent]) -> Scenario {
    base_scenario(horizon_steps, v_target, agents.to_vec())
}

/// Signalized intersection with a crossing pedestrian, conflicting
/// cross traffic, a red light on the ego lane, and a left turn ahead.
/// The rule-based reasoner reads this scene as planning-state bits
/// [1, 1, 1, 0, 0, 0, 0, 1] with meta-actions [Stop, Wait, Prepare_Turn].
pub fn intersection_scenario() -> Scenario {
    let horizon_steps = 20;
    let v0 = 6.0;
    let mut sc = base_scenario(
        horizon_steps,
        v0,
        vec![
            constant_agent(pedestrian_box(11.0, 1.0, -FRAC_PI_2, 1.0)),
            constant_agent(vehicle_box(18.0, 3.0, -FRAC_PI_2, 2.0)),
        ],
    );
    sc.lanes.push(crossing_lane(20.0));
    sc.controls.push(TrafficControl {
        kind: TrafficControlKind::RedLight,
        position: (14.0, 0.0),
        applies_to_lane: 0,
        phase_script: vec![],
    });
    sc.navigation_command = NavigationCommand::Left;
    sc.expert_trajectory = braking_expert(horizon_steps, v0, 3.0);
    sc
}

/// Straight road with a stopped vehicle in the ego lane, `offset` meters
/// beyond the base blockage distance.
pub fn blocked_lane_scenario(offset: u32) -> Scenario {
    let horizon_steps = 20;
    let v0 = 6.0;
    let d = 16.0 + offset as f64;
    let mut sc = base_scenario(horizon_steps, v0, vec![constant_agent(vehicle_box(d, 0.0, 0.0, 0.0))]);
    sc.expert_trajectory = braking_expert(horizon_steps, v0, 3.0);
    sc
}

/// Eight scenes, one per planning-state bit, each designed so the
/// rule-based reasoner raises exactly that bit.
pub fn bit_probe_scenarios() -> Vec<Scenario> {
    let h = 20;
    let mut out = Vec::with_capacity(8);

    // pedestrian_ahead: pedestrian standing in the hazard corridor
    out.push(base_scenario(h, 8.0, vec![constant_agent(pedestrian_box(10.0, 0.5, 0.0, 0.0))]));

    // vehicle_conflict: moving vehicle in the wide corridor, outside the
    // narrow in-lane blockage corridor
    out.push(base_scenario(h, 8.0, vec![constant_agent(vehicle_box(12.0, 2.5, 0.0, 5.0))]));

    // red_light / stop_sign / yield_required: one control on the ego lane
    for kind in [
        TrafficControlKind::RedLight,
        TrafficControlKind::StopSign,
        TrafficControlKind::YieldSign,
    ] {
        let mut sc = base_scenario(h, 8.0, vec![]);
        sc.controls.push(TrafficControl {
            kind,
            position: (15.0, 0.0),
            applies_to_lane: 0,
            phase_script: vec![],
        });
        out.push(sc);
    }

    // lane_blocked: static obstacle dead ahead (not a pedestrian, not moving)
    out.push(base_scenario(h, 8.0, vec![constant_agent(static_box(12.0, 0.0))]));

    // speed_limit_exceeded: posted limit below the ego speed
    let mut speeding = base_scenario(h, 8.0, vec![]);
    speeding.lanes[0].speed_limit = 5.0;
    out.push(speeding);

    // intersection_ahead: a crossing lane with no controls or agents
    let mut crossing = base_scenario(h, 8.0, vec![]);
    crossing.lanes.push(crossing_lane(20.0));
    out.push(crossing);

    out
}

/// Pedestrian-in-roadway hazard. Even variants place a pair of
/// pedestrians blocking both swerve gaps; odd variants a single one.
fn pedestrian_hazard(variant: u32) -> Scenario {
    let horizon_steps = 24;
    let v0 = 6.0;
    let d = 12.0 + variant as f64;
    let mut agents = vec![constant_agent(pedestrian_box(d, 0.3, FRAC_PI_2, 0.0))];
    if variant % 2 == 0 {
        agents.push(constant_agent(pedestrian_box(d + 0.4, -0.8, FRAC_PI_2, 0.0)));
    }
    let mut sc = base_scenario(horizon_steps, v0, agents);
    sc.expert_trajectory = braking_expert(horizon_steps, v0, 3.0);
    sc
}

/// Red light with a pedestrian crossing just beyond the stop line.
fn red_light_hazard(variant: u32) -> Scenario {
    let horizon_steps = 24;
    let v0 = 6.0;
    let mut sc = base_scenario(
        horizon_steps,
        v0,
        vec![constant_agent(pedestrian_box(
            15.5 + 0.5 * variant as f64,
            1.2 + 0.1 * variant as f64,
            -FRAC_PI_2,
            0.4,
        ))],
    );
    sc.controls.push(TrafficControl {
        kind: TrafficControlKind::RedLight,
        position: (14.0, 0.0),
        applies_to_lane: 0,
        phase_script: vec![],
    });
    sc.expert_trajectory = braking_expert(horizon_steps, v0, 3.0);
    sc
}

/// Named hazard scenes for the dual-vs-fast comparison: pedestrian,
/// red-light, and blocked-lane families.
pub fn hazard_suite() -> Vec<(String, Scenario)> {
    let mut out = Vec::with_capacity(20);
    for i in 0..7 {
        out.push((format!("ped_crossing_{i:02}"), pedestrian_hazard(i)));
    }
    for i in 0..7 {
        out.push((format!("red_light_{i:02}"), red_light_hazard(i)));
    }
    for i in 0..6 {
        out.push((format!("blocked_lane_{i:02}"), blocked_lane_scenario(i)));
    }
    out
}

/// Benign scenes used to calibrate the arbitration thresholds: free
/// roads at several speeds and far-ahead same-direction traffic.
pub fn nominal_suite() -> Vec<(String, Scenario)> {
    let mut out = Vec::new();
    for (i, v) in [5.0, 6.0, 8.0, 10.0].iter().enumerate() {
        out.push((format!("free_road_{i:02}"), straight_road_scenario(20, *v, &[])));
    }
    for (i, gap) in [30.0, 40.0].iter().enumerate() {
        let lead = constant_agent(vehicle_box(*gap, 0.0, 0.0, 8.0));
        out.push((format!("lead_vehicle_{i:02}"), straight_road_scenario(20, 8.0, &[lead])));
    }
    let adjacent = constant_agent(vehicle_box(5.0, 6.0, 0.0, 8.0));
    out.push(("adjacent_traffic_00".into(), straight_road_scenario(20, 8.0, &[adjacent])));
    out
}
