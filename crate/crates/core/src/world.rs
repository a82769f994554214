//! Scenario representation, deterministic kinematic stepping, and the
//! BEV geometry queries (clearances, oriented-box overlap, lane
//! projections) that the rest of the pipeline is built on.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Clearance reported when the world contains no obstacles at all.
pub const NO_OBSTACLE_DISTANCE: f64 = 1.0e6;

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = theta.rem_euclid(two_pi);
    if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2D {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    /// Express a world point in this pose's frame (x forward, y left).
    pub fn to_local(&self, px: f64, py: f64) -> (f64, f64) {
        let dx = px - self.x;
        let dy = py - self.y;
        let (s, c) = self.yaw.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
    Cyclist,
    Static,
}

/// A 7-dof BEV box: (x, y, z, length, width, height, yaw) plus a signed
/// speed along yaw. z and height ride along for prompt fidelity but are
/// ignored by the 2D collision geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentBox {
    pub pose: Pose2D,
    pub z: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub velocity: f64,
    pub kind: AgentKind,
}

impl AgentBox {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.length >= self.width && self.width > 0.0) {
            return Err(Error::invariant(
                field,
                format!(
                    "requires length >= width > 0, got length={} width={}",
                    self.length, self.width
                ),
            ));
        }
        if self.height <= 0.0 {
            return Err(Error::invariant(field, "height must be > 0"));
        }
        Ok(())
    }

    /// The four BEV footprint corners.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.pose.yaw.sin_cos();
        let hl = self.length / 2.0;
        let hw = self.width / 2.0;
        let rot = |lx: f64, ly: f64| {
            (
                self.pose.x + c * lx - s * ly,
                self.pose.y + s * lx + c * ly,
            )
        };
        [rot(hl, hw), rot(hl, -hw), rot(-hl, -hw), rot(-hl, hw)]
    }

    /// Euclidean clearance from a point to the box boundary; 0 inside.
    pub fn clearance(&self, px: f64, py: f64) -> f64 {
        let (lx, ly) = self.pose.to_local(px, py);
        let dx = lx.abs() - self.length / 2.0;
        let dy = ly.abs() - self.width / 2.0;
        let ox = dx.max(0.0);
        let oy = dy.max(0.0);
        (ox * ox + oy * oy).sqrt()
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (lx, ly) = self.pose.to_local(px, py);
        lx.abs() <= self.length / 2.0 && ly.abs() <= self.width / 2.0
    }

    pub fn as_array7(&self) -> [f64; 7] {
        [
            self.pose.x,
            self.pose.y,
            self.z,
            self.length,
            self.width,
            self.height,
            self.pose.yaw,
        ]
    }

    fn from_array7(v: [f64; 7]) -> Self {
        AgentBox {
            pose: Pose2D::new(v[0], v[1], v[6]),
            z: v[2],
            length: v[3],
            width: v[4],
            height: v[5],
            velocity: 0.0,
            kind: AgentKind::Vehicle,
        }
    }
}

fn project_interval(corners: &[(f64, f64); 4], ax: f64, ay: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &(x, y) in corners {
        let p = x * ax + y * ay;
        min = min.min(p);
        max = max.max(p);
    }
    (min, max)
}

/// Oriented BEV rectangle overlap via the separating axis theorem.
pub fn check_collision(a: &AgentBox, b: &AgentBox) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for yaw in [a.pose.yaw, b.pose.yaw] {
        let (s, c) = yaw.sin_cos();
        for (ax, ay) in [(c, s), (-s, c)] {
            let (min_a, max_a) = project_interval(&ca, ax, ay);
            let (min_b, max_b) = project_interval(&cb, ax, ay);
            if max_a < min_b || max_b < min_a {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub centerline: Vec<(f64, f64)>,
    pub speed_limit: f64,
}

impl LaneGeometry {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.centerline.len() < 2 {
            return Err(Error::invariant(field, "centerline needs >= 2 points"));
        }
        for w in self.centerline.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invariant(
                    field,
                    "consecutive centerline points must be distinct",
                ));
            }
        }
        if self.speed_limit <= 0.0 {
            return Err(Error::invariant(field, "speed_limit must be > 0"));
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.centerline
            .windows(2)
            .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
            .sum()
    }

    /// Project a point onto the centerline polyline.
    ///
    /// Returns (lateral distance, heading of the segment, arclength of the
    /// projection from the start of the lane).
    pub fn project(&self, px: f64, py: f64) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut s_acc = 0.0;
        for w in self.centerline.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            let dx = x1 - x0;
            let dy = y1 - y0;
            let len2 = dx * dx + dy * dy;
            let t = (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0);
            let cx = x0 + t * dx;
            let cy = y0 + t * dy;
            let d = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
            if d < best.0 {
                best = (d, dy.atan2(dx), s_acc + t * len2.sqrt());
            }
            s_acc += len2.sqrt();
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrafficControlKind {
    RedLight,
    GreenLight,
    StopSign,
    YieldSign,
    SpeedLimit { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficControl {
    #[serde(flatten)]
    pub kind: TrafficControlKind,
    pub position: (f64, f64),
    pub applies_to_lane: usize,
    /// Optional per-tick phase script for lights ("red"/"green" per tick).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phase_script: Vec<LightPhase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightPhase {
    Red,
    Green,
}

impl TrafficControl {
    pub fn validate(&self, field: &str) -> Result<()> {
        if let TrafficControlKind::SpeedLimit { value } = self.kind {
            if value <= 0.0 {
                return Err(Error::invariant(field, "speed_limit value must be > 0"));
            }
        }
        Ok(())
    }

    /// Kind at a given tick, applying the phase script when present.
    pub fn kind_at(&self, tick: u32) -> TrafficControlKind {
        if self.phase_script.is_empty() {
            return self.kind;
        }
        let idx = (tick as usize).min(self.phase_script.len() - 1);
        match self.phase_script[idx] {
            LightPhase::Red => TrafficControlKind::RedLight,
            LightPhase::Green => TrafficControlKind::GreenLight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigationCommand {
    Left,
    Straight,
    Right,
}

impl NavigationCommand {
    pub const ALL: [NavigationCommand; 3] = [
        NavigationCommand::Left,
        NavigationCommand::Straight,
        NavigationCommand::Right,
    ];
}

/// One trajectory waypoint: BEV pose plus speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pose: Pose2D,
    pub speed: f64,
}

/// A sequence of BEV waypoints at a fixed timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn validate(&self, v_max: f64, field: &str) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::invariant(field, "dt must be > 0"));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if w.speed < 0.0 {
                return Err(Error::invariant(
                    field,
                    format!("waypoint {i} speed {} < 0", w.speed),
                ));
            }
        }
        // spacing bound with a small slack for floating point
        let max_step = v_max * self.dt * (1.0 + 1e-9) + 1e-12;
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let d = ((w[1].pose.x - w[0].pose.x).powi(2) + (w[1].pose.y - w[0].pose.y).powi(2))
                .sqrt();
            if d > max_step {
                return Err(Error::invariant(
                    field,
                    format!("spacing {d} between waypoints {i},{} exceeds v_max*dt", i + 1),
                ));
            }
        }
        Ok(())
    }
}

// Wire form: {"dt": .., "waypoints": [[x, y, yaw, v], ...]}
impl Serialize for Trajectory {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            dt: f64,
            waypoints: Vec<[f64; 4]>,
            #[serde(skip)]
            _p: std::marker::PhantomData<&'a ()>,
        }
        Wire {
            dt: self.dt,
            waypoints: self
                .waypoints
                .iter()
                .map(|w| [w.pose.x, w.pose.y, w.pose.yaw, w.speed])
                .collect(),
            _p: std::marker::PhantomData,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Trajectory {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            dt: f64,
            waypoints: Vec<[f64; 4]>,
        }
        let w = Wire::deserialize(de)?;
        Ok(Trajectory {
            dt: w.dt,
            waypoints: w
                .waypoints
                .into_iter()
                .map(|a| Waypoint {
                    pose: Pose2D::new(a[0], a[1], a[2]),
                    speed: a[3],
                })
                .collect(),
        })
    }
}

/// How a scenario agent moves over the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMotion {
    ConstantVelocity(f64),
    /// Per-tick [x, y, yaw] poses; entry i is the pose at tick i.
    Script(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioAgent {
    pub init: AgentBox,
    pub motion: AgentMotion,
}

// Wire form per the scenario schema:
// {"box": [x,y,z,l,w,h,yaw], "kind": .., "motion": {..}}
#[derive(Serialize, Deserialize)]
struct AgentWire {
    #[serde(rename = "box")]
    box7: [f64; 7],
    kind: AgentKind,
    motion: AgentMotion,
}

impl Serialize for ScenarioAgent {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        AgentWire {
            box7: self.init.as_array7(),
            kind: self.init.kind,
            motion: self.motion.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ScenarioAgent {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = AgentWire::deserialize(de)?;
        let mut init = AgentBox::from_array7(w.box7);
        init.kind = w.kind;
        if let AgentMotion::ConstantVelocity(v) = w.motion {
            init.velocity = v;
        }
        Ok(ScenarioAgent {
            init,
            motion: w.motion,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoInit {
    pub box_: AgentBox,
}

impl Serialize for EgoInit {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            #[serde(rename = "box")]
            box7: [f64; 7],
            kind: AgentKind,
            velocity: f64,
        }
        Wire {
            box7: self.box_.as_array7(),
            kind: self.box_.kind,
            velocity: self.box_.velocity,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for EgoInit {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            #[serde(rename = "box")]
            box7: [f64; 7],
            kind: AgentKind,
            velocity: f64,
        }
        let w = Wire::deserialize(de)?;
        let mut b = AgentBox::from_array7(w.box7);
        b.kind = w.kind;
        b.velocity = w.velocity;
        Ok(EgoInit { box_: b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dt: f64,
    pub horizon_steps: u32,
    pub ego_init: EgoInit,
    pub agents: Vec<ScenarioAgent>,
    pub lanes: Vec<LaneGeometry>,
    pub controls: Vec<TrafficControl>,
    pub navigation_command: NavigationCommand,
    pub expert_trajectory: Trajectory,
    pub v_target: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::invariant("dt", "must be > 0"));
        }
        if self.horizon_steps == 0 {
            return Err(Error::invariant("horizon_steps", "must be positive"));
        }
        if self.v_target <= 0.0 {
            return Err(Error::invariant("v_target", "must be > 0"));
        }
        self.ego_init.box_.validate("ego_init")?;
        for (i, a) in self.agents.iter().enumerate() {
            let field = format!("agents[{i}]");
            a.init.validate(&field)?;
            if let AgentMotion::Script(track) = &a.motion {
                if (track.len() as u32) < self.horizon_steps {
                    return Err(Error::invariant(
                        &field,
                        format!(
                            "scripted track length {} < horizon_steps {}",
                            track.len(),
                            self.horizon_steps
                        ),
                    ));
                }
            }
        }
        for (i, l) in self.lanes.iter().enumerate() {
            l.validate(&format!("lanes[{i}]"))?;
        }
        for (i, c) in self.controls.iter().enumerate() {
            let field = format!("controls[{i}]");
            c.validate(&field)?;
            if c.applies_to_lane >= self.lanes.len() && !self.lanes.is_empty() {
                return Err(Error::invariant(&field, "applies_to_lane out of range"));
            }
        }
        if self.expert_trajectory.len() as u32 != self.horizon_steps {
            return Err(Error::invariant(
                "expert_trajectory",
                format!(
                    "length {} != horizon_steps {}",
                    self.expert_trajectory.len(),
                    self.horizon_steps
                ),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState {
            tick: 0,
            ego: self.ego_init.box_,
            agents: self.agents.iter().map(|a| a.init).collect(),
            controls: self
                .controls
                .iter()
                .map(|c| TrafficControl {
                    kind: c.kind_at(0),
                    position: c.position,
                    applies_to_lane: c.applies_to_lane,
                    phase_script: Vec::new(),
                })
                .collect(),
        }
    }

    /// Index of the lane whose centerline is closest to a point.
    pub fn nearest_lane(&self, px: f64, py: f64) -> Option<usize> {
        self.lanes
            .iter()
            .enumerate()
            .map(|(i, l)| (i, l.project(px, py).0))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u32,
    pub ego: AgentBox,
    pub agents: Vec<AgentBox>,
    pub controls: Vec<TrafficControl>,
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario: Scenario = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: format!("line {} column {}: {}", e.line(), e.column(), e),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

fn advance_box(b: &AgentBox, dt: f64) -> AgentBox {
    let (s, c) = b.pose.yaw.sin_cos();
    AgentBox {
        pose: Pose2D::new(
            b.pose.x + b.velocity * c * dt,
            b.pose.y + b.velocity * s * dt,
            b.pose.yaw,
        ),
        ..*b
    }
}

fn agent_at_tick(init: &AgentBox, motion: &AgentMotion, current: &AgentBox, tick: u32, dt: f64) -> AgentBox {
    match motion {
        AgentMotion::ConstantVelocity(_) => advance_box(current, dt),
        AgentMotion::Script(track) => {
            let idx = (tick as usize).min(track.len() - 1);
            let p = track[idx];
            AgentBox {
                pose: Pose2D::new(p[0], p[1], p[2]),
                ..*init
            }
        }
    }
}

/// Advance the world by one tick. The ego box is left untouched; the
/// episode runner owns ego motion.
pub fn step_world(state: &WorldState, scenario: &Scenario) -> Result<WorldState> {
    if state.tick >= scenario.horizon_steps {
        return Err(Error::PastHorizon {
            tick: state.tick,
            horizon: scenario.horizon_steps,
        });
    }
    let tick = state.tick + 1;
    let agents = state
        .agents
        .iter()
        .zip(&scenario.agents)
        .map(|(cur, sa)| agent_at_tick(&sa.init, &sa.motion, cur, tick, scenario.dt))
        .collect();
    let controls = scenario
        .controls
        .iter()
        .map(|c| TrafficControl {
            kind: c.kind_at(tick),
            position: c.position,
            applies_to_lane: c.applies_to_lane,
            phase_script: Vec::new(),
        })
        .collect();
    Ok(WorldState {
        tick,
        ego: state.ego,
        agents,
        controls,
    })
}

/// Roll the world forward `n` extra states for planning-time prediction.
///
/// Unlike [`step_world`] this clamps past the scenario horizon (scripted
/// agents hold their last pose) so candidate scoring near the episode end
/// stays total. The returned sequence starts with `state` itself.
pub fn predict_states(state: &WorldState, scenario: &Scenario, n: usize) -> Vec<WorldState> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(state.clone());
    for _ in 0..n {
        let prev = out.last().unwrap();
        let tick = prev.tick + 1;
        let agents = prev
            .agents
            .iter()
            .zip(&scenario.agents)
            .map(|(cur, sa)| agent_at_tick(&sa.init, &sa.motion, cur, tick, scenario.dt))
            .collect();
        let controls = scenario
            .controls
            .iter()
            .map(|c| TrafficControl {
                kind: c.kind_at(tick),
                position: c.position,
                applies_to_lane: c.applies_to_lane,
                phase_script: Vec::new(),
            })
            .collect();
        out.push(WorldState {
            tick,
            ego: prev.ego,
            agents,
            controls,
        });
    }
    out
}

/// Minimum Euclidean clearance from a point to any agent box boundary.
pub fn distance_to_nearest_obstacle(px: f64, py: f64, state: &WorldState) -> f64 {
    state
        .agents
        .iter()
        .map(|a| a.clearance(px, py))
        .fold(NO_OBSTACLE_DISTANCE, f64::min)
}

/// True when a point lies in a forward corridor of the given pose:
/// 0 <= forward <= length and |lateral| <= half_width.
pub fn in_forward_corridor(pose: &Pose2D, px: f64, py: f64, length: f64, half_width: f64) -> bool {
    let (f, l) = pose.to_local(px, py);
    (0.0..=length).contains(&f) && l.abs() <= half_width
}
