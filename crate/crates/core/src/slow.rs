//! Slow pathway: BEV and visual prompt construction, the reasoner
//! contract with its deterministic rule-based implementation, an
//! external-process client (HTTP or subprocess line protocol), and
//! response validation.
//!
//! Wire format, version "1". Request:
//! `{"version":"1","bev_prompt":{...},"visual_prompt":{...},
//!   "questions":["scene","signs","objects","planning_state","plan"]}`
//! Response:
//! `{"planning_state":{"pedestrian_ahead":0|1,...},"meta_actions":["Stop",...],
//!   "justification":"..."}` — keys exact, order-insensitive, unknown keys
//! ignored.

use std::io::{BufRead, BufReader, Read as _, Write as _};

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::config::{ReasonerConfig, ReasonerTransport};
use crate::error::{Error, Result};
use crate::world::{
    AgentBox, AgentKind, NavigationCommand, Scenario, Trajectory,
    TrafficControlKind, WorldState,
};

/// Protocol version for prompts and responses.
pub const WIRE_VERSION: &str = "1";

/// Fixed, versioned planning-state schema (K = 8), in bit order.
pub const PLANNING_STATE_SCHEMA: [&str; 8] = [
    "pedestrian_ahead",
    "vehicle_conflict",
    "red_light",
    "stop_sign",
    "yield_required",
    "lane_blocked",
    "speed_limit_exceeded",
    "intersection_ahead",
];

pub const PLANNING_STATE_BITS: usize = 8;

/// Half-width of the lane-blockage corridor, meters.
const LANE_BLOCK_HALF_WIDTH: f64 = 1.5;
/// Heading difference above which a nearby lane counts as crossing.
const CROSSING_HEADING: f64 = std::f64::consts::FRAC_PI_4;

/// K-bit binary context vector with the fixed named schema above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanningState {
    pub bits: [u8; PLANNING_STATE_BITS],
}

impl PlanningState {
    pub fn get(&self, name: &str) -> Option<u8> {
        PLANNING_STATE_SCHEMA
            .iter()
            .position(|&n| n == name)
            .map(|i| self.bits[i])
    }

    pub fn set(&mut self, name: &str, value: bool) {
        if let Some(i) = PLANNING_STATE_SCHEMA.iter().position(|&n| n == name) {
            self.bits[i] = value as u8;
        }
    }

    pub fn pedestrian_ahead(&self) -> bool {
        self.bits[0] == 1
    }
    pub fn vehicle_conflict(&self) -> bool {
        self.bits[1] == 1
    }
    pub fn red_light(&self) -> bool {
        self.bits[2] == 1
    }
    pub fn stop_sign(&self) -> bool {
        self.bits[3] == 1
    }
    pub fn yield_required(&self) -> bool {
        self.bits[4] == 1
    }
    pub fn lane_blocked(&self) -> bool {
        self.bits[5] == 1
    }
    pub fn speed_limit_exceeded(&self) -> bool {
        self.bits[6] == 1
    }
    pub fn intersection_ahead(&self) -> bool {
        self.bits[7] == 1
    }

    pub fn any_stop_bit(&self) -> bool {
        self.pedestrian_ahead() || self.red_light() || self.stop_sign()
    }

    pub fn all_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }
}

// Serialized as a named map in schema order.
impl Serialize for PlanningState {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(PLANNING_STATE_BITS))?;
        for (name, bit) in PLANNING_STATE_SCHEMA.iter().zip(&self.bits) {
            map.serialize_entry(name, bit)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PlanningState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(de)?;
        planning_state_from_value(&value).map_err(serde::de::Error::custom)
    }
}

fn bit_from_value(v: &serde_json::Value) -> Result<u8> {
    match v {
        serde_json::Value::Bool(b) => Ok(*b as u8),
        serde_json::Value::Number(n) => match n.as_u64() {
            Some(0) => Ok(0),
            Some(1) => Ok(1),
            _ => Err(Error::InvalidResponse(format!("bit value {n} not in {{0,1}}"))),
        },
        other => Err(Error::InvalidResponse(format!("bit value {other} not 0/1"))),
    }
}

/// Accepts either the canonical named map (all 8 schema keys present) or
/// an ordered K-length array; anything else is a schema error.
pub fn planning_state_from_value(value: &serde_json::Value) -> Result<PlanningState> {
    let mut bits = [0u8; PLANNING_STATE_BITS];
    match value {
        serde_json::Value::Object(map) => {
            for (i, name) in PLANNING_STATE_SCHEMA.iter().enumerate() {
                let v = map.get(*name).ok_or_else(|| {
                    Error::InvalidResponse(format!("planning_state missing key `{name}`"))
                })?;
                bits[i] = bit_from_value(v)?;
            }
        }
        serde_json::Value::Array(arr) => {
            if arr.len() != PLANNING_STATE_BITS {
                return Err(Error::InvalidResponse(format!(
                    "planning_state has {} bits, schema requires {PLANNING_STATE_BITS}",
                    arr.len()
                )));
            }
            for (i, v) in arr.iter().enumerate() {
                bits[i] = bit_from_value(v)?;
            }
        }
        _ => {
            return Err(Error::InvalidResponse(
                "planning_state must be a map or array".into(),
            ))
        }
    }
    Ok(PlanningState { bits })
}

/// Closed meta-action vocabulary (N_A = 9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetaAction {
    Stop,
    Wait,
    Yield,
    Decelerate,
    Accelerate,
    #[serde(rename = "Keep_Lane")]
    KeepLane,
    #[serde(rename = "Change_Lane_Left")]
    ChangeLaneLeft,
    #[serde(rename = "Change_Lane_Right")]
    ChangeLaneRight,
    #[serde(rename = "Prepare_Turn")]
    PrepareTurn,
}

impl MetaAction {
    pub const VOCABULARY: [MetaAction; 9] = [
        MetaAction::Stop,
        MetaAction::Wait,
        MetaAction::Yield,
        MetaAction::Decelerate,
        MetaAction::Accelerate,
        MetaAction::KeepLane,
        MetaAction::ChangeLaneLeft,
        MetaAction::ChangeLaneRight,
        MetaAction::PrepareTurn,
    ];

    pub fn index(&self) -> usize {
        Self::VOCABULARY.iter().position(|a| a == self).unwrap()
    }

    pub fn parse(token: &str) -> Result<MetaAction> {
        serde_json::from_value(serde_json::Value::String(token.to_string()))
            .map_err(|_| Error::InvalidResponse(format!("unknown meta-action token `{token}`")))
    }
}

pub const MAX_META_ACTIONS: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BevAgent {
    #[serde(rename = "box")]
    pub box7: [f64; 7],
    pub kind: AgentKind,
    pub velocity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSummary {
    #[serde(flatten)]
    pub kind: TrafficControlKind,
    pub position: (f64, f64),
    pub applies_to_lane: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaneSummary {
    pub centerline: Vec<(f64, f64)>,
    pub speed_limit: f64,
}

/// Structured top-down scene serialization handed to the reasoner:
/// ego and agent 7-dof boxes, control and lane summaries, the command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BevPrompt {
    pub version: String,
    pub ego: [f64; 7],
    pub ego_velocity: f64,
    pub ego_lane: Option<usize>,
    pub posted_limit: Option<f64>,
    pub agents: Vec<BevAgent>,
    pub controls: Vec<ControlSummary>,
    pub lanes: Vec<LaneSummary>,
    pub navigation_command: NavigationCommand,
}

/// Waypoints of the fast-path plan projected into a normalized forward
/// camera frame; points behind the camera or outside the frustum omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisualPrompt {
    pub projected_waypoints: Vec<(f64, f64)>,
    pub camera: CameraParams,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraParams {
    pub fov: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReasonerResponse {
    pub planning_state: PlanningState,
    pub meta_actions: Vec<MetaAction>,
    #[serde(default)]
    pub justification: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<std::collections::BTreeMap<String, String>>,
}

/// Copy ego/agent boxes into the prompt, agents ordered nearest first
/// (ties by original index).
pub fn build_bev_prompt(state: &WorldState, scenario: &Scenario) -> BevPrompt {
    let ego = &state.ego;
    let mut indexed: Vec<(usize, &AgentBox)> = state.agents.iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| {
        let da = (a.pose.x - ego.pose.x).hypot(a.pose.y - ego.pose.y);
        let db = (b.pose.x - ego.pose.x).hypot(b.pose.y - ego.pose.y);
        da.total_cmp(&db).then(ia.cmp(ib))
    });
    let ego_lane = scenario.nearest_lane(ego.pose.x, ego.pose.y);
    let posted_limit = ego_lane.map(|i| {
        let mut limit = scenario.lanes[i].speed_limit;
        for c in &state.controls {
            if c.applies_to_lane == i {
                if let TrafficControlKind::SpeedLimit { value } = c.kind {
                    limit = limit.min(value);
                }
            }
        }
        limit
    });
    BevPrompt {
        version: WIRE_VERSION.to_string(),
        ego: ego.as_array7(),
        ego_velocity: ego.velocity,
        ego_lane,
        posted_limit,
        agents: indexed
            .into_iter()
            .map(|(_, a)| BevAgent {
                box7: a.as_array7(),
                kind: a.kind,
                velocity: a.velocity,
            })
            .collect(),
        controls: state
            .controls
            .iter()
            .map(|c| ControlSummary {
                kind: c.kind,
                position: c.position,
                applies_to_lane: c.applies_to_lane,
            })
            .collect(),
        lanes: scenario
            .lanes
            .iter()
            .map(|l| LaneSummary {
                centerline: l.centerline.clone(),
                speed_limit: l.speed_limit,
            })
            .collect(),
        navigation_command: scenario.navigation_command,
    }
}

/// Pinhole projection of trajectory waypoints into normalized image
/// coordinates. u grows rightward, v downward; a point on the optical
/// axis lands at u = 0.5.
pub fn build_visual_prompt(traj: &Trajectory, ego: &AgentBox, cfg: &ReasonerConfig) -> VisualPrompt {
    let half_tan = (cfg.camera_fov / 2.0).tan();
    let mut projected = Vec::new();
    for w in &traj.waypoints {
        let (forward, left) = ego.pose.to_local(w.pose.x, w.pose.y);
        if forward <= 1e-9 {
            continue; // behind the image plane
        }
        let u = 0.5 + 0.5 * (-left / forward) / half_tan;
        let v = 0.5 + 0.5 * (cfg.camera_height / forward) / half_tan;
        if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
            projected.push((u, v));
        }
    }
    VisualPrompt {
        projected_waypoints: projected,
        camera: CameraParams {
            fov: cfg.camera_fov,
            height: cfg.camera_height,
        },
    }
}

fn ego_pose(prompt: &BevPrompt) -> crate::world::Pose2D {
    crate::world::Pose2D::new(prompt.ego[0], prompt.ego[1], prompt.ego[6])
}

fn in_corridor(prompt: &BevPrompt, x: f64, y: f64, length: f64, half_width: f64) -> bool {
    crate::world::in_forward_corridor(&ego_pose(prompt), x, y, length, half_width)
}

fn control_ahead(prompt: &BevPrompt, cfg: &ReasonerConfig, want: fn(&TrafficControlKind) -> bool) -> bool {
    let pose = ego_pose(prompt);
    prompt.controls.iter().any(|c| {
        if !want(&c.kind) {
            return false;
        }
        if let Some(lane) = prompt.ego_lane {
            if c.applies_to_lane != lane {
                return false;
            }
        }
        let (f, _) = pose.to_local(c.position.0, c.position.1);
        (-2.0..=cfg.control_lookahead).contains(&f)
    })
}

fn crossing_lane_ahead(prompt: &BevPrompt, cfg: &ReasonerConfig) -> bool {
    let pose = ego_pose(prompt);
    prompt.lanes.iter().enumerate().any(|(i, lane)| {
        if Some(i) == prompt.ego_lane {
            return false;
        }
        lane.centerline.windows(2).any(|seg| {
            let heading = (seg[1].1 - seg[0].1).atan2(seg[1].0 - seg[0].0);
            let diff = crate::world::normalize_angle(heading - pose.yaw).abs();
            let crossing = diff > CROSSING_HEADING && diff < std::f64::consts::PI - CROSSING_HEADING;
            crossing
                && (crate::world::in_forward_corridor(
                    &pose,
                    seg[0].0,
                    seg[0].1,
                    cfg.control_lookahead,
                    10.0,
                ) || crate::world::in_forward_corridor(
                    &pose,
                    seg[1].0,
                    seg[1].1,
                    cfg.control_lookahead,
                    10.0,
                ))
        })
    })
}

/// Deterministic rule table standing in for the learned reasoner.
///
/// Bits:
/// - pedestrian_ahead: a pedestrian center inside the forward corridor
///   (corridor_length x corridor_half_width).
/// - vehicle_conflict: a moving (|v| >= 0.5) vehicle or cyclist inside the
///   wider vehicle corridor.
/// - red_light / stop_sign / yield_required: the matching control on the
///   ego lane within control_lookahead ahead.
/// - lane_blocked: a stopped (|v| < 0.5) vehicle or static obstacle inside
///   a narrow in-lane corridor.
/// - speed_limit_exceeded: ego speed above the posted limit.
/// - intersection_ahead: another lane crossing ahead at > 45 degrees.
///
/// Meta-actions by priority: stop bits give [Stop, Wait]; otherwise a
/// conflict or yield sign gives [Yield]; otherwise a blocked lane gives
/// [Decelerate, Change_Lane_Left]. Speeding appends Decelerate, a turn
/// command at an intersection appends Prepare_Turn, and an empty list
/// falls back to [Keep_Lane]. At most four actions.
pub fn rule_based_reason(prompt: &BevPrompt, cfg: &ReasonerConfig) -> ReasonerResponse {
    let mut ps = PlanningState::default();

    let pedestrian = prompt.agents.iter().any(|a| {
        a.kind == AgentKind::Pedestrian
            && in_corridor(prompt, a.box7[0], a.box7[1], cfg.corridor_length, cfg.corridor_half_width)
    });
    ps.set("pedestrian_ahead", pedestrian);

    let conflict = prompt.agents.iter().any(|a| {
        matches!(a.kind, AgentKind::Vehicle | AgentKind::Cyclist)
            && a.velocity.abs() >= 0.5
            && in_corridor(
                prompt,
                a.box7[0],
                a.box7[1],
                cfg.corridor_length,
                cfg.vehicle_corridor_half_width,
            )
    });
    ps.set("vehicle_conflict", conflict);

    ps.set(
        "red_light",
        control_ahead(prompt, cfg, |k| matches!(k, TrafficControlKind::RedLight)),
    );
    ps.set(
        "stop_sign",
        control_ahead(prompt, cfg, |k| matches!(k, TrafficControlKind::StopSign)),
    );
    ps.set(
        "yield_required",
        control_ahead(prompt, cfg, |k| matches!(k, TrafficControlKind::YieldSign)),
    );

    let blocked = prompt.agents.iter().any(|a| {
        matches!(a.kind, AgentKind::Vehicle | AgentKind::Static)
            && a.velocity.abs() < 0.5
            && in_corridor(prompt, a.box7[0], a.box7[1], cfg.corridor_length, LANE_BLOCK_HALF_WIDTH)
    });
    ps.set("lane_blocked", blocked);

    let speeding = prompt
        .posted_limit
        .is_some_and(|limit| prompt.ego_velocity > limit);
    ps.set("speed_limit_exceeded", speeding);

    ps.set("intersection_ahead", crossing_lane_ahead(prompt, cfg));

    let mut actions = Vec::new();
    let mut reasons = Vec::new();
    if ps.any_stop_bit() {
        actions.push(MetaAction::Stop);
        actions.push(MetaAction::Wait);
        if ps.red_light() {
            reasons.push("red light ahead");
        }
        if ps.stop_sign() {
            reasons.push("stop sign ahead");
        }
        if ps.pedestrian_ahead() {
            reasons.push("pedestrian in path");
        }
    } else if ps.yield_required() || ps.vehicle_conflict() {
        actions.push(MetaAction::Yield);
        reasons.push("yield to conflicting traffic");
    } else if ps.lane_blocked() {
        actions.push(MetaAction::Decelerate);
        actions.push(MetaAction::ChangeLaneLeft);
        reasons.push("lane blocked ahead");
    }
    if ps.speed_limit_exceeded() && !actions.contains(&MetaAction::Stop) {
        if !actions.contains(&MetaAction::Decelerate) {
            actions.push(MetaAction::Decelerate);
        }
        reasons.push("over the posted limit");
    }
    if ps.intersection_ahead()
        && matches!(
            prompt.navigation_command,
            NavigationCommand::Left | NavigationCommand::Right
        )
    {
        actions.push(MetaAction::PrepareTurn);
        reasons.push("turn at upcoming intersection");
    }
    if actions.is_empty() {
        actions.push(MetaAction::KeepLane);
        reasons.push("clear road");
    }
    actions.truncate(MAX_META_ACTIONS);

    ReasonerResponse {
        planning_state: ps,
        meta_actions: actions,
        justification: reasons.join("; "),
        answers: None,
    }
}

/// Enforce the response schema: planning_state present with K bits,
/// meta-actions from the vocabulary and non-empty (extras beyond 4
/// truncated), unparseable optional fields stripped. Idempotent.
pub fn validate_response(raw: &serde_json::Value) -> Result<ReasonerResponse> {
    let obj = raw
        .as_object()
        .ok_or_else(|| Error::InvalidResponse("response must be a JSON object".into()))?;
    let ps_value = obj
        .get("planning_state")
        .ok_or_else(|| Error::InvalidResponse("missing planning_state".into()))?;
    let planning_state = planning_state_from_value(ps_value)?;

    let actions_value = obj
        .get("meta_actions")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::InvalidResponse("missing meta_actions array".into()))?;
    let mut meta_actions = Vec::new();
    for v in actions_value {
        let token = v
            .as_str()
            .ok_or_else(|| Error::InvalidResponse("meta_actions entries must be strings".into()))?;
        meta_actions.push(MetaAction::parse(token)?);
    }
    if meta_actions.is_empty() {
        return Err(Error::InvalidResponse("meta_actions must be non-empty".into()));
    }
    meta_actions.truncate(MAX_META_ACTIONS);

    let justification = obj
        .get("justification")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let answers = obj.get("answers").and_then(|v| v.as_object()).map(|m| {
        m.iter()
            .filter_map(|(k, v)| v.as_str().map(|s| (k.clone(), s.to_string())))
            .collect()
    });

    Ok(ReasonerResponse {
        planning_state,
        meta_actions,
        justification,
        answers,
    })
}

/// The standard question list sent with every request.
pub const QUESTIONS: [&str; 5] = ["scene", "signs", "objects", "planning_state", "plan"];

pub fn build_request(bev: &BevPrompt, visual: &VisualPrompt) -> serde_json::Value {
    serde_json::json!({
        "version": WIRE_VERSION,
        "bev_prompt": bev,
        "visual_prompt": visual,
        "questions": QUESTIONS,
    })
}

fn http_post(url: &str, body: &str, timeout_ms: u64) -> Result<String> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| Error::Transport(format!("only http:// endpoints supported, got {url}")))?;
    let (host_port, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, "/"),
    };
    let timeout = std::time::Duration::from_millis(timeout_ms);
    let addr = host_port
        .parse()
        .or_else(|_| {
            use std::net::ToSocketAddrs;
            host_port
                .to_socket_addrs()
                .map_err(|e| Error::Transport(e.to_string()))?
                .next()
                .ok_or_else(|| Error::Transport(format!("cannot resolve {host_port}")))
        })
        .map_err(|e: Error| e)?;
    let mut stream = std::net::TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| Error::Transport(format!("connect {host_port}: {e}")))?;
    stream.set_read_timeout(Some(timeout)).ok();
    stream.set_write_timeout(Some(timeout)).ok();
    let request = format!(
        "POST {path} HTTP/1.1\r\nHost: {host_port}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream
        .write_all(request.as_bytes())
        .map_err(|e| Error::Transport(format!("write: {e}")))?;
    let mut response = Vec::new();
    stream
        .read_to_end(&mut response)
        .map_err(|e| Error::Transport(format!("read: {e}")))?;
    let text = String::from_utf8_lossy(&response);
    let (head, body) = text
        .split_once("\r\n\r\n")
        .ok_or_else(|| Error::Transport("malformed HTTP response".into()))?;
    let status = head.lines().next().unwrap_or_default();
    if !status.contains("200") {
        return Err(Error::Transport(format!("HTTP status: {status}")));
    }
    Ok(body.to_string())
}

fn subprocess_round_trip(
    command: &str,
    args: &[String],
    line: &str,
    timeout_ms: u64,
) -> Result<String> {
    use std::process::{Command, Stdio};
    let mut child = Command::new(command)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Transport(format!("spawn {command}: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let request = format!("{line}\n");
    let reader = std::thread::spawn(move || -> std::io::Result<String> {
        let mut buf = String::new();
        BufReader::new(stdout).read_line(&mut buf)?;
        Ok(buf)
    });
    stdin
        .write_all(request.as_bytes())
        .map_err(|e| Error::Transport(format!("write to child: {e}")))?;
    drop(stdin);

    let deadline = std::time::Instant::now() + std::time::Duration::from_millis(timeout_ms);
    loop {
        if reader.is_finished() {
            let line = reader
                .join()
                .map_err(|_| Error::Transport("reader thread panicked".into()))?
                .map_err(|e| Error::Transport(format!("read from child: {e}")))?;
            let _ = child.wait();
            return Ok(line);
        }
        if std::time::Instant::now() > deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Transport(format!("subprocess timeout after {timeout_ms} ms")));
        }
        std::thread::sleep(std::time::Duration::from_millis(2));
    }
}

/// Query an external reasoner over the configured transport. Returns the
/// validated response. Any transport or validation failure is surfaced as
/// an error; [`reason`] wraps this with the rule-based fallback.
pub fn external_reason(
    bev: &BevPrompt,
    visual: &VisualPrompt,
    cfg: &ReasonerConfig,
) -> Result<ReasonerResponse> {
    let body = build_request(bev, visual).to_string();
    let raw_text = match &cfg.transport {
        ReasonerTransport::RuleBased => {
            return Ok(rule_based_reason(bev, cfg));
        }
        ReasonerTransport::Http { url } => http_post(url, &body, cfg.timeout_ms)?,
        ReasonerTransport::Subprocess { command, args } => {
            subprocess_round_trip(command, args, &body, cfg.timeout_ms)?
        }
    };
    let raw: serde_json::Value = serde_json::from_str(raw_text.trim())
        .map_err(|e| Error::InvalidResponse(format!("response is not JSON: {e}")))?;
    validate_response(&raw)
}

/// Run the configured reasoner; failures fall back to the rule table and
/// set the second return value so the episode log can record it.
pub fn reason(bev: &BevPrompt, visual: &VisualPrompt, cfg: &ReasonerConfig) -> (ReasonerResponse, bool) {
    match external_reason(bev, visual, cfg) {
        Ok(resp) => (resp, false),
        Err(_) => (rule_based_reason(bev, cfg), true),
    }
}
