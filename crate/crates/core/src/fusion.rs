//! Feedback fusion: a seeded meta-action embedding table, single-head
//! scaled-dot-product cross-attention with identity projections, the
//! residual ego-token update, hard constraint gating from planning-state
//! bits, and the replanning entry point used after a slow-pathway tick.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fast::{generate_candidates, mean_curvature, CandidateSet};
use crate::reward::{
    safety_cost, score_candidates, select_top_k, target_headings, RewardBreakdown, RewardWeights,
};
use crate::slow::{MetaAction, PlanningState, ReasonerResponse};
use crate::world::{predict_states, Scenario, Trajectory, TrafficControlKind, WorldState};

/// Seed offset separating replan latent streams from the fast-pathway
/// stream of the same tick.
pub const REPLAN_SEED_OFFSET: u64 = 0x5EED_0FF5;

/// Ego feature vector of dimension d_A.
pub type EgoToken = Vec<f64>;

pub fn zero_ego(d_a: usize) -> EgoToken {
    vec![0.0; d_a]
}

/// One embedding row per meta-action, N_A x d_A, unit-Gaussian entries
/// from a seeded stream. Immutable after construction.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    rows: Vec<Vec<f64>>,
    pub d_a: usize,
    pub seed: u64,
}

impl EmbeddingTable {
    pub fn new(d_a: usize, seed: u64) -> Result<EmbeddingTable> {
        if d_a == 0 {
            return Err(Error::InvalidArgument("d_a must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = MetaAction::VOCABULARY.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d_a).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if gap < 1e-9 {
                    return Err(Error::invariant(
                        "embedding table",
                        format!("rows {i} and {j} coincide for seed {seed}"),
                    ));
                }
            }
        }
        Ok(EmbeddingTable { rows, d_a, seed })
    }

    pub fn row(&self, action: MetaAction) -> &[f64] {
        &self.rows[action.index()]
    }
}

/// One-to-one map from action tokens to embedding rows, order preserved.
pub fn encode_meta_actions(actions: &[MetaAction], table: &EmbeddingTable) -> Vec<Vec<f64>> {
    actions.iter().map(|&a| table.row(a).to_vec()).collect()
}

/// softmax(q . k_i / sqrt(d)) over key rows; numerically stabilized.
pub fn attention_weights(query: &[f64], keys: &[Vec<f64>]) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(Error::InvalidArgument("attention needs n >= 1 keys".into()));
    }
    let d = query.len();
    for k in keys {
        if k.len() != d {
            return Err(Error::LengthMismatch {
                detail: format!("key dimension {} differs from query dimension {d}", k.len()),
            });
        }
    }
    let scale = (d as f64).sqrt();
    let logits: Vec<f64> = keys
        .iter()
        .map(|k| query.iter().zip(k).map(|(q, ki)| q * ki).sum::<f64>() / scale)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// Single-head attention with identity projections:
/// output = sum_i softmax(q . k_i / sqrt(d)) v_i.
pub fn cross_attention(query: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> Result<Vec<f64>> {
    if keys.len() != values.len() {
        return Err(Error::LengthMismatch {
            detail: format!("{} keys vs {} values", keys.len(), values.len()),
        });
    }
    let w = attention_weights(query, keys)?;
    let mut out = vec![0.0; query.len()];
    for (wi, v) in w.iter().zip(values) {
        if v.len() != query.len() {
            return Err(Error::LengthMismatch {
                detail: "value dimension differs from query dimension".into(),
            });
        }
        for (o, vi) in out.iter_mut().zip(v) {
            *o += wi * vi;
        }
    }
    Ok(out)
}

/// Residual ego update: ego' = attention(ego, E, E) + ego where E encodes
/// the meta-actions.
pub fn fuse_feedback(
    ego: &EgoToken,
    actions: &[MetaAction],
    table: &EmbeddingTable,
) -> Result<EgoToken> {
    if actions.is_empty() {
        return Err(Error::InvalidArgument(
            "fuse_feedback needs at least one meta-action".into(),
        ));
    }
    if ego.len() != table.d_a {
        return Err(Error::LengthMismatch {
            detail: format!("ego dimension {} vs table d_a {}", ego.len(), table.d_a),
        });
    }
    // collapse duplicates so repeated actions do not reweight the softmax
    let mut unique: Vec<MetaAction> = Vec::new();
    for &a in actions {
        if !unique.contains(&a) {
            unique.push(a);
        }
    }
    let encoded = encode_meta_actions(&unique, table);
    let attended = cross_attention(ego, &encoded, &encoded)?;
    Ok(ego.iter().zip(&attended).map(|(e, a)| e + a).collect())
}

/// Fixed unit direction along which the fused ego token modulates the
/// safety weight: u_safe = (1, ..., 1) / sqrt(d_A).
pub fn safety_direction(d_a: usize) -> Vec<f64> {
    vec![1.0 / (d_a as f64).sqrt(); d_a]
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// alpha'_safety = alpha_safety * (1 + logistic(<ego', u_safe>)).
pub fn modulated_weights(ego_prime: &EgoToken, base: &RewardWeights) -> RewardWeights {
    let u = safety_direction(ego_prime.len());
    let dot: f64 = ego_prime.iter().zip(&u).map(|(e, ui)| e * ui).sum();
    let mut w = base.clone();
    w.alpha_safety = base.alpha_safety * (1.0 + logistic(dot));
    w
}

/// Forward distance (from the ego pose) at which the vehicle must be able
/// to stop: the nearest red light / stop sign on the ego lane or
/// pedestrian in the hazard corridor, minus the stop margin. None when no
/// geometric reference is visible.
pub fn stop_reference_distance(state: &WorldState, scenario: &Scenario, cfg: &Config) -> Option<f64> {
    let pose = state.ego.pose;
    let ego_lane = scenario.nearest_lane(pose.x, pose.y);
    let mut nearest: Option<f64> = None;
    let mut consider = |f: f64| {
        if f >= 0.0 && f <= cfg.reasoner.control_lookahead {
            nearest = Some(nearest.map_or(f, |n: f64| n.min(f)));
        }
    };
    for c in &state.controls {
        if matches!(c.kind, TrafficControlKind::RedLight | TrafficControlKind::StopSign)
            && ego_lane.is_none_or(|l| c.applies_to_lane == l)
        {
            let (f, _) = pose.to_local(c.position.0, c.position.1);
            consider(f);
        }
    }
    for a in &state.agents {
        if a.kind == crate::world::AgentKind::Pedestrian
            && crate::world::in_forward_corridor(
                &pose,
                a.pose.x,
                a.pose.y,
                cfg.reasoner.corridor_length,
                cfg.reasoner.corridor_half_width,
            )
        {
            let (f, _) = pose.to_local(a.pose.x, a.pose.y);
            consider(f);
        }
    }
    nearest.map(|f| (f - cfg.fusion.stop_margin).max(0.0))
}

fn satisfies_stop(traj: &Trajectory, ego_pose: &crate::world::Pose2D, limit: Option<f64>, stop_speed: f64) -> bool {
    let final_ok = traj.waypoints.last().is_none_or(|w| w.speed <= stop_speed);
    if !final_ok {
        return false;
    }
    match limit {
        None => true,
        Some(allowed) => traj.waypoints.iter().all(|w| {
            let (f, _) = ego_pose.to_local(w.pose.x, w.pose.y);
            f <= allowed + 1e-9
        }),
    }
}

/// Gate candidates on the active planning-state bits:
/// - any stop bit: final speed <= stop_speed and no waypoint past the
///   stop reference;
/// - lane_blocked: drop near-zero-curvature (lane-keeping) candidates.
///
/// Never returns an empty set: if every candidate violates a constraint,
/// the single candidate with the lowest safety cost survives.
pub fn apply_planning_state(
    bits: &PlanningState,
    set: &CandidateSet,
    state: &WorldState,
    scenario: &Scenario,
    cfg: &Config,
) -> Result<CandidateSet> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("candidate set must be non-empty".into()));
    }
    let stop_active = bits.any_stop_bit();
    let stop_limit = if stop_active {
        stop_reference_distance(state, scenario, cfg)
    } else {
        None
    };
    let kept: Vec<crate::fast::Candidate> = set
        .candidates
        .iter()
        .filter(|c| {
            if stop_active
                && !satisfies_stop(&c.trajectory, &state.ego.pose, stop_limit, cfg.fusion.stop_speed)
            {
                return false;
            }
            if bits.lane_blocked()
                && mean_curvature(&c.trajectory).abs() < cfg.fusion.min_lane_change_curvature
            {
                return false;
            }
            true
        })
        .cloned()
        .collect();
    if !kept.is_empty() {
        return Ok(CandidateSet {
            candidates: kept,
            n_k: set.n_k,
        });
    }
    // all gated out: keep the single safest candidate
    let horizon = set.candidates[0].trajectory.len().saturating_sub(1);
    let states = predict_states(state, scenario, horizon);
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in set.candidates.iter().enumerate() {
        let theta = target_headings(&c.trajectory, scenario);
        let s = safety_cost(&c.trajectory, &states, scenario, &theta, &cfg.reward)?;
        if best.is_none_or(|(b, _)| s.c_safety < b) {
            best = Some((s.c_safety, i));
        }
    }
    let (_, idx) = best.expect("non-empty set");
    Ok(CandidateSet {
        candidates: vec![set.candidates[idx].clone()],
        n_k: set.n_k,
    })
}

/// Shift the latent acceleration prior toward braking when the reasoner
/// asked for a stopping or decelerating maneuver, so compliant candidates
/// exist in the regenerated set.
fn conditioned_kinematics(response: &ReasonerResponse, cfg: &Config) -> crate::config::KinematicsConfig {
    let mut kc = cfg.kinematics.clone();
    let wants_brake = response.planning_state.any_stop_bit()
        || response.meta_actions.iter().any(|a| {
            matches!(a, MetaAction::Stop | MetaAction::Wait | MetaAction::Decelerate)
        });
    if wants_brake && kc.accel_scale > 0.0 {
        let mu_brake = kc.a_min / kc.accel_scale;
        for m in kc.mu[kc.curvature_knots..].iter_mut() {
            *m = mu_brake;
        }
    }
    kc
}

/// Regenerate candidates on an offset latent stream, gate them with the
/// planning state, rescore with the feedback-modulated weights, and
/// return the new argmax trajectory with its breakdown.
pub fn replan(
    state: &WorldState,
    scenario: &Scenario,
    response: &ReasonerResponse,
    ego: &EgoToken,
    table: &EmbeddingTable,
    cfg: &Config,
    seed: u64,
) -> Result<(Trajectory, RewardBreakdown)> {
    let kc = conditioned_kinematics(response, cfg);
    let set = generate_candidates(
        state,
        scenario,
        &kc,
        cfg.kinematics.n_k,
        seed.wrapping_add(REPLAN_SEED_OFFSET),
    )?;
    let gated = apply_planning_state(&response.planning_state, &set, state, scenario, cfg)?;
    let ego_prime = fuse_feedback(ego, &response.meta_actions, table)?;
    let weights = modulated_weights(&ego_prime, &cfg.reward);
    let states = predict_states(state, scenario, cfg.kinematics.horizon_steps.saturating_sub(1));
    let scores = score_candidates(&gated, &states, scenario, &weights)?;
    let best = select_top_k(&scores, 1)?[0];
    Ok((gated.candidates[best].trajectory.clone(), scores[best].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::new(16, 7).unwrap()
    }

    #[test]
    fn table_is_seeded_and_rows_distinct() {
        let a = EmbeddingTable::new(16, 7).unwrap();
        let b = EmbeddingTable::new(16, 7).unwrap();
        for action in MetaAction::VOCABULARY {
            assert_eq!(a.row(action), b.row(action));
            assert!(a.row(action).iter().all(|v| v.is_finite()));
        }
        let c = EmbeddingTable::new(16, 8).unwrap();
        assert_ne!(a.row(MetaAction::Stop), c.row(MetaAction::Stop));
    }

    #[test]
    fn encode_preserves_order_and_duplicates() {
        let t = table();
        let rows = encode_meta_actions(&[MetaAction::Stop, MetaAction::Stop], &t);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], rows[1]);
        assert_eq!(rows[0], t.row(MetaAction::Stop));

        let ab = encode_meta_actions(&[MetaAction::Stop, MetaAction::Yield], &t);
        let ba = encode_meta_actions(&[MetaAction::Yield, MetaAction::Stop], &t);
        assert_eq!(ab[0], ba[1]);
        assert_eq!(ab[1], ba[0]);
    }

    #[test]
    fn single_row_attention_returns_the_value() {
        let out = cross_attention(
            &[9.0, -3.0],
            &[vec![0.1, 0.2]],
            &[vec![5.0, 6.0]],
        )
        .unwrap();
        assert_eq!(out, vec![5.0, 6.0]);
    }

    #[test]
    fn identical_keys_average_values_uniformly() {
        let keys = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        let values = vec![vec![3.0, 0.0], vec![0.0, 3.0], vec![3.0, 3.0]];
        let out = cross_attention(&[0.4, -0.7], &keys, &values).unwrap();
        assert_relative_eq!(out[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(out[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn random_case_matches_exp_normalize_oracle() {
        let q = [0.3, -1.2, 0.8, 0.05];
        let keys = vec![
            vec![1.0, 0.2, -0.3, 0.9],
            vec![-0.5, 0.7, 0.1, -1.1],
            vec![0.0, 0.0, 2.0, 0.4],
        ];
        let values = vec![
            vec![1.0, 2.0, 3.0, 4.0],
            vec![-1.0, 0.5, 0.0, 2.0],
            vec![0.3, 0.3, 0.3, 0.3],
        ];
        let out = cross_attention(&q, &keys, &values).unwrap();

        // direct oracle: exp(q.k/sqrt(d)) normalize, weighted sum
        let d = (q.len() as f64).sqrt();
        let raw: Vec<f64> = keys
            .iter()
            .map(|k| (q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / d).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        for j in 0..q.len() {
            let expect: f64 = raw
                .iter()
                .zip(&values)
                .map(|(w, v)| w / z * v[j])
                .sum();
            assert_relative_eq!(out[j], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_keys_is_an_error() {
        assert!(cross_attention(&[1.0], &[], &[]).is_err());
        assert!(fuse_feedback(&vec![0.0; 16], &[], &table()).is_err());
    }

    #[test]
    fn zero_ego_single_action_yields_table_row() {
        let t = table();
        let out = fuse_feedback(&zero_ego(16), &[MetaAction::Yield], &t).unwrap();
        for (o, r) in out.iter().zip(t.row(MetaAction::Yield)) {
            assert_relative_eq!(o, r, epsilon = 1e-12);
        }
    }

    #[test]
    fn repeated_actions_do_not_change_fusion() {
        let t = table();
        let ego: EgoToken = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let once = fuse_feedback(&ego, &[MetaAction::Stop, MetaAction::Wait], &t).unwrap();
        let thrice = fuse_feedback(
            &ego,
            &[
                MetaAction::Stop,
                MetaAction::Wait,
                MetaAction::Stop,
                MetaAction::Stop,
                MetaAction::Wait,
            ],
            &t,
        )
        .unwrap();
        for (a, b) in once.iter().zip(&thrice) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    /// Solve the normal equations (R R^T) w = R d by Gaussian elimination
    /// and return the residual norm of projecting d onto the row span.
    fn span_residual(rows: &[Vec<f64>], delta: &[f64]) -> f64 {
        let n = rows.len();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y).sum();
            }
            a[i][n] = rows[i].iter().zip(delta).map(|(x, y)| x * y).sum();
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
            a.swap(col, pivot);
            let p = a[col][col];
            if p.abs() < 1e-12 {
                continue;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / p;
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let w: Vec<f64> = (0..n)
            .map(|i| if a[i][i].abs() < 1e-12 { 0.0 } else { a[i][n] / a[i][i] })
            .collect();
        delta
            .iter()
            .enumerate()
            .map(|(j, d)| {
                let fit: f64 = rows.iter().zip(&w).map(|(r, wi)| wi * r[j]).sum();
                (d - fit).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn fusion_delta_lies_in_action_row_span() {
        let t = table();
        let ego: EgoToken = (0..16).map(|i| ((i * i) as f64 * 0.11).cos()).collect();
        let actions = [MetaAction::Decelerate, MetaAction::ChangeLaneLeft, MetaAction::PrepareTurn];
        let fused = fuse_feedback(&ego, &actions, &t).unwrap();
        let delta: Vec<f64> = fused.iter().zip(&ego).map(|(f, e)| f - e).collect();
        let rows = encode_meta_actions(&actions, &t);
        assert!(span_residual(&rows, &delta) <= 1e-9);
    }

    proptest! {
        #[test]
        fn weights_are_a_probability_vector(
            q in proptest::collection::vec(-3.0..3.0f64, 4),
            flat in proptest::collection::vec(-3.0..3.0f64, 8),
        ) {
            let keys: Vec<Vec<f64>> = flat.chunks(4).map(|c| c.to_vec()).collect();
            let w = attention_weights(&q, &keys).unwrap();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn attention_invariant_under_row_permutation(
            q in proptest::collection::vec(-2.0..2.0f64, 3),
            flat in proptest::collection::vec(-2.0..2.0f64, 9),
            vflat in proptest::collection::vec(-2.0..2.0f64, 9),
        ) {
            let keys: Vec<Vec<f64>> = flat.chunks(3).map(|c| c.to_vec()).collect();
            let values: Vec<Vec<f64>> = vflat.chunks(3).map(|c| c.to_vec()).collect();
            let base = cross_attention(&q, &keys, &values).unwrap();
            let perm = [2usize, 0, 1];
            let pk: Vec<Vec<f64>> = perm.iter().map(|&i| keys[i].clone()).collect();
            let pv: Vec<Vec<f64>> = perm.iter().map(|&i| values[i].clone()).collect();
            let permuted = cross_attention(&q, &pk, &pv).unwrap();
            for (a, b) in base.iter().zip(&permuted) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn all_zero_bits_leave_candidates_unchanged() {
        let c = cfg();
        let sc = crate::suite::straight_road_scenario(20, 8.0, &[]);
        let st = sc.initial_state();
        let set = generate_candidates(&st, &sc, &c.kinematics, 4, 11).unwrap();
        let gated = apply_planning_state(&PlanningState::default(), &set, &st, &sc, &c).unwrap();
        assert_eq!(gated.len(), set.len());
        for (a, b) in gated.candidates.iter().zip(&set.candidates) {
            assert_eq!(a.trajectory.waypoints.len(), b.trajectory.waypoints.len());
            assert_eq!(a.trajectory.waypoints[1].pose.x, b.trajectory.waypoints[1].pose.x);
        }
    }

    #[test]
    fn red_light_gating_matches_per_candidate_oracle() {
        let c = cfg();
        let sc = crate::suite::intersection_scenario();
        let st = sc.initial_state();
        let mut bits = PlanningState::default();
        bits.set("red_light", true);
        // braking prior so the mixed set contains compliant candidates
        let resp = ReasonerResponse {
            planning_state: bits,
            meta_actions: vec![MetaAction::Stop],
            justification: String::new(),
            answers: None,
        };
        let kc = super::conditioned_kinematics(&resp, &c);
        let mut set = generate_candidates(&st, &sc, &kc, 4, 11).unwrap();
        // add guaranteed non-compliant candidates from the unshifted prior
        let cruising = generate_candidates(&st, &sc, &c.kinematics, 4, 11).unwrap();
        set.candidates.extend(cruising.candidates);

        let limit = stop_reference_distance(&st, &sc, &c);
        let compliant: Vec<bool> = set
            .candidates
            .iter()
            .map(|cand| super::satisfies_stop(&cand.trajectory, &st.ego.pose, limit, c.fusion.stop_speed))
            .collect();
        assert!(compliant.iter().any(|&x| x), "need at least one stopping candidate");
        assert!(compliant.iter().any(|&x| !x), "need at least one cruising candidate");

        let gated = apply_planning_state(&bits, &set, &st, &sc, &c).unwrap();
        let expected = compliant.iter().filter(|&&x| x).count();
        assert_eq!(gated.len(), expected);
        for cand in &gated.candidates {
            assert!(cand.trajectory.waypoints.last().unwrap().speed <= c.fusion.stop_speed);
        }
    }

    #[test]
    fn gating_never_returns_empty() {
        let c = cfg();
        let sc = crate::suite::intersection_scenario();
        let st = sc.initial_state();
        // cruising-only candidates cannot satisfy the stop constraint
        let set = generate_candidates(&st, &sc, &c.kinematics, 3, 3).unwrap();
        let mut bits = PlanningState::default();
        bits.set("red_light", true);
        bits.set("lane_blocked", true);
        let gated = apply_planning_state(&bits, &set, &st, &sc, &c).unwrap();
        assert_eq!(gated.len(), 1, "fallback keeps exactly the safest candidate");
    }

    #[test]
    fn stop_response_replans_to_a_stopping_trajectory() {
        let c = cfg();
        let sc = crate::suite::intersection_scenario();
        let st = sc.initial_state();
        let prompt = crate::slow::build_bev_prompt(&st, &sc);
        let resp = crate::slow::rule_based_reason(&prompt, &c.reasoner);
        assert!(resp.planning_state.any_stop_bit());
        let t = table();
        let (traj, _) = replan(&st, &sc, &resp, &zero_ego(t.d_a), &t, &c, 17).unwrap();
        assert!(traj.waypoints.last().unwrap().speed <= c.fusion.stop_speed);
    }

    #[test]
    fn lane_blocked_response_replans_with_curvature() {
        let c = cfg();
        let sc = crate::suite::blocked_lane_scenario(0);
        let st = sc.initial_state();
        let prompt = crate::slow::build_bev_prompt(&st, &sc);
        let resp = crate::slow::rule_based_reason(&prompt, &c.reasoner);
        assert!(resp.planning_state.lane_blocked());
        let t = table();
        let (traj, _) = replan(&st, &sc, &resp, &zero_ego(t.d_a), &t, &c, 17).unwrap();
        assert!(mean_curvature(&traj).abs() >= c.fusion.min_lane_change_curvature);
    }

    #[test]
    fn noop_feedback_matches_fast_selection_on_shared_stream() {
        let c = cfg();
        let sc = crate::suite::straight_road_scenario(20, 8.0, &[]);
        let st = sc.initial_state();
        let resp = ReasonerResponse {
            planning_state: PlanningState::default(),
            meta_actions: vec![MetaAction::KeepLane],
            justification: String::new(),
            answers: None,
        };
        let t = table();
        let seed = 23;
        let (traj, _) = replan(&st, &sc, &resp, &zero_ego(t.d_a), &t, &c, seed).unwrap();

        // fast-pathway selection on the same latent stream
        let set = generate_candidates(
            &st,
            &sc,
            &c.kinematics,
            c.kinematics.n_k,
            seed.wrapping_add(REPLAN_SEED_OFFSET),
        )
        .unwrap();
        let states = predict_states(&st, &sc, c.kinematics.horizon_steps - 1);
        let scores = score_candidates(&set, &states, &sc, &c.reward).unwrap();
        let best = select_top_k(&scores, 1).unwrap()[0];
        let fast_traj = &set.candidates[best].trajectory;
        for (a, b) in traj.waypoints.iter().zip(&fast_traj.waypoints) {
            assert_relative_eq!(a.pose.x, b.pose.x, epsilon = 1e-12);
            assert_relative_eq!(a.pose.y, b.pose.y, epsilon = 1e-12);
        }
    }
}
