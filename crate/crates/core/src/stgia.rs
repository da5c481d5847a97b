//! Spatiotemporal gradient inversion.
//!
//! For every observed (client, round) gradient the attacker optimizes dummy
//! inputs and a soft dummy label so that their parameter gradient matches
//! the observed one. Three optional components sit on top of plain gradient
//! matching:
//!
//! * **warm start** (`st_init`): the previous round's reconstruction of the
//!   same client, shifted by one window position, seeds the next round;
//! * **mapping**: every iterate is projected onto the road network;
//! * **calibration**: all recoveries of one trajectory point are averaged.
//!
//! With all three disabled the attack is a DLG-style baseline.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fedsim::{AttackerView, ClientId, RoundRecord};
use crate::geo::{Location, RoadNetwork};
use crate::mobimodel::{
    attack_gradient_normalized, distance_normalized, normalize_inputs, GradientVec, ModelParams,
    ModelSpec,
};
use crate::rng::{derive, Stream};

/// Reconstructions closer than this to the truth count as successful.
pub const DEFAULT_SUCCESS_THRESHOLD_M: f64 = 500.0;
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Step-halving attempts per iteration before the iterate is declared stuck.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    pub st_init: bool,
    pub mapping: bool,
    pub calibration: bool,
}

impl AblationFlags {
    pub const FULL: AblationFlags = AblationFlags {
        st_init: true,
        mapping: true,
        calibration: true,
    };
    pub const BASELINE: AblationFlags = AblationFlags {
        st_init: false,
        mapping: false,
        calibration: false,
    };

    /// The eight on/off combinations, baseline first.
    pub fn all_combinations() -> Vec<AblationFlags> {
        (0..8u8)
            .map(|m| AblationFlags {
                st_init: m & 1 != 0,
                mapping: m & 2 != 0,
                calibration: m & 4 != 0,
            })
            .collect()
    }
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub max_iters: usize,
    pub attack_rate: f64,
    pub success_threshold: f64,
    /// Largest per-location move (normalized units) that counts as "no change".
    pub convergence_tol: f64,
    pub flags: AblationFlags,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            max_iters: DEFAULT_MAX_ITERS,
            attack_rate: 1.0,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD_M,
            convergence_tol: 1e-6,
            flags: AblationFlags::FULL,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("attack max_iters must be >= 1"));
        }
        if !(self.attack_rate > 0.0) {
            return Err(Error::config("attack_rate must be positive"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::config("success_threshold must be positive"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence_tol must be >= 0"));
        }
        Ok(())
    }
}

/// Attacker state: dummy inputs (meters) and dummy label logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyData {
    pub inputs: Vec<Location>,
    pub label: Vec<f64>,
}

/// Dummy data for round `t`. Round one, or any round without warm start,
/// draws inputs i.i.d. `N(0, 1)` on the normalized scale; otherwise the
/// previous reconstruction is shifted one position left and its last
/// location repeated. The label is always a fresh `N(0, 1)` draw.
pub fn initialize_dummy<R: Rng + ?Sized>(
    t: usize,
    prev: Option<&DummyData>,
    st_init: bool,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<DummyData> {
    if t == 0 {
        return Err(Error::Logic("rounds are numbered from 1".into()));
    }
    let k = spec.window_len;
    let warm = st_init && t > 1;
    let inputs = if warm {
        let prev = prev.ok_or_else(|| {
            Error::Logic(format!(
                "warm start at round {t} needs the previous round's result"
            ))
        })?;
        if prev.inputs.len() != k {
            return Err(Error::Logic(
                "previous dummy has the wrong window length".into(),
            ));
        }
        (0..k).map(|i| prev.inputs[(i + 1).min(k - 1)]).collect()
    } else {
        let s = spec.coordinate_scale;
        (0..k)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                Location::new(x * s, y * s)
            })
            .collect()
    };
    let label = (0..spec.num_cells)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Ok(DummyData { inputs, label })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub dummy: DummyData,
    pub iterations: usize,
    pub converged: bool,
    /// Gradient distance at the returned dummy.
    pub distance: f64,
}

fn map_normalized(u: &mut [f64], net: &RoadNetwork, scale: f64) -> Result<()> {
    for c in u.chunks_exact_mut(2) {
        let p = net.nearest_on_network(&Location::new(c[0] * scale, c[1] * scale))?;
        c[0] = p.x / scale;
        c[1] = p.y / scale;
    }
    Ok(())
}

fn max_move(a: &[f64], b: &[f64]) -> f64 {
    a.chunks_exact(2)
        .zip(b.chunks_exact(2))
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max)
}

fn denormalize(spec: &ModelSpec, u: &[f64]) -> Vec<Location> {
    let s = spec.coordinate_scale;
    u.chunks_exact(2)
        .map(|c| Location::new(c[0] * s, c[1] * s))
        .collect()
}

/// Gradient descent on `‖∇w(x′, y′) − ∇w*‖²` with step halving; see [`gradient_match_observed`].
pub fn gradient_match(
    spec: &ModelSpec,
    params: &ModelParams,
    true_grad: &GradientVec,
    init: &DummyData,
    net: &RoadNetwork,
    cfg: &AttackConfig,
) -> Result<MatchOutcome> {
    gradient_match_observed(spec, params, true_grad, init, net, cfg, |_| {})
}

/// Gradient matching that reports every accepted iterate to `observe`.
///
/// Each iteration tries a step of `attack_rate` on the normalized inputs and
/// on the label and halves it (up to [`MAX_HALVINGS`] times) until the
/// distance does not increase. With mapping enabled the accepted inputs are
/// then projected onto the network. The loop stops after `max_iters`
/// iterations, when no location moves more than `convergence_tol`, or when
/// no step size decreases the distance.
pub fn gradient_match_observed(
    spec: &ModelSpec,
    params: &ModelParams,
    true_grad: &GradientVec,
    init: &DummyData,
    net: &RoadNetwork,
    cfg: &AttackConfig,
    mut observe: impl FnMut(&DummyData),
) -> Result<MatchOutcome> {
    cfg.validate()?;
    if init.inputs.len() != spec.window_len || init.label.len() != spec.num_cells {
        return Err(Error::config("dummy data shape does not match the model"));
    }
    if true_grad.len() != spec.num_params() || params.len() != spec.num_params() {
        return Err(Error::config(
            "gradient or parameter length does not match the model",
        ));
    }
    let scale = spec.coordinate_scale;
    let mut u = normalize_inputs(spec, &init.inputs);
    let mut y = init.label.clone();
    let (mut dist, mut gu, mut gy) =
        attack_gradient_normalized(spec, params, u.clone(), &y, true_grad);
    let blown = |d: f64, gu: &[f64], gy: &[f64]| {
        !d.is_finite() || gu.iter().chain(gy).any(|v| !v.is_finite())
    };
    if blown(dist, &gu, &gy) {
        return Err(Error::numeric(
            "gradient matching",
            "non-finite distance at initialization",
        ));
    }

    let mut iterations = cfg.max_iters;
    let mut converged = false;
    for i in 1..=cfg.max_iters {
        if dist == 0.0 {
            iterations = i;
            converged = true;
            break;
        }
        let mut rate = cfg.attack_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cu: Vec<f64> = u.iter().zip(&gu).map(|(a, g)| a - rate * g).collect();
            let cy: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - rate * g).collect();
            let cd = distance_normalized(spec, params, cu.clone(), &cy, true_grad);
            if cd.is_finite() && cd <= dist {
                accepted = Some((cu, cy));
                break;
            }
            rate *= 0.5;
        }
        let Some((mut cu, cy)) = accepted else {
            iterations = i;
            converged = true;
            break;
        };
        if cfg.flags.mapping {
            map_normalized(&mut cu, net, scale)?;
        }
        let moved = max_move(&u, &cu);
        u = cu;
        y = cy;
        (dist, gu, gy) = attack_gradient_normalized(spec, params, u.clone(), &y, true_grad);
        if blown(dist, &gu, &gy) {
            return Err(Error::numeric(
                "gradient matching",
                format!("non-finite distance at iteration {i}"),
            ));
        }
        observe(&DummyData {
            inputs: denormalize(spec, &u),
            label: y.clone(),
        });
        if moved < cfg.convergence_tol {
            iterations = i;
            converged = true;
            break;
        }
    }
    Ok(MatchOutcome {
        dummy: DummyData {
            inputs: denormalize(spec, &u),
            label: y,
        },
        iterations,
        converged,
        distance: dist,
    })
}

/// Componentwise mean of the available recoveries of one point.
pub fn calibrate(recoveries: &[Location]) -> Result<Location> {
    if recoveries.is_empty() {
        return Err(Error::Logic(
            "calibration needs at least one recovery".into(),
        ));
    }
    let n = recoveries.len() as f64;
    let (sx, sy) = recoveries
        .iter()
        .fold((0.0, 0.0), |(x, y), l| (x + l.x, y + l.y));
    Ok(Location::new(sx / n, sy / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub round: usize,
    pub location: Location,
    pub iterations: usize,
    pub converged: bool,
}

/// One attacked (client, round) gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInstance {
    pub round: usize,
    pub client_id: ClientId,
    /// Trajectory index of the window's first point (`round − 1`).
    pub window_start: usize,
    /// `None` when the optimization blew up.
    pub recovered: Option<Vec<Location>>,
    pub iterations: usize,
    pub converged: bool,
}

/// All attack results, plus per-point recovery histories.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructionLog {
    pub window_len: usize,
    pub instances: Vec<AttackInstance>,
    points: BTreeMap<(ClientId, usize), Vec<Recovery>>,
}

impl ReconstructionLog {
    fn push(&mut self, inst: AttackInstance) {
        if let Some(locs) = &inst.recovered {
            for (pos, loc) in locs.iter().enumerate() {
                self.points
                    .entry((inst.client_id, inst.window_start + pos))
                    .or_default()
                    .push(Recovery {
                        round: inst.round,
                        location: *loc,
                        iterations: inst.iterations,
                        converged: inst.converged,
                    });
            }
        }
        self.instances.push(inst);
    }

    /// Recoveries of trajectory point `index` of `client`, in round order.
    pub fn recoveries(&self, client: ClientId, index: usize) -> &[Recovery] {
        self.points.get(&(client, index)).map_or(&[], Vec::as_slice)
    }

    pub fn points(&self) -> impl Iterator<Item = (&(ClientId, usize), &Vec<Recovery>)> {
        self.points.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for inst in &self.instances {
            serde_json::to_writer(&mut w, inst)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs the attack on every observed gradient. Clients are processed in
/// parallel; each client's rounds run in order so warm starts can chain.
pub fn reconstruct(
    view: &AttackerView<'_>,
    net: &RoadNetwork,
    cfg: &AttackConfig,
) -> Result<ReconstructionLog> {
    cfg.validate()?;
    let spec = &view.spec;
    type Inputs<'a> = Vec<(usize, &'a ModelParams, &'a GradientVec)>;
    let mut per_client: BTreeMap<ClientId, Inputs> = BTreeMap::new();
    for r in &view.rounds {
        for g in &r.gradients {
            per_client.entry(g.client_id).or_default().push((
                r.round,
                r.global_params_before,
                g.gradient,
            ));
        }
    }
    let jobs: Vec<(ClientId, Inputs)> = per_client.into_iter().collect();
    let results: Vec<Vec<AttackInstance>> = jobs
        .par_iter()
        .map(|(client, rounds)| {
            let mut prev: Option<(usize, DummyData)> = None;
            let mut out = Vec::with_capacity(rounds.len());
            for &(t, params, grad) in rounds {
                let mut rng = derive(cfg.seed, Stream::AttackInit, &[*client as u64, t as u64]);
                let warm = prev.as_ref().filter(|(pt, _)| pt + 1 == t).map(|(_, d)| d);
                let st_init = cfg.flags.st_init && warm.is_some();
                let init = initialize_dummy(t, warm, st_init, spec, &mut rng)?;
                match gradient_match(spec, params, grad, &init, net, cfg) {
                    Ok(m) => {
                        out.push(AttackInstance {
                            round: t,
                            client_id: *client,
                            window_start: t - 1,
                            recovered: Some(m.dummy.inputs.clone()),
                            iterations: m.iterations,
                            converged: m.converged,
                        });
                        prev = Some((t, m.dummy));
                    }
                    Err(Error::Numeric { component, detail }) => {
                        log::debug!(
                            "attack on client {client} round {t} failed: {component}: {detail}"
                        );
                        out.push(AttackInstance {
                            round: t,
                            client_id: *client,
                            window_start: t - 1,
                            recovered: None,
                            iterations: cfg.max_iters,
                            converged: false,
                        });
                        prev = None;
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut all: Vec<AttackInstance> = results.into_iter().flatten().collect();
    all.sort_by_key(|i| (i.round, i.client_id));
    let mut log = ReconstructionLog {
        window_len: spec.window_len,
        ..ReconstructionLog::default()
    };
    for inst in all {
        log.push(inst);
    }
    Ok(log)
}

/// True trajectory points, held by the evaluator and never shown to the attacker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    points: BTreeMap<(ClientId, usize), Location>,
}

impl GroundTruth {
    pub fn insert(&mut self, client: ClientId, index: usize, loc: Location) {
        self.points.insert((client, index), loc);
    }

    pub fn get(&self, client: ClientId, index: usize) -> Option<Location> {
        self.points.get(&(client, index)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    pub round: usize,
    pub client_id: ClientId,
    pub point_index: usize,
    /// Infinite when the attack failed.
    pub error_m: f64,
    pub iterations: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub asr: f64,
    /// `None` when nothing in the round was recovered.
    pub mean_ait: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedPoint {
    pub client_id: ClientId,
    pub point_index: usize,
    pub location: Location,
    pub error_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackReport {
    pub rounds: Vec<RoundSummary>,
    pub points: Vec<PointOutcome>,
    pub calibrated: Vec<CalibratedPoint>,
}

impl AttackReport {
    pub fn mean_asr(&self) -> Option<f64> {
        if self.rounds.is_empty() {
            return None;
        }
        Some(self.rounds.iter().map(|r| r.asr).sum::<f64>() / self.rounds.len() as f64)
    }

    pub fn risk_profile(&self) -> Result<crate::privdef::RiskProfile> {
        crate::privdef::RiskProfile::new(
            self.rounds.iter().map(|r| r.asr).collect(),
            self.rounds.iter().map(|r| r.mean_ait).collect(),
        )
    }

    /// `round,client_id,point_index,error_m,iterations,success`
    pub fn write_points_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "round",
            "client_id",
            "point_index",
            "error_m",
            "iterations",
            "success",
        ])
        .map_err(csv_err)?;
        for p in &self.points {
            out.write_record([
                p.round.to_string(),
                p.client_id.to_string(),
                p.point_index.to_string(),
                format!("{:.6}", p.error_m),
                p.iterations.to_string(),
                (p.success as u8).to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `round,asr,mean_ait` with an empty cell for rounds without success.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "asr", "mean_ait"])
            .map_err(csv_err)?;
        for r in &self.rounds {
            out.write_record([
                r.round.to_string(),
                format!("{:.6}", r.asr),
                r.mean_ait.map_or(String::new(), |a| format!("{a:.3}")),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Fraction of reconstructions strictly closer than `threshold` to the truth.
pub fn attack_success_rate(recon: &[Location], truth: &[Location], threshold: f64) -> Result<f64> {
    if recon.is_empty() {
        return Err(Error::input("attack success rate needs at least one point"));
    }
    if recon.len() != truth.len() {
        return Err(Error::input(format!(
            "{} reconstructions but {} true points",
            recon.len(),
            truth.len()
        )));
    }
    let hits = recon
        .iter()
        .zip(truth)
        .filter(|(r, t)| r.dist(t) < threshold)
        .count();
    Ok(hits as f64 / recon.len() as f64)
}

/// Mean iterations over successful outcomes, per round; `None` where a round
/// has no success.
pub fn attack_iterations(outcomes: &[PointOutcome]) -> BTreeMap<usize, Option<f64>> {
    let mut acc: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let e = acc.entry(o.round).or_default();
        if o.success {
            e.0 += o.iterations;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(r, (sum, n))| (r, (n > 0).then(|| sum as f64 / n as f64)))
        .collect()
}

/// Scores a reconstruction log against the truth.
///
/// Round `t` is scored on what the attacker knows after round `t`: a point's
/// estimate is its recovery from that round, or with calibration the mean of
/// its recoveries from rounds `≤ t`. Points of a failed instance count as
/// misses. The calibrated points are the estimates after the last round.
pub fn evaluate(
    log: &ReconstructionLog,
    truth: &GroundTruth,
    cfg: &AttackConfig,
) -> Result<AttackReport> {
    let truth_of = |client: ClientId, index: usize| {
        truth.get(client, index).ok_or_else(|| {
            Error::input(format!("no ground truth for client {client} point {index}"))
        })
    };
    let mut points = Vec::new();
    for inst in &log.instances {
        for pos in 0..log.window_len {
            let index = inst.window_start + pos;
            let truth_loc = truth_of(inst.client_id, index)?;
            let estimate = match &inst.recovered {
                None => None,
                Some(_) if cfg.flags.calibration => {
                    let upto: Vec<Location> = log
                        .recoveries(inst.client_id, index)
                        .iter()
                        .filter(|r| r.round <= inst.round)
                        .map(|r| r.location)
                        .collect();
                    Some(calibrate(&upto)?)
                }
                Some(locs) => Some(locs[pos]),
            };
            let error_m = estimate.map_or(f64::INFINITY, |e| e.dist(&truth_loc));
            points.push(PointOutcome {
                round: inst.round,
                client_id: inst.client_id,
                point_index: index,
                error_m,
                iterations: inst.iterations,
                success: error_m < cfg.success_threshold,
            });
        }
    }

    let ait = attack_iterations(&points);
    let mut by_round: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for p in &points {
        let e = by_round.entry(p.round).or_default();
        e.0 += p.success as usize;
        e.1 += 1;
    }
    let rounds = by_round
        .into_iter()
        .map(|(round, (hits, n))| RoundSummary {
            round,
            asr: hits as f64 / n as f64,
            mean_ait: ait.get(&round).copied().flatten(),
        })
        .collect();

    let mut calibrated = Vec::new();
    for (&(client, index), recs) in log.points() {
        let location = if cfg.flags.calibration {
            calibrate(&recs.iter().map(|r| r.location).collect::<Vec<_>>())?
        } else {
            recs.last().expect("nonempty history").location
        };
        calibrated.push(CalibratedPoint {
            client_id: client,
            point_index: index,
            location,
            error_m: location.dist(&truth_of(client, index)?),
        });
    }
    Ok(AttackReport {
        rounds,
        points,
        calibrated,
    })
}

/// Attack plus evaluation.
pub fn run_attack(
    view: &AttackerView<'_>,
    truth: &GroundTruth,
    net: &RoadNetwork,
    cfg: &AttackConfig,
) -> Result<(ReconstructionLog, AttackReport)> {
    let log = reconstruct(view, net, cfg)?;
    let report = evaluate(&log, truth, cfg)?;
    Ok((log, report))
}

/// ASR and AIT a defender measures by attacking one finished round itself.
pub fn shadow_risk(
    spec: &ModelSpec,
    net: &RoadNetwork,
    round: &RoundRecord,
    cfg: &AttackConfig,
) -> Result<(f64, Option<f64>)> {
    let view = AttackerView {
        spec: *spec,
        rounds: vec![crate::fedsim::ObservedRound {
            round: round.round,
            global_params_before: &round.global_params_before,
            gradients: round
                .clients
                .iter()
                .map(|c| crate::fedsim::ObservedGradient {
                    client_id: c.client_id,
                    gradient: &c.shared_gradient,
                })
                .collect(),
        }],
    };
    let mut truth = GroundTruth::default();
    for c in &round.clients {
        for (pos, loc) in c.truth_window.inputs.iter().enumerate() {
            truth.insert(c.client_id, round.round - 1 + pos, *loc);
        }
    }
    let (_, report) = run_attack(&view, &truth, net, cfg)?;
    Ok(report
        .rounds
        .first()
        .map_or((0.0, None), |r| (r.asr, r.mean_ait)))
}

/// Square first layer (`H = 2k`) with identity weights and zero bias, random
/// head: the input is then an exact linear function of the first-layer
/// gradient, `gW1 = gb1 · uᵀ`.
pub fn linear_probe<R: Rng + ?Sized>(
    window_len: usize,
    num_cells: usize,
    coordinate_scale: f64,
    rng: &mut R,
) -> Result<(ModelSpec, ModelParams)> {
    let spec = ModelSpec::new(window_len, 2 * window_len, num_cells, coordinate_scale)?;
    let mut params = ModelParams::init(&spec, rng);
    let d = spec.input_dim();
    for i in 0..d {
        for j in 0..d {
            params.0[i * d + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    for b in &mut params.0[d * d..d * d + d] {
        *b = 0.0;
    }
    Ok((spec, params))
}
