//! Federated averaging simulation.
//!
//! Every round each client takes one SGD step on a sliding window of its
//! trajectory and shares the gradient; the server averages the resulting
//! parameters with unit weights. The [`Transcript`] stores what the server
//! saw together with the ground truth each gradient was computed from. The
//! attacker only ever receives an [`AttackerView`].

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::Trajectory;
use crate::error::{Error, Result};
use crate::geo::{ConstrainedDomain, Location, RoadNetwork};
use crate::mobimodel::{
    f64s_from_le_bytes, f64s_to_le_bytes, forward, param_gradient, rank_cells, recall_at_k,
    CellGrid, GradientVec, Label, ModelParams, ModelSpec, TrainingWindow,
};
use crate::privdef::{
    adaptive_round_budget, dpsgd_perturb, geogi_sample, geoi_sample, pgem_sample_with, DefensePlan,
    DomainMetric, PrivacyBudget, RiskProfile, RiskSource,
};
use crate::rng::{derive, Stream};
use crate::stgia;

pub type ClientId = u32;

#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: ClientId,
    pub trajectory: Trajectory,
    pub local_rate: f64,
    pub domain: ConstrainedDomain,
}

/// One SGD step: returns `(params − η·∇, ∇)`.
pub fn local_update(
    spec: &ModelSpec,
    global: &ModelParams,
    window: &TrainingWindow,
    local_rate: f64,
) -> Result<(ModelParams, GradientVec)> {
    let grad = param_gradient(spec, global, window)?;
    Ok((global.sgd_step(&grad, local_rate), grad))
}

/// Componentwise `Σ wᵢ·pᵢ / Σ wᵢ`.
pub fn fedavg_aggregate(updates: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::input("cannot aggregate zero updates"));
    }
    if updates.len() != weights.len() {
        return Err(Error::input(format!(
            "{} updates but {} weights",
            updates.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::input("aggregation weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::input("aggregation weights sum to zero"));
    }
    let n = updates[0].len();
    if updates.iter().any(|u| u.len() != n) {
        return Err(Error::input("updates differ in length"));
    }
    let mut acc = vec![0.0; n];
    for (u, &w) in updates.iter().zip(weights) {
        for (a, v) in acc.iter_mut().zip(&u.0) {
            *a += w * v;
        }
    }
    Ok(ModelParams(acc.into_iter().map(|a| a / total).collect()))
}

/// Window used at 1-based round `t`: inputs `x_t … x_{t+k−1}` and the
/// location of `x_{t+k}` whose cell is the label.
pub fn window_points(traj: &Trajectory, k: usize, t: usize) -> Option<(Vec<Location>, Location)> {
    let start = t.checked_sub(1)?;
    let label = traj.points.get(start + k)?;
    Some((
        traj.points[start..start + k]
            .iter()
            .map(|p| p.loc)
            .collect(),
        label.loc,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientRecord {
    pub client_id: ClientId,
    pub shared_gradient: GradientVec,
    /// Evaluation-only ground truth.
    pub truth_window: TrainingWindow,
    pub defended: bool,
    pub epsilon_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub global_params_before: ModelParams,
    pub clients: Vec<ClientRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub spec: ModelSpec,
    pub network: RoadNetwork,
    pub grid: CellGrid,
    pub seed: u64,
    /// Rounds requested; `rounds.len()` is smaller when the budget ran out.
    pub planned_rounds: usize,
    pub defense: String,
    pub rounds: Vec<RoundRecord>,
    pub final_params: ModelParams,
}

/// What an honest-but-curious server sees for one client in one round.
#[derive(Debug, Clone, Copy)]
pub struct ObservedGradient<'a> {
    pub client_id: ClientId,
    pub gradient: &'a GradientVec,
}

#[derive(Debug, Clone)]
pub struct ObservedRound<'a> {
    pub round: usize,
    pub global_params_before: &'a ModelParams,
    pub gradients: Vec<ObservedGradient<'a>>,
}

/// Attacker-visible part of a transcript: no ground truth.
#[derive(Debug, Clone)]
pub struct AttackerView<'a> {
    pub spec: ModelSpec,
    pub rounds: Vec<ObservedRound<'a>>,
}

impl Transcript {
    pub fn attacker_view(&self) -> AttackerView<'_> {
        AttackerView {
            spec: self.spec,
            rounds: self
                .rounds
                .iter()
                .map(|r| ObservedRound {
                    round: r.round,
                    global_params_before: &r.global_params_before,
                    gradients: r
                        .clients
                        .iter()
                        .map(|c| ObservedGradient {
                            client_id: c.client_id,
                            gradient: &c.shared_gradient,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn ground_truth(&self) -> stgia::GroundTruth {
        let mut truth = stgia::GroundTruth::default();
        for r in &self.rounds {
            for c in &r.clients {
                for (pos, loc) in c.truth_window.inputs.iter().enumerate() {
                    truth.insert(c.client_id, r.round - 1 + pos, *loc);
                }
            }
        }
        truth
    }

    /// ε actually used per round (defended runs with an allocated budget).
    pub fn epsilon_per_round(&self) -> Vec<Option<f64>> {
        self.rounds
            .iter()
            .map(|r| r.clients.first().and_then(|c| c.epsilon_used))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingOptions {
    pub rounds: usize,
    pub seed: u64,
}

/// Perturbs one window according to `plan` (input-side mechanisms only).
fn perturb_points(
    plan: &DefensePlan,
    points: &[Location],
    net: &RoadNetwork,
    metric: Option<&DomainMetric>,
    epsilon_t: Option<f64>,
    rng: &mut crate::rng::SimRng,
) -> Result<Vec<Location>> {
    match plan {
        DefensePlan::Geoi { epsilon } => points
            .iter()
            .map(|p| geoi_sample(p, *epsilon, rng))
            .collect(),
        DefensePlan::Geogi { epsilon } => points
            .iter()
            .map(|p| Ok(net.node(geogi_sample(net.nearest_node(p)?, net, *epsilon, rng)?)))
            .collect(),
        DefensePlan::PgemAdaptive(_) => {
            let metric = metric.expect("pgem runs carry a domain metric");
            let eps = epsilon_t.expect("pgem runs carry a round budget");
            points
                .iter()
                .map(|p| {
                    let x = metric.nearest_member(p, net);
                    Ok(net.node(pgem_sample_with(x, metric, eps, rng)?))
                })
                .collect()
        }
        DefensePlan::None | DefensePlan::Dpsgd { .. } => Ok(points.to_vec()),
    }
}

fn check_clients(clients: &[ClientState], k: usize, rounds: usize) -> Result<()> {
    for c in clients {
        if c.trajectory.len() < k + rounds {
            return Err(Error::config(format!(
                "client {} has {} trajectory points, needs k + T = {}",
                c.client_id,
                c.trajectory.len(),
                k + rounds
            )));
        }
        if !(c.local_rate > 0.0) {
            return Err(Error::config(format!(
                "client {} has non-positive local rate",
                c.client_id
            )));
        }
    }
    let mut ids: Vec<ClientId> = clients.iter().map(|c| c.client_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("client ids must be unique"));
    }
    Ok(())
}

/// Runs `T` rounds of FedAvg. Fully deterministic given `opts.seed`.
pub fn run_training(
    clients: &[ClientState],
    spec: &ModelSpec,
    net: &RoadNetwork,
    grid: &CellGrid,
    defense: &DefensePlan,
    opts: &TrainingOptions,
) -> Result<Transcript> {
    spec.validate()?;
    defense.validate()?;
    if grid.num_cells() != spec.num_cells {
        return Err(Error::config(format!(
            "cell grid has {} cells but the model predicts G = {}",
            grid.num_cells(),
            spec.num_cells
        )));
    }
    if clients.is_empty() {
        return Err(Error::config("training needs at least one client"));
    }
    check_clients(clients, spec.window_len, opts.rounds)?;

    let metrics: Vec<Option<DomainMetric>> = match defense {
        DefensePlan::PgemAdaptive(_) => clients
            .iter()
            .map(|c| DomainMetric::new(&c.domain, net).map(Some))
            .collect::<Result<_>>()?,
        _ => vec![None; clients.len()],
    };
    let mut budget: Option<PrivacyBudget> = match defense {
        DefensePlan::PgemAdaptive(cfg) => Some(cfg.new_budget()?),
        _ => None,
    };
    // risk observed by a shadow attacker, one entry per finished round
    let mut shadow_risk = RiskProfile::default();

    let mut params = ModelParams::init(spec, &mut derive(opts.seed, Stream::ModelInit, &[]));
    let mut rounds = Vec::with_capacity(opts.rounds);
    for t in 1..=opts.rounds {
        let epsilon_t = match (defense, budget.as_mut()) {
            (DefensePlan::PgemAdaptive(cfg), Some(b)) => {
                let risk = match &cfg.risk {
                    RiskSource::Profile { profile } => profile,
                    RiskSource::Shadow { .. } => {
                        if t == 1 {
                            shadow_risk.push(0.0, None);
                        }
                        &shadow_risk
                    }
                };
                match adaptive_round_budget(b, risk, t, &cfg.importance) {
                    Ok(e) => Some(e),
                    Err(Error::BudgetExhausted { remaining }) => {
                        log::info!(
                            "privacy budget exhausted before round {t} ({remaining:.3e} left)"
                        );
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            _ => None,
        };

        let outcomes: Vec<(ModelParams, ClientRecord)> = clients
            .par_iter()
            .zip(metrics.par_iter())
            .map(|(c, metric)| {
                let mut rng = derive(opts.seed, Stream::Defense, &[c.client_id as u64, t as u64]);
                let (inputs, label_loc) =
                    window_points(&c.trajectory, spec.window_len, t).expect("length checked");
                let truth =
                    TrainingWindow::new(inputs.clone(), Label::Cell(grid.cell_of(&label_loc)));

                let mut all = inputs;
                all.push(label_loc);
                let perturbed =
                    perturb_points(defense, &all, net, metric.as_ref(), epsilon_t, &mut rng)?;
                let label_cell = grid.cell_of(perturbed.last().expect("k + 1 points"));
                let train = TrainingWindow::new(
                    perturbed[..spec.window_len].to_vec(),
                    Label::Cell(label_cell),
                );

                let grad = param_gradient(spec, &params, &train)?;
                let shared = match defense {
                    DefensePlan::Dpsgd { clip, sigma } => {
                        dpsgd_perturb(&grad, *clip, *sigma, &mut rng)?
                    }
                    _ => grad,
                };
                let updated = params.sgd_step(&shared, c.local_rate);
                Ok((
                    updated,
                    ClientRecord {
                        client_id: c.client_id,
                        shared_gradient: shared,
                        truth_window: truth,
                        defended: defense.is_active(),
                        epsilon_used: epsilon_t,
                    },
                ))
            })
            .collect::<Result<_>>()?;

        let (updates, records): (Vec<ModelParams>, Vec<ClientRecord>) =
            outcomes.into_iter().unzip();
        let next = fedavg_aggregate(&updates, &vec![1.0; updates.len()])?;
        if let Some(i) = next.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(
                spec.component_name(i),
                format!("diverged in round {t}"),
            ));
        }
        let record = RoundRecord {
            round: t,
            global_params_before: params,
            clients: records,
        };
        if let DefensePlan::PgemAdaptive(cfg) = defense {
            if let RiskSource::Shadow { attack } = &cfg.risk {
                let (asr, ait) = stgia::shadow_risk(spec, net, &record, attack)?;
                shadow_risk.push(asr, ait);
            }
        }
        rounds.push(record);
        params = next;
    }

    Ok(Transcript {
        spec: *spec,
        network: net.clone(),
        grid: *grid,
        seed: opts.seed,
        planned_rounds: opts.rounds,
        defense: defense.name().to_string(),
        rounds,
        final_params: params,
    })
}

/// Number of trailing windows of a length-`len` trajectory held out for evaluation.
pub fn holdout_windows(len: usize, k: usize, fraction: f64) -> usize {
    let windows = len.saturating_sub(k);
    ((windows as f64) * fraction).ceil() as usize
}

/// Shortest trajectory that supports `rounds` training windows plus the held-out tail.
pub fn min_trajectory_len(k: usize, rounds: usize, fraction: f64) -> usize {
    (k + rounds..)
        .find(|&len| {
            let w = len - k;
            w >= rounds + holdout_windows(len, k, fraction)
        })
        .expect("unbounded search")
}

/// recall@`top_k` of `params` on the last `fraction` of every client's windows.
pub fn evaluate_recall(
    spec: &ModelSpec,
    params: &ModelParams,
    grid: &CellGrid,
    trajectories: &[&Trajectory],
    trained_rounds: usize,
    fraction: f64,
    top_k: usize,
) -> Result<f64> {
    let k = spec.window_len;
    let mut rankings = Vec::new();
    let mut truths = Vec::new();
    for traj in trajectories {
        let windows = traj.len().saturating_sub(k);
        let held = holdout_windows(traj.len(), k, fraction);
        if windows < trained_rounds + held {
            return Err(Error::config(format!(
                "trajectory {} is too short: held-out windows overlap training rounds",
                traj.user_id
            )));
        }
        for start in windows - held..windows {
            let (inputs, label) = window_points(traj, k, start + 1).expect("in range");
            rankings.push(rank_cells(&forward(spec, params, &inputs)?));
            truths.push(grid.cell_of(&label));
        }
    }
    recall_at_k(&rankings, &truths, top_k)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    kind: String,
    spec: ModelSpec,
    seed: u64,
    #[serde(rename = "T")]
    rounds: usize,
    recorded_rounds: usize,
    defense: String,
    network: serde_json::Value,
    grid: CellGrid,
    final_params: String,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    round: usize,
    client_id: ClientId,
    global_params_before: String,
    shared_gradient: String,
    truth_inputs: Vec<(f64, f64)>,
    truth_label: usize,
    defended: bool,
    epsilon_used: Option<f64>,
}

fn encode(v: &[f64]) -> String {
    B64.encode(f64s_to_le_bytes(v))
}

fn decode(s: &str, line: usize) -> Result<Vec<f64>> {
    let bytes = B64.decode(s).map_err(|e| Error::Parse {
        line,
        detail: format!("base64: {e}"),
    })?;
    f64s_from_le_bytes(&bytes)
}

/// Writes the transcript as JSON lines: a header, then one line per (round, client).
pub fn write_transcript<W: Write>(mut w: W, tr: &Transcript) -> Result<()> {
    let header = HeaderLine {
        kind: "header".into(),
        spec: tr.spec,
        seed: tr.seed,
        rounds: tr.planned_rounds,
        recorded_rounds: tr.rounds.len(),
        defense: tr.defense.clone(),
        network: serde_json::from_str(&tr.network.to_json_string())?,
        grid: tr.grid,
        final_params: encode(&tr.final_params.0),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for r in &tr.rounds {
        let params = encode(&r.global_params_before.0);
        for c in &r.clients {
            let label = match c.truth_window.label {
                Label::Cell(cell) => cell,
                Label::Soft(_) => {
                    return Err(Error::Logic("truth windows carry cell labels".into()))
                }
            };
            let line = RecordLine {
                round: r.round,
                client_id: c.client_id,
                global_params_before: params.clone(),
                shared_gradient: encode(&c.shared_gradient.0),
                truth_inputs: c.truth_window.inputs.iter().map(|l| (l.x, l.y)).collect(),
                truth_label: label,
                defended: c.defended,
                epsilon_used: c.epsilon_used,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_transcript<R: BufRead>(r: R) -> Result<Transcript> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::input("empty transcript file"))?;
    let header: HeaderLine = serde_json::from_str(&first?).map_err(|e| Error::Parse {
        line: 1,
        detail: e.to_string(),
    })?;
    header.spec.validate()?;
    let network = RoadNetwork::from_json_str(&header.network.to_string())?;
    let final_params = ModelParams::from_vec(&header.spec, decode(&header.final_params, 1)?)?;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            detail: e.to_string(),
        })?;
        if rounds.last().is_none_or(|r| r.round != rec.round) {
            let expected = rounds.len() + 1;
            if rec.round != expected {
                return Err(Error::Parse {
                    line: lineno,
                    detail: format!("round {} out of sequence, expected {expected}", rec.round),
                });
            }
            rounds.push(RoundRecord {
                round: rec.round,
                global_params_before: ModelParams::from_vec(
                    &header.spec,
                    decode(&rec.global_params_before, lineno)?,
                )?,
                clients: Vec::new(),
            });
        }
        let grad = decode(&rec.shared_gradient, lineno)?;
        if grad.len() != header.spec.num_params() {
            return Err(Error::Parse {
                line: lineno,
                detail: "gradient length does not match the model".into(),
            });
        }
        rounds
            .last_mut()
            .expect("pushed above")
            .clients
            .push(ClientRecord {
                client_id: rec.client_id,
                shared_gradient: GradientVec(grad),
                truth_window: TrainingWindow::new(
                    rec.truth_inputs
                        .into_iter()
                        .map(|(x, y)| Location::new(x, y))
                        .collect(),
                    Label::Cell(rec.truth_label),
                ),
                defended: rec.defended,
                epsilon_used: rec.epsilon_used,
            });
    }
    Ok(Transcript {
        spec: header.spec,
        network,
        grid: header.grid,
        seed: header.seed,
        planned_rounds: header.rounds,
        defense: header.defense,
        rounds,
        final_params,
    })
}
