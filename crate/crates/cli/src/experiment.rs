//! Experiment building blocks shared by the subcommands.

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use stgia_core::dataio::{
    constrained_domain_for, group_by_user, load_checkins, read_trajectories_jsonl,
    resample_trajectory, synthesize_trajectories, ResampleOptions, Trajectory,
};
use stgia_core::fedsim::{
    evaluate_recall, min_trajectory_len, run_training, ClientId, ClientState, TrainingOptions,
    Transcript,
};
use stgia_core::geo::{ConstrainedDomain, Location, ProjectionSpec, RoadNetwork};
use stgia_core::mobimodel::{CellGrid, ModelSpec};
use stgia_core::privdef::{
    audit_ratio_bound, gaussian_sigma, geoi_pdf, AdaptiveConfig, AuditMechanism, DefensePlan,
    RiskProfile, RiskSource,
};
use stgia_core::rng::{derive, Stream};
use stgia_core::stgia::{run_attack, AblationFlags, AttackConfig, AttackReport, ReconstructionLog};

use crate::config::{
    AuditConfig, AuditTarget, DataSource, ExperimentConfig, Mechanism, NetworkSource,
};
use crate::CliError;

/// Predictions are scored by recall@5.
pub const RECALL_TOP_K: usize = 5;

pub fn load_network(src: &NetworkSource) -> Result<RoadNetwork, CliError> {
    Ok(match src {
        NetworkSource::Grid {
            rows,
            cols,
            spacing,
        } => RoadNetwork::grid(*rows, *cols, *spacing)?,
        NetworkSource::File { path } => RoadNetwork::load(path)?,
    })
}

/// Network, output cells, model shape and user trajectories of one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub net: RoadNetwork,
    pub grid: CellGrid,
    pub spec: ModelSpec,
    pub trajectories: Vec<Trajectory>,
    pub rounds: usize,
    pub local_rate: f64,
    pub holdout_fraction: f64,
}

impl Scenario {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        cfg.validate()?;
        let net = load_network(&cfg.network)?;
        let bbox = net
            .bbox()
            .ok_or_else(|| CliError::Config("network: no nodes".into()))?;
        let m = &cfg.model;
        let grid = CellGrid::new(bbox, m.cell_cols, m.cell_rows)?;
        let scale = m.coordinate_scale.unwrap_or_else(|| bbox.diagonal());
        let spec = ModelSpec::new(m.window_len, m.hidden_units, grid.num_cells(), scale)?;
        let t = &cfg.training;
        let needed = min_trajectory_len(m.window_len, t.rounds, t.holdout_fraction);
        let trajectories = load_trajectories(&cfg.data, &net, needed, seed)?;
        info!(
            "scenario: {} nodes, {} users, G = {}, trajectories of >= {needed} points",
            net.num_nodes(),
            trajectories.len(),
            spec.num_cells
        );
        Ok(Scenario {
            net,
            grid,
            spec,
            trajectories,
            rounds: t.rounds,
            local_rate: t.local_rate,
            holdout_fraction: t.holdout_fraction,
        })
    }

    /// One client per trajectory. Constrained domains are only computed when
    /// a radius is given; otherwise each domain is the whole network.
    pub fn clients(&self, domain_radius: Option<f64>) -> Result<Vec<ClientState>, CliError> {
        let whole = ConstrainedDomain::all(&self.net)?;
        self.trajectories
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let domain = match domain_radius {
                    Some(r) => constrained_domain_for(t, &self.net, r)?,
                    None => whole.clone(),
                };
                Ok(ClientState {
                    client_id: i as ClientId,
                    trajectory: t.clone(),
                    local_rate: self.local_rate,
                    domain,
                })
            })
            .collect()
    }

    pub fn train(&self, defense: &DefensePlan, seed: u64) -> Result<Transcript, CliError> {
        let radius = match defense {
            DefensePlan::PgemAdaptive(a) => Some(a.domain_radius),
            _ => None,
        };
        let clients = self.clients(radius)?;
        let opts = TrainingOptions {
            rounds: self.rounds,
            seed,
        };
        Ok(run_training(
            &clients, &self.spec, &self.net, &self.grid, defense, &opts,
        )?)
    }

    fn recall(&self, params: &stgia_core::mobimodel::ModelParams) -> Result<f64, CliError> {
        let trajs: Vec<&Trajectory> = self.trajectories.iter().collect();
        Ok(evaluate_recall(
            &self.spec,
            params,
            &self.grid,
            &trajs,
            self.rounds,
            self.holdout_fraction,
            RECALL_TOP_K,
        )?)
    }

    /// Held-out recall@5 of the final model.
    pub fn final_recall(&self, tr: &Transcript) -> Result<f64, CliError> {
        self.recall(&tr.final_params)
    }

    /// Held-out recall@5 after each recorded round.
    pub fn recall_curve(&self, tr: &Transcript) -> Result<Vec<f64>, CliError> {
        (0..tr.rounds.len())
            .into_par_iter()
            .map(|i| {
                let params = tr
                    .rounds
                    .get(i + 1)
                    .map_or(&tr.final_params, |r| &r.global_params_before);
                self.recall(params)
            })
            .collect()
    }
}

fn load_trajectories(
    src: &DataSource,
    net: &RoadNetwork,
    needed: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, CliError> {
    let trajs = match src {
        DataSource::Synthetic { users, step_budget } => {
            synthesize_trajectories(net, *users, needed, seed, *step_budget)?
        }
        DataSource::Csv {
            path,
            origin,
            max_users,
        } => {
            let proj = ProjectionSpec::new(origin.0, origin.1)?;
            let rows = load_checkins(path)?;
            let mut opts = ResampleOptions::for_window(1);
            opts.min_segment_len = needed;
            let mut out = Vec::new();
            for (user, checkins) in group_by_user(&rows) {
                if max_users.is_some_and(|m| out.len() >= m) {
                    break;
                }
                match resample_trajectory(&checkins, &proj, net, &opts)?
                    .into_iter()
                    .next()
                {
                    Some(seg) => out.push(seg),
                    None => info!("user {user}: no segment of {needed} points"),
                }
            }
            out
        }
        DataSource::Jsonl { path } => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("data.path: {}: {e}", path.display())))?;
            let all = read_trajectories_jsonl(std::io::BufReader::new(file))?;
            let total = all.len();
            let kept: Vec<Trajectory> = all.into_iter().filter(|t| t.len() >= needed).collect();
            if kept.len() < total {
                warn!(
                    "{} trajectories shorter than {needed} points dropped",
                    total - kept.len()
                );
            }
            kept
        }
    };
    if trajs.is_empty() {
        return Err(CliError::Config(format!(
            "data: no trajectory has the {needed} points needed for training and evaluation"
        )));
    }
    Ok(trajs)
}

/// Attacks a transcript with the run seed.
pub fn attack(
    tr: &Transcript,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<(ReconstructionLog, AttackReport), CliError> {
    let cfg = AttackConfig {
        seed,
        ..cfg.clone()
    };
    Ok(run_attack(
        &tr.attacker_view(),
        &tr.ground_truth(),
        &tr.network,
        &cfg,
    )?)
}

/// Attack reports for all eight ablation combinations, baseline first.
pub fn ablation(
    tr: &Transcript,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<Vec<(AblationFlags, AttackReport)>, CliError> {
    AblationFlags::all_combinations()
        .into_iter()
        .map(|flags| {
            let (_, report) = attack(
                tr,
                &AttackConfig {
                    flags,
                    ..cfg.clone()
                },
                seed,
            )?;
            Ok((flags, report))
        })
        .collect()
}

/// Defense plan for a point on the common ε axis.
pub fn defense_for(
    mechanism: Mechanism,
    epsilon: f64,
    cfg: &ExperimentConfig,
    risk: Option<&RiskProfile>,
) -> Result<DefensePlan, CliError> {
    let tr = &cfg.tradeoff;
    Ok(match mechanism {
        Mechanism::Dpsgd => DefensePlan::Dpsgd {
            clip: tr.clip,
            sigma: gaussian_sigma(epsilon, tr.delta)?,
        },
        Mechanism::Geoi => DefensePlan::Geoi {
            epsilon: epsilon / 1000.0,
        },
        Mechanism::Geogi => DefensePlan::Geogi {
            epsilon: epsilon / 1000.0,
        },
        Mechanism::PgemAdaptive => DefensePlan::PgemAdaptive(AdaptiveConfig {
            total_epsilon: epsilon,
            importance: tr.importance,
            clamp: None,
            risk: RiskSource::Profile {
                profile: risk
                    .cloned()
                    .ok_or_else(|| CliError::Config("pgem_adaptive needs a risk profile".into()))?,
            },
            domain_radius: tr.domain_radius,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRun {
    pub mechanism: Mechanism,
    pub epsilon: f64,
    pub seed: u64,
    /// Mean per-round ASR of the full attack, 0 when no round was trained.
    pub asr: f64,
    pub recall: f64,
}

/// Defended training, full attack and held-out evaluation for every
/// mechanism × ε × seed. The adaptive defense reads its risk profile from
/// an undefended run on the same seed.
pub fn tradeoff_runs(cfg: &ExperimentConfig) -> Result<Vec<TradeoffRun>, CliError> {
    let mut runs = Vec::new();
    for s in 0..cfg.tradeoff.seeds as u64 {
        let seed = cfg.seed + s;
        let scenario = Scenario::build(cfg, seed)?;
        let risk = if cfg.tradeoff.mechanisms.contains(&Mechanism::PgemAdaptive) {
            let tr = scenario.train(&DefensePlan::None, seed)?;
            Some(attack(&tr, &cfg.attack, seed)?.1.risk_profile()?)
        } else {
            None
        };
        for &mechanism in &cfg.tradeoff.mechanisms {
            for &epsilon in &cfg.tradeoff.epsilons {
                let plan = defense_for(mechanism, epsilon, cfg, risk.as_ref())?;
                let tr = scenario.train(&plan, seed)?;
                let (_, report) = attack(&tr, &cfg.attack, seed)?;
                let recall = scenario.final_recall(&tr)?;
                info!(
                    "{} eps {epsilon} seed {seed}: {} rounds",
                    mechanism.name(),
                    tr.rounds.len()
                );
                runs.push(TradeoffRun {
                    mechanism,
                    epsilon,
                    seed,
                    asr: report.mean_asr().unwrap_or(0.0),
                    recall,
                });
            }
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub mechanism: AuditTarget,
    pub epsilon: f64,
    pub seed: u64,
    pub domain_size: usize,
    pub excess: f64,
}

/// Connected domain of `size` nodes grown breadth-first from a random node.
fn random_ball<R: Rng>(
    net: &RoadNetwork,
    size: usize,
    rng: &mut R,
) -> Result<ConstrainedDomain, CliError> {
    let start = rng.random_range(0..net.num_nodes());
    let mut seen = vec![start];
    let mut i = 0;
    while seen.len() < size && i < seen.len() {
        for &(nb, _) in net.neighbors(seen[i]) {
            if seen.len() < size && !seen.contains(&nb) {
                seen.push(nb);
            }
        }
        i += 1;
    }
    Ok(ConstrainedDomain::new(seen, net)?)
}

const AUDIT_EXTENT_M: f64 = 2000.0;
const GEOI_TRIPLES: usize = 1000;

/// Ratio-bound excess per (mechanism, ε, seed); see [`AuditConfig`] for units.
pub fn audit_rows(cfg: &AuditConfig, base_seed: u64) -> Result<Vec<AuditRow>, CliError> {
    let mut jobs = Vec::new();
    for &m in &cfg.mechanisms {
        for &eps in &cfg.epsilons {
            for s in 0..cfg.seeds as u64 {
                jobs.push((m, eps, s));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(mechanism, epsilon, s)| {
            let seed = base_seed + s;
            let mut rng = derive(seed, Stream::Audit, &[mechanism as u64]);
            let n = cfg.domain_size;
            let excess = match mechanism {
                AuditTarget::Pgem => {
                    let net = RoadNetwork::random_connected(2 * n, AUDIT_EXTENT_M, &mut rng)?;
                    let domain = random_ball(&net, n, &mut rng)?;
                    audit_ratio_bound(AuditMechanism::Pgem, &domain, epsilon, &net)?
                }
                AuditTarget::Geogi => {
                    let net = RoadNetwork::random_connected(n, AUDIT_EXTENT_M, &mut rng)?;
                    let whole = ConstrainedDomain::all(&net)?;
                    audit_ratio_bound(AuditMechanism::Geogi, &whole, epsilon / 1000.0, &net)?
                }
                AuditTarget::Geoi => {
                    let eps = epsilon / 1000.0;
                    let mut point = || {
                        Location::new(
                            rng.random::<f64>() * AUDIT_EXTENT_M,
                            rng.random::<f64>() * AUDIT_EXTENT_M,
                        )
                    };
                    (0..GEOI_TRIPLES)
                        .map(|_| {
                            let (x, x2, z) = (point(), point(), point());
                            geoi_pdf(&z, &x, eps).ln()
                                - geoi_pdf(&z, &x2, eps).ln()
                                - eps * x.dist(&x2)
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            };
            Ok(AuditRow {
                mechanism,
                epsilon,
                seed,
                domain_size: n,
                excess,
            })
        })
        .collect()
}
