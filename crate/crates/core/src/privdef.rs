//! Location-privacy defenses and adaptive budget allocation.
//!
//! Mechanisms:
//!
//! * [`dpsgd_perturb`]: clip the shared gradient and add Gaussian noise.
//! * [`geoi_sample`]: planar Laplace noise on a raw location (ε per meter).
//! * [`geogi_sample`]: exponential mechanism over all network nodes with
//!   shortest-path distance in meters.
//! * [`pgem_sample`]: exponential mechanism restricted to a user's constrained
//!   domain, with induced-subgraph distances rescaled by the domain diameter.
//!
//! The adaptive strategy spends `exp(−γ_t)` of the remaining budget at round
//! `t`, where `γ_t` grows with the measured attack risk of that round.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{ConstrainedDomain, Location, NodeId, RoadNetwork};
use crate::mobimodel::GradientVec;
use crate::stgia::AttackConfig;

/// Spendable budget below which allocation reports exhaustion.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-9;

/// Default clamp applied to the allocation proportion when clamping is enabled.
pub const DEFAULT_P_CLAMP: (f64, f64) = (0.01, 0.5);

/// Total privacy budget and the per-round ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub total: f64,
    spent: f64,
    per_round: Vec<f64>,
    pub floor: f64,
    /// Optional `[p_min, p_max]` bound on the allocation proportion.
    pub clamp: Option<(f64, f64)>,
}

impl PrivacyBudget {
    pub fn new(total: f64) -> Result<Self> {
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::input(format!(
                "total budget must be positive, got {total}"
            )));
        }
        Ok(PrivacyBudget {
            total,
            spent: 0.0,
            per_round: Vec::new(),
            floor: DEFAULT_EPSILON_FLOOR,
            clamp: None,
        })
    }

    pub fn with_clamp(mut self, p_min: f64, p_max: f64) -> Result<Self> {
        if !(0.0 < p_min && p_min <= p_max && p_max <= 1.0) {
            return Err(Error::input(format!(
                "clamp needs 0 < p_min <= p_max <= 1, got [{p_min}, {p_max}]"
            )));
        }
        self.clamp = Some((p_min, p_max));
        Ok(self)
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn per_round(&self) -> &[f64] {
        &self.per_round
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() <= self.floor
    }
}

/// Spends `p · ε′` with `p = exp(−γ_t)` (optionally clamped) and `ε′` the
/// remaining budget, and returns the round's allocation.
pub fn allocate_budget(budget: &mut PrivacyBudget, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::input(format!(
            "importance must be >= 0, got {gamma}"
        )));
    }
    let remaining = budget.remaining();
    if remaining <= budget.floor {
        return Err(Error::BudgetExhausted { remaining });
    }
    let mut p = (-gamma).exp();
    if let Some((lo, hi)) = budget.clamp {
        p = p.clamp(lo, hi);
    }
    let eps = p * remaining;
    if !(eps > 0.0) {
        return Err(Error::BudgetExhausted { remaining });
    }
    budget.spent += eps;
    budget.per_round.push(eps);
    Ok(eps)
}

/// Per-round attack risk, indexed from round 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskProfile {
    asr: Vec<f64>,
    ait: Vec<Option<f64>>,
}

impl RiskProfile {
    pub fn new(asr: Vec<f64>, ait: Vec<Option<f64>>) -> Result<Self> {
        if asr.len() != ait.len() {
            return Err(Error::input("ASR and AIT series differ in length"));
        }
        for (i, (&s, a)) in asr.iter().zip(&ait).enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::input(format!("ASR[{}] = {s} outside [0, 1]", i + 1)));
            }
            match a {
                Some(a) if !(*a >= 1.0) => {
                    return Err(Error::input(format!("AIT[{}] = {a} below 1", i + 1)));
                }
                None if s > 0.0 => {
                    return Err(Error::input(format!(
                        "AIT[{}] absent although ASR is {s}",
                        i + 1
                    )));
                }
                _ => {}
            }
        }
        Ok(RiskProfile { asr, ait })
    }

    pub fn len(&self) -> usize {
        self.asr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.asr.is_empty()
    }

    /// `(ASR[t], AIT[t])` for a 1-based round.
    pub fn get(&self, t: usize) -> Option<(f64, Option<f64>)> {
        if t == 0 {
            return None;
        }
        Some((*self.asr.get(t - 1)?, self.ait[t - 1]))
    }

    pub fn push(&mut self, asr: f64, ait: Option<f64>) {
        self.asr.push(asr);
        self.ait.push(ait);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceParams {
    pub alpha: f64,
    pub beta: f64,
    /// AIT normaliser, normally the attack iteration cap.
    pub n_ref: f64,
    pub gamma_cap: f64,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        ImportanceParams {
            alpha: 0.5,
            beta: 0.5,
            n_ref: 200.0,
            gamma_cap: 10.0,
        }
    }
}

impl ImportanceParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || (self.alpha + self.beta - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!(
                "importance weights need alpha, beta >= 0 and alpha + beta = 1, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.n_ref >= 1.0) {
            return Err(Error::input("n_ref must be >= 1"));
        }
        if !(self.gamma_cap > 0.0) {
            return Err(Error::input("gamma_cap must be positive"));
        }
        Ok(())
    }
}

/// `γ_t = α·ASR[t] + β·N_ref / AIT[t]`, clamped to `[0, γ_cap]`. An absent
/// AIT contributes nothing.
pub fn importance(risk: &RiskProfile, t: usize, params: &ImportanceParams) -> Result<f64> {
    params.validate()?;
    let (asr, ait) = risk.get(t).ok_or_else(|| {
        Error::input(format!(
            "round {t} outside risk profile of {} rounds",
            risk.len()
        ))
    })?;
    let speed = ait.map_or(0.0, |a| params.beta * params.n_ref / a);
    Ok((params.alpha * asr + speed).clamp(0.0, params.gamma_cap))
}

/// Shortest-path metric of a constrained domain's induced subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMetric {
    domain: ConstrainedDomain,
    /// Row-major `|C| × |C|` distances in meters, in `domain.node_ids()` order.
    dist: Vec<f64>,
    diameter: f64,
}

impl DomainMetric {
    pub fn new(domain: &ConstrainedDomain, net: &RoadNetwork) -> Result<Self> {
        let ids = domain.node_ids();
        let mask = domain.mask(net.num_nodes());
        let n = ids.len();
        let mut dist = vec![0.0; n * n];
        for (i, &src) in ids.iter().enumerate() {
            let row = net.dijkstra(src, Some(&mask))?;
            for (j, &dst) in ids.iter().enumerate() {
                dist[i * n + j] = row[dst].ok_or_else(|| {
                    Error::config(format!(
                        "constrained domain is disconnected: node {src} cannot reach node {dst}"
                    ))
                })?;
            }
        }
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        Ok(DomainMetric {
            domain: domain.clone(),
            dist,
            diameter,
        })
    }

    pub fn domain(&self) -> &ConstrainedDomain {
        &self.domain
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    fn index_of(&self, x: NodeId) -> Result<usize> {
        self.domain
            .node_ids()
            .binary_search(&x)
            .map_err(|_| Error::input(format!("node {x} is not in the constrained domain")))
    }

    /// Induced-subgraph distance in meters.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let n = self.domain.len();
        Ok(self.dist[self.index_of(a)? * n + self.index_of(b)?])
    }

    /// Distance divided by the domain diameter (0 for single-point domains).
    pub fn rescaled_distance(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let d = self.distance(a, b)?;
        Ok(if self.diameter > 0.0 {
            d / self.diameter
        } else {
            0.0
        })
    }

    /// Output distribution of PGEM at `x`, in `domain.node_ids()` order.
    pub fn pgem_distribution(&self, x: NodeId, epsilon: f64) -> Result<Vec<f64>> {
        check_epsilon(epsilon)?;
        let i = self.index_of(x)?;
        let n = self.domain.len();
        let scale = if self.diameter > 0.0 {
            1.0 / self.diameter
        } else {
            0.0
        };
        Ok(exponential_weights(
            self.dist[i * n..(i + 1) * n].iter().map(|d| d * scale),
            epsilon,
        ))
    }

    /// Nearest domain node to a planar location.
    pub fn nearest_member(&self, loc: &Location, net: &RoadNetwork) -> NodeId {
        *self
            .domain
            .node_ids()
            .iter()
            .min_by(|&&a, &&b| {
                net.node(a)
                    .dist_sq(loc)
                    .total_cmp(&net.node(b).dist_sq(loc))
                    .then(a.cmp(&b))
            })
            .expect("domain is nonempty")
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(())
}

/// `exp(−(ε/2)·d) / Σ exp(−(ε/2)·d)`, shifted by the minimum distance for stability.
fn exponential_weights(dist: impl Iterator<Item = f64> + Clone, epsilon: f64) -> Vec<f64> {
    let dmin = dist.clone().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = dist.map(|d| (-0.5 * epsilon * (d - dmin)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn inverse_cdf<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// PGEM output distribution for input node `x` over `domain` (in sorted node order).
pub fn pgem_distribution(
    x: NodeId,
    domain: &ConstrainedDomain,
    epsilon: f64,
    net: &RoadNetwork,
) -> Result<Vec<f64>> {
    if !domain.contains(x) {
        return Err(Error::input(format!(
            "node {x} is not in the constrained domain"
        )));
    }
    DomainMetric::new(domain, net)?.pgem_distribution(x, epsilon)
}

/// Draws one node from [`pgem_distribution`] by inverse CDF.
pub fn pgem_sample<R: Rng + ?Sized>(
    x: NodeId,
    domain: &ConstrainedDomain,
    epsilon: f64,
    net: &RoadNetwork,
    rng: &mut R,
) -> Result<NodeId> {
    let probs = pgem_distribution(x, domain, epsilon, net)?;
    Ok(domain.node_ids()[inverse_cdf(&probs, rng)])
}

/// Same as [`pgem_sample`] but reusing a precomputed metric.
pub fn pgem_sample_with<R: Rng + ?Sized>(
    x: NodeId,
    metric: &DomainMetric,
    epsilon: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let probs = metric.pgem_distribution(x, epsilon)?;
    Ok(metric.domain().node_ids()[inverse_cdf(&probs, rng)])
}

/// Exact GeoGI distribution over all nodes, distances in meters, `epsilon` per meter.
pub fn geogi_distribution(x: NodeId, net: &RoadNetwork, epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    let dist = net.dijkstra(x, None)?;
    let dist: Vec<f64> = dist
        .into_iter()
        .enumerate()
        .map(|(n, d)| {
            d.ok_or_else(|| {
                Error::config(format!(
                    "network is disconnected: node {x} cannot reach {n}"
                ))
            })
        })
        .collect::<Result<_>>()?;
    Ok(exponential_weights(dist.into_iter(), epsilon))
}

pub fn geogi_sample<R: Rng + ?Sized>(
    x: NodeId,
    net: &RoadNetwork,
    epsilon: f64,
    rng: &mut R,
) -> Result<NodeId> {
    let probs = geogi_distribution(x, net, epsilon)?;
    Ok(inverse_cdf(&probs, rng))
}

/// Exponential(rate) draw by inverse CDF.
fn exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}

/// Planar Laplace: uniform angle, Gamma(2, ε) radius.
pub fn geoi_sample<R: Rng + ?Sized>(loc: &Location, epsilon: f64, rng: &mut R) -> Result<Location> {
    check_epsilon(epsilon)?;
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    let r = exponential(epsilon, rng) + exponential(epsilon, rng);
    Ok(Location::new(
        loc.x + r * theta.cos(),
        loc.y + r * theta.sin(),
    ))
}

/// Density of the planar Laplace output `z` given true location `x`.
pub fn geoi_pdf(z: &Location, x: &Location, epsilon: f64) -> f64 {
    epsilon * epsilon / std::f64::consts::TAU * (-epsilon * z.dist(x)).exp()
}

/// Clip to L2 norm `clip`, then add `N(0, σ²C²)` to every coordinate.
pub fn dpsgd_perturb<R: Rng + ?Sized>(
    grad: &GradientVec,
    clip: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<GradientVec> {
    if !(clip > 0.0) {
        return Err(Error::input(format!(
            "clip norm must be positive, got {clip}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::input(format!(
            "noise multiplier must be >= 0, got {sigma}"
        )));
    }
    let norm = grad.norm();
    let factor = if norm > clip { clip / norm } else { 1.0 };
    let std = sigma * clip;
    Ok(GradientVec(
        grad.0
            .iter()
            .map(|g| {
                let noise = if std > 0.0 {
                    std * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                g * factor + noise
            })
            .collect(),
    ))
}

/// Classical Gaussian-mechanism noise multiplier for a per-round `(ε, δ)`.
pub fn gaussian_sigma(epsilon: f64, delta: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

/// Where the adaptive strategy reads its per-round risk from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RiskSource {
    /// Risk measured on an earlier undefended run.
    Profile { profile: RiskProfile },
    /// Defender attacks the previous round's defended gradients itself.
    Shadow { attack: AttackConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub total_epsilon: f64,
    #[serde(default)]
    pub importance: ImportanceParams,
    /// `Some([p_min, p_max])` enables the allocation clamp.
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
    pub risk: RiskSource,
    /// Path radius in meters of each user's constrained domain.
    pub domain_radius: f64,
}

impl AdaptiveConfig {
    pub fn new_budget(&self) -> Result<PrivacyBudget> {
        let b = PrivacyBudget::new(self.total_epsilon)?;
        match self.clamp {
            Some((lo, hi)) => b.with_clamp(lo, hi),
            None => Ok(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "snake_case")]
pub enum DefensePlan {
    #[default]
    None,
    Dpsgd {
        clip: f64,
        sigma: f64,
    },
    /// `epsilon` per meter.
    Geoi {
        epsilon: f64,
    },
    /// `epsilon` per meter.
    Geogi {
        epsilon: f64,
    },
    PgemAdaptive(AdaptiveConfig),
}

impl DefensePlan {
    pub fn name(&self) -> &'static str {
        match self {
            DefensePlan::None => "none",
            DefensePlan::Dpsgd { .. } => "dpsgd",
            DefensePlan::Geoi { .. } => "geoi",
            DefensePlan::Geogi { .. } => "geogi",
            DefensePlan::PgemAdaptive(_) => "pgem_adaptive",
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, DefensePlan::None)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DefensePlan::None => Ok(()),
            DefensePlan::Dpsgd { clip, sigma } => {
                if !(*clip > 0.0) || !(*sigma >= 0.0) {
                    return Err(Error::config("dpsgd needs clip > 0 and sigma >= 0"));
                }
                Ok(())
            }
            DefensePlan::Geoi { epsilon } | DefensePlan::Geogi { epsilon } => {
                check_epsilon(*epsilon)
                    .map_err(|_| Error::config("defense epsilon must be positive"))
            }
            DefensePlan::PgemAdaptive(cfg) => {
                cfg.importance.validate()?;
                cfg.new_budget()?;
                if !(cfg.domain_radius >= 0.0) {
                    return Err(Error::config("domain_radius must be >= 0"));
                }
                Ok(())
            }
        }
    }
}

/// Round-level step of the adaptive strategy: importance then allocation.
pub fn adaptive_round_budget(
    budget: &mut PrivacyBudget,
    risk: &RiskProfile,
    t: usize,
    params: &ImportanceParams,
) -> Result<f64> {
    let gamma = importance(risk, t, params)?;
    allocate_budget(budget, gamma)
}

/// One client's step of the adaptive strategy: allocate `ε_t` from the
/// risk at round `t`, then release `x` through PGEM on its domain.
pub fn adaptive_defense_round<R: Rng + ?Sized>(
    budget: &mut PrivacyBudget,
    risk: &RiskProfile,
    t: usize,
    x: NodeId,
    metric: &DomainMetric,
    params: &ImportanceParams,
    rng: &mut R,
) -> Result<(NodeId, f64)> {
    if !metric.domain().contains(x) {
        return Err(Error::input(format!(
            "node {x} is not in the constrained domain"
        )));
    }
    let eps = adaptive_round_budget(budget, risk, t, params)?;
    Ok((pgem_sample_with(x, metric, eps, rng)?, eps))
}

/// Mechanisms whose output distribution can be enumerated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMechanism {
    Pgem,
    Geogi,
}

impl AuditMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            AuditMechanism::Pgem => "pgem",
            AuditMechanism::Geogi => "geogi",
        }
    }
}

/// Largest `ln Pr[c|x] − ln Pr[c|x′] − ε·d(x, x′)` over all inputs and
/// outputs of the domain, with `d` the mechanism's own metric. A value ≤ 0
/// certifies the metric-DP ratio bound on this domain.
pub fn audit_ratio_bound(
    mechanism: AuditMechanism,
    domain: &ConstrainedDomain,
    epsilon: f64,
    net: &RoadNetwork,
) -> Result<f64> {
    let ids = domain.node_ids();
    let n = ids.len();
    let (dists, probs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match mechanism {
        AuditMechanism::Pgem => {
            let metric = DomainMetric::new(domain, net)?;
            let mut d = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for &x in ids {
                d.push(
                    ids.iter()
                        .map(|&y| metric.rescaled_distance(x, y))
                        .collect::<Result<Vec<_>>>()?,
                );
                p.push(metric.pgem_distribution(x, epsilon)?);
            }
            (d, p)
        }
        AuditMechanism::Geogi => {
            if n != net.num_nodes() {
                return Err(Error::input("GeoGI audits the whole network as its domain"));
            }
            let mut d = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for &x in ids {
                let row = net.dijkstra(x, None)?;
                d.push(
                    row.into_iter()
                        .map(|v| v.ok_or_else(|| Error::config("network is disconnected")))
                        .collect::<Result<Vec<_>>>()?,
                );
                p.push(geogi_distribution(x, net, epsilon)?);
            }
            (d, p)
        }
    };
    let mut worst = f64::NEG_INFINITY;
    for a in 0..n {
        for b in 0..n {
            let bound = epsilon * dists[a][b];
            for (pa, pb) in probs[a].iter().zip(&probs[b]) {
                worst = worst.max(pa.ln() - pb.ln() - bound);
            }
        }
    }
    Ok(worst)
}
