//! The three-stage design pipeline and its building blocks.
//!
//! Stage 1 fits the torque manifold (moment arms up to column scaling),
//! stage 2 matches tendon travel to the motors under a soft stage-1
//! constraint, stage 3 picks springs so that every grasp posture is a
//! pre-contact equilibrium. Each stage runs CMA-ES inside an exclusion loop
//! that drops grasps whose metric stays above a threshold.

pub mod manifolds;
pub mod pipeline;
pub mod precontact;
pub mod stage1;
pub mod stage2;
pub mod stage3;

pub use manifolds::{sample_manifolds, ManifoldSamples, ManifoldSpace, SampleKind};
pub use pipeline::{run_pipeline, run_stage, PipelineState};
pub use precontact::{pre_contact_pose, pre_contact_pose_with, LimitState, PreContactPose, PreContactSolver};
pub use stage1::{grasp_stability_qp, optimize_torque_manifold, StabilityQp};
pub use stage2::{optimize_inter_tendon, travel_error};
pub use stage3::{optimize_intra_tendon, spring_balance_qp, spring_groups, SpringBalance, SpringGroup};

use crate::error::{Error, Result};
use crate::model::{CmaesStageConfig, ParamLayout, ParamVector};
use crate::solvers::{cmaes_minimize, CmaesSettings, Dimension, StopReason};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Metric above the stage threshold after a converged search.
    Threshold,
    /// The inner problem has no solution for any parameter value.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// 1-based search iteration after which the grasp was dropped.
    pub iteration: usize,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspMetric {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// `null` in JSON when the inner problem is infeasible.
    #[serde(with = "finite_or_null")]
    pub value: f64,
    pub considered: bool,
}

/// Summary of one independently optimized spring group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub id: String,
    pub chains: Vec<String>,
    pub class: String,
    pub slots: Vec<String>,
    pub objective: f64,
    pub threshold: f64,
    pub evals: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: u8,
    /// Values of the slots this stage decided.
    pub params: ParamVector,
    pub metrics: Vec<GraspMetric>,
    pub excluded: Vec<Exclusion>,
    /// Root of the summed squared metrics over considered grasps.
    pub objective: f64,
    pub unit: String,
    /// Minimal stage-1 objective; carried into stage 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_trq_min: Option<f64>,
    /// Stage-1 objective at the stage-2 optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_trq: Option<f64>,
    pub evals: usize,
    pub seed: u64,
    pub iterations: usize,
    pub stop: Vec<StopReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupSummary>,
    /// Non-fatal conditions, e.g. `budget_exhausted`, `penalty_active`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl StageResult {
    pub fn considered_ids(&self) -> Vec<&str> {
        self.metrics.iter().filter(|m| m.considered).map(|m| m.id.as_str()).collect()
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.len()
    }

    /// Recomputes the objective from the considered metrics.
    pub fn rss_of_considered(&self) -> f64 {
        rss(self.metrics.iter().filter(|m| m.considered).map(|m| m.value))
    }
}

pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// `√Σ v²`
pub fn rss(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Independent seed for a stage, group and search iteration.
pub(crate) fn derive_seed(seed: u64, stage: u64, sub: u64) -> u64 {
    let mut z = seed ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sub.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// CMA-ES search dimensions bound to named parameter slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub slots: Vec<String>,
    pub dims: Vec<Dimension<f64>>,
}

impl SearchSpace {
    /// All moment-arm slots; collapsed bounds become fixed dimensions.
    pub fn moment_arms(layout: &ParamLayout) -> Self {
        let mut s = SearchSpace { slots: Vec::new(), dims: Vec::new() };
        for slot in &layout.moment_arms {
            s.slots.push(slot.name.clone());
            s.dims.push(bounded(slot.lower, slot.upper));
        }
        s
    }

    /// The given stiffness and preload slots (canonical names).
    pub fn springs(layout: &ParamLayout, slots: &[String]) -> Result<Self> {
        let mut s = SearchSpace { slots: Vec::new(), dims: Vec::new() };
        for name in slots {
            let dim = if let Some(c) = layout.stiffness_catalog(name) {
                if c.values.is_empty() {
                    return Err(Error::invalid(format!("params.{name}"), "catalog empty"));
                }
                let mut values = c.values.clone();
                values.sort_by(f64::total_cmp);
                if values.len() == 1 {
                    Dimension::Fixed(values[0])
                } else {
                    Dimension::Discrete { values }
                }
            } else if let Some(b) = layout.preload(name) {
                bounded(b.lower, b.upper)
            } else {
                return Err(Error::invalid(format!("params.{name}"), "not a spring slot"));
            };
            s.slots.push(name.clone());
            s.dims.push(dim);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `base` with the searched slots overwritten by `x`.
    pub fn assign(&self, base: &ParamVector, x: &[f64]) -> ParamVector {
        let mut p = base.clone();
        for (name, &v) in self.slots.iter().zip(x) {
            p.insert(name.clone(), v);
        }
        p
    }

    pub fn extract(&self, p: &ParamVector) -> Option<Vec<f64>> {
        self.slots.iter().map(|n| p.get(n).copied()).collect()
    }

    pub fn subset(&self, x: &[f64]) -> ParamVector {
        self.slots.iter().cloned().zip(x.iter().copied()).collect()
    }
}

fn bounded(lower: f64, upper: f64) -> Dimension<f64> {
    if upper > lower {
        Dimension::Continuous { lower, upper }
    } else {
        Dimension::Fixed(lower)
    }
}

pub(crate) fn cmaes_settings(dims: Vec<Dimension<f64>>, cfg: &CmaesStageConfig, seed: u64, x0: Option<Vec<f64>>) -> CmaesSettings<f64> {
    let mut s = CmaesSettings::new(dims);
    s.x0 = x0;
    s.sigma0 = cfg.sigma0;
    s.popsize = cfg.popsize;
    s.tolfun = cfg.tolfun;
    s.tolx = cfg.tolx;
    s.max_evals = cfg.max_evals;
    s.seed = seed;
    s.restarts = cfg.restarts;
    s
}

/// Outcome of a search with threshold exclusion.
#[derive(Debug, Clone)]
pub(crate) struct LoopOutcome {
    pub x: Vec<f64>,
    /// Metric of every item at `x`, excluded ones included.
    pub metrics: Vec<f64>,
    pub considered: Vec<bool>,
    pub excluded: Vec<(usize, usize, ExclusionReason)>,
    pub evals: usize,
    pub iterations: usize,
    pub stop: Vec<StopReason>,
}

/// Runs CMA-ES on `rss(metrics over considered) + extra(x)`, drops items
/// whose metric exceeds `threshold`, and repeats until nothing new is
/// dropped. Each rerun starts from the previous optimum and keeps it when the
/// search does not improve on it, so the considered objective never rises.
#[allow(clippy::too_many_arguments)]
pub(crate) fn exclusion_loop<M, E>(
    dims: &[Dimension<f64>],
    cfg: &CmaesStageConfig,
    seed: u64,
    x0: Option<Vec<f64>>,
    n: usize,
    pre_excluded: &[usize],
    threshold: f64,
    metrics: M,
    extra: E,
    stage: u8,
) -> Result<LoopOutcome>
where
    M: Fn(&[f64], &[usize]) -> Vec<f64> + Sync,
    E: Fn(&[f64]) -> f64 + Sync,
{
    let mut considered: Vec<bool> = (0..n).map(|i| !pre_excluded.contains(&i)).collect();
    let mut excluded: Vec<(usize, usize, ExclusionReason)> =
        pre_excluded.iter().map(|&i| (i, 1, ExclusionReason::Infeasible)).collect();
    let mut x_prev = x0;
    let mut evals = 0;
    let mut stops = Vec::new();
    let mut iteration = 1;
    loop {
        let idx: Vec<usize> = (0..n).filter(|&i| considered[i]).collect();
        if idx.is_empty() {
            return Err(Error::NoAchievableGrasps { stage });
        }
        let objective = |x: &[f64]| rss(metrics(x, &idx)) + extra(x);
        let settings = cmaes_settings(dims.to_vec(), cfg, derive_seed(seed, stage as u64, iteration as u64), x_prev.clone());
        let res = cmaes_minimize(objective, &settings);
        evals += res.evals;
        stops.push(res.stop);
        let mut best = res.x;
        if let Some(xp) = &x_prev {
            evals += 1;
            if objective(xp) <= res.f {
                best = xp.clone();
            }
        }
        let m = metrics(&best, &idx);
        let dropped: Vec<usize> =
            idx.iter().zip(&m).filter(|(_, &v)| !(v <= threshold)).map(|(&i, _)| i).collect();
        if dropped.is_empty() {
            let all: Vec<usize> = (0..n).collect();
            let metrics_all = metrics(&best, &all);
            return Ok(LoopOutcome { x: best, metrics: metrics_all, considered, excluded, evals, iterations: iteration, stop: stops });
        }
        for i in dropped {
            considered[i] = false;
            excluded.push((i, iteration, ExclusionReason::Threshold));
        }
        x_prev = Some(best);
        iteration += 1;
    }
}

pub(crate) fn budget_flags(stops: &[StopReason]) -> Vec<String> {
    if stops.contains(&StopReason::MaxEvals) {
        vec!["budget_exhausted".to_string()]
    } else {
        Vec::new()
    }
}
