//! Sequential execution of the three stages.

use super::{optimize_inter_tendon, optimize_intra_tendon, optimize_torque_manifold, StageResult};
use crate::error::{Error, Result};
use crate::model::{DesignConfig, GraspRecord, HandModel};
use crate::report::{DesignReport, StageFailure};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub stage1: Option<StageResult>,
    pub stage2: Option<StageResult>,
    pub stage3: Option<StageResult>,
    pub failure: Option<StageFailure>,
}

impl PipelineState {
    pub fn get(&self, stage: u8) -> Option<&StageResult> {
        match stage {
            1 => self.stage1.as_ref(),
            2 => self.stage2.as_ref(),
            3 => self.stage3.as_ref(),
            _ => None,
        }
    }
}

/// Runs one stage against the results already in `state`. Rerunning a stage
/// discards the results of later stages.
pub fn run_stage(stage: u8, hand: &HandModel, grasps: &[GraspRecord], config: &DesignConfig, state: &mut PipelineState) -> Result<()> {
    match stage {
        1 => {
            state.stage1 = Some(optimize_torque_manifold(hand, grasps, config)?);
            state.stage2 = None;
            state.stage3 = None;
        }
        2 => {
            let s1 = state.stage1.as_ref().ok_or_else(|| Error::MissingArtifact("missing f_trq^min (run stage 1 first)".into()))?;
            state.stage2 = Some(optimize_inter_tendon(hand, grasps, config, s1)?);
            state.stage3 = None;
        }
        3 => {
            let s2 = state
                .stage2
                .as_ref()
                .ok_or_else(|| Error::MissingArtifact("missing stage-2 moment arms (run stage 2 first)".into()))?;
            state.stage3 = Some(optimize_intra_tendon(hand, grasps, config, &s2.params)?);
        }
        _ => return Err(Error::invalid("stage", format!("no stage {stage}; expected 1, 2 or 3"))),
    }
    state.failure = None;
    Ok(())
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Runs stages 1 to 3. A failing stage is recorded in the report and stops
/// the run; the returned state holds everything computed before it.
pub fn run_pipeline(hand: &HandModel, grasps: &[GraspRecord], config: &DesignConfig) -> (DesignReport, PipelineState, Option<Error>) {
    with_workers(config.workers, || {
        let mut state = PipelineState::default();
        let mut error = None;
        for stage in 1..=3 {
            if let Err(e) = run_stage(stage, hand, grasps, config, &mut state) {
                state.failure = Some(StageFailure { stage, message: e.to_string() });
                error = Some(e);
                break;
            }
        }
        (DesignReport::build(hand, grasps, config, &state), state, error)
    })
}
