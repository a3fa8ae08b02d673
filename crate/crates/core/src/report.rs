//! Design report: stage results plus the final parameter and metric tables.

use crate::model::{DesignCase, DesignConfig, GraspRecord, GraspTag, HandModel, ParamVector, SlotKind};
use crate::optimize::{PipelineState, StageResult};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const REPORT_SCHEMA: &str = "handsyn/design-report/1";
pub const METRICS_CSV_SCHEMA: &str = "handsyn/metrics-csv/1";
pub const PARAMETERS_CSV_SCHEMA: &str = "handsyn/parameters-csv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: u8,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    /// `moment_arm`, `stiffness` or `preload`
    pub table: String,
    pub slot: String,
    pub value: Option<f64>,
    pub unit: String,
    /// Stage that set the value; 0 when no stage did.
    pub stage: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub stage: u8,
    /// `f_trq`, `f_inter` or `f_intra`
    pub name: String,
    pub objective: Option<f64>,
    pub unit: String,
    pub considered: usize,
    pub excluded: usize,
    /// e.g. `0.0123 (2 grasps excluded)`
    pub label: String,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema: String,
    pub tool_version: String,
    pub hand: String,
    pub design_case: DesignCase,
    pub config_hash: String,
    pub seed: u64,
    pub grasps: usize,
    pub openings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
    pub stages: Vec<StageResult>,
    pub parameters: Vec<ParamRow>,
    pub metrics: Vec<MetricRow>,
}

const METRIC_NAMES: [(&str, &str); 3] = [("f_trq", "1"), ("f_inter", "mm"), ("f_intra", "Nmm")];

pub fn excluded_label(objective: f64, excluded: usize) -> String {
    let noun = if excluded == 1 { "grasp" } else { "grasps" };
    format!("{objective:.4} ({excluded} {noun} excluded)")
}

impl DesignReport {
    pub fn build(hand: &HandModel, grasps: &[GraspRecord], config: &DesignConfig, state: &PipelineState) -> Self {
        let results = [&state.stage1, &state.stage2, &state.stage3];
        let metrics = results
            .iter()
            .zip(METRIC_NAMES)
            .enumerate()
            .map(|(k, (r, (name, unit)))| {
                let stage = k as u8 + 1;
                match r {
                    Some(r) => MetricRow {
                        stage,
                        name: name.into(),
                        objective: Some(r.objective),
                        unit: unit.into(),
                        considered: r.metrics.iter().filter(|m| m.considered).count(),
                        excluded: r.excluded_count(),
                        label: excluded_label(r.objective, r.excluded_count()),
                        status: StageStatus::Ok,
                    },
                    None => {
                        let failed = state.failure.as_ref().is_some_and(|f| f.stage == stage);
                        MetricRow {
                            stage,
                            name: name.into(),
                            objective: None,
                            unit: unit.into(),
                            considered: 0,
                            excluded: 0,
                            label: if failed { "failed".into() } else { "not run".into() },
                            status: if failed { StageStatus::Failed } else { StageStatus::NotRun },
                        }
                    }
                }
            })
            .collect();

        let arms = state.stage2.as_ref().or(state.stage1.as_ref());
        let layout = &hand.params;
        let mut parameters = Vec::new();
        for s in &layout.moment_arms {
            let value = arms.and_then(|r| r.params.get(&s.name).copied());
            parameters.push(ParamRow {
                table: "moment_arm".into(),
                slot: s.name.clone(),
                value,
                unit: s.unit.clone(),
                stage: value.map_or(0, |_| arms.map_or(0, |r| r.stage)),
            });
        }
        let springs = state.stage3.as_ref();
        let spring_row = |table: &str, name: &str, unit: String| {
            let value = springs.and_then(|r| r.params.get(name).copied());
            ParamRow { table: table.into(), slot: name.into(), value, unit, stage: if value.is_some() { 3 } else { 0 } }
        };
        for s in &layout.stiffness {
            let unit = layout.catalogs.get(&s.catalog).map(|c| c.unit.clone()).unwrap_or_default();
            parameters.push(spring_row("stiffness", &s.name, unit));
        }
        for s in &layout.preloads {
            parameters.push(spring_row("preload", &s.name, s.unit.clone()));
        }

        DesignReport {
            schema: REPORT_SCHEMA.into(),
            tool_version: crate::VERSION.into(),
            hand: hand.name.clone(),
            design_case: hand.design_case,
            config_hash: config.hash(),
            seed: config.seed,
            grasps: grasps.iter().filter(|g| g.tag == GraspTag::Desired).count(),
            openings: grasps.iter().filter(|g| g.tag == GraspTag::Opening).count(),
            failure: state.failure.clone(),
            stages: results.iter().filter_map(|r| (*r).clone()).collect(),
            parameters,
            metrics,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.metrics.iter().all(|m| m.status == StageStatus::Ok)
    }

    /// Every parameter with a value, by canonical slot.
    pub fn final_params(&self) -> ParamVector {
        self.parameters.iter().filter_map(|p| p.value.map(|v| (p.slot.clone(), v))).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = csv_header(METRICS_CSV_SCHEMA, &self.config_hash);
        out.push_str("stage,name,objective,unit,considered,excluded,status,label\n");
        for m in &self.metrics {
            let obj = m.objective.map(|v| format!("{v:.9e}")).unwrap_or_default();
            let status = serde_json::to_value(m.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{},{},\"{}\"", m.stage, m.name, obj, m.unit, m.considered, m.excluded, status, m.label);
        }
        out
    }

    pub fn parameters_csv(&self) -> String {
        let mut out = csv_header(PARAMETERS_CSV_SCHEMA, &self.config_hash);
        out.push_str("table,slot,value,unit,stage\n");
        for p in &self.parameters {
            let v = p.value.map(|v| format!("{v:.9e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", p.table, p.slot, v, p.unit, p.stage);
        }
        out
    }
}

fn csv_header(schema: &str, hash: &str) -> String {
    format!("# {schema}\n# config_hash={hash}\n")
}

/// Slot kind for a parameter table name.
pub fn table_kind(table: &str) -> Option<SlotKind> {
    match table {
        "moment_arm" => Some(SlotKind::MomentArm),
        "stiffness" => Some(SlotKind::Stiffness),
        "preload" => Some(SlotKind::Preload),
        _ => None,
    }
}
