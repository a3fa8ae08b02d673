//! Torque and posture manifolds of one representative chain per class.
//!
//! The torque manifold is the set `A(θ̄) t`, `t ≥ 0`, restricted to the
//! chain, with `θ̄` the mean considered grasp posture. The posture manifold
//! is the set of pre-contact postures swept by the motors that drive the
//! chain. Both come with the grasp points and a PCA subspace fitted to the
//! considered grasps, of dimension equal to the number of driving motors.

use super::precontact::{PreContactPose, PreContactSolver};
use super::stage1::{desired_grasp_matrices, stability_solutions};
use super::stage2::travel_error;
use super::StageResult;
use crate::designs;
use crate::error::{Error, Result};
use crate::model::{DesignConfig, GraspRecord, GraspTag, HandModel, ParamVector};
use crate::solvers::{pca_fit, AffineFit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub const MANIFOLD_CSV_SCHEMA: &str = "handsyn/manifold-csv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldSpace {
    Torque,
    Posture,
}

impl ManifoldSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldSpace::Torque => "torque",
            ManifoldSpace::Posture => "posture",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Sample,
    Grasp,
    PcaOrigin,
    PcaDirection,
}

impl SampleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Sample => "sample",
            SampleKind::Grasp => "grasp",
            SampleKind::PcaOrigin => "pca_origin",
            SampleKind::PcaDirection => "pca_direction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspPoint {
    pub id: String,
    pub excluded: bool,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSamples {
    pub class: String,
    pub chain: String,
    pub space: ManifoldSpace,
    /// DoF names of the chain, one per coordinate.
    pub coords: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub grasps: Vec<GraspPoint>,
    pub fit: Option<AffineFit<f64>>,
    pub fit_dim: usize,
}

impl ManifoldSamples {
    pub fn file_name(&self) -> String {
        format!("manifold_{}_{}.csv", self.class, self.space.as_str())
    }

    /// CSV with `#` header lines, then `kind,id,excluded,<coords…>`.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {MANIFOLD_CSV_SCHEMA}");
        let _ = writeln!(out, "# config_hash={config_hash}");
        let _ = writeln!(
            out,
            "# class={} chain={} space={} pca_dim={}",
            self.class,
            self.chain,
            self.space.as_str(),
            self.fit_dim
        );
        let _ = writeln!(out, "kind,id,excluded,{}", self.coords.join(","));
        let mut row = |kind: SampleKind, id: &str, excluded: bool, p: &[f64]| {
            let vals: Vec<String> = p.iter().map(|v| format!("{v:.9e}")).collect();
            let _ = writeln!(out, "{},{},{},{}", kind.as_str(), id, excluded as u8, vals.join(","));
        };
        for s in &self.samples {
            row(SampleKind::Sample, "", false, s);
        }
        for g in &self.grasps {
            row(SampleKind::Grasp, &g.id, g.excluded, &g.point);
        }
        if let Some(fit) = &self.fit {
            row(SampleKind::PcaOrigin, "", false, &fit.origin);
            for (k, d) in fit.directions.iter().enumerate() {
                row(SampleKind::PcaDirection, &k.to_string(), false, d);
            }
        }
        out
    }
}

/// First chain of every class, in model order.
pub fn representative_chains(hand: &HandModel) -> Vec<(String, String)> {
    let mut seen = BTreeSet::new();
    hand.chains
        .iter()
        .filter(|c| seen.insert(c.class.clone()))
        .map(|c| (c.class.clone(), c.id.clone()))
        .collect()
}

fn driving_motors(hand: &HandModel, tendons: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> =
        tendons.iter().flat_map(|&t| hand.tendons[t].motors.iter().map(|m| hand.index.motor_pos[m])).collect();
    set.into_iter().collect()
}

fn fit(points: &[GraspPoint], dim: usize) -> Option<AffineFit<f64>> {
    let pts: Vec<Vec<f64>> = points.iter().filter(|g| !g.excluded).map(|g| g.point.clone()).collect();
    pca_fit(&pts, dim.min(pts.first().map_or(0, Vec::len)))
}

/// Torque and posture samples for every class. `params` is the full design,
/// `stage1` supplies torque-space exclusion flags and `stage3` posture-space
/// flags.
pub fn sample_manifolds(
    hand: &HandModel,
    grasps: &[GraspRecord],
    params: &ParamVector,
    stage1: &StageResult,
    stage3: &StageResult,
    config: &DesignConfig,
) -> Result<Vec<ManifoldSamples>> {
    let desired: Vec<GraspRecord> = grasps.iter().filter(|g| g.tag == GraspTag::Desired).cloned().collect();
    let gms = desired_grasp_matrices(hand, &desired, config.pyramid_edges)?;
    let qps = stability_solutions(hand, &desired, &gms, params, config.qp_tol)?;
    let stage1_excluded: BTreeSet<&str> = stage1.metrics.iter().filter(|m| !m.considered).map(|m| m.id.as_str()).collect();
    let names = hand.dof_names();
    let radii = hand.motor_radii(&config.motor_radii);
    let solver = PreContactSolver::new(hand, params, &radii)?;
    let m = designs::motor_connection(hand, &radii)?;
    let open = travel_error(hand, params, &m, &hand.opening_pose())?.theta_mot;
    let close = travel_error(hand, params, &m, &hand.closing_pose())?.theta_mot;

    let mut out = Vec::new();
    for (class, chain) in representative_chains(hand) {
        let dofs = hand.chain_dofs(&chain);
        let tendons = hand.tendons_on_dofs(&dofs);
        let motors = driving_motors(hand, &tendons);
        let coords: Vec<String> = dofs.iter().map(|&d| names[d].clone()).collect();
        let fit_dim = motors.len().max(1);
        let restrict = |v: &[f64]| dofs.iter().map(|&d| v[d]).collect::<Vec<f64>>();

        // torque space
        let tpoints: Vec<GraspPoint> = desired
            .iter()
            .zip(&qps)
            .filter(|(_, q)| q.feasible())
            .map(|(g, q)| GraspPoint {
                id: g.id.clone(),
                excluded: stage1_excluded.contains(g.id.as_str()),
                point: restrict(&q.target),
            })
            .collect();
        let considered: Vec<&GraspRecord> = desired.iter().filter(|g| !stage1_excluded.contains(g.id.as_str())).collect();
        let mut mean = vec![0.0; hand.dof_count()];
        for g in &considered {
            for (a, b) in mean.iter_mut().zip(&g.theta) {
                *a += b / considered.len() as f64;
            }
        }
        let a = designs::actuation_matrix(hand, params, &mean)?.select_rows(&dofs).select_cols(&tendons);
        let reach = tpoints.iter().map(|g| crate::linalg::norm2(&g.point)).fold(0.0, f64::max);
        let tsamples = tension_grid(&a, config.manifold.torque_steps, if reach > 0.0 { 1.25 * reach } else { 1.0 });
        out.push(ManifoldSamples {
            class: class.clone(),
            chain: chain.clone(),
            space: ManifoldSpace::Torque,
            coords: coords.clone(),
            samples: tsamples,
            fit: fit(&tpoints, fit_dim),
            grasps: tpoints,
            fit_dim,
        });

        // posture space
        let group = stage3.groups.iter().find(|g| g.chains.contains(&chain)).map(|g| g.id.clone());
        let posture_excluded: BTreeSet<&str> = stage3
            .metrics
            .iter()
            .filter(|mm| !mm.considered && mm.group == group)
            .map(|mm| mm.id.as_str())
            .collect();
        let ppoints: Vec<GraspPoint> = desired
            .iter()
            .map(|g| GraspPoint {
                id: g.id.clone(),
                excluded: posture_excluded.contains(g.id.as_str()),
                point: restrict(&g.theta),
            })
            .collect();
        let psamples = motor_sweep(&solver, &open, &close, &motors, config.manifold.posture_steps)
            .into_iter()
            .map(|p| restrict(&p))
            .collect();
        out.push(ManifoldSamples {
            class,
            chain,
            space: ManifoldSpace::Posture,
            coords,
            samples: psamples,
            fit: fit(&ppoints, fit_dim),
            grasps: ppoints,
            fit_dim,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid("chains", "no chains to sample"));
    }
    Ok(out)
}

/// Column combinations `A t` over a uniform tension grid; the per-tendon
/// range is chosen so the largest sample norm reaches `reach`.
fn tension_grid(a: &crate::linalg::Mat<f64>, steps: usize, reach: f64) -> Vec<Vec<f64>> {
    let k = a.cols();
    let steps = steps.max(2);
    let smallest = (0..k).map(|j| crate::linalg::norm2(&a.column(j))).filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if k == 0 || !smallest.is_finite() {
        return vec![vec![0.0; a.rows()]];
    }
    let hi = reach / smallest;
    let total = steps.pow(k as u32);
    (0..total)
        .map(|mut idx| {
            let mut t = vec![0.0; k];
            for tj in t.iter_mut() {
                *tj = hi * (idx % steps) as f64 / (steps - 1) as f64;
                idx /= steps;
            }
            a.mul_vec(&t)
        })
        .collect()
}

/// Pre-contact postures over a grid of the listed motors from their opening
/// to their closing angles; other motors stay at the opening angle. Lines
/// along the last motor are solved in parallel with warm starts.
fn motor_sweep(solver: &PreContactSolver<'_>, open: &[f64], close: &[f64], motors: &[usize], steps: usize) -> Vec<Vec<f64>> {
    let steps = steps.max(2);
    let Some((&last, outer)) = motors.split_last() else {
        return solver.solve(open, None).map(|p| vec![p.theta]).unwrap_or_default();
    };
    let lerp = |k: usize, i: usize| open[k] + (close[k] - open[k]) * i as f64 / (steps - 1) as f64;
    let lines = steps.pow(outer.len() as u32);
    let per_line: Vec<Vec<Vec<f64>>> = (0..lines)
        .into_par_iter()
        .map(|mut li| {
            let mut tm = open.to_vec();
            for &k in outer {
                tm[k] = lerp(k, li % steps);
                li /= steps;
            }
            let mut warm: Option<PreContactPose> = None;
            let mut pts = Vec::with_capacity(steps);
            for i in 0..steps {
                tm[last] = lerp(last, i);
                match solver.solve(&tm, warm.as_ref()) {
                    Ok(p) if p.converged => {
                        pts.push(p.theta.clone());
                        warm = Some(p);
                    }
                    _ => warm = None,
                }
            }
            pts
        })
        .collect();
    per_line.into_iter().flatten().collect()
}
