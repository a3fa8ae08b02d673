#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]
//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Built without the libtest harness so the lines show
//! up in plain `cargo test` output.

use handsyn_core::contact::assemble_grasp_matrices;
use handsyn_core::designs::{self, actuation_matrix_case1, actuation_matrix_case2, actuation_matrix_case3, motor_connection_case};
use handsyn_core::fixtures::{self, TORSIONAL_CATALOG, UJOINT_ANGLES};
use handsyn_core::kinematics::{ujoint_geometry, ujoint_moment_arms, ujoint_tendon_lengths, UJointGeometry};
use handsyn_core::linalg::{sym_eigen, Mat};
use handsyn_core::model::{ContactRecord, DesignCase, GraspRecord, GraspTag};
use handsyn_core::optimize::stage1::{desired_grasp_matrices, stability_solutions};
use handsyn_core::optimize::{
    grasp_stability_qp, optimize_torque_manifold, pre_contact_pose, rss, run_pipeline, sample_manifolds, ExclusionReason,
    LimitState, PipelineState,
};
use handsyn_core::report::DesignReport;
use handsyn_core::solvers::{cmaes_minimize, solve_nnls, solve_qp, CmaesSettings, Dimension, QpProblem};
use handsyn_core::synth::{self, SyntheticProblem};
use handsyn_core::{DesignConfig, ParamVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let checks: [(u8, &str, fn() -> Check); 8] = [
        (1, "QP/NNLS oracle equivalence", qp_oracle),
        (2, "CMA-ES benchmarks", cmaes_benchmarks),
        (3, "stage-1 structure", stage1_structure),
        (4, "generative round trip", round_trip),
        (5, "universal-joint kinematics", ujoint_kinematics),
        (6, "pre-contact equilibrium sweep", precontact_sweep),
        (7, "pipeline determinism", determinism),
        (8, "report shape", report_shape),
    ];
    let mut failed = 0;
    for (n, name, f) in checks {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}

// ---------------------------------------------------------------------------
// 1

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Mat<f64> {
    let m = Mat::from_fn(n + 3, n, |_, _| rng.random_range(-1.0..1.0));
    m.tr_matmul(&m).add(&Mat::identity(n).scaled(0.5))
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

fn project_orthant(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Accelerated projected gradient with adaptive restart on `½xᵀHx + gᵀx`.
fn projected_gradient(h: &Mat<f64>, g: &[f64], project: fn(&[f64]) -> Vec<f64>, x0: Vec<f64>) -> Vec<f64> {
    let f = |x: &[f64]| 0.5 * dot(x, &h.mul_vec(x)) + dot(g, x);
    let lmax = sym_eigen(h).0.iter().copied().fold(0.0, f64::max);
    let step = 1.0 / lmax;
    let mut x = project(&x0);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = f(&x);
    for _ in 0..500_000 {
        let grad: Vec<f64> = h.mul_vec(&y).iter().zip(g).map(|(a, b)| a + b).collect();
        let xn = project(&y.iter().zip(&grad).map(|(a, b)| a - step * b).collect::<Vec<_>>());
        let fxn = f(&xn);
        let moved = xn.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if fxn > fx {
            // restart the momentum
            t = 1.0;
            y = x.clone();
            continue;
        }
        let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = xn.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
        x = xn;
        fx = fxn;
        t = tn;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖x − P(x − ∇f(x))‖∞`, zero exactly at a KKT point.
fn natural_residual(h: &Mat<f64>, g: &[f64], project: fn(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
    let grad: Vec<f64> = h.mul_vec(x).iter().zip(g).map(|(a, b)| a + b).collect();
    let p = project(&x.iter().zip(&grad).map(|(a, b)| a - b).collect::<Vec<_>>());
    x.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn qp_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_obj, mut worst_kkt, mut count) = (0.0f64, 0.0f64, 0);
    for k in 0..120 {
        let n = rng.random_range(2..=12);
        let (h, g, project, qp): (Mat<f64>, Vec<f64>, fn(&[f64]) -> Vec<f64>, Option<QpProblem<f64>>) = match k % 3 {
            0 => {
                let h = random_spd(&mut rng, n);
                let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let qp = QpProblem::new(h.clone(), g.clone()).with_lower_bounds(vec![0.0; n]);
                (h, g, project_orthant, Some(qp))
            }
            1 => {
                let h = random_spd(&mut rng, n);
                let g: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let qp = QpProblem::new(h.clone(), g.clone())
                    .with_eq(Mat::from_rows(&[vec![1.0; n]]), vec![1.0])
                    .with_lower_bounds(vec![0.0; n]);
                (h, g, project_simplex, Some(qp))
            }
            _ => {
                // NNLS as ½‖Ax − b‖² = ½xᵀAᵀAx − (Aᵀb)ᵀx + ½‖b‖²
                let a = Mat::from_fn(n + 3, n, |_, _| rng.random_range(-1.0..1.0));
                let b: Vec<f64> = (0..n + 3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let sol = solve_nnls(&a, &b);
                let h = a.tr_matmul(&a);
                let g: Vec<f64> = a.tr_mul_vec(&b).iter().map(|v| -v).collect();
                let oracle = projected_gradient(&h, &g, project_orthant, vec![0.0; n]);
                let half_b = 0.5 * dot(&b, &b);
                let obj = |x: &[f64]| 0.5 * dot(x, &h.mul_vec(x)) + dot(&g, x) + half_b;
                ensure!(sol.x.iter().all(|&v| v >= 0.0), "nnls instance {k}: negative component");
                worst_obj = worst_obj.max((obj(&sol.x) - obj(&oracle)).abs());
                worst_kkt = worst_kkt.max(natural_residual(&h, &g, project_orthant, &sol.x));
                count += 1;
                continue;
            }
        };
        let qp = qp.unwrap();
        let sol = solve_qp(&qp, 1e-12).map_err(|e| format!("qp instance {k}: {e}"))?;
        let oracle = projected_gradient(&h, &g, project, vec![1.0 / n as f64; n]);
        worst_obj = worst_obj.max((qp.objective(&sol.x) - qp.objective(&oracle)).abs());
        worst_kkt = worst_kkt.max(natural_residual(&h, &g, project, &sol.x)).max(sol.kkt.max());
        count += 1;
    }
    let elapsed = start.elapsed();
    ensure!(worst_obj <= 1e-8, "objective gap {worst_obj:.2e} > 1e-8");
    ensure!(worst_kkt <= 1e-9, "KKT residual {worst_kkt:.2e} > 1e-9");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{count} instances, max objective gap {worst_obj:.1e}, max KKT residual {worst_kkt:.1e}"))
}

// ---------------------------------------------------------------------------
// 2

fn cmaes_benchmarks() -> Check {
    let start = Instant::now();
    let boxed = |n| vec![Dimension::Continuous { lower: -5.0, upper: 5.0 }; n];
    let c = [0.3, -1.2, 2.0, 0.7, -0.4];
    let mut s = CmaesSettings::new(boxed(5));
    s.tolfun = 1e-20;
    s.tolx = 1e-14;
    let r = cmaes_minimize(|x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum(), &s);
    let sphere = r.x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    ensure!(sphere <= 1e-6, "sphere: distance {sphere:.2e}");

    let rosen = |x: &[f64]| (0..4).map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (1.0 - x[i]).powi(2)).sum::<f64>();
    let mut hits = 0;
    let mut dists = Vec::new();
    for seed in 1..=5 {
        let mut s = CmaesSettings::new(boxed(5));
        s.tolfun = 1e-20;
        s.tolx = 1e-14;
        s.max_evals = 200_000;
        s.restarts = 2;
        s.seed = seed;
        let r = cmaes_minimize(rosen, &s);
        let d = r.x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt();
        dists.push(d);
        if d <= 1e-6 {
            hits += 1;
        }
    }
    ensure!(hits >= 4, "rosenbrock: {hits}/5 seeds within 1e-6 ({dists:?})");

    // exhaustive catalog evaluation is the oracle
    let nearest = |t: f64| TORSIONAL_CATALOG.iter().copied().min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs())).unwrap();
    for (k, &t) in [1.0, 2.9, 4.2, 6.9, 8.6, 10.4, 12.9, 15.1, 18.0, 25.0].iter().enumerate() {
        let mut s = CmaesSettings::new(vec![Dimension::Discrete { values: TORSIONAL_CATALOG.to_vec() }]);
        s.seed = k as u64 + 1;
        let r = cmaes_minimize(|x: &[f64]| (x[0] - t).powi(2), &s);
        ensure!(r.x[0] == nearest(t), "catalog target {t}: got {} want {}", r.x[0], nearest(t));
    }
    let targets = [3.1, 9.9, 17.0];
    let mut s = CmaesSettings::new(vec![Dimension::Discrete { values: TORSIONAL_CATALOG.to_vec() }; 3]);
    s.seed = 11;
    let r = cmaes_minimize(|x: &[f64]| x.iter().zip(&targets).map(|(a, b)| (a - b).powi(2)).sum(), &s);
    let want: Vec<f64> = targets.iter().map(|&t| nearest(t)).collect();
    ensure!(r.x == want, "3-slot catalog: got {:?} want {want:?}", r.x);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("sphere distance {sphere:.1e}, rosenbrock {hits}/5 seeds, catalog members exact"))
}

// ---------------------------------------------------------------------------
// 3

fn col(rows: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; rows];
    for &(r, x) in entries {
        v[r] = x;
    }
    v
}

fn from_cols(cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r])
}

fn bits_equal(a: &Mat<f64>, b: &Mat<f64>) -> bool {
    a.shape() == b.shape() && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn stage1_structure() -> Check {
    let zero = vec![0.0; 8];
    // single-motor design, published arms 12.0, 4.6, 2.0, 11.8, 4.5
    let want1 = from_cols(&[
        col(8, &[(0, 12.0), (1, 4.6)]),
        col(8, &[(2, -2.0), (3, 11.8), (4, 4.5)]),
        col(8, &[(5, 2.0), (6, 11.8), (7, 4.5)]),
    ]);
    let p1 = fixtures::case1_table_params();
    ensure!(bits_equal(&actuation_matrix_case1(&p1).unwrap(), &want1), "case 1 closed form differs from the pattern");
    let generic1 = designs::actuation_matrix(&fixtures::case1_hand(), &p1, &zero).unwrap();
    ensure!(bits_equal(&generic1, &want1), "case 1 hand model differs from the pattern");

    // dual-motor roll-pitch design, published arms 12.0, 4.5, 12.0, 4.5; roll arm 2.0
    let want2 = from_cols(&[
        col(8, &[(0, 12.0), (1, 4.5)]),
        col(8, &[(3, 12.0), (4, 4.5)]),
        col(8, &[(6, 12.0), (7, 4.5)]),
        col(8, &[(2, -2.0)]),
        col(8, &[(5, 2.0)]),
    ]);
    let p2 = fixtures::case2_table_params();
    ensure!(bits_equal(&actuation_matrix_case2(&p2).unwrap(), &want2), "case 2 closed form differs from the pattern");
    let generic2 = designs::actuation_matrix(&fixtures::case2_hand(), &p2, &zero).unwrap();
    ensure!(bits_equal(&generic2, &want2), "case 2 hand model differs from the pattern");

    // pitch-yaw design: doubled thumb arms 2·4.65 and 2·2.00, distal 2.00,
    // universal-joint arms from a 12.00 mm platform at 6.29 mm separation
    let p3 = fixtures::case3_table_params();
    let g = UJointGeometry::circular(12.0, 6.29, UJOINT_ANGLES);
    let hand3 = fixtures::case3_hand();
    for theta in [vec![0.0; 8], vec![0.3, 0.6, 0.2, -0.1, 0.5, -0.3, 0.25, 0.9]] {
        let rho1 = ujoint_moment_arms(&g, theta[2], theta[3]).unwrap();
        let rho2 = ujoint_moment_arms(&g, theta[5], theta[6]).unwrap();
        let want3 = from_cols(&[
            col(8, &[(0, 9.3), (1, 4.0)]),
            col(8, &[(2, rho1[0][1]), (3, rho1[1][1]), (4, 2.0)]),
            col(8, &[(2, rho1[0][2]), (3, rho1[1][2]), (4, 2.0)]),
            col(8, &[(5, rho2[0][2]), (6, rho2[1][2]), (7, 2.0)]),
            col(8, &[(5, rho2[0][1]), (6, rho2[1][1]), (7, 2.0)]),
        ]);
        let closed = actuation_matrix_case3(&p3, &g, &theta).unwrap();
        ensure!(bits_equal(&closed, &want3), "case 3 closed form differs from the pattern at {theta:?}");
        let generic3 = designs::actuation_matrix(&hand3, &p3, &theta).unwrap();
        ensure!(bits_equal(&generic3, &want3), "case 3 hand model differs from the pattern at {theta:?}");
    }

    // motor connections
    let r = 10.0;
    ensure!(bits_equal(&motor_connection_case(DesignCase::Case1, &[r]).unwrap(), &from_cols(&[vec![r; 3]])), "case 1 motor pattern");
    let m2 = from_cols(&[vec![r, r, r, 0.0, 0.0], vec![0.0, 0.0, 0.0, 7.0, 7.0]]);
    ensure!(bits_equal(&motor_connection_case(DesignCase::Case2, &[r, 7.0]).unwrap(), &m2), "case 2 motor pattern");
    let m3 = from_cols(&[vec![r, r, 0.0, r, 0.0], vec![7.0, 0.0, 7.0, 0.0, 7.0]]);
    ensure!(bits_equal(&motor_connection_case(DesignCase::Case3, &[r, 7.0]).unwrap(), &m3), "case 3 motor pattern");

    // scaling one tendon's arms together leaves every grasp metric unchanged
    let sp = synth::case1_round_trip(6, 5).map_err(|e| e.to_string())?;
    let gms = desired_grasp_matrices(&sp.hand, &sp.grasps, 8).unwrap();
    let objective = |p: &ParamVector| {
        let sols = stability_solutions(&sp.hand, &sp.grasps, &gms, p, 1e-13).unwrap();
        rss(sols.iter().map(|s| s.metric))
    };
    let base = objective(&p1);
    let mut scaled = p1.clone();
    for (k, f) in [("r_tp", 1.7), ("r_td", 1.7), ("r_fr", 0.45), ("r_fp", 0.45), ("r_fd", 0.45)] {
        *scaled.get_mut(k).unwrap() *= f;
    }
    let gap = (objective(&scaled) - base).abs();
    ensure!(gap <= 1e-8, "rescaling changed the objective by {gap:.2e}");

    // a thumb-only squeeze needs distal torque alone, which the coupled thumb
    // tendon cannot give: its distance from the tendon ray is r_tp/‖(r_tp, r_td)‖
    let mut grasps: Vec<GraspRecord> = sp.grasps.iter().filter(|g| g.tag == GraspTag::Desired).take(4).cloned().collect();
    grasps.push(GraspRecord {
        id: "squeeze".into(),
        object: "constructed".into(),
        theta: vec![0.0; 8],
        contacts: vec![
            ContactRecord { link: "t_proximal".into(), position: [0.0, -5.0, 20.0], normal: [0.0, 1.0, 0.0], mu: 0.5 },
            ContactRecord { link: "t_distal".into(), position: [0.0, 5.0, -20.0], normal: [0.0, -1.0, 0.0], mu: 0.5 },
        ],
        tag: GraspTag::Desired,
        pair: None,
    });
    let gm = assemble_grasp_matrices(&sp.hand, &grasps[4], 8).unwrap();
    let probe = grasp_stability_qp(&gm, &Mat::zeros(8, 3), 1e-12).unwrap();
    ensure!(probe.feasible(), "constructed squeeze has no normalized equilibrium");
    let mut cfg = synth::round_trip_config(3);
    cfg.stage1.max_evals = 3000;
    cfg.stage1.restarts = 0;
    cfg.stage1.tolfun = 1e-10;
    ensure!(cfg.torque_threshold == 0.1, "default threshold is {}", cfg.torque_threshold);
    // pin the thumb arms so the squeeze cannot drag the compromise away from
    // the good grasps; the finger arms stay free
    let mut hand = sp.hand.clone();
    for slot in hand.params.moment_arms.iter_mut().filter(|s| s.name.starts_with("r_t")) {
        let v = sp.truth[&slot.name];
        slot.lower = v;
        slot.upper = v;
    }
    let s1 = optimize_torque_manifold(&hand, &grasps, &cfg).map_err(|e| e.to_string())?;
    ensure!(s1.excluded.len() == 1, "excluded {:?}", s1.excluded);
    let ex = &s1.excluded[0];
    ensure!(
        ex.id == "squeeze" && ex.iteration == 1 && ex.reason == ExclusionReason::Threshold,
        "unexpected exclusion {ex:?}"
    );
    let squeeze = s1.metrics.iter().find(|m| m.id == "squeeze").unwrap().value;
    Ok(format!(
        "patterns bit-exact, rescaling gap {gap:.1e}, squeeze excluded on iteration 1 (metric {squeeze:.3}, objective {:.1e})",
        s1.objective
    ))
}

// ---------------------------------------------------------------------------
// 4 and 8 share one full run

struct RoundTrip {
    problem: SyntheticProblem,
    report: DesignReport,
    error: Option<String>,
    elapsed: Duration,
}

fn full_run() -> &'static RoundTrip {
    static RUN: OnceLock<RoundTrip> = OnceLock::new();
    RUN.get_or_init(|| {
        let problem = synth::case1_round_trip(12, 7).expect("fixture synthesizes");
        let t = Instant::now();
        let (report, _, error) = run_pipeline(&problem.hand, &problem.grasps, &problem.config);
        RoundTrip { problem, report, error: error.map(|e| e.to_string()), elapsed: t.elapsed() }
    })
}

fn round_trip() -> Check {
    let run = full_run();
    ensure!(run.error.is_none(), "pipeline failed: {:?}", run.error);
    let m: Vec<f64> = run.report.metrics.iter().map(|m| m.objective.unwrap_or(f64::INFINITY)).collect();
    ensure!(m[0] <= 1e-4, "f_trq {:.2e} > 1e-4", m[0]);
    ensure!(m[1] <= 1e-3, "f_inter {:.2e} > 1e-3 mm", m[1]);
    ensure!(m[2] <= 1e-3, "f_intra {:.2e} > 1e-3 Nmm", m[2]);
    let excluded: usize = run.report.metrics.iter().map(|m| m.excluded).sum();
    ensure!(excluded == 0, "{excluded} exclusions");
    let got = run.report.final_params();
    let truth = &run.problem.truth;
    for s in &run.problem.hand.params.stiffness {
        ensure!(got.get(&s.name) == truth.get(&s.name), "{}: got {:?} want {:?}", s.name, got.get(&s.name), truth.get(&s.name));
    }
    let mut worst = 0.0f64;
    for s in &run.problem.hand.params.preloads {
        let d = (got[&s.name] - truth[&s.name]).abs();
        ensure!(d <= 1e-2, "{}: off by {d:.2e} rad", s.name);
        worst = worst.max(d);
    }
    ensure!(run.elapsed < Duration::from_secs(600), "took {:?}", run.elapsed);
    Ok(format!(
        "f_trq {:.1e}, f_inter {:.1e} mm, f_intra {:.1e} Nmm, K exact, preload error {worst:.1e} rad, 0 exclusions, pipeline {:.0} s",
        m[0],
        m[1],
        m[2],
        run.elapsed.as_secs_f64()
    ))
}

fn report_shape() -> Check {
    let run = full_run();
    let csv = run.report.metrics_csv();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    ensure!(rows[0] == "stage,name,objective,unit,considered,excluded,status,label", "header {}", rows[0]);
    ensure!(rows.len() == 4, "{} metric rows", rows.len() - 1);
    for (row, name) in rows[1..].iter().zip(["f_trq", "f_inter", "f_intra"]) {
        let fields: Vec<&str> = row.splitn(8, ',').collect();
        ensure!(fields[1] == name && fields[6] == "ok", "row {row}");
        ensure!(fields[2].parse::<f64>().is_ok(), "objective field in {row}");
        ensure!(fields[7].ends_with(" (0 grasps excluded)\""), "label in {row}");
    }
    // parameter tables carry exactly the published column sets
    let columns = |case: DesignCase| -> Vec<Vec<String>> {
        let hand = fixtures::hand_for_case(case).unwrap();
        let report = DesignReport::build(&hand, &[], &DesignConfig::default(), &PipelineState::default());
        ["moment_arm", "stiffness", "preload"]
            .iter()
            .map(|t| report.parameters.iter().filter(|p| p.table == *t).map(|p| p.slot.clone()).collect())
            .collect()
    };
    let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let tables = [
        (
            DesignCase::Case1,
            [
                strs(&["r_tp", "r_td", "r_fr", "r_fp", "r_fd"]),
                strs(&["K_tp", "K_td", "K_fr", "K_fp", "K_fd"]),
                strs(&["theta0_tp", "theta0_td", "theta0_fr", "theta0_fp", "theta0_fd"]),
            ],
        ),
        (
            DesignCase::Case2,
            [
                strs(&["r_tp", "r_td", "r_fr", "r_fp", "r_fd"]),
                strs(&["K_tp", "K_td", "K_fp", "K_fd"]),
                strs(&["theta0_tp", "theta0_td", "theta0_fp", "theta0_fd"]),
            ],
        ),
        (
            DesignCase::Case3,
            [
                strs(&["r_tp", "r_td", "h_fp", "r_fp", "r_fd"]),
                strs(&["K_tp", "K_td", "K_fp", "K_fd"]),
                strs(&["theta0_tp", "theta0_td", "l0_fp", "theta0_fd"]),
            ],
        ),
    ];
    for (case, want) in &tables {
        let got = columns(*case);
        ensure!(got.as_slice() == want.as_slice(), "{case:?} columns {got:?}");
    }
    let filled = run.report.parameters.iter().filter(|p| p.value.is_some()).count();
    ensure!(filled == run.report.parameters.len(), "{filled} of {} parameters set", run.report.parameters.len());
    Ok(format!("3 metric rows with labels, {} parameter rows, case 1 to 3 column sets match", filled))
}

// ---------------------------------------------------------------------------
// 5

fn ujoint_kinematics() -> Check {
    let hand = fixtures::case3_hand();
    let params = fixtures::case3_table_params();
    let joints = designs::universal_joints(&hand);
    ensure!(joints.len() == 2, "{} universal joints", joints.len());
    let mut worst = 0.0f64;
    for &j in &joints {
        let g = ujoint_geometry(&hand, j, &params).unwrap();
        let specs = hand.dof_specs();
        let (dp, dy) = (hand.dof_index(j, 0), hand.dof_index(j, 1));
        let zero = ujoint_tendon_lengths(&g, 0.0, 0.0);
        ensure!(zero.iter().all(|&l| l == 6.29), "zero-pose lengths {zero:?}");
        let h = 1e-6;
        for a in 0..21 {
            for b in 0..21 {
                let p = specs[dp].lower + (specs[dp].upper - specs[dp].lower) * a as f64 / 20.0;
                let y = specs[dy].lower + (specs[dy].upper - specs[dy].lower) * b as f64 / 20.0;
                let rho = ujoint_moment_arms(&g, p, y).unwrap();
                let (lp, lm) = (ujoint_tendon_lengths(&g, p + h, y), ujoint_tendon_lengths(&g, p - h, y));
                let (ly, lz) = (ujoint_tendon_lengths(&g, p, y + h), ujoint_tendon_lengths(&g, p, y - h));
                for i in 0..3 {
                    // a positive arm shortens the line as the angle grows
                    for (arm, fd) in [(rho[0][i], -(lp[i] - lm[i]) / (2.0 * h)), (rho[1][i], -(ly[i] - lz[i]) / (2.0 * h))] {
                        // relative to the arm, floored at 0.01 mm near sign changes
                        let rel = (arm - fd).abs() / arm.abs().max(1e-2);
                        worst = worst.max(rel);
                    }
                }
            }
        }
    }
    ensure!(worst <= 1e-4, "moment arms differ from finite differences by {worst:.2e} relative");
    Ok(format!("2 joints, 21×21 grid, max relative error {worst:.1e}, zero-pose lengths exact"))
}

// ---------------------------------------------------------------------------
// 6

fn precontact_sweep() -> Check {
    let hand = fixtures::two_joint_chain_hand();
    // r = (10, 5), K = (10, 5), θ₀ = (1, 1): θ₁ = θ₂ = t − 1 with t = 1 + 2θ_m/3
    let p = fixtures::two_joint_chain_params();
    let mut worst = 0.0f64;
    for k in 0..=30 {
        let tm = 0.07 * k as f64;
        let r = pre_contact_pose(&hand, &p, &[tm]).map_err(|e| e.to_string())?;
        let t = 1.0 + 2.0 * tm / 3.0;
        for e in [r.tension[0] - t, r.theta[0] - (t - 1.0), r.theta[1] - (t - 1.0)] {
            worst = worst.max(e.abs());
        }
    }
    ensure!(worst <= 1e-9, "two-joint chain off the closed form by {worst:.2e}");

    // with K₁ = 5 the distal joint stays on its lower stop until θ_m = 1 and
    // the proximal joint reaches its 2.5 rad stop at θ_m = 2.875; from there on θ₂ = 2θ_m − 5 until π/2 at θ_m ≈ 3.285
    let mut p = p;
    p.insert("K1".into(), 5.0);
    let mut prev: Option<f64> = None;
    let mut clamped = 0;
    let mut worst_clamp = 0.0f64;
    for k in 0..=130 {
        let tm = 0.025 * k as f64 + 0.01;
        let r = pre_contact_pose(&hand, &p, &[tm]).map_err(|e| e.to_string())?;
        if tm < 1.0 {
            // tension below 1 cannot lift the distal joint off its lower stop
            ensure!(r.limits == [LimitState::Free, LimitState::Lower], "limits {:?} at {tm}", r.limits);
            worst_clamp = worst_clamp.max((r.theta[0] - tm).abs()).max(r.theta[1].abs());
            worst_clamp = worst_clamp.max((r.tension[0] - (tm + 1.0) / 2.0).abs());
        } else if tm < 2.875 - 1e-9 {
            let t = (10.0 * tm + 15.0) / 25.0;
            ensure!(r.limits[0] == LimitState::Free, "proximal clamped early at {tm}");
            worst_clamp = worst_clamp.max((r.theta[0] - (2.0 * t - 1.0)).abs()).max((r.theta[1] - (t - 1.0)).abs());
        } else {
            ensure!(r.limits[0] == LimitState::Upper && r.theta[0] == 2.5, "proximal not clamped at {tm}: {:?}", r.theta);
            ensure!(r.limits[1] == LimitState::Free, "distal clamped at {tm}");
            worst_clamp = worst_clamp.max((r.theta[1] - (2.0 * tm - 5.0)).abs());
            if let Some(q) = prev {
                ensure!(r.theta[1] > q, "distal not increasing at {tm}: {} after {q}", r.theta[1]);
            }
            prev = Some(r.theta[1]);
            clamped += 1;
        }
    }
    ensure!(worst_clamp <= 1e-9, "clamped sweep off the closed form by {worst_clamp:.2e}");
    Ok(format!("closed form to {worst:.1e}, {clamped} clamped samples with strictly increasing distal angle"))
}

// ---------------------------------------------------------------------------
// 7

fn determinism() -> Check {
    let sp = synth::case1_round_trip(4, 3).map_err(|e| e.to_string())?;
    let mut cfg = sp.config.clone();
    cfg.stage1.max_evals = 1500;
    cfg.stage2.max_evals = 1500;
    cfg.stage3.max_evals = 3000;
    cfg.stage3.restarts = 1;
    cfg.manifold.posture_steps = 30;
    cfg.manifold.torque_steps = 8;
    let once = || -> std::result::Result<Vec<(String, String)>, String> {
        let (report, state, err) = run_pipeline(&sp.hand, &sp.grasps, &cfg);
        if let Some(e) = err {
            return Err(e.to_string());
        }
        let mut files = vec![
            ("report.json".to_string(), report.to_json()),
            ("metrics.csv".to_string(), report.metrics_csv()),
            ("parameters.csv".to_string(), report.parameters_csv()),
        ];
        let mut params = sp.hand.params.default_vector();
        params.extend(report.final_params());
        let (s1, s3) = (state.stage1.as_ref().unwrap(), state.stage3.as_ref().unwrap());
        for m in sample_manifolds(&sp.hand, &sp.grasps, &params, s1, s3, &cfg).map_err(|e| e.to_string())? {
            files.push((m.file_name(), m.to_csv(&cfg.hash())));
        }
        Ok(files)
    };
    let (a, b) = (once()?, once()?);
    ensure!(a.len() == b.len(), "{} vs {} files", a.len(), b.len());
    for ((na, ta), (_, tb)) in a.iter().zip(&b) {
        ensure!(ta == tb, "{na} differs between runs");
    }
    let bytes: usize = a.iter().map(|(_, t)| t.len()).sum();
    Ok(format!("{} files, {bytes} bytes, identical", a.len()))
}
