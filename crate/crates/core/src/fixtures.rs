//! Built-in hand models for the three reference designs plus small test
//! mechanisms.
//!
//! Geometry: the palm is the world frame, fingers extend along +z in the zero
//! pose. The thumb sits at (0, −30, 0) and flexes toward +y; the two fingers
//! sit at (∓20, 30, 0) and flex toward −y. Proximal links are 40 mm and
//! distal links 30 mm long.

use crate::model::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const TORSIONAL_CATALOG: [f64; 10] = [2.25, 3.60, 4.80, 5.94, 7.56, 9.40, 11.70, 13.90, 16.50, 19.25];
pub const LINEAR_CATALOG: [f64; 7] = [0.05, 0.08, 0.12, 0.18, 0.25, 0.35, 0.5];

pub const R_BOUNDS: (f64, f64) = (2.0, 12.0);
pub const ROLL_PRELOAD: (f64, f64) = (PI / 4.0, 7.0 * PI / 4.0);
pub const PROXIMAL_PRELOAD: (f64, f64) = (PI / 4.0, 3.0 * PI / 2.0);
pub const DISTAL_PRELOAD: (f64, f64) = (0.0, 3.0 * PI / 2.0);
pub const LINEAR_PRELOAD: (f64, f64) = (0.0, 25.0);
/// Case-II roll moment arm, fixed because the roll metric does not depend on it.
pub const CASE2_ROLL_ARM: f64 = 2.0;
/// Attachment angles of the universal-joint lines: back, front-left, front-right.
pub const UJOINT_ANGLES: [f64; 3] = [90.0, 240.0, 300.0];

const PROX_LIMITS: (f64, f64) = (-PI / 4.0, PI / 4.0);
const DIST_LIMITS: (f64, f64) = (0.0, PI / 2.0);
const PROX_LEN: f64 = 40.0;

const X: [f64; 3] = [1.0, 0.0, 0.0];
const NEG_X: [f64; 3] = [-1.0, 0.0, 0.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];

fn dof(name: &str, (lower, upper): (f64, f64), opening: OpeningSide) -> DofSpec {
    DofSpec { name: name.into(), lower, upper, opening }
}

fn torsional(k: &str, p: &str) -> SpringSpec {
    SpringSpec::Torsional { stiffness: k.into(), preload: p.into() }
}

fn revolute(id: &str, parent: &str, origin: [f64; 3], chain: &str, axis: [f64; 3], d: DofSpec, spring: SpringSpec) -> JointSpec {
    JointSpec {
        id: id.into(),
        parent: parent.into(),
        origin,
        chain: chain.into(),
        kind: JointKind::Revolute { axis },
        dofs: vec![d],
        spring,
    }
}

fn constant(joint: &str, slot: &str, sign: f64) -> Crossing {
    Crossing::Constant { joint: joint.into(), dof: 0, slot: slot.into(), sign, multiplicity: 1.0 }
}

fn link(id: &str, joint: &str) -> LinkSpec {
    LinkSpec { id: id.into(), parent_joint: joint.into() }
}

fn bounded(name: &str, (lower, upper): (f64, f64), unit: &str) -> BoundedSlot {
    BoundedSlot { name: name.into(), lower, upper, unit: unit.into() }
}

fn catalog_slot(name: &str, catalog: &str) -> CatalogSlot {
    CatalogSlot { name: name.into(), catalog: catalog.into() }
}

fn torsional_catalog() -> (String, Catalog) {
    ("torsional".into(), Catalog { unit: "Nmm/rad".into(), values: TORSIONAL_CATALOG.to_vec() })
}

fn thumb_chain() -> ChainSpec {
    ChainSpec { id: "thumb".into(), class: "thumb".into() }
}

fn finger_chains() -> [ChainSpec; 2] {
    [ChainSpec { id: "f1".into(), class: "finger".into() }, ChainSpec { id: "f2".into(), class: "finger".into() }]
}

/// Finger-2 aliases of finger-1 slots.
fn mirror(names: &[&str]) -> BTreeMap<String, String> {
    names.iter().map(|n| (format!("{n}_2"), n.to_string())).collect()
}

fn thumb_joints() -> Vec<JointSpec> {
    vec![
        revolute(
            "tp",
            PALM,
            [0.0, -30.0, 0.0],
            "thumb",
            NEG_X,
            dof("thumb_proximal", PROX_LIMITS, OpeningSide::Lower),
            torsional("K_tp", "theta0_tp"),
        ),
        revolute(
            "td",
            "t_proximal",
            [0.0, 0.0, PROX_LEN],
            "thumb",
            NEG_X,
            dof("thumb_distal", DIST_LIMITS, OpeningSide::Lower),
            torsional("K_td", "theta0_td"),
        ),
    ]
}

/// Slot name on finger `k` (1 or 2); finger 2 uses the mirrored alias.
fn fslot(name: &str, k: usize) -> String {
    if k == 1 {
        name.to_string()
    } else {
        format!("{name}_2")
    }
}

/// Roll-pitch fingers shared by cases I and II.
fn roll_pitch_joints(roll_springs: bool) -> Vec<JointSpec> {
    let mut out = thumb_joints();
    for k in 1..=2 {
        let x = if k == 1 { -20.0 } else { 20.0 };
        // finger 1 rolls with a negative moment arm, so it opens at the upper limit
        let roll_open = if k == 1 { OpeningSide::Upper } else { OpeningSide::Lower };
        let roll_spring =
            if roll_springs { torsional(&fslot("K_fr", k), &fslot("theta0_fr", k)) } else { SpringSpec::None };
        out.push(revolute(
            &format!("f{k}r"),
            PALM,
            [x, 30.0, 0.0],
            &format!("f{k}"),
            Z,
            dof(&format!("f{k}_roll"), PROX_LIMITS, roll_open),
            roll_spring,
        ));
        out.push(revolute(
            &format!("f{k}p"),
            &format!("f{k}_base"),
            [0.0, 0.0, 0.0],
            &format!("f{k}"),
            X,
            dof(&format!("f{k}_proximal"), PROX_LIMITS, OpeningSide::Lower),
            torsional(&fslot("K_fp", k), &fslot("theta0_fp", k)),
        ));
        out.push(revolute(
            &format!("f{k}d"),
            &format!("f{k}_proximal"),
            [0.0, 0.0, PROX_LEN],
            &format!("f{k}"),
            X,
            dof(&format!("f{k}_distal"), DIST_LIMITS, OpeningSide::Lower),
            torsional(&fslot("K_fd", k), &fslot("theta0_fd", k)),
        ));
    }
    out
}

fn roll_pitch_links() -> Vec<LinkSpec> {
    vec![
        link("t_proximal", "tp"),
        link("t_distal", "td"),
        link("f1_base", "f1r"),
        link("f1_proximal", "f1p"),
        link("f1_distal", "f1d"),
        link("f2_base", "f2r"),
        link("f2_proximal", "f2p"),
        link("f2_distal", "f2d"),
    ]
}

fn thumb_tendon(motors: &[&str], multiplicity: f64) -> TendonRoute {
    let mut c = [constant("tp", "r_tp", 1.0), constant("td", "r_td", 1.0)];
    for x in c.iter_mut() {
        if let Crossing::Constant { multiplicity: m, .. } = x {
            *m = multiplicity;
        }
    }
    TendonRoute {
        id: "thumb".into(),
        motors: motors.iter().map(|m| m.to_string()).collect(),
        crossings: c.to_vec(),
        termination: "t_distal".into(),
    }
}

fn flexion_tendon(k: usize, roll_sign: Option<f64>, motor: &str) -> TendonRoute {
    let mut crossings = Vec::new();
    if let Some(s) = roll_sign {
        crossings.push(constant(&format!("f{k}r"), &fslot("r_fr", k), s));
    }
    crossings.push(constant(&format!("f{k}p"), &fslot("r_fp", k), 1.0));
    crossings.push(constant(&format!("f{k}d"), &fslot("r_fd", k), 1.0));
    TendonRoute { id: format!("f{k}"), motors: vec![motor.into()], crossings, termination: format!("f{k}_distal") }
}

fn torsional_layout(moment_arms: Vec<BoundedSlot>, with_roll_springs: bool) -> ParamLayout {
    let mut stiffness = vec![catalog_slot("K_tp", "torsional"), catalog_slot("K_td", "torsional")];
    let mut preloads =
        vec![bounded("theta0_tp", PROXIMAL_PRELOAD, "rad"), bounded("theta0_td", DISTAL_PRELOAD, "rad")];
    let mut mirrored = vec!["r_fp", "r_fd", "K_fp", "K_fd", "theta0_fp", "theta0_fd", "r_fr"];
    if with_roll_springs {
        stiffness.push(catalog_slot("K_fr", "torsional"));
        preloads.push(bounded("theta0_fr", ROLL_PRELOAD, "rad"));
        mirrored.extend(["K_fr", "theta0_fr"]);
    }
    stiffness.push(catalog_slot("K_fp", "torsional"));
    stiffness.push(catalog_slot("K_fd", "torsional"));
    preloads.push(bounded("theta0_fp", PROXIMAL_PRELOAD, "rad"));
    preloads.push(bounded("theta0_fd", DISTAL_PRELOAD, "rad"));
    ParamLayout {
        moment_arms,
        stiffness,
        preloads,
        catalogs: [torsional_catalog()].into_iter().collect(),
        mirrors: mirror(&mirrored),
    }
}

/// Single motor, roll-pitch fingers: one tendon per digit, every joint sprung.
pub fn case1_hand() -> HandModel {
    let arms = ["r_tp", "r_td", "r_fr", "r_fp", "r_fd"].iter().map(|n| bounded(n, R_BOUNDS, "mm")).collect();
    let [c1, c2] = finger_chains();
    HandModel {
        schema: HAND_SCHEMA.into(),
        name: "case1".into(),
        design_case: DesignCase::Case1,
        links: roll_pitch_links(),
        joints: roll_pitch_joints(true),
        tendons: vec![thumb_tendon(&["m1"], 1.0), flexion_tendon(1, Some(-1.0), "m1"), flexion_tendon(2, Some(1.0), "m1")],
        motors: vec![MotorSpec { id: "m1".into(), pulley_radius: 10.0 }],
        chains: vec![thumb_chain(), c1, c2],
        params: torsional_layout(arms, true),
        index: Default::default(),
    }
    .finalize()
    .expect("case I model is valid")
}

/// Two motors, roll-pitch fingers: flexion on motor 1, both rolls on motor 2
/// through dedicated transmissions; roll joints carry no springs.
pub fn case2_hand() -> HandModel {
    let mut arms: Vec<BoundedSlot> = ["r_tp", "r_td", "r_fp", "r_fd"].iter().map(|n| bounded(n, R_BOUNDS, "mm")).collect();
    arms.insert(2, bounded("r_fr", (CASE2_ROLL_ARM, CASE2_ROLL_ARM), "mm"));
    let [c1, c2] = finger_chains();
    let roll = |k: usize, sign: f64| TendonRoute {
        id: format!("f{k}_roll"),
        motors: vec!["m2".into()],
        crossings: vec![constant(&format!("f{k}r"), &fslot("r_fr", k), sign)],
        termination: format!("f{k}_base"),
    };
    HandModel {
        schema: HAND_SCHEMA.into(),
        name: "case2".into(),
        design_case: DesignCase::Case2,
        links: roll_pitch_links(),
        joints: roll_pitch_joints(false),
        tendons: vec![
            thumb_tendon(&["m1"], 1.0),
            flexion_tendon(1, None, "m1"),
            flexion_tendon(2, None, "m1"),
            roll(1, -1.0),
            roll(2, 1.0),
        ],
        motors: vec![
            MotorSpec { id: "m1".into(), pulley_radius: 10.0 },
            MotorSpec { id: "m2".into(), pulley_radius: 10.0 },
        ],
        chains: vec![thumb_chain(), c1, c2],
        params: torsional_layout(arms, false),
        index: Default::default(),
    }
    .finalize()
    .expect("case II model is valid")
}

/// Two motors, pitch-yaw fingers on three-line universal joints. The back
/// line of each universal joint runs to a linear spring; the two front lines
/// continue over the distal pulley and go to different motors. The thumb
/// tendon loops over a fingertip idler between both motors.
pub fn case3_hand() -> HandModel {
    let mut joints = thumb_joints();
    for k in 1..=2 {
        let x = if k == 1 { -20.0 } else { 20.0 };
        joints.push(JointSpec {
            id: format!("f{k}p"),
            parent: PALM.into(),
            origin: [x, 30.0, 0.0],
            chain: format!("f{k}"),
            kind: JointKind::Universal {
                pitch_axis: X,
                yaw_axis: Y,
                geometry: UJointSpec {
                    radius: Quantity::Slot(fslot("r_fp", k)),
                    separation: Quantity::Slot(fslot("h_fp", k)),
                    angles_deg: UJOINT_ANGLES,
                },
            },
            dofs: vec![
                dof(&format!("f{k}_pitch"), PROX_LIMITS, OpeningSide::Lower),
                dof(&format!("f{k}_yaw"), PROX_LIMITS, OpeningSide::Neutral),
            ],
            spring: SpringSpec::LinearOnTendon { line: 0, stiffness: fslot("K_fp", k), preload: fslot("l0_fp", k) },
        });
        joints.push(revolute(
            &format!("f{k}d"),
            &format!("f{k}_proximal"),
            [0.0, 0.0, PROX_LEN],
            &format!("f{k}"),
            X,
            dof(&format!("f{k}_distal"), DIST_LIMITS, OpeningSide::Lower),
            torsional(&fslot("K_fd", k), &fslot("theta0_fd", k)),
        ));
    }
    let front = |k: usize, line: usize, motor: &str| TendonRoute {
        id: format!("f{k}_line{line}"),
        motors: vec![motor.into()],
        crossings: vec![
            Crossing::UjointLine { joint: format!("f{k}p"), line, multiplicity: 1.0 },
            constant(&format!("f{k}d"), &fslot("r_fd", k), 1.0),
        ],
        termination: format!("f{k}_distal"),
    };
    let arms = vec![
        bounded("r_tp", R_BOUNDS, "mm"),
        bounded("r_td", R_BOUNDS, "mm"),
        bounded("h_fp", R_BOUNDS, "mm"),
        bounded("r_fp", R_BOUNDS, "mm"),
        bounded("r_fd", R_BOUNDS, "mm"),
    ];
    let mut catalogs: BTreeMap<String, Catalog> = [torsional_catalog()].into_iter().collect();
    catalogs.insert("linear".into(), Catalog { unit: "N/mm".into(), values: LINEAR_CATALOG.to_vec() });
    let [c1, c2] = finger_chains();
    HandModel {
        schema: HAND_SCHEMA.into(),
        name: "case3".into(),
        design_case: DesignCase::Case3,
        links: vec![
            link("t_proximal", "tp"),
            link("t_distal", "td"),
            link("f1_proximal", "f1p"),
            link("f1_distal", "f1d"),
            link("f2_proximal", "f2p"),
            link("f2_distal", "f2d"),
        ],
        joints,
        tendons: vec![
            thumb_tendon(&["m1", "m2"], 2.0),
            front(1, 1, "m1"),
            front(1, 2, "m2"),
            front(2, 2, "m1"),
            front(2, 1, "m2"),
        ],
        motors: vec![
            MotorSpec { id: "m1".into(), pulley_radius: 10.0 },
            MotorSpec { id: "m2".into(), pulley_radius: 10.0 },
        ],
        chains: vec![thumb_chain(), c1, c2],
        params: ParamLayout {
            moment_arms: arms,
            stiffness: vec![
                catalog_slot("K_tp", "torsional"),
                catalog_slot("K_td", "torsional"),
                catalog_slot("K_fp", "linear"),
                catalog_slot("K_fd", "torsional"),
            ],
            preloads: vec![
                bounded("theta0_tp", PROXIMAL_PRELOAD, "rad"),
                bounded("theta0_td", DISTAL_PRELOAD, "rad"),
                bounded("l0_fp", LINEAR_PRELOAD, "mm"),
                bounded("theta0_fd", DISTAL_PRELOAD, "rad"),
            ],
            catalogs,
            mirrors: mirror(&["r_fp", "h_fp", "r_fd", "K_fp", "l0_fp", "K_fd", "theta0_fd"]),
        },
        index: Default::default(),
    }
    .finalize()
    .expect("case III model is valid")
}

fn pv(pairs: &[(&str, f64)]) -> ParamVector {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Published optimum of the single-motor design.
pub fn case1_table_params() -> ParamVector {
    pv(&[
        ("r_tp", 12.0),
        ("r_td", 4.6),
        ("r_fr", 2.0),
        ("r_fp", 11.8),
        ("r_fd", 4.5),
        ("K_tp", 5.94),
        ("K_td", 2.25),
        ("K_fr", 3.60),
        ("K_fp", 19.25),
        ("K_fd", 7.56),
        ("theta0_tp", 4.71),
        ("theta0_td", 3.93),
        ("theta0_fr", 4.34),
        ("theta0_fp", 4.71),
        ("theta0_fd", 3.78),
    ])
}

/// Published optimum of the dual-motor roll-pitch design; the roll arm is the
/// fixed placeholder.
pub fn case2_table_params() -> ParamVector {
    pv(&[
        ("r_tp", 12.0),
        ("r_td", 4.5),
        ("r_fr", CASE2_ROLL_ARM),
        ("r_fp", 12.0),
        ("r_fd", 4.5),
        ("K_tp", 5.94),
        ("K_td", 2.25),
        ("K_fp", 5.94),
        ("K_fd", 2.25),
        ("theta0_tp", 4.71),
        ("theta0_td", 3.86),
        ("theta0_fp", 4.71),
        ("theta0_fd", 3.82),
    ])
}

/// Published optimum of the pitch-yaw design.
pub fn case3_table_params() -> ParamVector {
    pv(&[
        ("r_tp", 4.65),
        ("r_td", 2.00),
        ("h_fp", 6.29),
        ("r_fp", 12.00),
        ("r_fd", 2.00),
        ("K_tp", 5.94),
        ("K_td", 2.25),
        ("K_fp", 0.18),
        ("K_fd", 19.25),
        ("theta0_tp", 4.71),
        ("theta0_td", 4.45),
        ("l0_fp", 16.67),
        ("theta0_fd", 0.23),
    ])
}

pub fn hand_for_case(case: DesignCase) -> Option<HandModel> {
    match case {
        DesignCase::Case1 => Some(case1_hand()),
        DesignCase::Case2 => Some(case2_hand()),
        DesignCase::Case3 => Some(case3_hand()),
        DesignCase::Generic => None,
    }
}

pub fn table_params(case: DesignCase) -> Option<ParamVector> {
    match case {
        DesignCase::Case1 => Some(case1_table_params()),
        DesignCase::Case2 => Some(case2_table_params()),
        DesignCase::Case3 => Some(case3_table_params()),
        DesignCase::Generic => None,
    }
}

/// One revolute joint at the palm origin with child link `l1`, one tendon.
pub fn single_joint_hand(axis: [f64; 3]) -> HandModel {
    HandModel {
        schema: HAND_SCHEMA.into(),
        name: "single_joint".into(),
        design_case: DesignCase::Generic,
        links: vec![link("l1", "j1")],
        joints: vec![revolute("j1", PALM, [0.0; 3], "c", axis, dof("q1", (-PI / 2.0, PI / 2.0), OpeningSide::Lower), SpringSpec::None)],
        tendons: vec![TendonRoute {
            id: "t1".into(),
            motors: vec!["m1".into()],
            crossings: vec![constant("j1", "r1", 1.0)],
            termination: "l1".into(),
        }],
        motors: vec![MotorSpec { id: "m1".into(), pulley_radius: 10.0 }],
        chains: vec![ChainSpec { id: "c".into(), class: "finger".into() }],
        params: ParamLayout { moment_arms: vec![bounded("r1", R_BOUNDS, "mm")], ..Default::default() },
        index: Default::default(),
    }
    .finalize()
    .expect("single-joint model is valid")
}

/// Planar two-joint finger on one tendon: proximal limits [−π/4, 2.5], distal
/// limits [0, π/2], stiffness catalog {5, 10}.
pub fn two_joint_chain_hand() -> HandModel {
    HandModel {
        schema: HAND_SCHEMA.into(),
        name: "two_joint_chain".into(),
        design_case: DesignCase::Generic,
        links: vec![link("proximal", "j1"), link("distal", "j2")],
        joints: vec![
            revolute("j1", PALM, [0.0; 3], "c", X, dof("q1", (-PI / 4.0, 2.5), OpeningSide::Lower), torsional("K1", "p1")),
            revolute(
                "j2",
                "proximal",
                [0.0, 0.0, PROX_LEN],
                "c",
                X,
                dof("q2", DIST_LIMITS, OpeningSide::Lower),
                torsional("K2", "p2"),
            ),
        ],
        tendons: vec![TendonRoute {
            id: "t1".into(),
            motors: vec!["m1".into()],
            crossings: vec![constant("j1", "r1", 1.0), constant("j2", "r2", 1.0)],
            termination: "distal".into(),
        }],
        motors: vec![MotorSpec { id: "m1".into(), pulley_radius: 10.0 }],
        chains: vec![ChainSpec { id: "c".into(), class: "finger".into() }],
        params: ParamLayout {
            moment_arms: vec![bounded("r1", R_BOUNDS, "mm"), bounded("r2", R_BOUNDS, "mm")],
            stiffness: vec![catalog_slot("K1", "k"), catalog_slot("K2", "k")],
            preloads: vec![bounded("p1", (0.0, 3.0), "rad"), bounded("p2", (0.0, 3.0), "rad")],
            catalogs: [("k".to_string(), Catalog { unit: "Nmm/rad".into(), values: vec![5.0, 10.0] })].into_iter().collect(),
            mirrors: BTreeMap::new(),
        },
        index: Default::default(),
    }
    .finalize()
    .expect("two-joint model is valid")
}

/// r = (10, 5) mm, K = (10, 5) Nmm/rad, θ₀ = (1, 1) rad.
pub fn two_joint_chain_params() -> ParamVector {
    pv(&[("r1", 10.0), ("r2", 5.0), ("K1", 10.0), ("K2", 5.0), ("p1", 1.0), ("p2", 1.0)])
}
