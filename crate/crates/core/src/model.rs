//! Hand models, grasp sets and run configuration: types, JSON ingestion and
//! validation.

use crate::error::{Diagnostic, Error, Result, Severity};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

pub const HAND_SCHEMA: &str = "handsyn/hand-model/1";
pub const GRASP_SCHEMA: &str = "handsyn/grasp-set/1";
pub const CONFIG_SCHEMA: &str = "handsyn/design-config/1";

/// Name of the implicit root link.
pub const PALM: &str = "palm";

const AXIS_TOL: f64 = 1e-9;
const LIMIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignCase {
    Case1,
    Case2,
    Case3,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: String,
    pub parent_joint: String,
}

/// Which limit a DoF sits at in the fully open hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningSide {
    #[default]
    Lower,
    Upper,
    /// Opening leaves the DoF at zero (sideways DoFs such as yaw).
    Neutral,
}

impl OpeningSide {
    /// Sign applied to a torsional preload: the spring pushes toward this side.
    pub fn preload_sign(self) -> f64 {
        match self {
            OpeningSide::Upper => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofSpec {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub opening: OpeningSide,
}

impl DofSpec {
    pub fn opening_angle(&self) -> f64 {
        match self.opening {
            OpeningSide::Lower => self.lower,
            OpeningSide::Upper => self.upper,
            OpeningSide::Neutral => 0.0f64.clamp(self.lower, self.upper),
        }
    }

    /// The limit opposite to the opening side (for neutral DoFs, zero).
    pub fn closing_angle(&self) -> f64 {
        match self.opening {
            OpeningSide::Lower => self.upper,
            OpeningSide::Upper => self.lower,
            OpeningSide::Neutral => 0.0f64.clamp(self.lower, self.upper),
        }
    }
}

/// A number given inline or looked up from a parameter slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Value(f64),
    Slot(String),
}

/// Three-tendon universal joint: lower attachment points `A_i` at height
/// `-separation/2` and upper points `B_i` at `+separation/2`, all on a circle
/// of `radius` at the given polar angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UJointSpec {
    pub radius: Quantity,
    pub separation: Quantity,
    pub angles_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JointKind {
    Revolute { axis: [f64; 3] },
    Universal { pitch_axis: [f64; 3], yaw_axis: [f64; 3], geometry: UJointSpec },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpringSpec {
    #[default]
    None,
    /// Torsional spring on a single-DoF joint, K in Nmm/rad, preload in rad.
    Torsional { stiffness: String, preload: String },
    /// Linear spring in series with one line of a universal joint, K in N/mm,
    /// preload extension in mm.
    LinearOnTendon { line: usize, stiffness: String, preload: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub id: String,
    /// Parent link id, or `palm`.
    pub parent: String,
    /// Joint origin in the parent link frame (mm).
    pub origin: [f64; 3],
    pub chain: String,
    #[serde(flatten)]
    pub kind: JointKind,
    pub dofs: Vec<DofSpec>,
    #[serde(default)]
    pub spring: SpringSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Crossing {
    /// Constant moment arm `sign · multiplicity · r` on one DoF.
    Constant {
        joint: String,
        #[serde(default)]
        dof: usize,
        slot: String,
        sign: f64,
        #[serde(default = "one")]
        multiplicity: f64,
    },
    /// Passage along one line of a universal joint; the moment arms depend on
    /// the joint configuration.
    UjointLine {
        joint: String,
        line: usize,
        #[serde(default = "one")]
        multiplicity: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Crossing {
    pub fn joint(&self) -> &str {
        match self {
            Crossing::Constant { joint, .. } | Crossing::UjointLine { joint, .. } => joint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TendonRoute {
    pub id: String,
    /// Motors pulling this tendon. Normally one; a tendon closed over an idler
    /// between two motors lists both.
    pub motors: Vec<String>,
    pub crossings: Vec<Crossing>,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpec {
    pub id: String,
    /// mm
    pub pulley_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub id: String,
    /// Threshold class, e.g. `thumb` or `finger`.
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedSlot {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "mm")]
    pub unit: String,
}

fn mm() -> String {
    "mm".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSlot {
    pub name: String,
    pub catalog: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    MomentArm,
    Stiffness,
    Preload,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    pub moment_arms: Vec<BoundedSlot>,
    #[serde(default)]
    pub stiffness: Vec<CatalogSlot>,
    #[serde(default)]
    pub preloads: Vec<BoundedSlot>,
    #[serde(default)]
    pub catalogs: BTreeMap<String, Catalog>,
    /// alias → canonical slot
    #[serde(default)]
    pub mirrors: BTreeMap<String, String>,
}

/// Values for canonical parameter slots.
pub type ParamVector = BTreeMap<String, f64>;

impl ParamLayout {
    /// Resolves a mirrored alias to its canonical slot name.
    pub fn canonical<'a>(&'a self, name: &'a str) -> &'a str {
        self.mirrors.get(name).map(String::as_str).unwrap_or(name)
    }

    pub fn kind_of(&self, name: &str) -> Option<SlotKind> {
        let c = self.canonical(name);
        if self.moment_arms.iter().any(|s| s.name == c) {
            Some(SlotKind::MomentArm)
        } else if self.stiffness.iter().any(|s| s.name == c) {
            Some(SlotKind::Stiffness)
        } else if self.preloads.iter().any(|s| s.name == c) {
            Some(SlotKind::Preload)
        } else {
            None
        }
    }

    pub fn moment_arm(&self, name: &str) -> Option<&BoundedSlot> {
        let c = self.canonical(name);
        self.moment_arms.iter().find(|s| s.name == c)
    }

    pub fn preload(&self, name: &str) -> Option<&BoundedSlot> {
        let c = self.canonical(name);
        self.preloads.iter().find(|s| s.name == c)
    }

    pub fn stiffness_catalog(&self, name: &str) -> Option<&Catalog> {
        let c = self.canonical(name);
        let slot = self.stiffness.iter().find(|s| s.name == c)?;
        self.catalogs.get(&slot.catalog)
    }

    /// Looks up a slot value through the mirror map.
    pub fn value(&self, params: &ParamVector, name: &str) -> Result<f64> {
        params
            .get(self.canonical(name))
            .copied()
            .ok_or_else(|| Error::invalid(format!("params.{name}"), "missing parameter value"))
    }

    /// Midpoints of bounded slots and the middle catalog entry of stiffness slots.
    pub fn default_vector(&self) -> ParamVector {
        let mut pv = ParamVector::new();
        for s in self.moment_arms.iter().chain(&self.preloads) {
            pv.insert(s.name.clone(), 0.5 * (s.lower + s.upper));
        }
        for s in &self.stiffness {
            if let Some(c) = self.catalogs.get(&s.catalog) {
                if !c.values.is_empty() {
                    pv.insert(s.name.clone(), c.values[c.values.len() / 2]);
                }
            }
        }
        pv
    }

    /// Bounds and catalog membership check for the slots present in `params`.
    pub fn check(&self, params: &ParamVector) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (name, &v) in params {
            let path = format!("params.{name}");
            match self.kind_of(name) {
                Some(SlotKind::MomentArm) | Some(SlotKind::Preload) => {
                    let s = self.moment_arm(name).or_else(|| self.preload(name)).unwrap();
                    if v < s.lower - 1e-12 || v > s.upper + 1e-12 {
                        out.push(Diagnostic::error(path, format!("{v} outside [{}, {}]", s.lower, s.upper)));
                    }
                }
                Some(SlotKind::Stiffness) => {
                    let c = self.stiffness_catalog(name);
                    if !c.is_some_and(|c| c.values.contains(&v)) {
                        out.push(Diagnostic::error(path, format!("{v} is not a catalog value")));
                    }
                }
                None => out.push(Diagnostic::error(path, "unknown parameter slot")),
            }
        }
        out
    }
}

/// Lookup tables derived from a validated model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelIndex {
    pub joint_pos: BTreeMap<String, usize>,
    pub link_pos: BTreeMap<String, usize>,
    pub motor_pos: BTreeMap<String, usize>,
    pub chain_pos: BTreeMap<String, usize>,
    /// First global DoF index of each joint.
    pub dof_offset: Vec<usize>,
    pub dof_count: usize,
    /// Joint owning each link.
    pub link_joint: Vec<usize>,
    /// Parent link of each joint (`None` for the palm).
    pub joint_parent_link: Vec<Option<usize>>,
    /// Joints from the palm to each link, root first.
    pub link_path: Vec<Vec<usize>>,
    /// Joints in an order where parents precede children.
    pub joint_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub schema: String,
    pub name: String,
    pub design_case: DesignCase,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub tendons: Vec<TendonRoute>,
    pub motors: Vec<MotorSpec>,
    pub chains: Vec<ChainSpec>,
    pub params: ParamLayout,
    #[serde(skip)]
    pub index: ModelIndex,
}

impl HandModel {
    /// Validates the model and builds its index. Warnings are dropped; use
    /// [`HandModel::diagnose`] to see them.
    pub fn finalize(mut self) -> Result<Self> {
        let (index, diags) = self.diagnose();
        if diags.iter().any(|d| d.severity == Severity::Error) {
            return Err(Error::Invalid(diags));
        }
        self.index = index.expect("index is built when there are no errors");
        Ok(self)
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let model: HandModel = serde_json::from_str(text)
            .map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })?;
        model.finalize()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hand model serializes")
    }

    pub fn dof_count(&self) -> usize {
        self.index.dof_count
    }

    pub fn joint(&self, id: &str) -> Option<(usize, &JointSpec)> {
        self.index.joint_pos.get(id).map(|&i| (i, &self.joints[i]))
    }

    pub fn dof_index(&self, joint: usize, dof: usize) -> usize {
        self.index.dof_offset[joint] + dof
    }

    /// `(joint index, dof within joint)` for every global DoF.
    pub fn dof_owners(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.dof_count());
        for (j, joint) in self.joints.iter().enumerate() {
            for k in 0..joint.dofs.len() {
                out.push((j, k));
            }
        }
        out
    }

    pub fn dof_specs(&self) -> Vec<&DofSpec> {
        self.joints.iter().flat_map(|j| j.dofs.iter()).collect()
    }

    pub fn dof_names(&self) -> Vec<String> {
        self.dof_specs().iter().map(|d| d.name.clone()).collect()
    }

    /// Global DoF indices belonging to a chain.
    pub fn chain_dofs(&self, chain: &str) -> Vec<usize> {
        let mut out = Vec::new();
        for (j, joint) in self.joints.iter().enumerate() {
            if joint.chain == chain {
                for k in 0..joint.dofs.len() {
                    out.push(self.dof_index(j, k));
                }
            }
        }
        out
    }

    pub fn chain_class(&self, chain: &str) -> Option<&str> {
        self.chains.iter().find(|c| c.id == chain).map(|c| c.class.as_str())
    }

    /// Tendon indices with at least one crossing on the given DoFs.
    pub fn tendons_on_dofs(&self, dofs: &[usize]) -> Vec<usize> {
        let set: BTreeSet<usize> = dofs.iter().copied().collect();
        (0..self.tendons.len())
            .filter(|&t| self.tendon_dofs(t).iter().any(|d| set.contains(d)))
            .collect()
    }

    /// Global DoFs a tendon acts on.
    pub fn tendon_dofs(&self, tendon: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for c in &self.tendons[tendon].crossings {
            let j = self.index.joint_pos[c.joint()];
            match c {
                Crossing::Constant { dof, .. } => {
                    out.insert(self.dof_index(j, *dof));
                }
                Crossing::UjointLine { .. } => {
                    for k in 0..self.joints[j].dofs.len() {
                        out.insert(self.dof_index(j, k));
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Motor pulley radii, with optional overrides by motor id.
    pub fn motor_radii(&self, overrides: &BTreeMap<String, f64>) -> Vec<f64> {
        self.motors.iter().map(|m| overrides.get(&m.id).copied().unwrap_or(m.pulley_radius)).collect()
    }

    /// The fully open pose: every DoF at its opening side.
    pub fn opening_pose(&self) -> Vec<f64> {
        self.dof_specs().iter().map(|d| d.opening_angle()).collect()
    }

    pub fn closing_pose(&self) -> Vec<f64> {
        self.dof_specs().iter().map(|d| d.closing_angle()).collect()
    }

    /// Full validation. Returns the index when no errors were found.
    pub fn diagnose(&self) -> (Option<ModelIndex>, Vec<Diagnostic>) {
        let mut d = Vec::new();
        if self.schema != HAND_SCHEMA {
            d.push(Diagnostic::error("schema", format!("expected \"{HAND_SCHEMA}\", found \"{}\"", self.schema)));
        }
        let mut idx = ModelIndex::default();

        for (i, l) in self.links.iter().enumerate() {
            if l.id == PALM || idx.link_pos.insert(l.id.clone(), i).is_some() {
                d.push(Diagnostic::error(format!("links[{i}].id"), format!("duplicate link id \"{}\"", l.id)));
            }
        }
        let mut offset = 0;
        for (i, j) in self.joints.iter().enumerate() {
            if idx.joint_pos.insert(j.id.clone(), i).is_some() {
                d.push(Diagnostic::error(format!("joints[{i}].id"), format!("duplicate joint id \"{}\"", j.id)));
            }
            idx.dof_offset.push(offset);
            offset += j.dofs.len();
        }
        idx.dof_count = offset;
        for (i, m) in self.motors.iter().enumerate() {
            if idx.motor_pos.insert(m.id.clone(), i).is_some() {
                d.push(Diagnostic::error(format!("motors[{i}].id"), "duplicate motor id"));
            }
            if !(m.pulley_radius > 0.0) {
                d.push(Diagnostic::error(format!("motors[{i}].pulley_radius"), "pulley radius must be positive"));
            }
        }
        for (i, c) in self.chains.iter().enumerate() {
            if idx.chain_pos.insert(c.id.clone(), i).is_some() {
                d.push(Diagnostic::error(format!("chains[{i}].id"), "duplicate chain id"));
            }
        }
        if self.motors.is_empty() {
            d.push(Diagnostic::error("motors", "no motors"));
        }
        if self.joints.is_empty() {
            d.push(Diagnostic::error("joints", "no joints"));
        }

        self.check_layout(&mut d);

        // tree structure
        for (i, l) in self.links.iter().enumerate() {
            match idx.joint_pos.get(&l.parent_joint) {
                Some(&j) => idx.link_joint.push(j),
                None => {
                    d.push(Diagnostic::error(
                        format!("links[{i}].parent_joint"),
                        format!("unknown joint id \"{}\"", l.parent_joint),
                    ));
                    idx.link_joint.push(usize::MAX);
                }
            }
        }
        let mut child_links = vec![0usize; self.joints.len()];
        for &j in &idx.link_joint {
            if j != usize::MAX {
                child_links[j] += 1;
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            let path = format!("joints[{i}]");
            if child_links[i] != 1 {
                d.push(Diagnostic::error(
                    format!("{path}.id"),
                    format!("joint \"{}\" must carry exactly one child link, found {}", j.id, child_links[i]),
                ));
            }
            if j.parent == PALM {
                idx.joint_parent_link.push(None);
            } else if let Some(&l) = idx.link_pos.get(&j.parent) {
                idx.joint_parent_link.push(Some(l));
            } else {
                d.push(Diagnostic::error(format!("{path}.parent"), format!("unknown link id \"{}\"", j.parent)));
                idx.joint_parent_link.push(None);
            }
            if !idx.chain_pos.contains_key(&j.chain) {
                d.push(Diagnostic::error(format!("{path}.chain"), format!("unknown chain id \"{}\"", j.chain)));
            }
            self.check_joint(i, j, &mut d);
        }
        if d.iter().any(|x| x.severity == Severity::Error) {
            return (None, d);
        }

        // paths from the palm; detects cycles
        let nl = self.links.len();
        idx.link_path = vec![Vec::new(); nl];
        for l in 0..nl {
            let mut path = Vec::new();
            let mut cur = Some(l);
            let mut steps = 0;
            while let Some(link) = cur {
                let j = idx.link_joint[link];
                path.push(j);
                cur = idx.joint_parent_link[j];
                steps += 1;
                if steps > nl + 1 {
                    d.push(Diagnostic::error(format!("links[{l}]"), "kinematic cycle: links do not reach the palm"));
                    return (None, d);
                }
            }
            path.reverse();
            idx.link_path[l] = path;
        }
        let mut order: Vec<usize> = (0..self.joints.len()).collect();
        let depth = |j: usize| -> usize {
            let l = idx.link_pos[&self.links.iter().find(|l| idx.joint_pos[&l.parent_joint] == j).unwrap().id];
            idx.link_path[l].len()
        };
        order.sort_by_key(|&j| (depth(j), j));
        idx.joint_order = order;

        self.check_tendons(&idx, &mut d);
        if d.iter().any(|x| x.severity == Severity::Error) {
            return (None, d);
        }
        (Some(idx), d)
    }

    fn check_layout(&self, d: &mut Vec<Diagnostic>) {
        let p = &self.params;
        let mut names = BTreeSet::new();
        for (i, s) in p.moment_arms.iter().enumerate() {
            if !names.insert(s.name.clone()) {
                d.push(Diagnostic::error(format!("params.moment_arms[{i}].name"), "duplicate slot name"));
            }
            if !(s.lower > 0.0) {
                d.push(Diagnostic::error(format!("params.moment_arms[{i}].lower"), "lower bound must be positive"));
            }
            if !(s.lower <= s.upper) {
                d.push(Diagnostic::error(format!("params.moment_arms[{i}]"), "lower bound exceeds upper bound"));
            }
        }
        for (i, s) in p.preloads.iter().enumerate() {
            if !names.insert(s.name.clone()) {
                d.push(Diagnostic::error(format!("params.preloads[{i}].name"), "duplicate slot name"));
            }
            if !(s.lower <= s.upper) {
                d.push(Diagnostic::error(format!("params.preloads[{i}]"), "lower bound exceeds upper bound"));
            }
        }
        for (i, s) in p.stiffness.iter().enumerate() {
            if !names.insert(s.name.clone()) {
                d.push(Diagnostic::error(format!("params.stiffness[{i}].name"), "duplicate slot name"));
            }
            if !p.catalogs.contains_key(&s.catalog) {
                d.push(Diagnostic::error(
                    format!("params.stiffness[{i}].catalog"),
                    format!("unknown catalog \"{}\"", s.catalog),
                ));
            }
        }
        for (name, c) in &p.catalogs {
            let path = format!("params.catalogs.{name}");
            if c.values.is_empty() {
                d.push(Diagnostic::error(path, "catalog empty"));
            } else if !c.values.windows(2).all(|w| w[0] < w[1]) {
                d.push(Diagnostic::error(path, "catalog must be sorted strictly ascending"));
            } else if !(c.values[0] > 0.0) {
                d.push(Diagnostic::error(path, "catalog values must be positive"));
            }
        }
        for (alias, canon) in &p.mirrors {
            let path = format!("params.mirrors.{alias}");
            if names.contains(alias) {
                d.push(Diagnostic::error(path, "alias shadows a canonical slot"));
            } else if !names.contains(canon) {
                d.push(Diagnostic::error(path, format!("unknown canonical slot \"{canon}\"")));
            }
        }
    }

    fn check_slot(&self, path: String, name: &str, kind: SlotKind, d: &mut Vec<Diagnostic>) {
        match self.params.kind_of(name) {
            Some(k) if k == kind => {}
            Some(k) => d.push(Diagnostic::error(path, format!("slot \"{name}\" is a {k:?} slot, expected {kind:?}"))),
            None => d.push(Diagnostic::error(path, format!("unknown parameter slot \"{name}\""))),
        }
    }

    fn check_joint(&self, i: usize, j: &JointSpec, d: &mut Vec<Diagnostic>) {
        let path = format!("joints[{i}]");
        let unit = |a: &[f64; 3]| ((a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt() - 1.0).abs() <= AXIS_TOL;
        match &j.kind {
            JointKind::Revolute { axis } => {
                if !unit(axis) {
                    d.push(Diagnostic::error(format!("{path}.axis"), "axis must be a unit vector"));
                }
                if j.dofs.len() != 1 {
                    d.push(Diagnostic::error(format!("{path}.dofs"), "revolute joints carry exactly 1 DoF"));
                }
                if let SpringSpec::LinearOnTendon { .. } = j.spring {
                    d.push(Diagnostic::error(format!("{path}.spring"), "linear springs need a universal joint"));
                }
            }
            JointKind::Universal { pitch_axis, yaw_axis, geometry } => {
                if !unit(pitch_axis) || !unit(yaw_axis) {
                    d.push(Diagnostic::error(path.to_string(), "universal joint axes must be unit vectors"));
                }
                let dotp: f64 = pitch_axis.iter().zip(yaw_axis).map(|(a, b)| a * b).sum();
                if dotp.abs() > 1e-9 {
                    d.push(Diagnostic::error(path.to_string(), "universal joint axes must be orthogonal"));
                }
                if j.dofs.len() != 2 {
                    d.push(Diagnostic::error(format!("{path}.dofs"), "universal joints carry exactly 2 DoF"));
                }
                for (name, q) in [("radius", &geometry.radius), ("separation", &geometry.separation)] {
                    match q {
                        Quantity::Value(v) if !(*v > 0.0) => {
                            d.push(Diagnostic::error(format!("{path}.geometry.{name}"), "must be positive"))
                        }
                        Quantity::Slot(s) => {
                            self.check_slot(format!("{path}.geometry.{name}"), s, SlotKind::MomentArm, d)
                        }
                        _ => {}
                    }
                }
                let a = geometry.angles_deg;
                let distinct = (a[0] - a[1]).rem_euclid(360.0) > 1e-6
                    && (a[1] - a[2]).rem_euclid(360.0) > 1e-6
                    && (a[0] - a[2]).rem_euclid(360.0) > 1e-6;
                if !distinct {
                    d.push(Diagnostic::error(format!("{path}.geometry.angles_deg"), "attachment points coincide"));
                }
                if let SpringSpec::Torsional { .. } = j.spring {
                    d.push(Diagnostic::error(format!("{path}.spring"), "torsional springs need a revolute joint"));
                }
            }
        }
        for (k, dof) in j.dofs.iter().enumerate() {
            if !(dof.lower < dof.upper) {
                d.push(Diagnostic::error(format!("{path}.dofs[{k}]"), "degenerate limit interval"));
            }
        }
        match &j.spring {
            SpringSpec::None => {}
            SpringSpec::Torsional { stiffness, preload } => {
                self.check_slot(format!("{path}.spring.stiffness"), stiffness, SlotKind::Stiffness, d);
                self.check_slot(format!("{path}.spring.preload"), preload, SlotKind::Preload, d);
            }
            SpringSpec::LinearOnTendon { line, stiffness, preload } => {
                if *line > 2 {
                    d.push(Diagnostic::error(format!("{path}.spring.line"), "line index must be 0, 1 or 2"));
                }
                self.check_slot(format!("{path}.spring.stiffness"), stiffness, SlotKind::Stiffness, d);
                self.check_slot(format!("{path}.spring.preload"), preload, SlotKind::Preload, d);
            }
        }
    }

    fn check_tendons(&self, idx: &ModelIndex, d: &mut Vec<Diagnostic>) {
        // joint a is an ancestor of (or equal to) joint b
        let child_link = |j: usize| idx.link_joint.iter().position(|&x| x == j).unwrap();
        let ancestor = |a: usize, b: usize| idx.link_path[child_link(b)].contains(&a);
        let mut ids = BTreeSet::new();
        for (t, tendon) in self.tendons.iter().enumerate() {
            let path = format!("tendons[{t}]");
            if !ids.insert(tendon.id.clone()) {
                d.push(Diagnostic::error(format!("{path}.id"), "duplicate tendon id"));
            }
            if tendon.motors.is_empty() {
                d.push(Diagnostic::error(format!("{path}.motors"), "tendon is not attached to a motor"));
            }
            for m in &tendon.motors {
                if !idx.motor_pos.contains_key(m) {
                    d.push(Diagnostic::error(format!("{path}.motors"), format!("unknown motor id \"{m}\"")));
                }
            }
            if tendon.crossings.is_empty() {
                d.push(Diagnostic::error(format!("{path}.crossings"), "tendon crosses no joints"));
            }
            let mut prev: Option<usize> = None;
            for (k, c) in tendon.crossings.iter().enumerate() {
                let cpath = format!("{path}.crossings[{k}]");
                let Some(&j) = idx.joint_pos.get(c.joint()) else {
                    d.push(Diagnostic::error(format!("{cpath}.joint"), format!("unknown joint id \"{}\"", c.joint())));
                    continue;
                };
                if let Some(p) = prev {
                    if !ancestor(p, j) {
                        d.push(Diagnostic::error(cpath.clone(), "crossings must run proximal to distal along one chain"));
                    }
                }
                prev = Some(j);
                match c {
                    Crossing::Constant { dof, slot, sign, multiplicity, .. } => {
                        if *dof >= self.joints[j].dofs.len() {
                            d.push(Diagnostic::error(format!("{cpath}.dof"), "DoF index out of range"));
                        }
                        if (sign.abs() - 1.0).abs() > 0.0 {
                            d.push(Diagnostic::error(format!("{cpath}.sign"), "sign must be +1 or -1"));
                        }
                        if !(*multiplicity > 0.0) {
                            d.push(Diagnostic::error(format!("{cpath}.multiplicity"), "multiplicity must be positive"));
                        }
                        self.check_slot(format!("{cpath}.slot"), slot, SlotKind::MomentArm, d);
                    }
                    Crossing::UjointLine { line, multiplicity, .. } => {
                        if !matches!(self.joints[j].kind, JointKind::Universal { .. }) {
                            d.push(Diagnostic::error(format!("{cpath}.joint"), "line crossing needs a universal joint"));
                        }
                        if *line > 2 {
                            d.push(Diagnostic::error(format!("{cpath}.line"), "line index must be 0, 1 or 2"));
                        }
                        if !(*multiplicity > 0.0) {
                            d.push(Diagnostic::error(format!("{cpath}.multiplicity"), "multiplicity must be positive"));
                        }
                    }
                }
            }
            match idx.link_pos.get(&tendon.termination) {
                None => d.push(Diagnostic::error(
                    format!("{path}.termination"),
                    format!("unknown link id \"{}\"", tendon.termination),
                )),
                Some(&l) => {
                    if let Some(p) = prev {
                        if !idx.link_path[l].contains(&p) {
                            d.push(Diagnostic::error(
                                format!("{path}.termination"),
                                "termination link is not distal to the last crossing",
                            ));
                        }
                    }
                }
            }
        }
    }
}

pub fn load_hand_model(path: &Path) -> Result<HandModel> {
    let text = read_text(path)?;
    HandModel::from_json(&text, &path.display().to_string())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspTag {
    #[default]
    Desired,
    Opening,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub link: String,
    /// mm, link frame
    pub position: [f64; 3],
    /// inward unit normal, link frame
    pub normal: [f64; 3],
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub id: String,
    #[serde(default)]
    pub object: String,
    /// rad, one entry per DoF in model order
    pub theta: Vec<f64>,
    #[serde(default)]
    pub contacts: Vec<ContactRecord>,
    #[serde(default)]
    pub tag: GraspTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSet {
    pub schema: String,
    pub grasps: Vec<GraspRecord>,
}

impl GraspSet {
    pub fn new(grasps: Vec<GraspRecord>) -> Self {
        GraspSet { schema: GRASP_SCHEMA.into(), grasps }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grasp set serializes")
    }
}

/// Suffix of synthesized opening-pose ids.
pub const OPENING_SUFFIX: &str = "/open";

/// Checks grasps against the model. Errors make the set unusable; a missing
/// opening pair is a warning because it can be synthesized.
pub fn validate_grasps(set: &GraspSet, hand: &HandModel) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    if set.schema != GRASP_SCHEMA {
        d.push(Diagnostic::error("schema", format!("expected \"{GRASP_SCHEMA}\", found \"{}\"", set.schema)));
    }
    if set.grasps.is_empty() {
        d.push(Diagnostic::error("grasps", "no grasps"));
        return d;
    }
    let m = hand.dof_count();
    let specs = hand.dof_specs();
    let mut ids = BTreeSet::new();
    for (i, g) in set.grasps.iter().enumerate() {
        let path = format!("grasps[{i}]");
        if !ids.insert(g.id.as_str()) {
            d.push(Diagnostic::error(format!("{path}.id"), format!("duplicate grasp id \"{}\"", g.id)));
        }
        if g.theta.len() != m {
            d.push(Diagnostic::error(
                format!("{path}.theta"),
                format!("grasp \"{}\": dimension mismatch: {} angles for {m} DoF", g.id, g.theta.len()),
            ));
            continue;
        }
        for (k, (&th, spec)) in g.theta.iter().zip(&specs).enumerate() {
            if !th.is_finite() || th < spec.lower - LIMIT_TOL || th > spec.upper + LIMIT_TOL {
                d.push(Diagnostic::error(
                    format!("{path}.theta[{k}]"),
                    format!("grasp \"{}\": angle {th} outside limits [{}, {}] of {}", g.id, spec.lower, spec.upper, spec.name),
                ));
            }
        }
        match g.tag {
            GraspTag::Desired => {
                if g.contacts.is_empty() {
                    d.push(Diagnostic::error(format!("{path}.contacts"), format!("grasp \"{}\" has no contacts", g.id)));
                }
            }
            GraspTag::Opening => {
                if !g.contacts.is_empty() {
                    d.push(Diagnostic::error(format!("{path}.contacts"), "opening poses carry no contacts"));
                }
                for (k, (&th, spec)) in g.theta.iter().zip(&specs).enumerate() {
                    if (th - spec.opening_angle()).abs() > LIMIT_TOL {
                        d.push(Diagnostic::error(format!("{path}.theta[{k}]"), "opening pose must sit at the opening-side limit"));
                    }
                }
            }
        }
        for (k, c) in g.contacts.iter().enumerate() {
            let cpath = format!("{path}.contacts[{k}]");
            if !hand.index.link_pos.contains_key(&c.link) {
                let msg = if c.link == PALM {
                    "contact on palm is not supported".to_string()
                } else {
                    format!("unknown link id \"{}\"", c.link)
                };
                d.push(Diagnostic::error(format!("{cpath}.link"), msg));
            }
            let n = c.normal;
            let nn = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (nn - 1.0).abs() > 1e-9 {
                d.push(Diagnostic::error(format!("{cpath}.normal"), "normal must be a unit vector"));
            }
            if !(c.mu > 0.0) {
                d.push(Diagnostic::error(format!("{cpath}.mu"), "nonpositive friction coefficient"));
            }
        }
    }
    let openings: BTreeSet<&str> = set
        .grasps
        .iter()
        .filter(|g| g.tag == GraspTag::Opening)
        .filter_map(|g| g.pair.as_deref())
        .collect();
    for (i, g) in set.grasps.iter().enumerate() {
        if g.tag == GraspTag::Desired && !openings.contains(g.id.as_str()) {
            d.push(Diagnostic::warning(
                format!("grasps[{i}]"),
                format!("grasp \"{}\" has no opening pair; one will be synthesized", g.id),
            ));
        }
    }
    d
}

/// Appends an opening pose for every desired grasp that lacks one and links
/// pairs in both directions. Returns the number of records added.
pub fn complete_openings(grasps: &mut Vec<GraspRecord>, hand: &HandModel) -> usize {
    let open_pose = hand.opening_pose();
    let mut paired: BTreeMap<String, String> = BTreeMap::new();
    for g in grasps.iter() {
        if g.tag == GraspTag::Opening {
            if let Some(p) = &g.pair {
                paired.insert(p.clone(), g.id.clone());
            }
        }
    }
    let mut added = Vec::new();
    for g in grasps.iter_mut() {
        if g.tag != GraspTag::Desired {
            continue;
        }
        match paired.get(&g.id) {
            Some(open_id) => g.pair = Some(open_id.clone()),
            None => {
                let open_id = format!("{}{OPENING_SUFFIX}", g.id);
                g.pair = Some(open_id.clone());
                added.push(GraspRecord {
                    id: open_id,
                    object: g.object.clone(),
                    theta: open_pose.clone(),
                    contacts: Vec::new(),
                    tag: GraspTag::Opening,
                    pair: Some(g.id.clone()),
                });
            }
        }
    }
    let n = added.len();
    grasps.extend(added);
    n
}

pub fn parse_grasp_set(text: &str, origin: &str, hand: &HandModel) -> Result<(Vec<GraspRecord>, Vec<Diagnostic>)> {
    let set: GraspSet =
        serde_json::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })?;
    let diags = validate_grasps(&set, hand);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Error::Invalid(diags));
    }
    let mut grasps = set.grasps;
    complete_openings(&mut grasps, hand);
    Ok((grasps, diags))
}

/// Loads, validates and completes a grasp set with opening pairs.
pub fn load_grasp_set(path: &Path, hand: &HandModel) -> Result<Vec<GraspRecord>> {
    let text = read_text(path)?;
    parse_grasp_set(&text, &path.display().to_string(), hand).map(|(g, _)| g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaesStageConfig {
    /// Function-value spread that ends a run.
    pub tolfun: f64,
    /// Step-size tolerance in normalized coordinates.
    pub tolx: f64,
    pub max_evals: usize,
    /// `None` selects `4 + ⌊3 ln n⌋`.
    pub popsize: Option<usize>,
    /// Initial step as a fraction of each box width.
    pub sigma0: f64,
    /// Extra runs with doubled population (IPOP), keeping the best.
    pub restarts: usize,
}

impl Default for CmaesStageConfig {
    fn default() -> Self {
        CmaesStageConfig { tolfun: 1e-6, tolx: 1e-12, max_evals: 20_000, popsize: None, sigma0: 0.3, restarts: 0 }
    }
}

impl CmaesStageConfig {
    pub fn with_tolfun(tolfun: f64) -> Self {
        CmaesStageConfig { tolfun, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifoldConfig {
    /// Motor sweep resolution per motor for posture manifolds.
    pub posture_steps: usize,
    /// Grid resolution per tendon for torque manifolds.
    pub torque_steps: usize,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        ManifoldConfig { posture_steps: 200, torque_steps: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    pub schema: String,
    pub pyramid_edges: usize,
    /// Stage-1 exclusion threshold on the normalized unbalanced torque.
    pub torque_threshold: f64,
    /// Stage-2 exclusion threshold on the travel error, mm.
    pub travel_threshold: f64,
    /// Stage-3 exclusion thresholds by chain class, Nmm.
    pub spring_torque_threshold: BTreeMap<String, f64>,
    /// Stage-3 threshold for classes missing from the map, Nmm.
    pub default_spring_torque_threshold: f64,
    pub qp_tol: f64,
    pub stage1: CmaesStageConfig,
    pub stage2: CmaesStageConfig,
    pub stage3: CmaesStageConfig,
    /// Slack ε on the stage-2 constraint `f_trq(r) = f_trq^min`.
    pub constraint_tol: f64,
    /// Penalty coefficient C on the stage-2 constraint violation.
    pub penalty: f64,
    pub seed: u64,
    /// Motor pulley radius overrides by motor id, mm.
    pub motor_radii: BTreeMap<String, f64>,
    /// Worker threads for objective evaluation; `None` uses all cores.
    pub workers: Option<usize>,
    pub manifold: ManifoldConfig,
}

impl Default for DesignConfig {
    fn default() -> Self {
        let mut thr = BTreeMap::new();
        thr.insert("thumb".to_string(), 2.0);
        thr.insert("finger".to_string(), 5.0);
        DesignConfig {
            schema: CONFIG_SCHEMA.into(),
            pyramid_edges: 8,
            torque_threshold: 0.1,
            travel_threshold: 2.0,
            spring_torque_threshold: thr,
            default_spring_torque_threshold: 5.0,
            qp_tol: 1e-10,
            stage1: CmaesStageConfig::with_tolfun(1e-6),
            stage2: CmaesStageConfig::with_tolfun(1e-3),
            stage3: CmaesStageConfig::with_tolfun(1e-3),
            constraint_tol: 1e-3,
            penalty: 1e6,
            seed: 1,
            motor_radii: BTreeMap::new(),
            workers: None,
            manifold: ManifoldConfig::default(),
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        if self.schema != CONFIG_SCHEMA {
            d.push(Diagnostic::error("schema", format!("expected \"{CONFIG_SCHEMA}\", found \"{}\"", self.schema)));
        }
        if self.pyramid_edges < 3 {
            d.push(Diagnostic::error("pyramid_edges", "need at least 3 pyramid edges"));
        }
        let positive = [
            ("torque_threshold", self.torque_threshold),
            ("travel_threshold", self.travel_threshold),
            ("default_spring_torque_threshold", self.default_spring_torque_threshold),
            ("qp_tol", self.qp_tol),
            ("constraint_tol", self.constraint_tol),
            ("penalty", self.penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                d.push(Diagnostic::error(name, "must be positive"));
            }
        }
        for (k, v) in &self.spring_torque_threshold {
            if !(*v > 0.0) {
                d.push(Diagnostic::error(format!("spring_torque_threshold.{k}"), "must be positive"));
            }
        }
        for (name, s) in [("stage1", &self.stage1), ("stage2", &self.stage2), ("stage3", &self.stage3)] {
            if !(s.tolfun > 0.0) || !(s.tolx > 0.0) {
                d.push(Diagnostic::error(name, "tolerances must be positive"));
            }
            if !(s.sigma0 > 0.0) {
                d.push(Diagnostic::error(format!("{name}.sigma0"), "must be positive"));
            }
            if s.max_evals == 0 {
                d.push(Diagnostic::error(format!("{name}.max_evals"), "must be positive"));
            }
            if s.popsize.is_some_and(|p| p < 2) {
                d.push(Diagnostic::error(format!("{name}.popsize"), "must be at least 2"));
            }
        }
        for (k, v) in &self.motor_radii {
            if !(*v > 0.0) {
                d.push(Diagnostic::error(format!("motor_radii.{k}"), "must be positive"));
            }
        }
        d
    }

    pub fn spring_threshold(&self, class: &str) -> f64 {
        self.spring_torque_threshold.get(class).copied().unwrap_or(self.default_spring_torque_threshold)
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: DesignConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })?;
        let d = cfg.validate();
        if d.iter().any(|x| x.severity == Severity::Error) {
            return Err(Error::Invalid(d));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact canonical JSON encoding, hex.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(path: &Path) -> Result<DesignConfig> {
    let text = read_text(path)?;
    DesignConfig::from_json(&text, &path.display().to_string())
}
