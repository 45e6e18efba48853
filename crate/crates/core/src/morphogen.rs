//! Decode a CPPN genome into a voxel body-plan.
//!
//! The root skeleton is read off an `R x R x R` voxel matrix spanning a 23 cm
//! cube centred on the head. Every voxel centre is queried through the CPPN
//! with `(x, y, z, d)` in matrix-normalized coordinates; occupancy is taken
//! where the skeleton output exceeds the presence threshold, and organ
//! candidates appear on surface voxels where an organ output exceeds it.
//! Joint organs carry a 4 cm cuboid sub-segment at their far end whose six
//! face centres are re-queried through the same CPPN for further organs
//! (one level deep, sub-segment joints stay inert).
//!
//! The manufacturability filter then removes organs that cannot be built:
//! off-surface or overlapping placements, wheels without ground reach,
//! joints whose sub-segment collides with the root skeleton, and everything
//! beyond the electrical caps (8 active organs on the head segment, one
//! daisy-chained active organ per joint, 16 active organs in total).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cppn::{CppnGenome, CppnNetwork, GenomeError, CPPN_OUTPUTS};

/// Presence threshold applied to each sigmoid output.
pub const PRESENCE_THRESHOLD: f64 = 0.5;
/// Side of the root voxel matrix in cm.
pub const ROOT_SIDE_CM: f64 = 23.0;
/// Default matrix resolution (voxels per axis).
pub const DEFAULT_RESOLUTION: usize = 11;
/// Side of a joint's cuboid sub-segment in cm.
pub const SUB_SEGMENT_SIDE_CM: f64 = 4.0;
/// Joint arm length from the mount surface to the near face of the cuboid, cm.
pub const JOINT_ARM_CM: f64 = 4.0;
/// Electrical caps: organs attached to the head segment, per daisy chain, total.
pub const HEAD_ACTIVE_CAP: usize = 8;
pub const CHAIN_ACTIVE_CAP: usize = 1;
pub const TOTAL_ACTIVE_CAP: usize = 16;
/// Organs closer than this (cm) count as overlapping.
pub const ORGAN_CLEARANCE_CM: f64 = 1.0;

/// Distinct `(sensors, wheels, joints)` tuples a filtered body-plan can
/// express under the electrical caps. Computed by [`reachable_type_count`];
/// frozen here as the artifact's own combination count.
pub const REACHABLE_TYPE_COUNT: usize = 525;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("genome produced no skeleton voxels")]
    DegenerateBody,
    #[error("resolution must be at least 3, got {0}")]
    ResolutionTooSmall(usize),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OrganKind {
    Wheel,
    Joint,
    Sensor,
    Caster,
}

impl OrganKind {
    pub fn is_active(self) -> bool {
        self != OrganKind::Caster
    }

    pub fn tag(self) -> &'static str {
        match self {
            OrganKind::Wheel => "wheel",
            OrganKind::Joint => "joint",
            OrganKind::Sensor => "sensor",
            OrganKind::Caster => "caster",
        }
    }
}

/// Robot type tuple: counts of active organs surviving the filter.
/// Casters are passive and excluded.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct RobotType {
    pub num_sensors: u32,
    pub num_wheels: u32,
    pub num_joints: u32,
}

impl RobotType {
    pub fn new(num_sensors: u32, num_wheels: u32, num_joints: u32) -> Self {
        RobotType {
            num_sensors,
            num_wheels,
            num_joints,
        }
    }

    /// Actuator count: one controller output per wheel or joint.
    pub fn num_actuators(&self) -> u32 {
        self.num_wheels + self.num_joints
    }
}

impl std::fmt::Display for RobotType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{})",
            self.num_sensors, self.num_wheels, self.num_joints
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Organ {
    pub id: usize,
    pub kind: OrganKind,
    /// Body-frame position in cm; the matrix centre is the origin.
    pub position_cm: [f64; 3],
    /// Outward unit surface normal at the mount point.
    pub normal: [f64; 3],
    pub segment_id: usize,
    /// CPPN output value that placed the organ; removal priority favours
    /// stronger expressions.
    pub expression: f64,
    /// Deterministic tie-break key: host voxel for root organs, face index
    /// for sub-segment organs.
    pub site: [i32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentShape {
    Root {
        resolution: usize,
        voxel_side_cm: f64,
        voxels: Vec<[u16; 3]>,
    },
    Cuboid {
        centre_cm: [f64; 3],
        side_cm: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub shape: SegmentShape,
    /// Organ id of the joint carrying this segment (None for the root).
    pub parent_organ: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyPlan {
    pub segments: Vec<Segment>,
    pub organs: Vec<Organ>,
}

/// Where a CPPN query originated, for decode instrumentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuerySite {
    RootVoxel([u16; 3]),
    CuboidFace { segment: usize, face: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct QueryRecord {
    pub site: QuerySite,
    pub input: [f64; 4],
    pub output: [f64; CPPN_OUTPUTS],
}

const FACE_NORMALS: [[f64; 3]; 6] = [
    [-1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
];
const FACE_STEPS: [[i32; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Decode a genome at [`DEFAULT_RESOLUTION`].
pub fn decode(genome: &CppnGenome) -> Result<BodyPlan, DecodeError> {
    decode_at(genome, DEFAULT_RESOLUTION)
}

pub fn decode_at(genome: &CppnGenome, resolution: usize) -> Result<BodyPlan, DecodeError> {
    decode_traced(genome, resolution).map(|(plan, _)| plan)
}

/// Decode with a full record of every CPPN query issued, in issue order.
pub fn decode_traced(
    genome: &CppnGenome,
    resolution: usize,
) -> Result<(BodyPlan, Vec<QueryRecord>), DecodeError> {
    if resolution < 3 {
        return Err(DecodeError::ResolutionTooSmall(resolution));
    }
    let net = CppnNetwork::<f64>::compile(genome)?;
    let r = resolution;
    let half = ROOT_SIDE_CM / 2.0;
    let voxel_side = ROOT_SIDE_CM / r as f64;
    let mut trace = Vec::with_capacity(r * r * r);

    // normalized centre coordinate of voxel index i along one axis
    let norm = |i: usize| ((i as f64 + 0.5) * voxel_side - half) / half;

    // pass 1: query the whole matrix
    let mut outputs = vec![[0.0f64; CPPN_OUTPUTS]; r * r * r];
    let mut occupied = vec![false; r * r * r];
    let idx = |x: usize, y: usize, z: usize| x + r * (y + r * z);
    for z in 0..r {
        for y in 0..r {
            for x in 0..r {
                let (nx, ny, nz) = (norm(x), norm(y), norm(z));
                let d = (nx * nx + ny * ny + nz * nz).sqrt();
                let out = net.query([nx, ny, nz, d]);
                trace.push(QueryRecord {
                    site: QuerySite::RootVoxel([x as u16, y as u16, z as u16]),
                    input: [nx, ny, nz, d],
                    output: out,
                });
                outputs[idx(x, y, z)] = out;
                occupied[idx(x, y, z)] = out[0] > PRESENCE_THRESHOLD;
            }
        }
    }
    if !occupied.iter().any(|&o| o) {
        return Err(DecodeError::DegenerateBody);
    }

    // pass 2: root segment = connected component closest to the matrix centre
    let root_voxels = root_component(&occupied, r);
    let in_root = {
        let mut mask = vec![false; r * r * r];
        for &[x, y, z] in &root_voxels {
            mask[idx(x as usize, y as usize, z as usize)] = true;
        }
        mask
    };

    // pass 3: organ candidates on the root surface
    let mut organs: Vec<Organ> = Vec::new();
    let mut next_organ = 0usize;
    for &[x, y, z] in &root_voxels {
        let exposed = exposed_faces(&in_root, r, x as i32, y as i32, z as i32);
        if exposed.is_empty() {
            continue;
        }
        let out = outputs[idx(x as usize, y as usize, z as usize)];
        let Some((kind, expression)) = strongest_organ(&out) else {
            continue;
        };
        let mut n = [0.0f64; 3];
        for &f in &exposed {
            for a in 0..3 {
                n[a] += FACE_NORMALS[f][a];
            }
        }
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let normal = if len > 1e-9 {
            [n[0] / len, n[1] / len, n[2] / len]
        } else {
            FACE_NORMALS[exposed[0]]
        };
        let centre = [
            (x as f64 + 0.5) * voxel_side - half,
            (y as f64 + 0.5) * voxel_side - half,
            (z as f64 + 0.5) * voxel_side - half,
        ];
        let position_cm = [
            centre[0] + normal[0] * voxel_side / 2.0,
            centre[1] + normal[1] * voxel_side / 2.0,
            centre[2] + normal[2] * voxel_side / 2.0,
        ];
        organs.push(Organ {
            id: next_organ,
            kind,
            position_cm,
            normal,
            segment_id: 0,
            expression,
            site: [x as i32, y as i32, z as i32],
        });
        next_organ += 1;
    }

    // pass 4: joint organs spawn cuboid sub-segments, faces re-queried
    let mut segments = vec![Segment {
        id: 0,
        shape: SegmentShape::Root {
            resolution: r,
            voxel_side_cm: voxel_side,
            voxels: root_voxels,
        },
        parent_organ: None,
    }];
    let joints: Vec<(usize, [f64; 3], [f64; 3])> = organs
        .iter()
        .filter(|o| o.kind == OrganKind::Joint)
        .map(|o| (o.id, o.position_cm, o.normal))
        .collect();
    for (joint_id, joint_pos, joint_normal) in joints {
        let segment_id = segments.len();
        let reach = JOINT_ARM_CM + SUB_SEGMENT_SIDE_CM / 2.0;
        let centre = [
            joint_pos[0] + joint_normal[0] * reach,
            joint_pos[1] + joint_normal[1] * reach,
            joint_pos[2] + joint_normal[2] * reach,
        ];
        for (face, fnormal) in FACE_NORMALS.iter().enumerate() {
            let p = [
                centre[0] + fnormal[0] * SUB_SEGMENT_SIDE_CM / 2.0,
                centre[1] + fnormal[1] * SUB_SEGMENT_SIDE_CM / 2.0,
                centre[2] + fnormal[2] * SUB_SEGMENT_SIDE_CM / 2.0,
            ];
            let (nx, ny, nz) = (p[0] / half, p[1] / half, p[2] / half);
            let d = (nx * nx + ny * ny + nz * nz).sqrt();
            let out = net.query([nx, ny, nz, d]);
            trace.push(QueryRecord {
                site: QuerySite::CuboidFace {
                    segment: segment_id,
                    face,
                },
                input: [nx, ny, nz, d],
                output: out,
            });
            if let Some((kind, expression)) = strongest_organ(&out) {
                organs.push(Organ {
                    id: next_organ,
                    kind,
                    position_cm: p,
                    normal: *fnormal,
                    segment_id,
                    expression,
                    site: [segment_id as i32, face as i32, 0],
                });
                next_organ += 1;
            }
        }
        segments.push(Segment {
            id: segment_id,
            shape: SegmentShape::Cuboid {
                centre_cm: centre,
                side_cm: SUB_SEGMENT_SIDE_CM,
            },
            parent_organ: Some(joint_id),
        });
    }

    Ok((BodyPlan { segments, organs }, trace))
}

/// Strongest organ output above the presence threshold at one query point;
/// ties resolve in kind order wheel, joint, sensor, caster.
fn strongest_organ(out: &[f64; CPPN_OUTPUTS]) -> Option<(OrganKind, f64)> {
    let kinds = [
        OrganKind::Wheel,
        OrganKind::Joint,
        OrganKind::Sensor,
        OrganKind::Caster,
    ];
    let mut best: Option<(OrganKind, f64)> = None;
    for (k, &kind) in kinds.iter().enumerate() {
        let v = out[k + 1];
        if v > PRESENCE_THRESHOLD && best.map_or(true, |(_, b)| v > b) {
            best = Some((kind, v));
        }
    }
    best
}

fn exposed_faces(mask: &[bool], r: usize, x: i32, y: i32, z: i32) -> Vec<usize> {
    let mut faces = Vec::new();
    for (f, step) in FACE_STEPS.iter().enumerate() {
        let (nx, ny, nz) = (x + step[0], y + step[1], z + step[2]);
        let outside =
            nx < 0 || ny < 0 || nz < 0 || nx >= r as i32 || ny >= r as i32 || nz >= r as i32;
        if outside || !mask[nx as usize + r * (ny as usize + r * nz as usize)] {
            faces.push(f);
        }
    }
    faces
}

/// Connected component (6-connectivity) of occupied voxels whose closest
/// voxel to the matrix centre is nearest; ties break on lexicographic voxel
/// coordinates. Returns voxels sorted lexicographically.
fn root_component(occupied: &[bool], r: usize) -> Vec<[u16; 3]> {
    let idx = |x: usize, y: usize, z: usize| x + r * (y + r * z);
    let mut label = vec![usize::MAX; occupied.len()];
    let mut components: Vec<Vec<[u16; 3]>> = Vec::new();
    for z in 0..r {
        for y in 0..r {
            for x in 0..r {
                if !occupied[idx(x, y, z)] || label[idx(x, y, z)] != usize::MAX {
                    continue;
                }
                let id = components.len();
                let mut stack = vec![[x as i32, y as i32, z as i32]];
                let mut voxels = Vec::new();
                label[idx(x, y, z)] = id;
                while let Some([cx, cy, cz]) = stack.pop() {
                    voxels.push([cx as u16, cy as u16, cz as u16]);
                    for step in FACE_STEPS {
                        let (nx, ny, nz) = (cx + step[0], cy + step[1], cz + step[2]);
                        if nx < 0 || ny < 0 || nz < 0 || nx >= r as i32 || ny >= r as i32 || nz >= r as i32
                        {
                            continue;
                        }
                        let ni = idx(nx as usize, ny as usize, nz as usize);
                        if occupied[ni] && label[ni] == usize::MAX {
                            label[ni] = id;
                            stack.push([nx, ny, nz]);
                        }
                    }
                }
                components.push(voxels);
            }
        }
    }
    let centre = (r as f64 - 1.0) / 2.0;
    let score = |voxels: &[[u16; 3]]| {
        voxels
            .iter()
            .map(|&[x, y, z]| {
                let (dx, dy, dz) = (
                    x as f64 - centre,
                    y as f64 - centre,
                    z as f64 - centre,
                );
                let d2 = dx * dx + dy * dy + dz * dz;
                (d2, [x, y, z])
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .unwrap()
    };
    let mut best = components
        .into_iter()
        .min_by(|a, b| score(a).partial_cmp(&score(b)).unwrap())
        .unwrap_or_default();
    best.sort_unstable();
    best
}

/// Remove organs violating the manufacturability tests and enforce the
/// electrical caps. Always succeeds; the result may be organ-free.
pub fn manufacturability_filter(plan: &BodyPlan) -> BodyPlan {
    let root = &plan.segments[0];
    let (resolution, voxel_side, root_voxels) = match &root.shape {
        SegmentShape::Root {
            resolution,
            voxel_side_cm,
            voxels,
        } => (*resolution, *voxel_side_cm, voxels),
        SegmentShape::Cuboid { .. } => unreachable!("segment 0 is always the root"),
    };
    let r = resolution;
    let mut mask = vec![false; r * r * r];
    for &[x, y, z] in root_voxels {
        mask[x as usize + r * (y as usize + r * z as usize)] = true;
    }

    // validity tests per organ (caps come after)
    let mut keep: Vec<&Organ> = Vec::new();
    for o in &plan.organs {
        match o.segment_id {
            0 => {
                let [x, y, z] = o.site;
                let on_grid = x >= 0 && y >= 0 && z >= 0 && (x as usize) < r && (y as usize) < r && (z as usize) < r;
                if !on_grid
                    || !mask[x as usize + r * (y as usize + r * z as usize)]
                    || exposed_faces(&mask, r, x, y, z).is_empty()
                {
                    continue; // not attached to the skeleton surface
                }
            }
            seg => {
                // parent joint must itself be a surviving organ; checked later
                // via cascade, here only the segment must exist
                if plan.segments.get(seg).is_none() {
                    continue;
                }
            }
        }
        if o.kind == OrganKind::Wheel && !wheel_has_ground_reach(o.normal) {
            continue;
        }
        keep.push(o);
    }

    // joints whose cuboid collides with the root skeleton are unbuildable
    let collides = |centre: &[f64; 3], side: f64| {
        let half_root = ROOT_SIDE_CM / 2.0;
        for &[x, y, z] in root_voxels {
            let c = [
                (x as f64 + 0.5) * voxel_side - half_root,
                (y as f64 + 0.5) * voxel_side - half_root,
                (z as f64 + 0.5) * voxel_side - half_root,
            ];
            let gap = voxel_side / 2.0 + side / 2.0;
            if (c[0] - centre[0]).abs() < gap - 1e-9
                && (c[1] - centre[1]).abs() < gap - 1e-9
                && (c[2] - centre[2]).abs() < gap - 1e-9
            {
                return true;
            }
        }
        false
    };
    let mut dead_segments: Vec<usize> = Vec::new();
    for seg in &plan.segments[1..] {
        if let SegmentShape::Cuboid { centre_cm, side_cm } = &seg.shape {
            if collides(centre_cm, *side_cm) {
                dead_segments.push(seg.id);
            }
        }
    }
    keep.retain(|o| {
        if dead_segments.contains(&o.segment_id) {
            return false;
        }
        if o.kind == OrganKind::Joint && o.segment_id == 0 {
            let seg = plan
                .segments
                .iter()
                .find(|s| s.parent_organ == Some(o.id));
            if let Some(seg) = seg {
                if dead_segments.contains(&seg.id) {
                    return false;
                }
            }
        }
        true
    });

    // overlap: organs closer than the clearance lose to stronger expressions
    let priority = |o: &Organ| (std::cmp::Reverse(ordered(o.expression)), o.segment_id, o.site);
    keep.sort_by_key(|o| priority(o));
    let mut placed: Vec<&Organ> = Vec::new();
    for o in keep {
        let clash = placed.iter().any(|p| {
            let dx = p.position_cm[0] - o.position_cm[0];
            let dy = p.position_cm[1] - o.position_cm[1];
            let dz = p.position_cm[2] - o.position_cm[2];
            (dx * dx + dy * dy + dz * dz).sqrt() < ORGAN_CLEARANCE_CM
        });
        if !clash {
            placed.push(o);
        }
    }

    // electrical caps, in priority order: head slots first, then daisy chains
    let mut kept_ids: Vec<usize> = Vec::new();
    let mut head_active = 0usize;
    let mut total_active = 0usize;
    for o in placed.iter().filter(|o| o.segment_id == 0) {
        if o.kind.is_active() {
            if head_active < HEAD_ACTIVE_CAP && total_active < TOTAL_ACTIVE_CAP {
                head_active += 1;
                total_active += 1;
                kept_ids.push(o.id);
            }
        } else {
            kept_ids.push(o.id);
        }
    }
    // daisy-chained organs ride on surviving joints only
    let live_segments: Vec<usize> = plan
        .segments
        .iter()
        .filter(|s| s.parent_organ.map_or(true, |j| kept_ids.contains(&j)))
        .map(|s| s.id)
        .collect();
    let mut chain_used: Vec<usize> = Vec::new();
    for o in placed.iter().filter(|o| o.segment_id != 0) {
        if !live_segments.contains(&o.segment_id) {
            continue;
        }
        if o.kind.is_active() {
            let used = chain_used.iter().filter(|&&s| s == o.segment_id).count();
            if used < CHAIN_ACTIVE_CAP && total_active < TOTAL_ACTIVE_CAP {
                chain_used.push(o.segment_id);
                total_active += 1;
                kept_ids.push(o.id);
            }
        } else {
            kept_ids.push(o.id);
        }
    }

    let organs: Vec<Organ> = plan
        .organs
        .iter()
        .filter(|o| kept_ids.contains(&o.id))
        .cloned()
        .collect();
    let segments: Vec<Segment> = plan
        .segments
        .iter()
        .filter(|s| {
            s.parent_organ
                .map_or(true, |j| organs.iter().any(|o| o.id == j))
        })
        .cloned()
        .collect();
    let filtered = BodyPlan { segments, organs };
    debug_assert!(filtered.satisfies_caps());
    filtered
}

/// A wheel needs ground reach: its axis must not point upward and must have
/// a horizontal direction to roll along. Axis-aligned side mounts qualify;
/// top mounts and flat-lying bottom mounts do not.
fn wheel_has_ground_reach(normal: [f64; 3]) -> bool {
    let horizontal = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
    normal[2] <= 1e-9 && horizontal > 1e-9
}

fn ordered(x: f64) -> u64 {
    // total order for finite non-negative expressions
    debug_assert!(x.is_finite() && x >= 0.0);
    x.to_bits()
}

/// Exact organ counts by kind; casters excluded.
pub fn robot_type(plan: &BodyPlan) -> RobotType {
    let mut t = RobotType::default();
    for o in &plan.organs {
        match o.kind {
            OrganKind::Sensor => t.num_sensors += 1,
            OrganKind::Wheel => t.num_wheels += 1,
            OrganKind::Joint => t.num_joints += 1,
            OrganKind::Caster => {}
        }
    }
    t
}

impl BodyPlan {
    pub fn satisfies_caps(&self) -> bool {
        let head = self
            .organs
            .iter()
            .filter(|o| o.segment_id == 0 && o.kind.is_active())
            .count();
        let total = self.organs.iter().filter(|o| o.kind.is_active()).count();
        let chains_ok = self.segments.iter().skip(1).all(|s| {
            self.organs
                .iter()
                .filter(|o| o.segment_id == s.id && o.kind.is_active())
                .count()
                <= CHAIN_ACTIVE_CAP
        });
        head <= HEAD_ACTIVE_CAP && total <= TOTAL_ACTIVE_CAP && chains_ok
    }

    /// Disc radius (m) circumscribing the body-plan's top-down projection.
    pub fn footprint_radius_m(&self) -> f64 {
        let mut radius: f64 = 0.04;
        for seg in &self.segments {
            match &seg.shape {
                SegmentShape::Root {
                    voxel_side_cm,
                    voxels,
                    ..
                } => {
                    let half_root = ROOT_SIDE_CM / 2.0;
                    for &[x, y, _] in voxels {
                        let cx = (x as f64 + 0.5) * voxel_side_cm - half_root;
                        let cy = (y as f64 + 0.5) * voxel_side_cm - half_root;
                        let reach =
                            (cx * cx + cy * cy).sqrt() + voxel_side_cm * std::f64::consts::FRAC_1_SQRT_2;
                        radius = radius.max(reach / 100.0);
                    }
                }
                SegmentShape::Cuboid { centre_cm, side_cm } => {
                    let reach = (centre_cm[0] * centre_cm[0] + centre_cm[1] * centre_cm[1]).sqrt()
                        + side_cm * std::f64::consts::FRAC_1_SQRT_2;
                    radius = radius.max(reach / 100.0);
                }
            }
        }
        radius
    }

    /// Structured text export: segments with voxel lists, then the organ table.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("bodyplan v1\n");
        let t = robot_type(self);
        let _ = writeln!(out, "type {} {} {}", t.num_sensors, t.num_wheels, t.num_joints);
        for seg in &self.segments {
            match &seg.shape {
                SegmentShape::Root {
                    resolution,
                    voxel_side_cm,
                    voxels,
                } => {
                    let _ = writeln!(out, "segment {} root {resolution} {voxel_side_cm:.4}", seg.id);
                    let _ = write!(out, "voxels");
                    for &[x, y, z] in voxels {
                        let _ = write!(out, " {x},{y},{z}");
                    }
                    out.push('\n');
                }
                SegmentShape::Cuboid { centre_cm, side_cm } => {
                    let _ = writeln!(
                        out,
                        "segment {} cuboid {:.4} {:.4} {:.4} {side_cm:.4} parent {}",
                        seg.id,
                        centre_cm[0],
                        centre_cm[1],
                        centre_cm[2],
                        seg.parent_organ.map(|p| p as i64).unwrap_or(-1),
                    );
                }
            }
        }
        for o in &self.organs {
            let _ = writeln!(
                out,
                "organ {} {} seg {} pos {:.4} {:.4} {:.4} normal {:.4} {:.4} {:.4} expr {:.4}",
                o.id,
                o.kind.tag(),
                o.segment_id,
                o.position_cm[0],
                o.position_cm[1],
                o.position_cm[2],
                o.normal[0],
                o.normal[1],
                o.normal[2],
                o.expression,
            );
        }
        out
    }

    /// Top-down SVG projection for inspection: root voxels, sub-segments,
    /// and organ markers.
    pub fn to_svg(&self) -> String {
        use std::fmt::Write as _;
        let scale = 10.0; // px per cm
        let half = ROOT_SIDE_CM / 2.0 + SUB_SEGMENT_SIDE_CM + JOINT_ARM_CM;
        let size = (2.0 * half * scale).ceil();
        let px = |v: f64| (v + half) * scale;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(
            out,
            r#"<rect width="{size}" height="{size}" fill="white" stroke="none"/>"#
        );
        for seg in &self.segments {
            match &seg.shape {
                SegmentShape::Root {
                    voxel_side_cm,
                    voxels,
                    ..
                } => {
                    let half_root = ROOT_SIDE_CM / 2.0;
                    for &[x, y, _] in voxels {
                        let cx = x as f64 * voxel_side_cm - half_root;
                        let cy = y as f64 * voxel_side_cm - half_root;
                        let _ = writeln!(
                            out,
                            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#b0bec5" stroke="#78909c" stroke-width="0.5"/>"##,
                            px(cx),
                            px(cy),
                            voxel_side_cm * scale,
                            voxel_side_cm * scale
                        );
                    }
                }
                SegmentShape::Cuboid { centre_cm, side_cm } => {
                    let _ = writeln!(
                        out,
                        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#d7ccc8" stroke="#8d6e63" stroke-width="0.5"/>"##,
                        px(centre_cm[0] - side_cm / 2.0),
                        px(centre_cm[1] - side_cm / 2.0),
                        side_cm * scale,
                        side_cm * scale
                    );
                }
            }
        }
        for o in &self.organs {
            let colour = match o.kind {
                OrganKind::Wheel => "#1565c0",
                OrganKind::Joint => "#ef6c00",
                OrganKind::Sensor => "#2e7d32",
                OrganKind::Caster => "#757575",
            };
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{colour}"><title>{} {}</title></circle>"#,
                px(o.position_cm[0]),
                px(o.position_cm[1]),
                o.kind.tag(),
                o.id
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Enumerate the `(sensors, wheels, joints)` tuples reachable under the
/// electrical caps: up to [`HEAD_ACTIVE_CAP`] active organs on the head, one
/// daisy-chained active organ per head joint, [`TOTAL_ACTIVE_CAP`] total.
pub fn reachable_type_count() -> usize {
    let cap = HEAD_ACTIVE_CAP as u32;
    let mut count = 0usize;
    for s in 0..=2 * cap {
        for w in 0..=2 * cap {
            for j in 0..=2 * cap {
                'split: for j_head in 0..=j.min(cap) {
                    let j_sub = j - j_head;
                    for s_sub in 0..=s {
                        for w_sub in 0..=w {
                            let daisy = j_sub + s_sub + w_sub;
                            let head = (s - s_sub) + (w - w_sub) + j_head;
                            if daisy <= j_head * CHAIN_ACTIVE_CAP as u32
                                && head <= cap
                                && s + w + j <= TOTAL_ACTIVE_CAP as u32
                            {
                                count += 1;
                                break 'split;
                            }
                        }
                    }
                }
            }
        }
    }
    count
}
