//! Joint tree, the six kinematic chains, and forward kinematics.
//!
//! Skeleton files are TOML:
//!
//! ```toml
//! sip_joints = [1, 2, 16, 17]
//!
//! [[joints]]
//! name = "pelvis"
//! parent = -1
//! offset = [0.0, 0.0, 0.0]
//! chain = "torso"
//! ```
//!
//! Joints are listed parents-first, so every parent index is smaller than
//! its child's index. Exactly one joint has `parent = -1`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionSequence;
use crate::rotmath::RotationMatrix;

const BUNDLED_SMPL: &str = include_str!("../data/smpl24.toml");

/// Kinematic chain a joint belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chain {
    LeftLeg,
    RightLeg,
    LeftArm,
    RightArm,
    Torso,
    Head,
}

impl Chain {
    pub const ALL: [Chain; 6] = [
        Chain::LeftLeg,
        Chain::RightLeg,
        Chain::LeftArm,
        Chain::RightArm,
        Chain::Torso,
        Chain::Head,
    ];

    /// Position in [`Chain::ALL`]; used as the joint-axis coordinate of the
    /// shared chain noise.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Chain::LeftLeg => "left_leg",
            Chain::RightLeg => "right_leg",
            Chain::LeftArm => "left_arm",
            Chain::RightArm => "right_arm",
            Chain::Torso => "torso",
            Chain::Head => "head",
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Chain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Chain::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownChain(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest-pose offset from the parent, meters.
    pub offset: [f64; 3],
    pub chain: Chain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonConfig {
    joints: Vec<Joint>,
    sip_joints: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSkeleton {
    #[serde(default)]
    sip_joints: Option<Vec<usize>>,
    joints: Vec<RawJoint>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawJoint {
    name: String,
    parent: i64,
    offset: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chain: Option<String>,
}

/// Hips and shoulders in SMPL ordering.
pub const DEFAULT_SIP_JOINTS: [usize; 4] = [1, 2, 16, 17];

impl SkeletonConfig {
    /// The bundled SMPL-topology skeleton (24 joints).
    pub fn smpl() -> Self {
        Self::parse(BUNDLED_SMPL).expect("bundled skeleton is valid")
    }

    pub fn new(joints: Vec<Joint>, sip_joints: Vec<usize>) -> Result<Self> {
        let sk = Self { joints, sip_joints };
        sk.validate()?;
        Ok(sk)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSkeleton =
            toml::from_str(text).map_err(|e| Error::SkeletonParse(e.to_string()))?;
        let mut joints = Vec::with_capacity(raw.joints.len());
        for (i, rj) in raw.joints.into_iter().enumerate() {
            let parent = match rj.parent {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => {
                    return Err(Error::TreeStructure(format!(
                        "joint {i} (`{}`) has invalid parent {p}",
                        rj.name
                    )))
                }
            };
            let chain = match rj.chain {
                Some(c) => c.parse::<Chain>().map_err(|_| {
                    Error::ChainCoverage(format!(
                        "joint {i} (`{}`) has unknown chain `{c}`",
                        rj.name
                    ))
                })?,
                None => {
                    return Err(Error::ChainCoverage(format!(
                        "joint {i} (`{}`) has no chain assignment",
                        rj.name
                    )))
                }
            };
            joints.push(Joint {
                name: rj.name,
                parent,
                offset: rj.offset,
                chain,
            });
        }
        let sip = raw
            .sip_joints
            .unwrap_or_else(|| DEFAULT_SIP_JOINTS.to_vec());
        Self::new(joints, sip)
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawSkeleton {
            sip_joints: Some(self.sip_joints.clone()),
            joints: self
                .joints
                .iter()
                .map(|j| RawJoint {
                    name: j.name.clone(),
                    parent: j.parent.map_or(-1, |p| p as i64),
                    offset: j.offset,
                    chain: Some(j.chain.as_str().to_string()),
                })
                .collect(),
        };
        toml::to_string(&raw).expect("skeleton serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::TreeStructure("no joints".into()));
        }
        let roots = self.joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(Error::TreeStructure(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= i {
                    return Err(Error::TreeStructure(format!(
                        "joint {i} (`{}`) has parent {p}; parents must precede children",
                        j.name
                    )));
                }
            }
            if !j.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("bone offset"));
            }
        }
        let mut seen = [false; 6];
        for j in &self.joints {
            seen[j.chain.index()] = true;
        }
        if let Some(missing) = Chain::ALL.iter().find(|c| !seen[c.index()]) {
            return Err(Error::ChainCoverage(format!(
                "chain `{missing}` has no joints"
            )));
        }
        if let Some(&bad) = self.sip_joints.iter().find(|&&s| s >= self.joints.len()) {
            return Err(Error::TreeStructure(format!(
                "SIP joint index {bad} out of range"
            )));
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    pub fn offset(&self, j: usize) -> [f64; 3] {
        self.joints[j].offset
    }

    pub fn chain_of(&self, j: usize) -> Chain {
        self.joints[j].chain
    }

    pub fn sip_joints(&self) -> &[usize] {
        &self.sip_joints
    }

    /// Copy with every bone offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for j in &mut out.joints {
            j.offset = j.offset.map(|v| v * factor);
        }
        out
    }

    /// Joints of one chain in root-to-tip order.
    pub fn chain_members(&self, chain: Chain) -> Vec<usize> {
        // Parents precede children, so index order is root-to-tip.
        (0..self.joints.len())
            .filter(|&j| self.joints[j].chain == chain)
            .collect()
    }

    /// Like [`SkeletonConfig::chain_members`], looking the chain up by name.
    pub fn chain_members_by_name(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.chain_members(name.parse()?))
    }
}

pub fn load_skeleton(path: impl AsRef<Path>) -> Result<SkeletonConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SkeletonConfig::parse(&text)
}

/// Global rotations and joint positions, indexed `[t * joints + j]`.
#[derive(Debug, Clone)]
pub struct FkResult {
    pub frames: usize,
    pub joints: usize,
    pub global_rot: Vec<RotationMatrix>,
    /// Meters.
    pub position: Vec<[f64; 3]>,
}

impl FkResult {
    pub fn global(&self, t: usize, j: usize) -> &RotationMatrix {
        &self.global_rot[t * self.joints + j]
    }

    pub fn pos(&self, t: usize, j: usize) -> [f64; 3] {
        self.position[t * self.joints + j]
    }
}

pub fn forward_kinematics(seq: &MotionSequence, sk: &SkeletonConfig) -> Result<FkResult> {
    let joints = sk.joint_count();
    if seq.joints() != joints {
        return Err(Error::ShapeMismatch(format!(
            "motion has {} joints, skeleton has {joints}",
            seq.joints()
        )));
    }
    let frames = seq.frames();
    let mut global_rot = Vec::with_capacity(frames * joints);
    let mut position = Vec::with_capacity(frames * joints);
    for t in 0..frames {
        let base = t * joints;
        for j in 0..joints {
            let local = seq.rotation(t, j)?;
            let offset = sk.offset(j);
            let (g, p) = match sk.parent(j) {
                None => (local, offset),
                Some(pj) => {
                    let pg: RotationMatrix = global_rot[base + pj];
                    let pp: [f64; 3] = position[base + pj];
                    let d = pg.apply(offset);
                    (pg * local, [pp[0] + d[0], pp[1] + d[1], pp[2] + d[2]])
                }
            };
            global_rot.push(g);
            position.push(p);
        }
    }
    Ok(FkResult {
        frames,
        joints,
        global_rot,
        position,
    })
}
