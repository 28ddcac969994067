//! Objects, their graspable parts, and the grasp-type → pre-shape table.
//!
//! The on-disk format is documented in `docs/taxonomy-format.md`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::UnitQuaternion;
use thiserror::Error;

use crate::geometry::{quat_from_wxyz, GeometryError, ObjError, OrientedBox, RigidTransform, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PreShape {
    Power,
    Lateral,
    Pinch,
    Pinch3Digit,
    NoGrasp,
}

impl PreShape {
    pub const ALL: [PreShape; 5] = [
        PreShape::Power,
        PreShape::Lateral,
        PreShape::Pinch,
        PreShape::Pinch3Digit,
        PreShape::NoGrasp,
    ];
    /// The four classes a graspable part can carry, in tie-break order.
    pub const GRASPING: [PreShape; 4] = [PreShape::Power, PreShape::Lateral, PreShape::Pinch, PreShape::Pinch3Digit];

    pub fn name(self) -> &'static str {
        match self {
            PreShape::Power => "Power",
            PreShape::Lateral => "Lateral",
            PreShape::Pinch => "Pinch",
            PreShape::Pinch3Digit => "Pinch3Digit",
            PreShape::NoGrasp => "NoGrasp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PreShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lower-cases and drops `_`, `-` and spaces so that `pinch_3_digit`,
/// `Pinch3Digit` and `pinch 3 digit` all name the same class.
fn normalize_name(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '_' | '-' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {kind} {value:?}")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for PreShape {
    type Err = UnknownName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize_name(s);
        PreShape::ALL
            .into_iter()
            .find(|p| normalize_name(p.name()) == n)
            .ok_or_else(|| UnknownName {
                kind: "pre-shape",
                value: s.to_string(),
            })
    }
}

/// Grasp types in table column order (which is also the tie-break order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraspType {
    AdductedThumb,
    LargeDiameter,
    SmallDiameter,
    MediumWrap,
    Sphere4Fingers,
    PowerSphere,
    Prismatic4Fingers,
    Tripod,
    Prismatic2Fingers,
}

impl GraspType {
    pub const ALL: [GraspType; 9] = [
        GraspType::AdductedThumb,
        GraspType::LargeDiameter,
        GraspType::SmallDiameter,
        GraspType::MediumWrap,
        GraspType::Sphere4Fingers,
        GraspType::PowerSphere,
        GraspType::Prismatic4Fingers,
        GraspType::Tripod,
        GraspType::Prismatic2Fingers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraspType::AdductedThumb => "AdductedThumb",
            GraspType::LargeDiameter => "LargeDiameter",
            GraspType::SmallDiameter => "SmallDiameter",
            GraspType::MediumWrap => "MediumWrap",
            GraspType::Sphere4Fingers => "Sphere4Fingers",
            GraspType::PowerSphere => "PowerSphere",
            GraspType::Prismatic4Fingers => "Prismatic4Fingers",
            GraspType::Tripod => "Tripod",
            GraspType::Prismatic2Fingers => "Prismatic2Fingers",
        }
    }

    /// The reference association every taxonomy file must reproduce.
    pub fn reference_preshape(self) -> PreShape {
        match self {
            GraspType::AdductedThumb => PreShape::Lateral,
            GraspType::LargeDiameter
            | GraspType::SmallDiameter
            | GraspType::MediumWrap
            | GraspType::Sphere4Fingers
            | GraspType::PowerSphere => PreShape::Power,
            GraspType::Prismatic4Fingers => PreShape::Pinch,
            GraspType::Tripod | GraspType::Prismatic2Fingers => PreShape::Pinch3Digit,
        }
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraspType {
    type Err = UnknownName;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize_name(s);
        GraspType::ALL
            .into_iter()
            .find(|g| normalize_name(g.name()) == n)
            .ok_or_else(|| UnknownName {
                kind: "grasp type",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSpec {
    pub part_id: String,
    pub grasp_type: GraspType,
    /// Box in the object frame.
    pub bbox: OrientedBox,
    /// Face (0..6: +X, -X, +Y, -Y, +Z, -Z) the palm must end up facing.
    pub approach_face: u8,
}

impl PartSpec {
    /// Outward normal of the approach face, object frame.
    pub fn approach_normal(&self) -> Vec3 {
        self.bbox.face_normal(self.approach_face).expect("face index validated at load")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub name: String,
    pub mesh_path: PathBuf,
    pub mesh: TriangleMesh,
    /// Height of the object frame origin above the table top when resting.
    pub rest_offset: f64,
    pub parts: Vec<PartSpec>,
}

impl ObjectSpec {
    pub fn part(&self, part_id: &str) -> Option<(usize, &PartSpec)> {
        self.parts.iter().enumerate().find(|(_, p)| p.part_id == part_id)
    }

    pub fn distinct_grasp_types(&self) -> usize {
        self.parts.iter().map(|p| p.grasp_type).collect::<HashSet<_>>().len()
    }

    pub fn is_multi_grasp(&self) -> bool {
        self.distinct_grasp_types() > 1
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh {path} for object {object}: {source}")]
    Mesh {
        object: String,
        path: PathBuf,
        #[source]
        source: ObjError,
    },
    #[error("invalid taxonomy: {0}")]
    Invalid(String),
    #[error("unknown object {0:?}")]
    UnknownObject(String),
}

/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspTaxonomy {
    objects: Vec<ObjectSpec>,
    grasp_to_preshape: BTreeMap<GraspType, PreShape>,
}

const BUNDLED_TAXONOMY: &str = include_str!("../assets/taxonomy.txt");

macro_rules! bundled_meshes {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../assets/meshes/", $name, ".obj")))),*]
    };
}

const BUNDLED_MESHES: &[(&str, &str)] = bundled_meshes!(
    "pitcher",
    "plate",
    "spatula",
    "scissors",
    "chips_can",
    "mug",
    "mustard",
    "hammer",
    "meat_can",
    "plum",
    "baseball",
    "spoon",
    "large_marker",
    "banana",
    "wood_block",
);

/// Identifier used in dataset metadata for the built-in taxonomy.
pub const BUNDLED_REF: &str = "bundled";

impl GraspTaxonomy {
    /// The built-in 15-object taxonomy with its authored part boxes.
    pub fn bundled() -> GraspTaxonomy {
        Self::parse_with(BUNDLED_TAXONOMY, |path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            BUNDLED_MESHES
                .iter()
                .find(|(name, _)| *name == stem)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::NotFound, "not a bundled mesh"))
        })
        .expect("bundled taxonomy is valid")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED_TAXONOMY
    }

    /// Resolves `"bundled"` to the built-in taxonomy, anything else as a path.
    pub fn from_reference(reference: &str) -> Result<GraspTaxonomy, TaxonomyError> {
        if reference == BUNDLED_REF {
            Ok(Self::bundled())
        } else {
            load_taxonomy(Path::new(reference))
        }
    }

    /// Parses taxonomy text, reading meshes through `read_mesh` (given the
    /// path exactly as written in the file).
    pub fn parse_with<F>(text: &str, mut read_mesh: F) -> Result<GraspTaxonomy, TaxonomyError>
    where
        F: FnMut(&Path) -> std::io::Result<String>,
    {
        let raw = parse_text(text)?;
        let mut objects = Vec::with_capacity(raw.objects.len());
        for obj in raw.objects {
            let mesh_path = obj.mesh_path.ok_or_else(|| TaxonomyError::Invalid(format!("object {} has no mesh", obj.name)))?;
            let mesh_text = read_mesh(&mesh_path).map_err(|source| TaxonomyError::Io {
                path: mesh_path.clone(),
                source,
            })?;
            let mesh = TriangleMesh::from_obj(&mesh_text).map_err(|source| TaxonomyError::Mesh {
                object: obj.name.clone(),
                path: mesh_path.clone(),
                source,
            })?;
            objects.push(ObjectSpec {
                name: obj.name,
                mesh_path,
                mesh,
                rest_offset: obj.rest_offset,
                parts: obj.parts,
            });
        }
        let taxonomy = GraspTaxonomy {
            objects,
            grasp_to_preshape: raw.map,
        };
        taxonomy.validate(raw.total_parts)?;
        Ok(taxonomy)
    }

    fn validate(&self, declared_total: Option<usize>) -> Result<(), TaxonomyError> {
        if self.objects.is_empty() {
            return Err(TaxonomyError::Invalid("no objects".into()));
        }
        for g in GraspType::ALL {
            match self.grasp_to_preshape.get(&g) {
                None => return Err(TaxonomyError::Invalid(format!("[map] has no entry for {g}"))),
                Some(&p) if p != g.reference_preshape() => {
                    return Err(TaxonomyError::Invalid(format!(
                        "{g} must map to {}, file maps it to {p}",
                        g.reference_preshape()
                    )))
                }
                Some(_) => {}
            }
        }
        let mut names = HashSet::new();
        for obj in &self.objects {
            if !names.insert(obj.name.as_str()) {
                return Err(TaxonomyError::Invalid(format!("duplicate object {}", obj.name)));
            }
            if obj.parts.is_empty() {
                return Err(TaxonomyError::Invalid(format!("object {} has no parts", obj.name)));
            }
            let mut ids = HashSet::new();
            for p in &obj.parts {
                if !ids.insert(p.part_id.as_str()) {
                    return Err(TaxonomyError::Invalid(format!("duplicate part {} in object {}", p.part_id, obj.name)));
                }
            }
        }
        if let Some(total) = declared_total {
            let actual = self.total_parts();
            if actual != total {
                return Err(TaxonomyError::Invalid(format!("declared {total} parts, found {actual}")));
            }
        }
        Ok(())
    }

    pub fn objects(&self) -> &[ObjectSpec] {
        &self.objects
    }

    pub fn object(&self, name: &str) -> Result<&ObjectSpec, TaxonomyError> {
        self.objects
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| TaxonomyError::UnknownObject(name.to_string()))
    }

    pub fn total_parts(&self) -> usize {
        self.objects.iter().map(|o| o.parts.len()).sum()
    }

    /// Every (object, part) pair in file order.
    pub fn pairs(&self) -> impl Iterator<Item = (&ObjectSpec, &PartSpec)> {
        self.objects.iter().flat_map(|o| o.parts.iter().map(move |p| (o, p)))
    }

    pub fn preshape_of(&self, g: GraspType) -> PreShape {
        self.grasp_to_preshape[&g]
    }

    /// Grasp type held by the most parts of `object`; ties go to the type
    /// listed first in [`GraspType::ALL`].
    pub fn modal_grasp(&self, object: &str) -> Result<GraspType, TaxonomyError> {
        let obj = self.object(object)?;
        let mut counts = [0usize; GraspType::ALL.len()];
        for p in &obj.parts {
            counts[p.grasp_type as usize] += 1;
        }
        let best = counts.iter().copied().max().unwrap_or(0);
        Ok(GraspType::ALL[counts.iter().position(|&c| c == best).expect("max exists")])
    }
}

/// Loads a taxonomy file; mesh paths are resolved relative to its directory.
pub fn load_taxonomy(path: &Path) -> Result<GraspTaxonomy, TaxonomyError> {
    let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    GraspTaxonomy::parse_with(&text, |rel| std::fs::read_to_string(dir.join(rel)))
}

struct RawObject {
    name: String,
    mesh_path: Option<PathBuf>,
    rest_offset: f64,
    parts: Vec<PartSpec>,
}

struct RawTaxonomy {
    objects: Vec<RawObject>,
    map: BTreeMap<GraspType, PreShape>,
    total_parts: Option<usize>,
}

enum Section {
    Preamble,
    Object,
    Map,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_text(text: &str) -> Result<RawTaxonomy, TaxonomyError> {
    let mut objects: Vec<RawObject> = Vec::new();
    let mut map = BTreeMap::new();
    let mut total_parts = None;
    let mut section = Section::Preamble;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| TaxonomyError::Parse { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            if header == "map" {
                section = Section::Map;
            } else if let Some(name) = header.strip_prefix("object") {
                let name = name.trim();
                if !is_identifier(name) {
                    return Err(err(format!("invalid object name {name:?}")));
                }
                objects.push(RawObject {
                    name: name.to_string(),
                    mesh_path: None,
                    rest_offset: 0.0,
                    parts: Vec::new(),
                });
                section = Section::Object;
            } else {
                return Err(err(format!("unknown section [{header}]")));
            }
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match section {
            Section::Preamble => match fields.as_slice() {
                ["total_parts", n] => {
                    total_parts = Some(n.parse().map_err(|_| err(format!("bad part count {n:?}")))?);
                }
                _ => return Err(err(format!("unexpected line outside a section: {content:?}"))),
            },
            Section::Map => {
                let (g, p) = content
                    .split_once("->")
                    .ok_or_else(|| err("map lines look like `<grasp_type> -> <pre_shape>`".into()))?;
                let g: GraspType = g.trim().parse().map_err(|e: UnknownName| err(e.to_string()))?;
                let p: PreShape = p.trim().parse().map_err(|e: UnknownName| err(e.to_string()))?;
                if p == PreShape::NoGrasp {
                    return Err(err(format!("{g} cannot map to NoGrasp")));
                }
                if map.insert(g, p).is_some() {
                    return Err(err(format!("{g} mapped twice")));
                }
            }
            Section::Object => {
                let obj = objects.last_mut().expect("object section has an object");
                match fields.as_slice() {
                    ["mesh", path] => obj.mesh_path = Some(PathBuf::from(path)),
                    ["rest", offset] => {
                        obj.rest_offset = offset.parse().map_err(|_| err(format!("bad rest offset {offset:?}")))?;
                    }
                    ["part", rest @ ..] => obj.parts.push(parse_part(rest).map_err(err)?),
                    _ => return Err(err(format!("unexpected line in object section: {content:?}"))),
                }
            }
        }
    }
    Ok(RawTaxonomy {
        objects,
        map,
        total_parts,
    })
}

fn parse_part(fields: &[&str]) -> Result<PartSpec, String> {
    if fields.len() != 13 {
        return Err(format!(
            "part needs `<id> <grasp_type> cx cy cz hx hy hz qw qx qy qz face=<0..5>`, got {} fields",
            fields.len()
        ));
    }
    let part_id = fields[0];
    if !is_identifier(part_id) {
        return Err(format!("invalid part id {part_id:?}"));
    }
    let grasp_type: GraspType = fields[1].parse().map_err(|e: UnknownName| e.to_string())?;
    let nums: Vec<f64> = fields[2..12]
        .iter()
        .map(|f| f.parse::<f64>().map_err(|_| format!("bad number {f:?}")))
        .collect::<Result<_, _>>()?;
    let face: u8 = fields[12]
        .strip_prefix("face=")
        .and_then(|f| f.parse().ok())
        .filter(|f| *f < 6)
        .ok_or_else(|| format!("bad face spec {:?}, expected face=<0..5>", fields[12]))?;
    let rotation: UnitQuaternion<f64> =
        quat_from_wxyz([nums[6], nums[7], nums[8], nums[9]], 1e-9).map_err(|e| e.to_string())?;
    let pose = RigidTransform::new(rotation, Vec3::new(nums[0], nums[1], nums[2]));
    let bbox = OrientedBox::new(pose, Vec3::new(nums[3], nums[4], nums[5])).map_err(|e: GeometryError| e.to_string())?;
    Ok(PartSpec {
        part_id: part_id.to_string(),
        grasp_type,
        bbox,
        approach_face: face,
    })
}
