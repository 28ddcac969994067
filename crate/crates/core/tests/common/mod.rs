//! Reference implementations shared by the integration tests. They answer
//! the same questions as the library by brute force.

#![allow(dead_code)]

use preshape_forge::geometry::{HitTarget, RigidTransform, TriangleMesh, Vec3};
use preshape_forge::taxonomy::ObjectSpec;

/// Number of sampling intervals along a segment.
pub const SAMPLES: usize = 10_000;

/// Box containment in the box's own frame, with the box placed at
/// `object_pose ∘ box_pose`.
fn inside_box(p: &Vec3, object_pose: &RigidTransform, box_pose: &RigidTransform, half: &Vec3) -> bool {
    let in_object = object_pose.rotation.inverse() * (p - object_pose.translation);
    let local = box_pose.rotation.inverse() * (in_object - box_pose.translation);
    (0..3).all(|i| local[i].abs() <= half[i])
}

/// Möller–Trumbore, counting only hits strictly in front of the origin.
fn ray_crosses(o: &Vec3, d: &Vec3, [a, b, c]: [Vec3; 3]) -> bool {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 0.0
}

/// Point-in-mesh by crossing parity along a fixed skewed ray; `p` is in the
/// mesh frame.
pub fn inside_mesh(p: &Vec3, mesh: &TriangleMesh, aabb: &(Vec3, Vec3)) -> bool {
    let (lo, hi) = aabb;
    if (0..3).any(|i| p[i] < lo[i] || p[i] > hi[i]) {
        return false;
    }
    let dir = Vec3::new(0.3141592, 0.5772156, 0.7548776);
    let crossings = (0..mesh.triangles().len()).filter(|&i| ray_crosses(p, &dir, mesh.triangle(i))).count();
    crossings % 2 == 1
}

/// Walks `p0 → p1` in `SAMPLES` steps and reports the first sample lying
/// inside a part box or the mesh, as `(k / SAMPLES, target)`. At one sample
/// the preferred box wins over other boxes, which win over the mesh.
pub fn dense_first_hit(
    p0: &Vec3,
    p1: &Vec3,
    object: &ObjectSpec,
    pose: &RigidTransform,
    prefer: usize,
) -> Option<(f64, HitTarget)> {
    let aabb = object.mesh.aabb();
    let mut order: Vec<usize> = (0..object.parts.len()).collect();
    order.sort_by_key(|&i| i != prefer);
    for k in 0..=SAMPLES {
        let t = k as f64 / SAMPLES as f64;
        let p = p0 + (p1 - p0) * t;
        for &i in &order {
            let part = &object.parts[i];
            if inside_box(&p, pose, &part.bbox.pose, &part.bbox.half_extents) {
                return Some((t, HitTarget::PartBox(i)));
            }
        }
        let local = pose.rotation.inverse() * (p - pose.translation);
        if inside_mesh(&local, &object.mesh, &aabb) {
            return Some((t, HitTarget::Mesh));
        }
    }
    None
}

/// Verdict of comparing the library against the dense oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agreement {
    Agree,
    /// Same target, entry parameters further apart than the tolerance.
    Distance(f64),
    Target,
}

/// Same target, and entry parameters within `tol`. The oracle reports the
/// first inside sample, so it trails the exact entry by up to one step.
pub fn compare(lib: Option<(f64, HitTarget)>, oracle: Option<(f64, HitTarget)>, tol: f64) -> Agreement {
    match (lib, oracle) {
        (None, None) => Agreement::Agree,
        (Some((t, a)), Some((t_o, b))) if a == b => {
            if (t - t_o).abs() <= tol {
                Agreement::Agree
            } else {
                Agreement::Distance((t - t_o).abs())
            }
        }
        _ => Agreement::Target,
    }
}

/// Bundled taxonomy parsed straight from its text: `(object, grasp type)`
/// per part in file order plus the grasp-type to pre-shape map.
pub struct RawTaxonomy {
    pub parts: Vec<(String, String)>,
    pub map: Vec<(String, String)>,
}

impl RawTaxonomy {
    pub fn parse(text: &str) -> RawTaxonomy {
        let mut parts = Vec::new();
        let mut map = Vec::new();
        let mut object = String::new();
        let mut in_map = false;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix("[object ").and_then(|l| l.strip_suffix(']')) {
                object = name.to_string();
                in_map = false;
            } else if line == "[map]" {
                in_map = true;
            } else if in_map {
                let (g, p) = line.split_once("->").unwrap();
                map.push((g.trim().to_string(), p.trim().to_string()));
            } else if let Some(rest) = line.strip_prefix("part ") {
                let grasp = rest.split_whitespace().nth(1).unwrap();
                parts.push((object.clone(), grasp.to_string()));
            }
        }
        RawTaxonomy { parts, map }
    }

    pub fn preshape(&self, grasp: &str) -> &str {
        &self.map.iter().find(|(g, _)| g == grasp).unwrap().1
    }

    /// Most frequent grasp type of `object`; ties go to the type listed
    /// first in the map section.
    pub fn modal(&self, object: &str) -> &str {
        let count = |g: &str| self.parts.iter().filter(|(o, pg)| o == object && pg == g).count();
        let mut best = ("", 0);
        for (g, _) in &self.map {
            let c = count(g);
            if c > best.1 {
                best = (g, c);
            }
        }
        best.0
    }

    /// Parts whose pre-shape equals that of their object's modal grasp.
    pub fn oracle_preshape_hits(&self) -> usize {
        self.parts.iter().filter(|(o, g)| self.preshape(g) == self.preshape(self.modal(o))).count()
    }

    /// Parts whose grasp type equals their object's modal grasp type.
    pub fn oracle_grasp_type_hits(&self) -> usize {
        self.parts.iter().filter(|(o, g)| g == self.modal(o)).count()
    }
}
