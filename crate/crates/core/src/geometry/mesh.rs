use std::fmt::Write as _;

use thiserror::Error;

use super::{GeometryError, RigidTransform, Vec3};

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Indexed triangle mesh in its own (object) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    aabb_min: Vec3,
    aabb_max: Vec3,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        let count = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        for (i, tri) in triangles.into_iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v as usize >= count) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: i,
                    index: bad as usize,
                    count,
                });
            }
            let [a, b, c] = tri.map(|v| vertices[v as usize]);
            if (b - a).cross(&(c - a)).norm() > 0.0 {
                kept.push(tri);
            }
        }
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let mut aabb_min = Vec3::repeat(f64::INFINITY);
        let mut aabb_max = Vec3::repeat(f64::NEG_INFINITY);
        for tri in &kept {
            for &v in tri {
                aabb_min = aabb_min.inf(&vertices[v as usize]);
                aabb_max = aabb_max.sup(&vertices[v as usize]);
            }
        }
        Ok(Self {
            vertices,
            triangles: kept,
            aabb_min,
            aabb_max,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        (self.aabb_min, self.aabb_max)
    }

    /// Largest horizontal distance of any vertex from the frame's z axis.
    pub fn footprint_radius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.x.hypot(v.y))
            .fold(0.0, f64::max)
    }

    /// Parses the `v` / `f` subset of Wavefront OBJ. Faces with more than three
    /// corners are fan-triangulated; other record types are skipped.
    pub fn from_obj(text: &str) -> Result<Self, ObjError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let syntax = |message: String| ObjError::Syntax { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut fields = content.split_whitespace();
            match fields.next() {
                Some("v") => {
                    let coords: Vec<f64> = fields
                        .take(3)
                        .map(|f| f.parse::<f64>().map_err(|e| syntax(format!("bad coordinate {f:?}: {e}"))))
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 {
                        return Err(syntax("vertex needs three coordinates".into()));
                    }
                    vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let corners: Vec<u32> = fields
                        .map(|f| {
                            let head = f.split('/').next().unwrap_or("");
                            let i: i64 = head.parse().map_err(|_| syntax(format!("bad face index {f:?}")))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            u32::try_from(resolved).map_err(|_| syntax(format!("face index {i} out of range")))
                        })
                        .collect::<Result<_, _>>()?;
                    if corners.len() < 3 {
                        return Err(syntax("face needs at least three corners".into()));
                    }
                    for k in 1..corners.len() - 1 {
                        triangles.push([corners[0], corners[k], corners[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Ok(Self::new(vertices, triangles)?)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn transformed(&self, pose: &RigidTransform) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|v| pose.transform_point(v)).collect();
        TriangleMesh::new(vertices, self.triangles.clone()).expect("rigid motion preserves validity")
    }

    /// Concatenates shells into one mesh.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for p in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&p.vertices);
            triangles.extend(p.triangles.iter().map(|t| t.map(|v| v + base)));
        }
        TriangleMesh::new(vertices, triangles).expect("merged shells are valid")
    }

    /// Closed axis-aligned cuboid with outward-wound faces.
    pub fn cuboid(center: Vec3, half: Vec3) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8u32 {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            vertices.push(center + Vec3::new(sx * half.x, sy * half.y, sz * half.z));
        }
        let quads = [
            [0, 2, 6, 4], // -x
            [1, 5, 7, 3], // +x
            [0, 4, 5, 1], // -y
            [2, 3, 7, 6], // +y
            [0, 1, 3, 2], // -z
            [4, 6, 7, 5], // +z
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh::new(vertices, triangles).expect("cuboid is valid")
    }

    /// Closed z-aligned cylinder standing on `base_center`.
    pub fn cylinder(base_center: Vec3, radius: f64, height: f64, segments: u32) -> TriangleMesh {
        let mut vertices = Vec::with_capacity(2 * segments as usize + 2);
        for ring in 0..2 {
            let z = base_center.z + ring as f64 * height;
            for s in 0..segments {
                let a = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Vec3::new(base_center.x + radius * a.cos(), base_center.y + radius * a.sin(), z));
            }
        }
        let bottom = vertices.len() as u32;
        vertices.push(base_center);
        vertices.push(base_center + Vec3::new(0.0, 0.0, height));
        let top = bottom + 1;
        let mut triangles = Vec::new();
        for s in 0..segments {
            let n = (s + 1) % segments;
            let (b0, b1, t0, t1) = (s, n, s + segments, n + segments);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
            triangles.push([bottom, b1, b0]);
            triangles.push([top, t0, t1]);
        }
        TriangleMesh::new(vertices, triangles).expect("cylinder is valid")
    }

    /// Latitude/longitude sphere.
    pub fn sphere(center: Vec3, radius: f64, stacks: u32, slices: u32) -> TriangleMesh {
        let mut vertices = vec![center + Vec3::new(0.0, 0.0, radius)];
        for i in 1..stacks {
            let polar = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let az = std::f64::consts::TAU * j as f64 / slices as f64;
                vertices.push(center + radius * Vec3::new(polar.sin() * az.cos(), polar.sin() * az.sin(), polar.cos()));
            }
        }
        let south = vertices.len() as u32;
        vertices.push(center - Vec3::new(0.0, 0.0, radius));
        let ring = |i: u32, j: u32| 1 + i * slices + (j % slices);
        let mut triangles = Vec::new();
        for j in 0..slices {
            triangles.push([0, ring(0, j), ring(0, j + 1)]);
            triangles.push([south, ring(stacks - 2, j + 1), ring(stacks - 2, j)]);
        }
        for i in 0..stacks - 2 {
            for j in 0..slices {
                triangles.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
                triangles.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
            }
        }
        TriangleMesh::new(vertices, triangles).expect("sphere is valid")
    }
}

/// Ray prepared for the watertight ray/triangle test of Woop, Benthin and
/// Wald: the ray is sheared so that it points along +z, after which edge
/// functions are evaluated in 2D. Edges shared by two triangles are never
/// both missed.
#[derive(Debug, Clone, Copy)]
pub struct WatertightRay {
    origin: Vec3,
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl WatertightRay {
    /// `dir` must be non-zero; hit distances are in units of `dir`.
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        let kz = dir.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            origin,
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        }
    }

    /// Ray parameter of the intersection with triangle `tri`, either winding.
    pub fn intersect(&self, tri: &[Vec3; 3]) -> Option<f64> {
        let a = tri[0] - self.origin;
        let b = tri[1] - self.origin;
        let c = tri[2] - self.origin;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let t = (u * self.sz * a[kz] + v * self.sz * b[kz] + w * self.sz * c[kz]) / det;
        Some(t)
    }

    /// Slab test against an axis-aligned box; returns the parameter interval.
    pub fn aabb_interval(origin: &Vec3, dir: &Vec3, min: &Vec3, max: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < min[a] || origin[a] > max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let mut lo = (min[a] - origin[a]) * inv;
            let mut hi = (max[a] - origin[a]) * inv;
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Nearest ray hit in `[t_min, t_max]` against a mesh expressed in the same
/// frame as the ray.
pub(crate) fn nearest_mesh_hit(mesh: &TriangleMesh, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let (lo, hi) = mesh.aabb();
    let (b0, b1) = WatertightRay::aabb_interval(origin, dir, &lo, &hi)?;
    let slack = 1e-9 * (1.0 + t_max.abs().min(1e6));
    if b1 < t_min - slack || b0 > t_max + slack {
        return None;
    }
    let ray = WatertightRay::new(*origin, *dir);
    let mut best: Option<f64> = None;
    for i in 0..mesh.triangles.len() {
        if let Some(t) = ray.intersect(&mesh.triangle(i)) {
            if t >= t_min && t <= t_max && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

/// Smallest segment parameter in [0, 1] at which `p0 → p1` crosses a triangle
/// of `mesh` placed at `pose`.
pub fn segment_vs_mesh(p0: &Vec3, p1: &Vec3, mesh: &TriangleMesh, pose: &RigidTransform) -> Result<Option<f64>, GeometryError> {
    let d = p1 - p0;
    if d.norm_squared() == 0.0 {
        return Err(GeometryError::DegenerateSegment);
    }
    let o = pose.inverse_transform_point(p0);
    let dir = pose.inverse_transform_vector(&d);
    Ok(nearest_mesh_hit(mesh, &o, &dir, 0.0, 1.0))
}
