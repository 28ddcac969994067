//! Deterministic primary-ray renderer producing RGB, range and label rasters.
//!
//! Geometry: closed room (floor, ceiling, four walls), a table (top slab and
//! four legs), and the object mesh. Part boxes can optionally be drawn into
//! the label channel only. Shading is flat Lambert with one directional light;
//! texture ids map to a color and an optional checker pattern by hashing.
//!
//! Depth is the range along each pixel's ray (not z-depth), in millimeters.

use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::geometry::{RigidTransform, Vec3, WatertightRay};
use crate::scene::{SceneInstance, WorkspaceConfig};
use crate::taxonomy::ObjectSpec;

pub const LABEL_NONE: u8 = 0;
pub const LABEL_TABLE: u8 = 1;
pub const LABEL_OBJECT: u8 = 2;
pub const LABEL_FLOOR: u8 = 3;
pub const LABEL_WALL: u8 = 4;
pub const LABEL_CEILING: u8 = 5;
/// Part box `k` is labeled `LABEL_PART_BASE + k`.
pub const LABEL_PART_BASE: u8 = 10;

const TABLE_THICKNESS: f64 = 0.04;
const LEG_HALF: f64 = 0.025;
const AMBIENT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view; pixels are square.
    pub fov_deg: f64,
}

impl CameraIntrinsics {
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Camera-frame ray direction through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: u32, v: u32) -> Vec3 {
        let f = self.focal_px();
        Vec3::new(
            (u as f64 + 0.5 - self.width as f64 / 2.0) / f,
            (v as f64 + 0.5 - self.height as f64 / 2.0) / f,
            1.0,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Everything a ray can hit, with world-space precomputation done once.
pub struct Stage<'a> {
    room_min: Vec3,
    room_max: Vec3,
    table_boxes: Vec<(Vec3, Vec3)>,
    object_pose: RigidTransform,
    object: &'a ObjectSpec,
    scene: &'a SceneInstance,
}

impl<'a> Stage<'a> {
    pub fn new(ws: &WorkspaceConfig, scene: &'a SceneInstance, object: &'a ObjectSpec) -> Stage<'a> {
        let [rx, ry, rz] = ws.room_extents;
        let [tx, ty] = ws.table_extents;
        let top = ws.table_top_height;
        let mut table_boxes = vec![(
            Vec3::new(-tx / 2.0, -ty / 2.0, top - TABLE_THICKNESS),
            Vec3::new(tx / 2.0, ty / 2.0, top),
        )];
        let leg_top = (top - TABLE_THICKNESS).max(0.0);
        if leg_top > 0.0 {
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    let c = Vec3::new(sx * (tx / 2.0 - 2.0 * LEG_HALF), sy * (ty / 2.0 - 2.0 * LEG_HALF), 0.0);
                    table_boxes.push((
                        Vec3::new(c.x - LEG_HALF, c.y - LEG_HALF, 0.0),
                        Vec3::new(c.x + LEG_HALF, c.y + LEG_HALF, leg_top),
                    ));
                }
            }
        }
        Stage {
            room_min: Vec3::new(-rx / 2.0, -ry / 2.0, 0.0),
            room_max: Vec3::new(rx / 2.0, ry / 2.0, rz),
            table_boxes,
            object_pose: scene.object_pose,
            object,
            scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Hit {
    t: f64,
    label: u8,
    normal: Vec3,
    point: Vec3,
}

fn aabb_entry(origin: &Vec3, dir: &Vec3, min: &Vec3, max: &Vec3) -> Option<(f64, Vec3)> {
    let (t0, t1) = WatertightRay::aabb_interval(origin, dir, min, max)?;
    if t1 < 0.0 || t0 <= 0.0 {
        return None;
    }
    let p = origin + dir * t0;
    let eps = 1e-9;
    let normal = (0..3)
        .find_map(|a| {
            if (p[a] - min[a]).abs() < eps {
                Some(-unit(a))
            } else if (p[a] - max[a]).abs() < eps {
                Some(unit(a))
            } else {
                None
            }
        })
        .unwrap_or_else(Vec3::z);
    Some((t0, normal))
}

fn unit(axis: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[axis] = 1.0;
    v
}

fn trace(stage: &Stage, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let offer = |best: &mut Option<Hit>, t: f64, label: u8, normal: Vec3| {
        if t > 0.0 && best.is_none_or(|b| t < b.t) {
            *best = Some(Hit {
                t,
                label,
                normal,
                point: origin + dir * t,
            });
        }
    };

    // room interior: exit distance per axis
    for a in 0..3 {
        if dir[a] == 0.0 {
            continue;
        }
        let (plane, normal_sign) = if dir[a] > 0.0 { (stage.room_max[a], -1.0) } else { (stage.room_min[a], 1.0) };
        let t = (plane - origin[a]) / dir[a];
        let label = match (a, dir[a] > 0.0) {
            (2, false) => LABEL_FLOOR,
            (2, true) => LABEL_CEILING,
            _ => LABEL_WALL,
        };
        offer(&mut best, t, label, unit(a) * normal_sign);
    }

    for (min, max) in &stage.table_boxes {
        if let Some((t, n)) = aabb_entry(origin, dir, min, max) {
            offer(&mut best, t, LABEL_TABLE, n);
        }
    }

    let local_o = stage.object_pose.inverse_transform_point(origin);
    let local_d = stage.object_pose.inverse_transform_vector(dir);
    let limit = best.map_or(f64::INFINITY, |b| b.t);
    if let Some(t) = nearest_triangle(stage.object, &local_o, &local_d, limit) {
        let (t, n) = t;
        offer(&mut best, t, LABEL_OBJECT, stage.object_pose.transform_vector(&n));
    }
    best
}

fn nearest_triangle(object: &ObjectSpec, o: &Vec3, d: &Vec3, limit: f64) -> Option<(f64, Vec3)> {
    let mesh = &object.mesh;
    let (lo, hi) = mesh.aabb();
    let (b0, b1) = WatertightRay::aabb_interval(o, d, &lo, &hi)?;
    if b1 <= 0.0 || b0 >= limit {
        return None;
    }
    let ray = WatertightRay::new(*o, *d);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..mesh.triangles().len() {
        if let Some(t) = ray.intersect(&mesh.triangle(i)) {
            if t > 1e-12 && t < limit && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, i)| {
        let [a, b, c] = mesh.triangle(i);
        let mut n = (b - a).cross(&(c - a)).normalize();
        if n.dot(d) > 0.0 {
            n = -n;
        }
        (t, n)
    })
}

fn part_box_hit(stage: &Stage, origin: &Vec3, dir: &Vec3) -> Option<(f64, u8)> {
    let mut best: Option<(f64, u8)> = None;
    for (k, part) in stage.object.parts.iter().enumerate() {
        let world = part.bbox.transformed(&stage.object_pose);
        let o = world.pose.inverse_transform_point(origin);
        let d = world.pose.inverse_transform_vector(dir);
        let h = world.half_extents;
        if let Some((t0, t1)) = WatertightRay::aabb_interval(&o, &d, &-h, &h) {
            let t = if t0 > 0.0 { t0 } else { t1 };
            if t > 0.0 && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, LABEL_PART_BASE.saturating_add(k as u8)));
            }
        }
    }
    best
}

/// 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRender {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triplets.
    pub rgb: Vec<u8>,
    /// Range in millimeters, 0 where nothing was hit.
    pub depth: Vec<u16>,
    pub labels: LabelImage,
}

fn rays<'a>(cam: &'a RigidTransform, intr: &'a CameraIntrinsics) -> impl IndexedParallelIterator<Item = Vec3> + 'a {
    let w = intr.width;
    (0..intr.pixel_count())
        .into_par_iter()
        .map(move |i| cam.transform_vector(&intr.pixel_ray(i as u32 % w, i as u32 / w)))
}

/// Label channel only; cheaper than [`render_frame`].
pub fn render_labels(stage: &Stage, cam: &RigidTransform, intr: &CameraIntrinsics, label_parts: bool) -> LabelImage {
    let origin = cam.translation;
    let data = rays(cam, intr)
        .map(|dir| label_for(stage, &origin, &dir, label_parts).1)
        .collect();
    LabelImage {
        width: intr.width,
        height: intr.height,
        data,
    }
}

/// Whether the view shows at least one object pixel and one other labeled
/// pixel. Same answer as [`object_pixel_stats`] on [`render_labels`], but
/// stops as soon as both are found (center pixel first).
pub fn view_has_object_and_background(stage: &Stage, cam: &RigidTransform, intr: &CameraIntrinsics) -> bool {
    let origin = cam.translation;
    let center = (intr.height / 2) as usize * intr.width as usize + (intr.width / 2) as usize;
    let (mut object, mut background) = (false, false);
    for i in std::iter::once(center).chain((0..intr.pixel_count()).filter(|&i| i != center)) {
        let (u, v) = (i as u32 % intr.width, i as u32 / intr.width);
        let dir = cam.transform_vector(&intr.pixel_ray(u, v));
        match label_for(stage, &origin, &dir, false).1 {
            LABEL_OBJECT => object = true,
            LABEL_NONE => {}
            _ => background = true,
        }
        if object && background {
            return true;
        }
    }
    false
}

fn label_for(stage: &Stage, origin: &Vec3, dir: &Vec3, label_parts: bool) -> (Option<Hit>, u8) {
    let hit = trace(stage, origin, dir);
    let mut label = hit.map_or(LABEL_NONE, |h| h.label);
    if label_parts {
        if let Some((t, l)) = part_box_hit(stage, origin, dir) {
            if hit.is_none_or(|h| t <= h.t) {
                label = l;
            }
        }
    }
    (hit, label)
}

/// Renders all three channels. Pure: identical inputs give identical bytes
/// regardless of thread scheduling.
pub fn render_frame(stage: &Stage, cam: &RigidTransform, intr: &CameraIntrinsics, label_parts: bool) -> FrameRender {
    let origin = cam.translation;
    let light = stage.scene.light_direction;
    let intensity = stage.scene.light_intensity;
    let pixels: Vec<([u8; 3], u16, u8)> = rays(cam, intr)
        .map(|dir| {
            let (hit, label) = label_for(stage, &origin, &dir, label_parts);
            match hit {
                None => ([0, 0, 0], 0, label),
                Some(h) => {
                    let range_mm = (h.t * dir.norm() * 1000.0).round().clamp(1.0, u16::MAX as f64) as u16;
                    let base = surface_color(stage, &h);
                    let lambert = (-light.dot(&h.normal)).max(0.0);
                    let shade = AMBIENT + intensity * lambert;
                    let rgb = base.map(|c| (c as f64 * shade).round().clamp(0.0, 255.0) as u8);
                    (rgb, range_mm, label)
                }
            }
        })
        .collect();
    let mut rgb = Vec::with_capacity(pixels.len() * 3);
    let mut depth = Vec::with_capacity(pixels.len());
    let mut labels = Vec::with_capacity(pixels.len());
    for (c, d, l) in pixels {
        rgb.extend_from_slice(&c);
        depth.push(d);
        labels.push(l);
    }
    FrameRender {
        width: intr.width,
        height: intr.height,
        rgb,
        depth,
        labels: LabelImage {
            width: intr.width,
            height: intr.height,
            data: labels,
        },
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Base color and checker cell size (0 = flat) for a texture id.
pub fn texture_appearance(id: &str) -> ([u8; 3], f64) {
    let h = fnv1a(id);
    let color = [(h >> 8) as u8 | 0x30, (h >> 16) as u8 | 0x30, (h >> 24) as u8 | 0x30];
    let checker = if h & 1 == 1 { 0.05 + ((h >> 32) % 6) as f64 * 0.05 } else { 0.0 };
    (color, checker)
}

fn surface_color(stage: &Stage, hit: &Hit) -> [u8; 3] {
    let id = match hit.label {
        LABEL_TABLE => &stage.scene.table_texture,
        LABEL_FLOOR => &stage.scene.floor_texture,
        LABEL_WALL | LABEL_CEILING => &stage.scene.wall_texture,
        _ => &stage.object.name,
    };
    let (color, cell) = texture_appearance(id);
    if cell == 0.0 {
        return color;
    }
    // checker over the two coordinates spanning the surface
    let p = hit.point;
    let axis = hit.normal.iamax();
    let (a, b) = match axis {
        0 => (p.y, p.z),
        1 => (p.x, p.z),
        _ => (p.x, p.y),
    };
    let parity = ((a / cell).floor() as i64 + (b / cell).floor() as i64).rem_euclid(2);
    if parity == 0 {
        color
    } else {
        color.map(|c| c / 2)
    }
}

/// `(object pixels, background pixels)`: label 2 versus every other non-zero
/// label.
pub fn object_pixel_stats(labels: &LabelImage) -> (usize, usize) {
    labels.data.iter().fold((0, 0), |(o, b), &l| match l {
        LABEL_OBJECT => (o + 1, b),
        LABEL_NONE => (o, b),
        _ => (o, b + 1),
    })
}

pub fn write_ppm(w: &mut impl Write, width: u32, height: u32, rgb: &[u8]) -> io::Result<()> {
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)
}

pub fn write_pgm8(w: &mut impl Write, width: u32, height: u32, data: &[u8]) -> io::Result<()> {
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(data)
}

/// 16-bit PGM, big-endian samples.
pub fn write_pgm16(w: &mut impl Write, width: u32, height: u32, data: &[u16]) -> io::Result<()> {
    write!(w, "P5\n{width} {height}\n65535\n")?;
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_be_bytes()).collect();
    w.write_all(&bytes)
}

/// Writes `frame_%05d.rgb.ppm`, `.depth.pgm` and `.label.pgm` into `dir`.
pub fn write_frame_files(dir: &Path, index: usize, frame: &FrameRender) -> io::Result<()> {
    let stem = dir.join(format!("frame_{index:05}"));
    let open = |suffix: &str| -> io::Result<io::BufWriter<std::fs::File>> {
        Ok(io::BufWriter::new(std::fs::File::create(stem.with_extension(suffix))?))
    };
    let mut f = open("rgb.ppm")?;
    write_ppm(&mut f, frame.width, frame.height, &frame.rgb)?;
    f.flush()?;
    let mut f = open("depth.pgm")?;
    write_pgm16(&mut f, frame.width, frame.height, &frame.depth)?;
    f.flush()?;
    let mut f = open("label.pgm")?;
    write_pgm8(&mut f, frame.width, frame.height, &frame.labels.data)?;
    f.flush()
}
