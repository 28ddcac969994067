use super::{face_axis, GeometryError, RigidTransform, Vec3};

/// Box with arbitrary pose; `half_extents` are along the box frame axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub pose: RigidTransform,
    pub half_extents: Vec3,
}

impl OrientedBox {
    pub fn new(pose: RigidTransform, half_extents: Vec3) -> Result<Self, GeometryError> {
        if !(half_extents.iter().all(|h| *h > 0.0 && h.is_finite())) {
            return Err(GeometryError::NonPositiveExtents([
                half_extents.x,
                half_extents.y,
                half_extents.z,
            ]));
        }
        Ok(Self { pose, half_extents })
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    /// Closed-box membership.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        let local = self.pose.inverse_transform_point(p);
        (0..3).all(|a| local[a].abs() <= self.half_extents[a])
    }

    /// Re-expresses the box in the frame that `outer` maps from.
    pub fn transformed(&self, outer: &RigidTransform) -> OrientedBox {
        OrientedBox {
            pose: outer.compose(&self.pose),
            half_extents: self.half_extents,
        }
    }

    /// World-frame outward normal of face `face` (see [`face_axis`]).
    pub fn face_normal(&self, face: u8) -> Option<Vec3> {
        face_axis(face).map(|n| self.pose.transform_vector(&n))
    }
}

/// Smallest `t` in [0, 1] at which the segment `p0 → p1` is inside the box,
/// computed with the slab method in the box frame.
pub fn segment_vs_box(p0: &Vec3, p1: &Vec3, bx: &OrientedBox) -> Result<Option<f64>, GeometryError> {
    let d = p1 - p0;
    if d.norm_squared() == 0.0 {
        return Err(GeometryError::DegenerateSegment);
    }
    let o = bx.pose.inverse_transform_point(p0);
    let dir = bx.pose.inverse_transform_vector(&d);
    let mut t_min = 0.0f64;
    let mut t_max = 1.0f64;
    for a in 0..3 {
        let h = bx.half_extents[a];
        if dir[a] == 0.0 {
            if o[a].abs() > h {
                return Ok(None);
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let mut t0 = (-h - o[a]) * inv;
        let mut t1 = (h - o[a]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_min = t_min.max(t0);
        t_max = t_max.min(t1);
        if t_min > t_max {
            return Ok(None);
        }
    }
    Ok(Some(t_min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> OrientedBox {
        OrientedBox::new(RigidTransform::identity(), Vec3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn enters_axis_aligned_box_at_quarter() {
        let t = segment_vs_box(&Vec3::new(-2.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), &unit_box())
            .unwrap()
            .unwrap();
        assert!((t - 0.25).abs() < 1e-15);
    }

    #[test]
    fn misses_box() {
        let hit = segment_vs_box(&Vec3::new(0.0, 5.0, 0.0), &Vec3::new(1.0, 5.0, 0.0), &unit_box()).unwrap();
        assert_eq!(hit, None);
    }

    #[test]
    fn start_inside_returns_zero() {
        let hit = segment_vs_box(&Vec3::zeros(), &Vec3::new(3.0, 0.0, 0.0), &unit_box()).unwrap();
        assert_eq!(hit, Some(0.0));
    }

    #[test]
    fn segment_stopping_short_misses() {
        let hit = segment_vs_box(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(-1.5, 0.0, 0.0), &unit_box()).unwrap();
        assert_eq!(hit, None);
    }

    #[test]
    fn degenerate_segment_is_an_error() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(segment_vs_box(&p, &p, &unit_box()), Err(GeometryError::DegenerateSegment));
    }

    #[test]
    fn rejects_flat_box() {
        assert!(OrientedBox::new(RigidTransform::identity(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn disjoint_boxes_are_ordered_along_segment() {
        let near = OrientedBox::new(RigidTransform::from_translation(Vec3::new(-1.0, 0.0, 0.0)), Vec3::repeat(0.2)).unwrap();
        let far = OrientedBox::new(RigidTransform::from_translation(Vec3::new(1.0, 0.0, 0.0)), Vec3::repeat(0.2)).unwrap();
        let (p0, p1) = (Vec3::new(-3.0, 0.05, 0.0), Vec3::new(3.0, -0.05, 0.0));
        let tn = segment_vs_box(&p0, &p1, &near).unwrap().unwrap();
        let tf = segment_vs_box(&p0, &p1, &far).unwrap().unwrap();
        assert!(tn < tf);
        let (rn, rf) = (segment_vs_box(&p1, &p0, &near).unwrap().unwrap(), segment_vs_box(&p1, &p0, &far).unwrap().unwrap());
        assert!(rf < rn);
    }

    /// First sample index (out of `n`) that lies in the box, as a segment parameter.
    fn sampled_entry(p0: &Vec3, p1: &Vec3, bx: &OrientedBox, n: usize) -> Option<f64> {
        (0..=n)
            .map(|i| i as f64 / n as f64)
            .find(|t| bx.contains_point(&(p0 + (p1 - p0) * *t)))
    }

    #[test]
    fn agrees_with_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..400 {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let rot = UnitQuaternion::from_scaled_axis(axis * 2.0);
            let center = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let half = Vec3::new(rng.random_range(0.1..0.8), rng.random_range(0.1..0.8), rng.random_range(0.1..0.8));
            let bx = OrientedBox::new(RigidTransform::new(rot, center), half).unwrap();
            let p0 = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let p1 = center + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let exact = segment_vs_box(&p0, &p1, &bx).unwrap();
            let sampled = sampled_entry(&p0, &p1, &bx, n);
            match (exact, sampled) {
                (Some(te), Some(ts)) => {
                    hits += 1;
                    assert!(ts >= te - 1e-12 && ts - te <= 2.0 / n as f64, "exact {te} sampled {ts}");
                }
                (None, None) => {}
                // grazing intersections shorter than the sampling step
                (Some(te), None) => {
                    let exit = segment_vs_box(&p1, &p0, &bx).unwrap().unwrap();
                    assert!((1.0 - exit) - te < 2.0 / n as f64);
                }
                (None, Some(ts)) => panic!("sampling found entry {ts} the slab test missed"),
            }
        }
        assert!(hits > 100, "{hits}");
    }
}
