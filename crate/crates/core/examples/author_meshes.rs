//! Regenerates the low-poly stand-in meshes under `assets/meshes/`.
//!
//! Every object is modeled at roughly its real size with the frame origin at
//! the center of its resting footprint. Multi-piece objects are built from
//! disjoint closed shells (a few millimeters apart) so that inside/outside
//! tests by ray parity stay valid.
//!
//! Usage: `cargo run -p preshape-forge --example author_meshes`

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::UnitQuaternion;
use preshape_forge::geometry::{RigidTransform, TriangleMesh, Vec3};

const SEGMENTS: u32 = 24;

/// Cylinder lying along +x with its lowest line on the table.
fn lying_cylinder(center_x: f64, radius: f64, length: f64) -> TriangleMesh {
    let upright = TriangleMesh::cylinder(Vec3::new(0.0, 0.0, -length / 2.0), radius, length, SEGMENTS);
    let pose = RigidTransform::new(
        UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
        Vec3::new(center_x, 0.0, radius),
    );
    upright.transformed(&pose)
}

fn cuboid(c: [f64; 3], h: [f64; 3]) -> TriangleMesh {
    TriangleMesh::cuboid(Vec3::from(c), Vec3::from(h))
}

fn main() {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/meshes");
    std::fs::create_dir_all(&out).expect("create mesh dir");

    let meshes: Vec<(&str, TriangleMesh)> = vec![
        (
            "pitcher",
            TriangleMesh::merge(&[
                TriangleMesh::cylinder(Vec3::zeros(), 0.075, 0.23, SEGMENTS),
                cuboid([0.105, 0.0, 0.13], [0.015, 0.012, 0.06]),
            ]),
        ),
        ("plate", TriangleMesh::cylinder(Vec3::zeros(), 0.13, 0.02, 32)),
        (
            "spatula",
            TriangleMesh::merge(&[
                cuboid([-0.08, 0.0, 0.008], [0.07, 0.012, 0.008]),
                cuboid([0.075, 0.0, 0.004], [0.05, 0.035, 0.004]),
            ]),
        ),
        (
            "scissors",
            TriangleMesh::merge(&[
                cuboid([0.05, 0.0, 0.005], [0.06, 0.012, 0.005]),
                cuboid([-0.045, 0.0, 0.006], [0.03, 0.04, 0.006]),
            ]),
        ),
        ("chips_can", TriangleMesh::cylinder(Vec3::zeros(), 0.038, 0.25, SEGMENTS)),
        (
            "mug",
            TriangleMesh::merge(&[
                TriangleMesh::cylinder(Vec3::zeros(), 0.04, 0.09, SEGMENTS),
                cuboid([0.055, 0.0, 0.045], [0.008, 0.006, 0.028]),
            ]),
        ),
        (
            "mustard",
            TriangleMesh::merge(&[
                cuboid([0.0, 0.0, 0.08], [0.048, 0.03, 0.08]),
                TriangleMesh::cylinder(Vec3::new(0.0, 0.0, 0.162), 0.012, 0.028, SEGMENTS),
            ]),
        ),
        (
            "hammer",
            TriangleMesh::merge(&[
                lying_cylinder(-0.03, 0.014, 0.22),
                cuboid([0.1, 0.0, 0.0175], [0.016, 0.06, 0.0175]),
            ]),
        ),
        ("meat_can", cuboid([0.0, 0.0, 0.042], [0.05, 0.03, 0.042])),
        ("plum", TriangleMesh::sphere(Vec3::new(0.0, 0.0, 0.026), 0.026, 12, SEGMENTS)),
        ("baseball", TriangleMesh::sphere(Vec3::new(0.0, 0.0, 0.037), 0.037, 12, SEGMENTS)),
        (
            "spoon",
            TriangleMesh::merge(&[
                cuboid([-0.03, 0.0, 0.005], [0.06, 0.008, 0.005]),
                cuboid([0.065, 0.0, 0.008], [0.03, 0.02, 0.008]),
            ]),
        ),
        ("large_marker", lying_cylinder(0.0, 0.009, 0.12)),
        (
            "banana",
            TriangleMesh::merge(&[lying_cylinder(-0.02, 0.018, 0.13), lying_cylinder(0.075, 0.01, 0.04)]),
        ),
        ("wood_block", cuboid([0.0, 0.0, 0.1], [0.0425, 0.0425, 0.1])),
    ];

    for (name, mesh) in meshes {
        let path = out.join(format!("{name}.obj"));
        let body = format!("# {name}: generated by examples/author_meshes.rs\n{}", mesh.to_obj());
        std::fs::write(&path, body).expect("write mesh");
        println!("{} ({} triangles)", path.display(), mesh.triangles().len());
    }
}
