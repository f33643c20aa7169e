use nalgebra::Vector3;
use shellsim::contact::MaterialClass;
use shellsim::dynamics::{ManipulatorKind, Pose, Scene, SceneBuilder};
use shellsim::energy::MaterialParams;
use shellsim::geometry::{build_block, build_shell, build_shell_mapped, GridSpec};

pub fn paper() -> MaterialParams {
    MaterialParams::default()
}

/// Square static floor at height `z` spanning `[-l, l]^2`.
pub fn floor(b: &mut SceneBuilder, l: f64, z: f64) -> usize {
    let v = vec![
        Vector3::new(-l, -l, z),
        Vector3::new(l, -l, z),
        Vector3::new(l, l, z),
        Vector3::new(-l, l, z),
    ];
    b.add_static("floor", v, vec![[0, 1, 2], [0, 2, 3]], MaterialClass::Table).unwrap()
}

/// Flat free sheet of `n x n` vertices and `size` metres at height `z`.
pub fn sheet(b: &mut SceneBuilder, n: usize, size: f64, z: f64) -> usize {
    let s = size / (n - 1) as f64;
    let mesh = build_shell_mapped(n, n, 2e-4, |r, c| Vector3::new(c as f64 * s - size / 2.0, r as f64 * s - size / 2.0, z))
        .unwrap();
    b.add_shell("sheet", mesh, paper(), MaterialClass::Cloth).unwrap()
}

/// Vertical sheet in the `xz` plane hanging from its fixed top row.
pub fn hanging_sheet(n: usize, size: f64) -> Scene {
    let mut b = SceneBuilder::new();
    let s = size / (n - 1) as f64;
    let mesh = build_shell_mapped(n, n, 2e-4, |r, c| Vector3::new(c as f64 * s, 0.0, -(r as f64) * s)).unwrap();
    let body = b.add_shell("sheet", mesh, paper(), MaterialClass::Cloth).unwrap();
    for c in 0..n {
        b.fix(body, c);
    }
    b.build().unwrap()
}

/// Sheet on a floor with a soft pad block `gap` above its center; the
/// pad's top layer is attached to a single manipulator.
pub fn pad_over_sheet(gap: f64) -> Scene {
    let mut b = SceneBuilder::new();
    floor(&mut b, 0.2, 0.0);
    sheet(&mut b, 9, 0.08, 0.5e-3);
    let size = Vector3::new(0.02, 0.02, 0.006);
    let origin = Vector3::new(-0.01, -0.01, 0.5e-3 + gap);
    let block = build_block([3, 3, 2], size, origin).unwrap();
    let top: Vec<usize> = (9..18).collect();
    let pad = b.add_solid("pad", block, pad_material(), MaterialClass::Manipulator).unwrap();
    let center = origin + size.component_mul(&Vector3::new(0.5, 0.5, 1.0));
    b.add_manipulator("hand", ManipulatorKind::Single, Pose::at(center), vec![(pad, top, 1.0)]);
    b.contact.friction.set(MaterialClass::Cloth, MaterialClass::Table, 0.5);
    b.contact.friction.set(MaterialClass::Cloth, MaterialClass::Manipulator, 5.0);
    b.build().unwrap()
}

pub fn pad_material() -> MaterialParams {
    MaterialParams { lame_mu: 3e4, lame_lambda: 1.2e5, density: 1000.0, ..MaterialParams::default() }
}

/// Single free sheet in space, no contact partners.
pub fn floating_sheet(n: usize) -> Scene {
    let mut b = SceneBuilder::new();
    let mesh = build_shell(GridSpec { rows: n, cols: n, spacing: 0.01 }, 2e-4).unwrap();
    b.add_shell("sheet", mesh, paper(), MaterialClass::Cloth).unwrap();
    b.build().unwrap()
}

/// Free sheet with every stiffness set to zero.
pub fn limp_sheet(n: usize) -> Scene {
    let mut b = SceneBuilder::new();
    let mesh = build_shell(GridSpec { rows: n, cols: n, spacing: 0.01 }, 2e-4).unwrap();
    let m = MaterialParams { k_e: 0.0, k_a: 0.0, k_b: 0.0, ..paper() };
    b.add_shell("sheet", mesh, m, MaterialClass::Cloth).unwrap();
    b.build().unwrap()
}

/// Soft block resting on a floor with a pad `gap` above it.
pub fn pad_over_block(gap: f64) -> Scene {
    let mut b = SceneBuilder::new();
    floor(&mut b, 0.2, 0.0);
    let block = build_block([3, 3, 3], Vector3::new(0.03, 0.03, 0.01), Vector3::new(-0.015, -0.015, 0.5e-3)).unwrap();
    let soft = MaterialParams { lame_mu: 2e4, lame_lambda: 5e4, density: 500.0, ..paper() };
    b.add_solid("block", block, soft, MaterialClass::Object).unwrap();
    let size = Vector3::new(0.02, 0.02, 0.006);
    let origin = Vector3::new(-0.01, -0.01, 10.5e-3 + gap);
    let pad = b.add_solid("pad", build_block([3, 3, 2], size, origin).unwrap(), pad_material(), MaterialClass::Manipulator).unwrap();
    let center = origin + size.component_mul(&Vector3::new(0.5, 0.5, 1.0));
    b.add_manipulator("hand", ManipulatorKind::Single, Pose::at(center), vec![(pad, (9..18).collect(), 1.0)]);
    b.contact.friction.set(MaterialClass::Object, MaterialClass::Table, 0.3);
    b.contact.friction.set(MaterialClass::Object, MaterialClass::Manipulator, 2.0);
    b.build().unwrap()
}

/// Free sheet laid on a floor, inside the contact band.
pub fn resting_sheet(n: usize, size: f64) -> Scene {
    let mut b = SceneBuilder::new();
    floor(&mut b, 0.2, 0.0);
    sheet(&mut b, n, size, 0.5e-3);
    b.contact.friction.set(MaterialClass::Cloth, MaterialClass::Table, 0.5);
    b.build().unwrap()
}
