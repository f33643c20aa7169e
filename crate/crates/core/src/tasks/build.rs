use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{TaskId, TaskSpec};
use super::{Roles, Task};
use crate::contact::MaterialClass;
use crate::dynamics::{ActionLimits, ClampMode, ManipulatorKind, Pose, Scene, SceneBuilder, Simulation};
use crate::energy::MaterialParams;
use crate::error::Result;
use crate::geometry::{build_block, build_shell_mapped, TriShellMesh};

/// Grid spacing of every sheet (m).
const SPACING: f64 = 0.01;
/// Height at which a resting layer is placed above its support: just inside
/// the contact thickness so the contact is active from the first step.
const LAYER: f64 = 0.95e-3;
const PAD_SIZE: [f64; 3] = [0.02, 0.02, 0.006];

fn paper(spec: &TaskSpec) -> MaterialParams {
    MaterialParams { k_b: spec.bending_stiffness, ..MaterialParams::default() }
}

fn block_material() -> MaterialParams {
    MaterialParams { lame_mu: 1e5, lame_lambda: 4e5, density: 500.0, ..MaterialParams::default() }
}

fn pad_material() -> MaterialParams {
    MaterialParams { lame_mu: 3e4, lame_lambda: 1.2e5, density: 1000.0, ..MaterialParams::default() }
}

fn builder(spec: &TaskSpec) -> SceneBuilder {
    let mut b = SceneBuilder::new();
    for (&(a, c), &mu) in &spec.friction {
        b.contact.friction.set(a, c, mu);
    }
    b.limits = ActionLimits::uniform(spec.action_range);
    b
}

/// Horizontal static rectangle `[x0, x1] x [y0, y1]` at height `z`.
fn table(b: &mut SceneBuilder, x: [f64; 2], y: [f64; 2], z: f64) -> Result<usize> {
    let v = vec![
        Vector3::new(x[0], y[0], z),
        Vector3::new(x[1], y[0], z),
        Vector3::new(x[1], y[1], z),
        Vector3::new(x[0], y[1], z),
    ];
    b.add_static("table", v, vec![[0, 1, 2], [0, 2, 3]], MaterialClass::Table)
}

/// A soft pad block with its minimum corner at `origin`. Returns the body
/// and the local indices of its bottom and top vertex layers.
fn pad(b: &mut SceneBuilder, name: &str, origin: Vector3<f64>) -> Result<(usize, Vec<usize>, Vec<usize>)> {
    let mesh = build_block([3, 3, 2], Vector3::from(PAD_SIZE), origin)?;
    let body = b.add_solid(name, mesh, pad_material(), MaterialClass::Manipulator)?;
    Ok((body, (0..9).collect(), (9..18).collect()))
}

/// Single manipulator driving a pad whose bottom face is centred at `at`.
fn pad_on(b: &mut SceneBuilder, name: &str, at: Vector3<f64>) -> Result<()> {
    let origin = at - Vector3::new(PAD_SIZE[0] / 2.0, PAD_SIZE[1] / 2.0, 0.0);
    let (body, _, top) = pad(b, name, origin)?;
    let center = at + Vector3::new(0.0, 0.0, PAD_SIZE[2]);
    b.add_manipulator(name, ManipulatorKind::Single, Pose::at(center), vec![(body, top, 1.0)]);
    Ok(())
}

/// Parallel gripper along `z` pinching a sheet at height `z` around `(x, y)`.
fn gripper(b: &mut SceneBuilder, name: &str, x: f64, y: f64, z: f64) -> Result<()> {
    let (hx, hy, hz) = (PAD_SIZE[0] / 2.0, PAD_SIZE[1] / 2.0, PAD_SIZE[2]);
    let (upper, _, top) = pad(b, &format!("{name}_upper"), Vector3::new(x - hx, y - hy, z + LAYER))?;
    let (lower, bottom, _) = pad(b, &format!("{name}_lower"), Vector3::new(x - hx, y - hy, z - LAYER - hz))?;
    let width = 2.0 * (LAYER + hz);
    let pose = Pose { width, ..Pose::at(Vector3::new(x, y, z)) };
    b.add_manipulator(
        name,
        ManipulatorKind::Gripper { axis: [0.0, 0.0, 1.0] },
        pose,
        vec![(upper, top, 1.0), (lower, bottom, -1.0)],
    );
    Ok(())
}

fn block(b: &mut SceneBuilder, origin: Vector3<f64>, size: Vector3<f64>) -> Result<usize> {
    b.add_solid("block", build_block([3, 3, 3], size, origin)?, block_material(), MaterialClass::Object)
}

fn global(b: &SceneBuilder, body: usize, locals: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let first = b.body(body).first_vertex;
    locals.into_iter().map(|v| first + v).collect()
}

fn all_vertices(b: &SceneBuilder, body: usize) -> Vec<usize> {
    global(b, body, 0..b.body(body).num_vertices())
}

/// Sign of the hinge angles along grid column `c` when the sheet is bent so
/// that the column rises (`mountain`) or sinks relative to its neighbours.
fn column_fold_sign(rows: usize, cols: usize, c: usize, mountain: bool) -> Result<f64> {
    let s = if mountain { -0.3 } else { 0.3 };
    let mesh = build_shell_mapped(rows, cols, 1e-4, |r, cc| {
        let x = cc as f64 * SPACING;
        Vector3::new(x, r as f64 * SPACING, s * (x - c as f64 * SPACING).abs())
    })?;
    let k = column_hinges(&mesh, cols, c)[0];
    Ok(mesh.rest_angles[k].signum())
}

/// Local hinges whose edge lies on grid column `c`.
fn column_hinges(mesh: &TriShellMesh<f64>, cols: usize, c: usize) -> Vec<usize> {
    (0..mesh.hinges.len()).filter(|&k| mesh.hinges[k][0] % cols == c && mesh.hinges[k][1] % cols == c).collect()
}

pub(super) fn build(spec: &TaskSpec) -> Result<Task> {
    spec.validate()?;
    let mut roles = Roles::default();
    let mut fixed_trajectory = Vec::new();
    let mut sign = 1.0;
    let mut oracle = None;
    let n = spec.resolution;
    let mut b = builder(spec);

    match spec.task {
        TaskId::Lifting | TaskId::Separating | TaskId::Following => {
            // sheet on a table, its left end overhanging the table edge
            let rows = (n * 3).div_ceil(5).max(3);
            let x0 = -2.0 * SPACING;
            let z = LAYER;
            let mesh = build_shell_mapped(rows, n, 2e-4, |r, c| Vector3::new(x0 + c as f64 * SPACING, r as f64 * SPACING, z))?;
            let width = (rows - 1) as f64 * SPACING;
            let length = (n - 1) as f64 * SPACING;
            table(&mut b, [0.005, 0.4], [-0.2, 0.2 + width], 0.0)?;
            let sheet = b.add_shell("sheet", mesh, paper(spec), MaterialClass::Cloth)?;
            roles.sheet = all_vertices(&b, sheet);
            let bs = Vector3::new(0.03, 0.03, 0.02);
            let bo = Vector3::new(x0 + length - bs.x - SPACING, width / 2.0 - bs.y / 2.0, z + LAYER);
            let blk = block(&mut b, bo, bs)?;
            roles.block = all_vertices(&b, blk);
            let gx = x0 + SPACING;
            if spec.task == TaskId::Lifting {
                // two pads under the overhang, one on top between them
                let hz = PAD_SIZE[2];
                for (i, y) in [PAD_SIZE[1] / 2.0, width - PAD_SIZE[1] / 2.0].into_iter().enumerate() {
                    let name = format!("bottom{i}");
                    let origin = Vector3::new(gx - PAD_SIZE[0] / 2.0, y - PAD_SIZE[1] / 2.0, z - LAYER - hz);
                    let (body, bottom, _) = pad(&mut b, &name, origin)?;
                    let center = Vector3::new(gx, y, z - LAYER - hz);
                    b.add_manipulator(&name, ManipulatorKind::Single, Pose::at(center), vec![(body, bottom, 1.0)]);
                }
                pad_on(&mut b, "top", Vector3::new(gx, width / 2.0, z + LAYER))?;
                let shift = Vector3::new(-0.01, 0.0, 0.015);
                let scene_x: Vec<Vector3<f64>> = {
                    let tmp = b.clone().build()?;
                    roles.block.iter().map(|&v| tmp.initial.vertex(v)).collect()
                };
                roles.goal_vertices = roles.block.clone();
                roles.goal = scene_x.iter().map(|p| p + shift).collect();
                oracle = Some(0.0);
            } else {
                gripper(&mut b, "gripper", gx, width / 2.0, z)?;
            }
        }
        TaskId::FoldingU | TaskId::FoldingL => {
            let rows = 3;
            let segs = n - 1;
            let mut arc = ((segs as f64) * 0.45).round() as usize;
            if arc % 2 == 0 {
                arc -= 1;
            }
            let bottom = (segs - arc) * 3 / 5 + usize::from((segs - arc) * 3 % 5 != 0);
            let r = arc as f64 * SPACING / std::f64::consts::PI;
            let a = bottom as f64 * SPACING;
            let z0 = LAYER;
            let place = |row: usize, c: usize| {
                let u = c as f64 * SPACING;
                let y = row as f64 * SPACING;
                if c <= bottom {
                    Vector3::new(u, y, z0)
                } else if c <= bottom + arc {
                    let phi = (u - a) / r;
                    Vector3::new(a + r * phi.sin(), y, z0 + r * (1.0 - phi.cos()))
                } else {
                    Vector3::new(a - (u - a - std::f64::consts::PI * r), y, z0 + 2.0 * r)
                }
            };
            let mesh = build_shell_mapped(rows, n, 2e-4, place)?;
            let zc = z0 + r;
            let mut upper = Vec::new();
            let mut lower = Vec::new();
            for (k, h) in mesh.hinges.iter().enumerate() {
                let zm = 0.5 * (mesh.vertices[h[0]].z + mesh.vertices[h[1]].z);
                if zm > zc + 1e-9 {
                    upper.push(k);
                } else if zm < zc - 1e-9 {
                    lower.push(k);
                }
            }
            let total: f64 = upper.iter().chain(&lower).map(|&k| mesh.rest_angles[k]).sum();
            sign = total.signum();
            oracle = Some(total.abs());
            table(&mut b, [-0.1, 0.3], [-0.1, 0.1], 0.0)?;
            let sheet = b.add_shell("strip", mesh, paper(spec), MaterialClass::Cloth)?;
            for row in 0..rows {
                b.fix(sheet, row * n);
            }
            let first_hinge = b.body(sheet).first_hinge;
            roles.upper = upper.into_iter().map(|k| k + first_hinge).collect();
            roles.lower = lower.into_iter().map(|k| k + first_hinge).collect();
            roles.sheet = all_vertices(&b, sheet);
            let top_len = (segs - bottom - arc) as f64 * SPACING;
            let at = Vector3::new(a - top_len / 2.0, SPACING, z0 + 2.0 * r + LAYER);
            pad_on(&mut b, "hand", at)?;
        }
        TaskId::PickFolding => {
            let rows = (n * 3).div_ceil(5).max(3);
            let cols = if n % 2 == 1 { n } else { n + 1 };
            let half = (cols - 1) as f64 * SPACING / 2.0;
            let width = (rows - 1) as f64 * SPACING;
            // arched table: a smooth bump under the middle of the sheet
            let arch = |x: f64| 0.01 * (-(x / 0.02).powi(2)).exp();
            let k = 25;
            let mut verts = Vec::new();
            for i in 0..k {
                let x = -0.15 + 0.3 * i as f64 / (k - 1) as f64;
                verts.push(Vector3::new(x, -0.05, arch(x)));
                verts.push(Vector3::new(x, 0.05 + width, arch(x)));
            }
            let tris = (0..k - 1).flat_map(|i| [[2 * i, 2 * i + 2, 2 * i + 3], [2 * i, 2 * i + 3, 2 * i + 1]]).collect();
            b.add_static("arched_table", verts, tris, MaterialClass::Table)?;
            let z = arch(0.0) + LAYER;
            let mesh = build_shell_mapped(rows, cols, 2e-4, |r, c| Vector3::new(c as f64 * SPACING - half, r as f64 * SPACING, z))?;
            let mid = column_hinges(&mesh, cols, cols / 2);
            sign = column_fold_sign(rows, cols, cols / 2, false)?;
            oracle = Some(std::f64::consts::PI * mid.len() as f64);
            let sheet = b.add_shell("sheet", mesh, paper(spec), MaterialClass::Cloth)?;
            let first_hinge = b.body(sheet).first_hinge;
            roles.middle = mid.into_iter().map(|k| k + first_hinge).collect();
            roles.sheet = all_vertices(&b, sheet);
            for (name, x) in [("left", -half + SPACING), ("right", half - SPACING)] {
                gripper(&mut b, name, x, width / 2.0, z)?;
            }
        }
        TaskId::Forming => {
            let length = (n - 1) as f64 * SPACING;
            let mesh = build_shell_mapped(n, n, 2e-4, |r, c| {
                let u = c as f64 * SPACING;
                Vector3::new(u, r as f64 * SPACING, LAYER + 0.01 * (std::f64::consts::PI * u / length).sin())
            })?;
            table(&mut b, [-0.1, length + 0.1], [-0.1, length + 0.1], 0.0)?;
            let sheet = b.add_shell("sheet", mesh, paper(spec), MaterialClass::Cloth)?;
            for r in 0..n {
                b.fix(sheet, r * n);
            }
            roles.sheet = all_vertices(&b, sheet);
            pad_on(&mut b, "hand", Vector3::new(length / 2.0, length / 2.0, LAYER + 0.01 + LAYER))?;
            roles.goal_vertices = roles.sheet.clone();
            oracle = Some(0.0);
        }
        TaskId::Sliding => {
            let size = (n - 1) as f64 * SPACING;
            table(&mut b, [-0.2, 0.2 + size], [-0.2, 0.2 + size], 0.0)?;
            for layer in 0..3 {
                let z = LAYER * (layer + 1) as f64;
                let mesh = build_shell_mapped(n, n, 2e-4, |r, c| Vector3::new(c as f64 * SPACING, r as f64 * SPACING, z))?;
                let s = b.add_shell(&format!("sheet{layer}"), mesh, paper(spec), MaterialClass::Cloth)?;
                if layer == 0 {
                    roles.sheet = all_vertices(&b, s);
                }
            }
            pad_on(&mut b, "hand", Vector3::new(size / 2.0, size / 2.0, 4.0 * LAYER))?;
            let r = spec.action_range;
            fixed_trajectory = (0..spec.horizon)
                .map(|t| if t < 4 { vec![0.0, 0.0, -0.25 * r, 0.0, 0.0, 0.0] } else { vec![-r, 0.0, 0.0, 0.0, 0.0, 0.0] })
                .collect();
        }
        TaskId::Bouncing => {
            let rows = (n / 2).max(3);
            let length = (n - 1) as f64 * SPACING;
            table(&mut b, [-0.2, length + 0.2], [-0.2, 0.2], 0.0)?;
            let mesh = build_shell_mapped(rows, n, 2e-4, |r, c| Vector3::new(c as f64 * SPACING, r as f64 * SPACING, LAYER))?;
            let creases = [n / 3, n - 1 - n / 3];
            let mut crease_hinges = Vec::new();
            for &c in &creases {
                let s = column_fold_sign(rows, n, c, true)?;
                crease_hinges.extend(column_hinges(&mesh, n, c).into_iter().map(|k| (k, s)));
            }
            // creases are elastic here: the yield angle is out of reach
            let material = MaterialParams { yield_angle: std::f64::consts::PI, ..paper(spec) };
            let sheet = b.add_shell("sheet", mesh, material, MaterialClass::Cloth)?;
            let first_hinge = b.body(sheet).first_hinge;
            roles.crease_hinges = crease_hinges.into_iter().map(|(k, s)| (k + first_hinge, s)).collect();
            roles.sheet = all_vertices(&b, sheet);
            roles.crease_points = global(&b, sheet, (0..rows).flat_map(|r| creases.map(|c| r * n + c)));
            fixed_trajectory = vec![Vec::new(); spec.horizon];
        }
        TaskId::Card => {
            let rows = (n * 3).div_ceil(5).max(3);
            let length = (n - 1) as f64 * SPACING;
            let width = (rows - 1) as f64 * SPACING;
            table(&mut b, [-0.3, length + 0.2], [-0.2, 0.2 + width], 0.0)?;
            let mesh = build_shell_mapped(rows, n, 2e-4, |r, c| Vector3::new(c as f64 * SPACING, r as f64 * SPACING, LAYER))?;
            let sheet = b.add_shell("card", mesh, paper(spec), MaterialClass::Cloth)?;
            roles.sheet = all_vertices(&b, sheet);
            let top = 2.0 * LAYER;
            pad_on(&mut b, "left", Vector3::new(SPACING, width / 2.0, top))?;
            pad_on(&mut b, "middle", Vector3::new(length / 2.0, width / 2.0, top + 0.004))?;
            pad_on(&mut b, "right", Vector3::new(length - SPACING, width / 2.0, top))?;
            fixed_trajectory = card_shuffle(spec.horizon, spec.action_range);
        }
    }

    let mut scene = b.build()?;
    if spec.task == TaskId::Bouncing {
        for &(k, s) in &roles.crease_hinges {
            scene.initial.rest_angles[k] = s * 1.0;
        }
    }
    if spec.task == TaskId::Forming {
        roles.goal = forming_goal(&scene, spec, &roles)?;
    }
    Ok(Task::assemble(spec.clone(), scene, roles, fixed_trajectory, sign, oracle))
}

/// Press both end pads, push the right end inwards so the card bows, lift
/// the middle pad out of the way, then release the left end.
fn card_shuffle(horizon: usize, r: f64) -> Vec<Vec<f64>> {
    (0..horizon)
        .map(|t| {
            let mut a = vec![0.0; 18];
            if t < 2 {
                a[2] = -0.25 * r;
                a[14] = -0.25 * r;
            } else {
                a[12] = -r;
                a[8] = 0.5 * r;
                if 3 * t >= 2 * horizon {
                    a[2] = r;
                }
            }
            a
        })
        .collect()
}

/// Final sheet positions after a seeded random trajectory: a random
/// downward drift of the pad plus per-step noise, so the goal shape differs
/// clearly from the initial one.
fn forming_goal(scene: &Scene, spec: &TaskSpec, roles: &Roles) -> Result<Vec<Vector3<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.goal_seed);
    let mut sim = Simulation::new(scene);
    sim.record = false;
    let r = spec.action_range;
    let drift = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.6..-0.2)];
    for _ in 0..spec.goal_steps {
        let a: Vec<f64> =
            (0..scene.action_len()).map(|i| if i < 3 { r * (drift[i] + rng.gen_range(-0.25..0.25)) } else { 0.0 }).collect();
        sim.step(&a, ClampMode::Clamp)?;
    }
    Ok(roles.goal_vertices.iter().map(|&v| sim.state.vertex(v)).collect())
}
