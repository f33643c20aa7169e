use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use shellsim::dynamics::{BodyKind, Scene};
use shellsim::geometry::{write_obj, SceneState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance lines written as `#` comments at the top of every output file.
#[derive(Debug, Clone)]
pub struct Meta {
    pub command: &'static str,
    pub config_hash: String,
    pub task: String,
}

impl Meta {
    pub fn lines(&self, extra: &[String]) -> Vec<String> {
        let mut v = vec![
            format!("shellsim {VERSION}"),
            format!("command {}", self.command),
            format!("task {}", self.task),
            format!("config sha256:{}", self.config_hash),
        ];
        v.extend_from_slice(extra);
        v
    }

    pub fn header(&self, extra: &[String]) -> String {
        self.lines(extra).iter().map(|l| format!("# {l}\n")).collect()
    }
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Trajectory text format: `#` comment lines, then `rows cols h`, then one
/// row of space-separated actions per step.
pub fn trajectory_text(meta: &Meta, trajectory: &[Vec<f64>], h: f64) -> String {
    let cols = trajectory.first().map_or(0, Vec::len);
    let mut s = meta.header(&[]);
    writeln!(s, "{} {} {h:e}", trajectory.len(), cols).unwrap();
    for row in trajectory {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
    s
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head: Vec<&str> = lines.next().context("empty trajectory file")?.split_whitespace().collect();
    if head.len() != 3 {
        bail!("{}: first line must be `rows cols h`", path.display());
    }
    let rows: usize = head[0].parse().context("rows")?;
    let cols: usize = head[1].parse().context("cols")?;
    let out: Vec<Vec<f64>> = lines
        .map(|l| l.split_whitespace().map(|c| c.parse::<f64>().with_context(|| format!("bad number `{c}`"))).collect())
        .collect::<Result<_>>()?;
    if out.len() != rows || out.iter().any(|r| r.len() != cols) {
        bail!("{}: expected {rows} rows of {cols} values", path.display());
    }
    Ok(out)
}

/// One OBJ per non-static body: `<dir>/<body>_<step>.obj`.
pub fn write_frames(dir: &Path, scene: &Scene, state: &SceneState, step: usize, meta: &Meta) -> Result<()> {
    fs::create_dir_all(dir)?;
    for body in &scene.bodies {
        if matches!(body.kind, BodyKind::Static { .. }) {
            continue;
        }
        let verts: Vec<_> = (0..body.num_vertices()).map(|i| state.vertex(body.first_vertex + i)).collect();
        let path = dir.join(format!("{}_{step:04}.obj", body.name));
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let header = meta.lines(&[format!("body {}", body.name), format!("step {step}")]);
        write_obj(std::io::BufWriter::new(file), &header, &verts, body.surface_triangles())?;
    }
    Ok(())
}
