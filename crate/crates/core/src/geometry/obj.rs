//! Wavefront OBJ import/export for triangle surfaces.

use std::io::{BufRead, Write};

use nalgebra::Vector3;

use crate::error::{Result, SimError};

/// Reads vertices and faces. Polygons are fan-triangulated; texture and
/// normal indices are ignored; negative (relative) indices are supported.
pub fn read_obj<R: BufRead>(reader: R) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| SimError::Obj { line: lineno + 1, message: e.to_string() })?;
                if coords.len() != 3 {
                    return Err(SimError::Obj { line: lineno + 1, message: "vertex needs 3 coordinates".into() });
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in parts {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| SimError::Obj { line: lineno + 1, message: format!("bad index `{tok}`") })?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(SimError::Obj { line: lineno + 1, message: format!("index {i} out of range") });
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(SimError::Obj { line: lineno + 1, message: "face needs 3 vertices".into() });
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

/// Writes a triangle surface; `header` lines are emitted as `#` comments.
pub fn write_obj<W: Write>(
    mut w: W,
    header: &[String],
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
) -> Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    for v in vertices {
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for t in triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
