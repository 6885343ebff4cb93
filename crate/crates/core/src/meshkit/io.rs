//! Plain-text mesh format:
//!
//! ```text
//! vertices N triangles M
//! x y boundary_flag        (N lines)
//! v0 v1 v2 ref_edge        (M lines, 0-based ids)
//! ```

use std::io::{BufRead, Write};

use super::{Mesh, Triangle};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    writeln!(out, "vertices {} triangles {}", mesh.num_vertices(), mesh.num_triangles())?;
    for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_flags()) {
        writeln!(out, "{:.16e} {:.16e} {}", p[0], p[1], u8::from(b))?;
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        writeln!(out, "{a} {b} {c} {}", t.ref_edge)?;
    }
    Ok(())
}

/// Reads a mesh and rejects it unless it is conforming and positively
/// oriented.
pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let bad = |line: usize, message: &str| Error::MeshFormat {
        line,
        message: message.to_string(),
    };

    let (line, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let header = header?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (nv, nt) = match tokens.as_slice() {
        ["vertices", nv, "triangles", nt] => (
            nv.parse::<usize>().map_err(|_| bad(line, "bad vertex count"))?,
            nt.parse::<usize>().map_err(|_| bad(line, "bad triangle count"))?,
        ),
        _ => return Err(bad(line, "expected 'vertices N triangles M'")),
    };

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, text) = lines.next().ok_or_else(|| bad(0, "missing vertex line"))?;
        let text = text?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let [x, y, flag] = tokens.as_slice() else {
            return Err(bad(line, "expected 'x y boundary_flag'"));
        };
        let x: f64 = x.parse().map_err(|_| bad(line, "bad x coordinate"))?;
        let y: f64 = y.parse().map_err(|_| bad(line, "bad y coordinate"))?;
        let flag = match *flag {
            "0" | "false" => false,
            "1" | "true" => true,
            _ => return Err(bad(line, "boundary flag must be 0 or 1")),
        };
        vertices.push([x, y]);
        boundary.push(flag);
    }

    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, text) = lines.next().ok_or_else(|| bad(0, "missing triangle line"))?;
        let text = text?;
        let ids: Vec<usize> = text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(line, "triangle entries must be non-negative integers"))?;
        let [a, b, c, r] = ids.as_slice() else {
            return Err(bad(line, "expected 'v0 v1 v2 ref_edge'"));
        };
        if *r > 2 {
            return Err(bad(line, "reference edge must be 0, 1 or 2"));
        }
        triangles.push(Triangle::new([*a, *b, *c], *r as u8));
    }
    if let Some((line, _)) = lines.next() {
        return Err(bad(line, "trailing content"));
    }
    Mesh::new(vertices, boundary, triangles)
}
