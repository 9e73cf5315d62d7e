//! OFF subset: `OFF` header, a counts line (`nv nf ne`, may share the header line),
//! `nv` vertex lines and `nf` triangular face lines. `#` starts a comment.

use std::io::{BufRead, BufReader, Read, Write};

use super::{BoundaryMesh, Vec3};
use crate::error::MeshError;

pub fn load_mesh<R: Read>(source: R) -> Result<BoundaryMesh, MeshError> {
    let reader = BufReader::new(source);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MeshError::Io(e.to_string()))?;
        let content = line.split('#').next().unwrap_or("").trim().to_string();
        if !content.is_empty() {
            lines.push((i + 1, content));
        }
    }
    let mut it = lines.into_iter();

    let (_, header) = it.next().ok_or_else(|| MeshError::MalformedHeader("empty input".into()))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("OFF") {
        return Err(MeshError::MalformedHeader(format!("expected OFF, found {header:?}")));
    }
    let rest: Vec<String> = head.map(str::to_string).collect();
    let (count_line, counts) = if rest.is_empty() {
        let (ln, l) = it.next().ok_or_else(|| MeshError::MalformedHeader("missing counts".into()))?;
        (ln, l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
    } else {
        (1, rest)
    };
    if counts.len() < 2 {
        return Err(MeshError::MalformedHeader("counts line needs vertex and face counts".into()));
    }
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| MeshError::Parse { line: count_line, msg: format!("count {s:?}: {e}") })
    };
    let nv = parse_count(&counts[0])?;
    let nf = parse_count(&counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = it
            .next()
            .ok_or_else(|| MeshError::Parse { line: 0, msg: "unexpected end of vertex list".into() })?;
        let xyz: Result<Vec<f64>, _> = l.split_whitespace().take(3).map(str::parse::<f64>).collect();
        let xyz = xyz.map_err(|e| MeshError::Parse { line: ln, msg: e.to_string() })?;
        if xyz.len() != 3 {
            return Err(MeshError::Parse { line: ln, msg: "vertex needs three coordinates".into() });
        }
        vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut panels = Vec::with_capacity(nf);
    for f in 0..nf {
        let (ln, l) = it
            .next()
            .ok_or_else(|| MeshError::Parse { line: 0, msg: "unexpected end of face list".into() })?;
        let idx: Result<Vec<usize>, _> = l.split_whitespace().map(str::parse::<usize>).collect();
        let idx = idx.map_err(|e| MeshError::Parse { line: ln, msg: e.to_string() })?;
        match idx.as_slice() {
            [3, a, b, c, ..] => panels.push([*a, *b, *c]),
            [k, ..] if *k != 3 => return Err(MeshError::NonTriangularFace(f)),
            _ => return Err(MeshError::Parse { line: ln, msg: "short face line".into() }),
        }
    }
    BoundaryMesh::new(vertices, panels)
}

pub fn save_mesh<W: Write>(mesh: &BoundaryMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertices().len(), mesh.len())?;
    for v in mesh.vertices() {
        // `{:?}` prints the shortest representation that round-trips exactly.
        writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for p in mesh.panels() {
        writeln!(out, "3 {} {} {}", p[0], p[1], p[2])?;
    }
    Ok(())
}
