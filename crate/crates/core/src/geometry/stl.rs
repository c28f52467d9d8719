//! STL reading and writing, binary and ASCII.
//!
//! Detection rule: a file is ASCII iff it begins with `solid` and parses as
//! ASCII; everything else is treated as binary. Vertices are deduplicated by
//! exact coordinate equality on load, and the triangle count is preserved.

use std::collections::HashMap;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlFormat {
    Ascii,
    Binary,
}

pub fn read_stl(bytes: &[u8]) -> Result<TriMesh> {
    if bytes.starts_with(b"solid") {
        match parse_ascii(bytes) {
            Ok(mesh) => return Ok(mesh),
            Err(ascii_err) => {
                // Binary files are allowed to start with "solid" in the
                // header; fall through unless binary also fails.
                if let Ok(mesh) = parse_binary(bytes) {
                    return Ok(mesh);
                }
                return Err(ascii_err);
            }
        }
    }
    parse_binary(bytes)
}

pub fn write_stl(mesh: &TriMesh, format: StlFormat) -> Vec<u8> {
    match format {
        StlFormat::Binary => write_binary(mesh),
        StlFormat::Ascii => write_ascii(mesh),
    }
}

/// Which format [`read_stl`] would parse these bytes as.
pub fn detect_format(bytes: &[u8]) -> StlFormat {
    if bytes.starts_with(b"solid") && parse_ascii(bytes).is_ok() {
        StlFormat::Ascii
    } else {
        StlFormat::Binary
    }
}

/// Exact-equality dedup key; -0.0 is folded onto +0.0 so equal coordinates
/// always share a key.
fn coord_key(p: &Point3<f64>) -> [u64; 3] {
    let norm = |x: f64| if x == 0.0 { 0.0f64 } else { x };
    [
        norm(p.x).to_bits(),
        norm(p.y).to_bits(),
        norm(p.z).to_bits(),
    ]
}

struct MeshBuilder {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    index: HashMap<[u64; 3], usize>,
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            triangles: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn add_triangle(&mut self, corners: [Point3<f64>; 3]) {
        let mut tri = [0usize; 3];
        for (slot, p) in tri.iter_mut().zip(corners) {
            let next = self.vertices.len();
            *slot = *self.index.entry(coord_key(&p)).or_insert_with(|| {
                self.vertices.push(p);
                next
            });
        }
        self.triangles.push(tri);
    }

    fn finish(self) -> Result<TriMesh> {
        TriMesh::new(self.vertices, self.triangles)
    }
}

fn parse_binary(bytes: &[u8]) -> Result<TriMesh> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::parse(
            format!(
                "binary STL needs at least {} bytes, found {}",
                HEADER_LEN + 4,
                bytes.len()
            ),
            None,
        ));
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let needed = HEADER_LEN + 4 + count * RECORD_LEN;
    if bytes.len() < needed {
        return Err(Error::parse(
            format!(
                "binary STL declares {count} triangles ({needed} bytes) but file has {} bytes",
                bytes.len()
            ),
            None,
        ));
    }
    let mut builder = MeshBuilder::new();
    for t in 0..count {
        let rec = &bytes[HEADER_LEN + 4 + t * RECORD_LEN..];
        let f = |off: usize| f32::from_le_bytes(rec[off..off + 4].try_into().unwrap()) as f64;
        // Bytes 0..12 hold the stored normal; it is recomputed on demand.
        let corners = [
            Point3::new(f(12), f(16), f(20)),
            Point3::new(f(24), f(28), f(32)),
            Point3::new(f(36), f(40), f(44)),
        ];
        builder.add_triangle(corners);
    }
    builder.finish()
}

fn parse_ascii(bytes: &[u8]) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::parse("ASCII STL contains invalid UTF-8", None))?;
    let mut builder = MeshBuilder::new();
    let mut corners: Vec<Point3<f64>> = Vec::with_capacity(3);
    let mut in_solid = false;
    let mut closed = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tokens = raw.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "solid" => {
                if in_solid {
                    return Err(Error::parse("nested 'solid'", Some(line)));
                }
                in_solid = true;
                closed = false;
            }
            "endsolid" => {
                if !in_solid {
                    return Err(Error::parse("'endsolid' without 'solid'", Some(line)));
                }
                in_solid = false;
                closed = true;
            }
            "facet" => {
                if !in_solid {
                    return Err(Error::parse("'facet' outside 'solid'", Some(line)));
                }
                if tokens.next() != Some("normal") {
                    return Err(Error::parse("expected 'facet normal'", Some(line)));
                }
                // Stored normal values are parsed for validity and dropped.
                for _ in 0..3 {
                    parse_coord(tokens.next(), line)?;
                }
                corners.clear();
            }
            "outer" => {
                if tokens.next() != Some("loop") {
                    return Err(Error::parse("expected 'outer loop'", Some(line)));
                }
            }
            "vertex" => {
                let x = parse_coord(tokens.next(), line)?;
                let y = parse_coord(tokens.next(), line)?;
                let z = parse_coord(tokens.next(), line)?;
                if corners.len() == 3 {
                    return Err(Error::parse("more than 3 vertices in a facet", Some(line)));
                }
                corners.push(Point3::new(x, y, z));
            }
            "endloop" => {}
            "endfacet" => {
                if corners.len() != 3 {
                    return Err(Error::parse(
                        format!("facet has {} vertices, expected 3", corners.len()),
                        Some(line),
                    ));
                }
                builder.add_triangle([corners[0], corners[1], corners[2]]);
            }
            other => {
                return Err(Error::parse(format!("unexpected token {other:?}"), Some(line)));
            }
        }
    }
    if in_solid || !closed {
        return Err(Error::parse("missing 'endsolid'", None));
    }
    builder.finish()
}

fn parse_coord(token: Option<&str>, line: usize) -> Result<f64> {
    let tok = token.ok_or_else(|| Error::parse("missing coordinate", Some(line)))?;
    let v: f32 = tok
        .parse()
        .map_err(|_| Error::parse(format!("invalid coordinate {tok:?}"), Some(line)))?;
    Ok(v as f64)
}

fn write_binary(mesh: &TriMesh) -> Vec<u8> {
    let mut header = format!("morpipe {} binary STL", env!("CARGO_PKG_VERSION")).into_bytes();
    header.resize(HEADER_LEN, b' ');

    let count = mesh.triangle_count();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + count * RECORD_LEN);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(count as u32).to_le_bytes());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let n = mesh.facet_normal(t);
        for i in 0..3 {
            out.extend_from_slice(&(n[i] as f32).to_le_bytes());
        }
        for &vi in tri {
            let p = mesh.vertices[vi];
            for i in 0..3 {
                out.extend_from_slice(&(p[i] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

fn write_ascii(mesh: &TriMesh) -> Vec<u8> {
    // f32 values printed with Rust's shortest round-trip formatting, so a
    // read-back reproduces the binary-identical coordinates.
    let fm = |x: f64| format!("{}", x as f32);
    let mut out = String::from("solid morpipe\n");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let n = mesh.facet_normal(t);
        out.push_str(&format!(
            "  facet normal {} {} {}\n    outer loop\n",
            fm(n.x),
            fm(n.y),
            fm(n.z)
        ));
        for &vi in tri {
            let p = mesh.vertices[vi];
            out.push_str(&format!(
                "      vertex {} {} {}\n",
                fm(p.x),
                fm(p.y),
                fm(p.z)
            ));
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    out.push_str("endsolid morpipe\n");
    out.into_bytes()
}
