//! Triangulated surface geometry and the free-form deformation map.

mod ffd;
mod stl;

pub use ffd::{bernstein, deform_mesh, ffd_map, FfdLattice, LatticeConfig};
pub use stl::{detect_format, read_stl, write_stl, StlFormat};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Triangulated surface. Facet normals are recomputed from the vertex
/// coordinates whenever they are needed.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let v = self.vertices.len();
        let mut degenerate = 0usize;
        for (t, tri) in self.triangles.iter().enumerate() {
            for &idx in tri {
                if idx >= v {
                    return Err(Error::invalid_input(format!(
                        "triangle {t} references vertex {idx}, mesh has {v} vertices"
                    )));
                }
            }
            if self.facet_area(t) == 0.0 {
                degenerate += 1;
            }
        }
        if degenerate > 0 {
            log::warn!("mesh contains {degenerate} zero-area triangles");
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn facet_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let ab = self.vertices[b] - self.vertices[a];
        let ac = self.vertices[c] - self.vertices[a];
        0.5 * ab.cross(&ac).norm()
    }

    /// Unit facet normal, or the zero vector for a degenerate triangle.
    pub fn facet_normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let ab = self.vertices[b] - self.vertices[a];
        let ac = self.vertices[c] - self.vertices[a];
        let n = ab.cross(&ac);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn bounding_box(&self) -> Option<(Point3<f64>, Point3<f64>)> {
        let first = *self.vertices.first()?;
        let mut min = first;
        let mut max = first;
        for v in &self.vertices {
            for i in 0..3 {
                min[i] = min[i].min(v[i]);
                max[i] = max[i].max(v[i]);
            }
        }
        Some((min, max))
    }
}

/// UV sphere used by tests and examples; `rings * segments + 2` vertices.
pub fn uv_sphere(center: Point3<f64>, radius: f64, rings: usize, segments: usize) -> TriMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = Vec::with_capacity(rings * segments + 2);
    vertices.push(center + Vector3::new(0.0, 0.0, radius));
    for ring in 1..=rings {
        let theta = std::f64::consts::PI * ring as f64 / (rings + 1) as f64;
        for seg in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * seg as f64 / segments as f64;
            vertices.push(
                center
                    + Vector3::new(
                        radius * theta.sin() * phi.cos(),
                        radius * theta.sin() * phi.sin(),
                        radius * theta.cos(),
                    ),
            );
        }
    }
    vertices.push(center + Vector3::new(0.0, 0.0, -radius));
    let south = vertices.len() - 1;

    let idx = |ring: usize, seg: usize| 1 + (ring - 1) * segments + (seg % segments);
    let mut triangles = Vec::new();
    for seg in 0..segments {
        triangles.push([0, idx(1, seg), idx(1, seg + 1)]);
    }
    for ring in 1..rings {
        for seg in 0..segments {
            let a = idx(ring, seg);
            let b = idx(ring, seg + 1);
            let c = idx(ring + 1, seg);
            let d = idx(ring + 1, seg + 1);
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for seg in 0..segments {
        triangles.push([south, idx(rings, seg + 1), idx(rings, seg)]);
    }
    TriMesh {
        vertices,
        triangles,
    }
}
