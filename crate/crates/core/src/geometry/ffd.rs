//! Free-form deformation of points and meshes.
//!
//! The deformation composes three maps: an affine map from the physical
//! axis-aligned box onto the reference cube [0,1]^3, a trivariate Bernstein
//! interpolation of displaced control points inside the cube, and the affine
//! map back to physical coordinates. Points outside the box are untouched.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriMesh;
use crate::error::{Error, Result};

/// Control-point lattice over an axis-aligned reference box.
///
/// `dims` counts control points per axis (at least 2 each); control point
/// `(l, m, n)` sits at `(l/L, m/M, n/N)` in reference coordinates, and its
/// displacement is expressed in reference-box coordinates as well.
#[derive(Debug, Clone, PartialEq)]
pub struct FfdLattice {
    origin: Point3<f64>,
    lengths: Vector3<f64>,
    dims: [usize; 3],
    displacements: Vec<Vector3<f64>>,
}

impl FfdLattice {
    pub fn new(origin: Point3<f64>, lengths: Vector3<f64>, dims: [usize; 3]) -> Result<Self> {
        if !(lengths.iter().all(|l| l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid_argument(format!(
                "axis lengths must be positive, got {:?}",
                lengths.as_slice()
            )));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid_argument(format!(
                "lattice needs at least 2 control points per axis, got {dims:?}"
            )));
        }
        Ok(FfdLattice {
            origin,
            lengths,
            dims,
            displacements: vec![Vector3::zeros(); dims[0] * dims[1] * dims[2]],
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn lengths(&self) -> Vector3<f64> {
        self.lengths
    }

    fn index(&self, l: usize, m: usize, n: usize) -> usize {
        (l * self.dims[1] + m) * self.dims[2] + n
    }

    pub fn displacement(&self, l: usize, m: usize, n: usize) -> Vector3<f64> {
        self.displacements[self.index(l, m, n)]
    }

    /// Sets the reference-coordinate displacement of control point (l, m, n).
    pub fn set_displacement(
        &mut self,
        l: usize,
        m: usize,
        n: usize,
        d: Vector3<f64>,
    ) -> Result<()> {
        if l >= self.dims[0] || m >= self.dims[1] || n >= self.dims[2] {
            return Err(Error::invalid_argument(format!(
                "control point ({l}, {m}, {n}) outside lattice dims {:?}",
                self.dims
            )));
        }
        let idx = self.index(l, m, n);
        self.displacements[idx] = d;
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.displacements.iter().all(|d| *d == Vector3::zeros())
    }

    /// True when any control point on the boundary layer of the lattice is
    /// displaced; deforming through such a lattice can break C0 continuity at
    /// the box boundary.
    pub fn boundary_displaced(&self) -> bool {
        let [dl, dm, dn] = self.dims;
        for l in 0..dl {
            for m in 0..dm {
                for n in 0..dn {
                    let on_boundary = l == 0
                        || l == dl - 1
                        || m == 0
                        || m == dm - 1
                        || n == 0
                        || n == dn - 1;
                    if on_boundary && self.displacement(l, m, n) != Vector3::zeros() {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Physical -> reference coordinates.
    fn to_reference(&self, p: &Point3<f64>) -> Vector3<f64> {
        Vector3::new(
            (p.x - self.origin.x) / self.lengths.x,
            (p.y - self.origin.y) / self.lengths.y,
            (p.z - self.origin.z) / self.lengths.z,
        )
    }

    /// Reference -> physical coordinates.
    fn to_physical(&self, q: &Vector3<f64>) -> Point3<f64> {
        Point3::new(
            self.origin.x + q.x * self.lengths.x,
            self.origin.y + q.y * self.lengths.y,
            self.origin.z + q.z * self.lengths.z,
        )
    }
}

/// Bernstein basis polynomial B(i, n; s) = C(n, i) s^i (1-s)^(n-i).
pub fn bernstein(i: usize, n: usize, s: f64) -> Result<f64> {
    if i > n {
        return Err(Error::invalid_argument(format!(
            "bernstein index {i} exceeds degree {n}"
        )));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid_argument(format!(
            "bernstein parameter {s} outside [0, 1]"
        )));
    }
    Ok(bernstein_unchecked(i, n, s))
}

fn bernstein_unchecked(i: usize, n: usize, s: f64) -> f64 {
    binomial(n, i) * s.powi(i as i32) * (1.0 - s).powi((n - i) as i32)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Per-axis Bernstein weights for a reference coordinate.
fn axis_weights(count: usize, s: f64) -> Vec<f64> {
    let degree = count - 1;
    (0..count).map(|i| bernstein_unchecked(i, degree, s)).collect()
}

/// Applies the free-form deformation map to a single point.
///
/// Points whose reference image falls outside [0,1]^3 are returned unchanged
/// (bitwise); with an undisplaced lattice the map is the identity everywhere.
pub fn ffd_map(p: &Point3<f64>, lattice: &FfdLattice) -> Point3<f64> {
    if lattice.is_identity() {
        return *p;
    }
    let s = lattice.to_reference(p);
    if !(0.0..=1.0).contains(&s.x) || !(0.0..=1.0).contains(&s.y) || !(0.0..=1.0).contains(&s.z) {
        return *p;
    }
    let [dl, dm, dn] = lattice.dims;
    let (degree_l, degree_m, degree_n) = (dl - 1, dm - 1, dn - 1);
    let wl = axis_weights(dl, s.x);
    let wm = axis_weights(dm, s.y);
    let wn = axis_weights(dn, s.z);

    let mut q = Vector3::zeros();
    for l in 0..dl {
        for m in 0..dm {
            let wlm = wl[l] * wm[m];
            for n in 0..dn {
                let w = wlm * wn[n];
                let control = Vector3::new(
                    l as f64 / degree_l as f64,
                    m as f64 / degree_m as f64,
                    n as f64 / degree_n as f64,
                );
                q += w * (control + lattice.displacement(l, m, n));
            }
        }
    }
    lattice.to_physical(&q)
}

/// Applies [`ffd_map`] to every vertex; connectivity is unchanged.
pub fn deform_mesh(mesh: &TriMesh, lattice: &FfdLattice) -> TriMesh {
    if lattice.boundary_displaced() {
        log::warn!(
            "boundary control points are displaced; the deformation may be discontinuous at the lattice box boundary"
        );
    }
    TriMesh {
        vertices: mesh.vertices.iter().map(|p| ffd_map(p, lattice)).collect(),
        triangles: mesh.triangles.clone(),
    }
}

/// On-disk JSON form of a lattice; omitted grid entries mean zero
/// displacement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub origin: [f64; 3],
    pub lengths: [f64; 3],
    pub dims: [usize; 3],
    #[serde(default)]
    pub displacements: Vec<(usize, usize, usize, f64, f64, f64)>,
}

impl LatticeConfig {
    pub fn to_lattice(&self) -> Result<FfdLattice> {
        let mut lattice = FfdLattice::new(
            Point3::new(self.origin[0], self.origin[1], self.origin[2]),
            Vector3::new(self.lengths[0], self.lengths[1], self.lengths[2]),
            self.dims,
        )?;
        for &(l, m, n, dx, dy, dz) in &self.displacements {
            lattice.set_displacement(l, m, n, Vector3::new(dx, dy, dz))?;
        }
        Ok(lattice)
    }

    pub fn from_lattice(lattice: &FfdLattice) -> Self {
        let mut displacements = Vec::new();
        let [dl, dm, dn] = lattice.dims;
        for l in 0..dl {
            for m in 0..dm {
                for n in 0..dn {
                    let d = lattice.displacement(l, m, n);
                    if d != Vector3::zeros() {
                        displacements.push((l, m, n, d.x, d.y, d.z));
                    }
                }
            }
        }
        LatticeConfig {
            origin: [lattice.origin.x, lattice.origin.y, lattice.origin.z],
            lengths: [lattice.lengths.x, lattice.lengths.y, lattice.lengths.z],
            dims: lattice.dims,
            displacements,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::uv_sphere;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_lattice(dims: [usize; 3]) -> FfdLattice {
        FfdLattice::new(Point3::origin(), Vector3::new(1.0, 1.0, 1.0), dims).unwrap()
    }

    #[test]
    fn bernstein_endpoint_and_midpoint() {
        assert_eq!(bernstein(0, 1, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein(1, 2, 0.5).unwrap(), 0.5);
        assert!(bernstein(3, 2, 0.5).is_err());
        assert!(bernstein(0, 2, 1.5).is_err());
    }

    #[test]
    fn bernstein_partition_of_unity() {
        let sum: f64 = (0..=5).map(|i| bernstein(i, 5, 0.37).unwrap()).sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn trivariate_partition_of_unity_on_grid() {
        // 11^3 sample grid, weights of a (4, 3, 5)-point lattice.
        let dims = [4usize, 3, 5];
        for a in 0..11 {
            for b in 0..11 {
                for c in 0..11 {
                    let (s, t, u) = (a as f64 / 10.0, b as f64 / 10.0, c as f64 / 10.0);
                    let mut sum = 0.0;
                    for l in 0..dims[0] {
                        for m in 0..dims[1] {
                            for n in 0..dims[2] {
                                sum += bernstein_unchecked(l, dims[0] - 1, s)
                                    * bernstein_unchecked(m, dims[1] - 1, t)
                                    * bernstein_unchecked(n, dims[2] - 1, u);
                            }
                        }
                    }
                    assert!((sum - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_lattice_is_bitwise_identity() {
        let lattice = unit_lattice([3, 3, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let q = ffd_map(&p, &lattice);
            assert_eq!(p, q);
        }
    }

    #[test]
    fn uniform_displacement_translates_interior_points() {
        let mut lattice = FfdLattice::new(
            Point3::new(-1.0, 0.0, 2.0),
            Vector3::new(2.0, 4.0, 8.0),
            [2, 2, 2],
        )
        .unwrap();
        let d = Vector3::new(0.125, -0.25, 0.0625);
        for l in 0..2 {
            for m in 0..2 {
                for n in 0..2 {
                    lattice.set_displacement(l, m, n, d).unwrap();
                }
            }
        }
        let expected_shift = Vector3::new(
            d.x * lattice.lengths().x,
            d.y * lattice.lengths().y,
            d.z * lattice.lengths().z,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..4.0),
                rng.random_range(2.0..10.0),
            );
            let q = ffd_map(&p, &lattice);
            assert!((q - (p + expected_shift)).norm() <= 1e-12);
        }
    }

    #[test]
    fn corner_control_point_moves_corner_exactly() {
        let mut lattice = unit_lattice([2, 2, 2]);
        let d = Vector3::new(0.25, -0.5, 0.125);
        lattice.set_displacement(0, 0, 0, d).unwrap();
        let p = Point3::origin();
        let q = ffd_map(&p, &lattice);
        assert_eq!(q, Point3::new(0.25, -0.5, 0.125));
    }

    #[test]
    fn points_outside_box_are_untouched() {
        let mut lattice = unit_lattice([2, 2, 2]);
        lattice
            .set_displacement(1, 1, 1, Vector3::new(0.3, 0.0, 0.0))
            .unwrap();
        let outside = Point3::new(1.7, 0.5, 0.5);
        assert_eq!(ffd_map(&outside, &lattice), outside);
    }

    #[test]
    fn deform_sphere_moves_only_inside_vertices() {
        let sphere = uv_sphere(Point3::origin(), 1.0, 10, 16);
        // Box covering the upper hemisphere only.
        let mut lattice = FfdLattice::new(
            Point3::new(-1.2, -1.2, 0.1),
            Vector3::new(2.4, 2.4, 1.2),
            [3, 3, 3],
        )
        .unwrap();
        lattice
            .set_displacement(1, 1, 1, Vector3::new(0.0, 0.0, 0.2))
            .unwrap();
        let deformed = deform_mesh(&sphere, &lattice);
        assert_eq!(deformed.triangles, sphere.triangles);

        let inside = |p: &Point3<f64>| {
            p.x >= -1.2
                && p.x <= 1.2
                && p.y >= -1.2
                && p.y <= 1.2
                && p.z >= 0.1
                && p.z <= 1.3
        };
        let mut moved = 0;
        for (before, after) in sphere.vertices.iter().zip(&deformed.vertices) {
            if inside(before) {
                if before != after {
                    moved += 1;
                }
            } else {
                assert_eq!(before, after, "outside vertex must not move");
            }
        }
        assert!(moved > 0, "at least one inside vertex must move");
    }

    #[test]
    fn lattice_config_round_trip() {
        let mut lattice = unit_lattice([3, 2, 2]);
        lattice
            .set_displacement(1, 0, 1, Vector3::new(0.1, 0.2, -0.3))
            .unwrap();
        let cfg = LatticeConfig::from_lattice(&lattice);
        let json = serde_json::to_string(&cfg).unwrap();
        let parsed: LatticeConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_lattice().unwrap(), lattice);
    }

    #[test]
    fn lattice_config_rejects_out_of_range_index() {
        let cfg = LatticeConfig {
            origin: [0.0; 3],
            lengths: [1.0; 3],
            dims: [2, 2, 2],
            displacements: vec![(2, 0, 0, 0.1, 0.0, 0.0)],
        };
        assert!(cfg.to_lattice().is_err());
    }
}
