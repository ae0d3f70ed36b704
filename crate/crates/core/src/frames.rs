//! Ribbon frames: the discrete state (y, b), boundary data, and the
//! construction of admissible initial frames.
//!
//! A frame consists of an arclength centerline y with unit tangent y', an
//! in-plane director b of unit length orthogonal to y', and the normal
//! director d = y' x b. The unit-length conditions are imposed at the mesh
//! nodes; orthogonality of y' and b is handled by penalization downstream.

use crate::error::{Error, Result};
use crate::fe::{interpolate_hermite, interpolate_nodal, HermiteField, NodalField};
use crate::mesh::Mesh;
use crate::vec3::{self, Vec3};

/// Tolerance on the pointwise frame conditions of sampled initial data.
pub const INITIAL_FRAME_TOL: f64 = 1e-10;

/// The discrete ribbon frame: a Hermite centerline and a nodal director on
/// a shared mesh.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub y: HermiteField,
    pub b: NodalField,
}

impl FrameState {
    pub fn new(y: HermiteField, b: NodalField) -> Result<Self> {
        if !y.mesh().same_as(b.mesh()) {
            return Err(Error::MeshMismatch);
        }
        Ok(FrameState { y, b })
    }

    pub fn mesh(&self) -> &Mesh {
        self.y.mesh()
    }

    /// Normal director d = y' x b at x.
    pub fn reconstruct_d(&self, x: f64) -> Result<Vec3> {
        let t = self.y.eval(x, 1)?;
        let b = self.b.eval(x, 0)?;
        Ok(vec3::cross(t, b))
    }

    /// Nodal director d_j = y'(x_j) x b(x_j).
    pub fn node_director(&self, j: usize) -> Vec3 {
        vec3::cross(self.y.node_derivative(j), self.b.node_value(j))
    }

    /// Maximal nodal violations (max_j | |y'(x_j)|^2 - 1 |, max_j | |b(x_j)|^2 - 1 |).
    pub fn check_nodal_constraints(&self) -> (f64, f64) {
        let mesh = self.mesh();
        let mut dy: f64 = 0.0;
        let mut db: f64 = 0.0;
        for j in 0..mesh.node_count() {
            dy = dy.max((vec3::norm2(self.y.node_derivative(j)) - 1.0).abs());
            db = db.max((vec3::norm2(self.b.node_value(j)) - 1.0).abs());
        }
        (dy, db)
    }
}

/// Endpoint data frozen during the flow: clamped deformation (value and
/// tangent) and Dirichlet director at both ends.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub y_left: Vec3,
    pub dy_left: Vec3,
    pub y_right: Vec3,
    pub dy_right: Vec3,
    pub b_left: Vec3,
    pub b_right: Vec3,
}

impl BoundaryConditions {
    pub fn new(
        y_left: Vec3,
        dy_left: Vec3,
        y_right: Vec3,
        dy_right: Vec3,
        b_left: Vec3,
        b_right: Vec3,
    ) -> Result<Self> {
        for (name, v) in [
            ("y'(0)", dy_left),
            ("y'(L)", dy_right),
            ("b(0)", b_left),
            ("b(L)", b_right),
        ] {
            if (vec3::norm(v) - 1.0).abs() > INITIAL_FRAME_TOL {
                return Err(Error::InvalidParameter(format!(
                    "boundary vector {name} must be unit length, |{name}| = {}",
                    vec3::norm(v)
                )));
            }
        }
        for (name, t, b) in [("0", dy_left, b_left), ("L", dy_right, b_right)] {
            if vec3::dot(t, b).abs() > INITIAL_FRAME_TOL {
                return Err(Error::InvalidParameter(format!(
                    "boundary frame at x = {name} not orthogonal: y'.b = {}",
                    vec3::dot(t, b)
                )));
            }
        }
        Ok(BoundaryConditions {
            y_left,
            dy_left,
            y_right,
            dy_right,
            b_left,
            b_right,
        })
    }
}

/// A parametric curve sampler returning (value, first derivative).
pub type CurveSampler<'a> = Box<dyn Fn(f64) -> Result<(Vec3, Vec3)> + 'a>;
/// A director sampler returning a vector per parameter value.
pub type DirectorSampler<'a> = Box<dyn Fn(f64) -> Result<Vec3> + 'a>;

/// Director field obtained by rotating around the tangent: with
/// n_0 = (-t_2, t_1, 0) the returned field is
/// cos(a x) (t x n_0) x t + sin(a x) t x n_0, optionally projected onto the
/// unit sphere. The result is orthogonal to the tangent pointwise; a
/// vertical tangent (vanishing first two components) is a hard error.
pub fn rotated_director<'a>(
    tangent: impl Fn(f64) -> Result<Vec3> + 'a,
    twist_rate: f64,
    normalize: bool,
) -> DirectorSampler<'a> {
    Box::new(move |x: f64| {
        let t = tangent(x)?;
        let n0 = [-t[1], t[0], 0.0];
        if vec3::norm2(n0) < 1e-24 {
            return Err(Error::DegenerateTangent { x });
        }
        let e1 = vec3::cross(t, n0);
        let e2 = vec3::cross(e1, t);
        let b = vec3::add(
            vec3::scale((twist_rate * x).cos(), e2),
            vec3::scale((twist_rate * x).sin(), e1),
        );
        if normalize {
            vec3::normalize(b).ok_or(Error::DegenerateTangent { x })
        } else {
            Ok(b)
        }
    })
}

/// Initial frame of the closed circular ribbon with a 3/2 twist: the unit
/// circle centerline with a director that flips once along the band.
/// The construction needs no projection (the rotated field is unit length).
pub fn moebius_initial() -> (CurveSampler<'static>, DirectorSampler<'static>) {
    let curve: CurveSampler<'static> =
        Box::new(|x: f64| Ok(([x.cos(), x.sin(), 0.0], [-x.sin(), x.cos(), 0.0])));
    let director = rotated_director(|x: f64| Ok([-x.sin(), x.cos(), 0.0]), 1.5, false);
    (curve, director)
}

pub const HELIX_PITCH: f64 = 0.95;
pub const HELIX_WINDING: f64 = 2.0;
/// Twist rate of the helix director; the sign opposes the winding of the
/// helix so that the initial torsion is inconsistent with it.
pub const HELIX_TWIST_RATE: f64 = -1.0;

/// Initial frame of a helical ribbon whose twist is inconsistent with the
/// winding: y = (c x, d cos(2x), d sin(2x)) with c = 0.95,
/// d = sqrt(1 - c^2)/2, and a unit-rate rotated director (turning against
/// the winding) projected onto the unit sphere.
pub fn helix_initial() -> (CurveSampler<'static>, DirectorSampler<'static>) {
    let c = HELIX_PITCH;
    let beta = HELIX_WINDING;
    let d = (1.0 - c * c).sqrt() / beta;
    let tangent = move |x: f64| -> Result<Vec3> {
        Ok([c, -d * beta * (beta * x).sin(), d * beta * (beta * x).cos()])
    };
    let curve: CurveSampler<'static> = Box::new(move |x: f64| {
        Ok((
            [c * x, d * (beta * x).cos(), d * (beta * x).sin()],
            tangent(x)?,
        ))
    });
    let director = rotated_director(tangent, HELIX_TWIST_RATE, true);
    (curve, director)
}

/// Nodal interpolation of continuous initial data. The sampled data must
/// satisfy |y_0'| = |b_0| = 1 and y_0'.b_0 = 0 at every node up to
/// `INITIAL_FRAME_TOL`; the boundary conditions are read off the endpoint
/// samples.
pub fn discretize_initial(
    curve: &CurveSampler,
    director: &DirectorSampler,
    mesh: &Mesh,
) -> Result<(FrameState, BoundaryConditions)> {
    let y = interpolate_hermite(mesh, &**curve)?;
    let b = interpolate_nodal(mesh, &**director)?;
    for j in 0..mesh.node_count() {
        let t = y.node_derivative(j);
        let bv = b.node_value(j);
        let tangent_err = (vec3::norm2(t) - 1.0).abs();
        if tangent_err > INITIAL_FRAME_TOL {
            return Err(Error::InitialConstraintViolation {
                node: j,
                detail: format!("| |y'|^2 - 1 | = {tangent_err:.3e}"),
            });
        }
        let director_err = (vec3::norm2(bv) - 1.0).abs();
        if director_err > INITIAL_FRAME_TOL {
            return Err(Error::InitialConstraintViolation {
                node: j,
                detail: format!("| |b|^2 - 1 | = {director_err:.3e}"),
            });
        }
        let ortho_err = vec3::dot(t, bv).abs();
        if ortho_err > INITIAL_FRAME_TOL {
            return Err(Error::InitialConstraintViolation {
                node: j,
                detail: format!("|y'.b| = {ortho_err:.3e}"),
            });
        }
    }
    let last = mesh.node_count() - 1;
    let bc = BoundaryConditions::new(
        y.node_value(0),
        y.node_derivative(0),
        y.node_value(last),
        y.node_derivative(last),
        b.node_value(0),
        b.node_value(last),
    )?;
    let state = FrameState::new(y, b)?;
    Ok((state, bc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn moebius_director_closed_form() {
        let (_, b0) = moebius_initial();
        for k in 0..=48 {
            let x = 2.0 * PI * k as f64 / 48.0;
            let b = b0(x).unwrap();
            let expect = [
                -(1.5 * x).cos() * x.cos(),
                -(1.5 * x).cos() * x.sin(),
                (1.5 * x).sin(),
            ];
            for c in 0..3 {
                assert_relative_eq!(b[c], expect[c], epsilon = 1e-13);
            }
            assert_relative_eq!(vec3::norm(b), 1.0, epsilon = 1e-13);
        }
        let b_pi = b0(PI).unwrap();
        assert_relative_eq!(b_pi[0], 0.0, epsilon = 1e-13);
        assert_relative_eq!(b_pi[1], 0.0, epsilon = 1e-13);
        assert_relative_eq!(b_pi[2], -1.0, epsilon = 1e-13);
    }

    #[test]
    fn zero_twist_gives_inward_normal_on_circle() {
        let b0 = rotated_director(|x: f64| Ok([-x.sin(), x.cos(), 0.0]), 0.0, false);
        for k in 0..16 {
            let x = 2.0 * PI * k as f64 / 16.0;
            let b = b0(x).unwrap();
            assert_relative_eq!(b[0], -x.cos(), epsilon = 1e-14);
            assert_relative_eq!(b[1], -x.sin(), epsilon = 1e-14);
            assert_relative_eq!(b[2], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn moebius_tangent_curvature_torsion_identities() {
        let (y0, b0) = moebius_initial();
        let fd = 1e-6;
        for k in 1..60 {
            let x = 2.0 * PI * k as f64 / 61.0;
            let (_, t) = y0(x).unwrap();
            assert_relative_eq!(vec3::norm(t), 1.0, epsilon = 1e-13);
            // |b0'|^2 = 9/4 + cos^2(3x/2) and y0'.b0' = -cos(3x/2), via
            // central differences of the samplers
            let bp = vec3::scale(
                1.0 / (2.0 * fd),
                vec3::sub(b0(x + fd).unwrap(), b0(x - fd).unwrap()),
            );
            assert_relative_eq!(
                vec3::norm2(bp),
                2.25 + (1.5 * x).cos().powi(2),
                max_relative = 1e-6
            );
            assert_relative_eq!(vec3::dot(t, bp), -(1.5 * x).cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn helix_constants_and_pointwise_conditions() {
        let (y0, b0) = helix_initial();
        let d = (1.0f64 - 0.95 * 0.95).sqrt() / 2.0;
        assert_relative_eq!(d, 0.15612494995995996, epsilon = 1e-15);
        for k in 0..=1000 {
            let x = 2.0 * PI * k as f64 / 1000.0;
            let (_, t) = y0(x).unwrap();
            assert_relative_eq!(vec3::norm2(t), 1.0, epsilon = 1e-12);
            let b = b0(x).unwrap();
            assert_relative_eq!(vec3::norm(b), 1.0, epsilon = 1e-12);
            assert!(vec3::dot(t, b).abs() < 1e-12);
        }
    }

    #[test]
    fn vertical_tangent_rejected() {
        let b0 = rotated_director(|_| Ok([0.0, 0.0, 1.0]), 1.0, false);
        assert!(matches!(b0(0.5), Err(Error::DegenerateTangent { .. })));
    }

    #[test]
    fn rotated_director_orthogonal_for_random_smooth_tangents() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(0.2..0.9);
            let phase: f64 = rng.gen_range(0.0..PI);
            // unit tangent tilted away from vertical
            let tangent = move |x: f64| -> Result<Vec3> {
                let u = a * (x + phase).sin();
                Ok([
                    (1.0 - u * u).sqrt() * x.cos(),
                    (1.0 - u * u).sqrt() * x.sin(),
                    u,
                ])
            };
            let rate: f64 = rng.gen_range(0.0..3.0);
            let b0 = rotated_director(tangent, rate, true);
            for k in 0..=50 {
                let x = 2.0 * PI * k as f64 / 50.0;
                let t = tangent(x).unwrap();
                let b = b0(x).unwrap();
                assert!(vec3::dot(t, b).abs() < 1e-12);
                assert_relative_eq!(vec3::norm(b), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn moebius_frame_is_right_handed() {
        let (y0, b0) = moebius_initial();
        for k in 0..=40 {
            let x = 2.0 * PI * k as f64 / 40.0;
            let (_, t) = y0(x).unwrap();
            let b = b0(x).unwrap();
            let d = vec3::cross(t, b);
            // det[t, b, d] = d . (t x b) = |d|^2
            let det = vec3::dot(vec3::cross(t, b), d);
            assert_relative_eq!(det, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn discretize_moebius_exact_nodal_constraints() {
        let mesh = Mesh::uniform(2.0 * PI, 80).unwrap();
        let (y0, b0) = moebius_initial();
        let (state, bc) = discretize_initial(&y0, &b0, &mesh).unwrap();
        let (dy, db) = state.check_nodal_constraints();
        assert!(dy < 1e-14, "tangent drift {dy}");
        assert!(db < 1e-14, "director drift {db}");
        // endpoint data frozen from the closed forms at x = 0
        assert_relative_eq!(bc.y_left[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(bc.dy_left[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(bc.b_left[0], -1.0, epsilon = 1e-15);
        // interpolation is not isometric: |y_h'| deviates inside elements
        let mut interior_dev: f64 = 0.0;
        for e in 0..mesh.element_count() {
            let x = mesh.node(e) + 0.5 * mesh.element_size(e);
            interior_dev = interior_dev.max((vec3::norm(state.y.eval(x, 1).unwrap()) - 1.0).abs());
        }
        assert!(interior_dev > 0.0);
        assert!(interior_dev < 1e-3);
    }

    #[test]
    fn discretize_rejects_constraint_violations() {
        let mesh = Mesh::uniform(2.0 * PI, 8).unwrap();
        let bad_curve: CurveSampler = Box::new(|x: f64| {
            Ok((
                [x.cos(), x.sin(), 0.0],
                [-1.01 * x.sin(), 1.01 * x.cos(), 0.0],
            ))
        });
        let (_, b0) = moebius_initial();
        let err = discretize_initial(&bad_curve, &b0, &mesh);
        assert!(matches!(err, Err(Error::InitialConstraintViolation { .. })));
    }

    #[test]
    fn scaled_state_constraint_violation() {
        let mesh = Mesh::uniform(2.0 * PI, 16).unwrap();
        let (y0, b0) = moebius_initial();
        let (state, _) = discretize_initial(&y0, &b0, &mesh).unwrap();
        let scaled = FrameState::new(
            interpolate_hermite(&mesh, |x| {
                Ok((
                    vec3::scale(2.0, state.y.eval(x, 0).unwrap()),
                    vec3::scale(2.0, state.y.eval(x, 1).unwrap()),
                ))
            })
            .unwrap(),
            interpolate_nodal(&mesh, |x| Ok(vec3::scale(2.0, state.b.eval(x, 0).unwrap())))
                .unwrap(),
        )
        .unwrap();
        let (dy, db) = scaled.check_nodal_constraints();
        assert_relative_eq!(dy, 3.0, epsilon = 1e-12);
        assert_relative_eq!(db, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstructed_director_orthonormal() {
        let mesh = Mesh::uniform(2.0 * PI, 40).unwrap();
        let circle: CurveSampler =
            Box::new(|x: f64| Ok(([x.cos(), x.sin(), 0.0], [-x.sin(), x.cos(), 0.0])));
        let flat: DirectorSampler = Box::new(|_| Ok([0.0, 0.0, 1.0]));
        let (state, _) = discretize_initial(&circle, &flat, &mesh).unwrap();
        for j in 0..mesh.node_count() {
            let x = mesh.node(j);
            let d = state.reconstruct_d(x).unwrap();
            assert_relative_eq!(d[0], x.cos(), epsilon = 1e-12);
            assert_relative_eq!(d[1], x.sin(), epsilon = 1e-12);
            assert_relative_eq!(vec3::norm(d), 1.0, epsilon = 1e-12);
            assert!(vec3::dot(d, state.y.eval(x, 1).unwrap()).abs() < 1e-12);
            assert!(vec3::dot(d, state.b.eval(x, 0).unwrap()).abs() < 1e-12);
        }
    }
}
