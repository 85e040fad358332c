//! Small linear-algebra helpers shared across the crate.
//!
//! Rotations follow the row-vector convention used throughout the library:
//! a point `q` (as a row) maps to `q·R + t`. With nalgebra's column vectors
//! this is `Rᵀ·q + t`, which [`apply_rigid`] implements.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// `q·R + t` for a row-vector point.
#[inline]
pub fn apply_rigid(rotation: &Mat3, translation: &Vec3, q: &Vec3) -> Vec3 {
    rotation.tr_mul(q) + translation
}

/// Uniformly distributed rotation (row convention, but the distribution is
/// symmetric so the convention does not matter).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    loop {
        let q = nalgebra::Vector4::<f64>::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = q.norm();
        if n < 1e-9 {
            continue;
        }
        let q = q / n;
        let uq = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            q[0], q[1], q[2], q[3],
        ));
        return *uq.to_rotation_matrix().matrix();
    }
}

/// Rotation by `angle` radians about the unit `axis`, expressed in the row
/// convention: `v·R` rotates `v` about `axis` by `angle` (right-hand rule).
pub fn axis_angle_row(axis: &Vec3, angle: f64) -> Mat3 {
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
    rot.matrix().transpose()
}

/// Angle of the relative rotation between two rotation matrices, in radians.
pub fn rotation_angle_between(a: &Mat3, b: &Mat3) -> f64 {
    let rel = a * b.transpose();
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Orthonormality and handedness residuals: (‖M·Mᵀ − I‖_max, |det M − 1|).
pub fn rotation_residuals(m: &Mat3) -> (f64, f64) {
    let ortho = (m * m.transpose() - Mat3::identity()).abs().max();
    (ortho, (m.determinant() - 1.0).abs())
}

/// Intrinsic Z-Y-X Euler angles `(roll, pitch, yaw)` of `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_zyx(m: &Mat3) -> Vec3 {
    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*m).euler_angles();
    Vec3::new(roll, pitch, yaw)
}

pub fn from_euler_zyx(u: &Vec3) -> Mat3 {
    *Rotation3::from_euler_angles(u[0], u[1], u[2]).matrix()
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Component-wise wrapped difference of two Euler-angle vectors.
pub fn euler_delta(a: &Vec3, b: &Vec3) -> Vec3 {
    Vec3::new(
        wrap_angle(a[0] - b[0]),
        wrap_angle(a[1] - b[1]),
        wrap_angle(a[2] - b[2]),
    )
}

/// Symmetric 3×3 eigendecomposition with eigenvalues sorted descending.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sorted_symmetric_eigen(m: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let eig = nalgebra::SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let vecs = [
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ];
    (vals, vecs)
}

/// Nearest rotation to `m` in the Frobenius sense.
pub fn orthonormalize(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        let mut c = u2.column_mut(2);
        c.neg_mut();
        r = u2 * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_rotations_are_proper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            let (o, d) = rotation_residuals(&r);
            assert!(o < 1e-12 && d < 1e-12);
        }
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            let back = from_euler_zyx(&euler_zyx(&r));
            assert!((back - r).norm() < 1e-9);
        }
    }

    #[test]
    fn axis_angle_row_rotates_rows() {
        let r = axis_angle_row(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let x = Vec3::x();
        // row vector x·R
        let y = r.tr_mul(&x);
        assert!((y - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.1) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn orthonormalize_fixes_perturbation() {
        let m = Mat3::identity() + Mat3::from_element(1e-3);
        let r = orthonormalize(&m);
        let (o, d) = rotation_residuals(&r);
        assert!(o < 1e-12 && d < 1e-12);
    }
}
