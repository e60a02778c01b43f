//! Small dense 3×3 kernels: one-sided Jacobi SVD, closest rotations and
//! the rotation exponential/logarithm used by the constructions.

use nalgebra::{Matrix3, Vector3};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Singular value decomposition `m = u * diag(sigma) * v^T` with
/// `sigma[0] >= sigma[1] >= sigma[2] >= 0`.
///
/// `u` and `v` are orthogonal but not necessarily proper; callers that need
/// a rotation use [`Svd3::closest_rotation`].
#[derive(Clone, Copy, Debug)]
pub struct Svd3 {
    pub u: Mat3,
    pub sigma: Vec3,
    pub v: Mat3,
}

const JACOBI_EPS: f64 = 1e-15;
const MAX_SWEEPS: usize = 40;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Plane rotations are applied to column pairs of a working copy of `m`
/// until all pairs are orthogonal to `JACOBI_EPS` relative accuracy; the
/// accumulated rotations form `v`. The pair order (0,1), (0,2), (1,2) and
/// the stopping rule are fixed, so the result depends only on the input bits.
pub fn svd3(m: &Mat3) -> Svd3 {
    let mut b = *m;
    let mut v = Mat3::identity();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for &(i, j) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let bi = b.column(i).into_owned();
            let bj = b.column(j).into_owned();
            let alpha = bi.norm_squared();
            let beta = bj.norm_squared();
            let gamma = bi.dot(&bj);
            if gamma == 0.0 || gamma.abs() <= JACOBI_EPS * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            b.set_column(i, &(bi * c - bj * s));
            b.set_column(j, &(bi * s + bj * c));
            let vi = v.column(i).into_owned();
            let vj = v.column(j).into_owned();
            v.set_column(i, &(vi * c - vj * s));
            v.set_column(j, &(vi * s + vj * c));
        }
        if !rotated {
            break;
        }
    }

    let mut norms = [b.column(0).norm(), b.column(1).norm(), b.column(2).norm()];
    let mut order = [0usize, 1, 2];
    // stable descending sort of three entries
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));
    let b_sorted = Mat3::from_columns(&[b.column(order[0]), b.column(order[1]), b.column(order[2])]);
    let v_sorted = Mat3::from_columns(&[v.column(order[0]), v.column(order[1]), v.column(order[2])]);
    norms = [norms[order[0]], norms[order[1]], norms[order[2]]];

    let scale = norms[0];
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 8.0;
    let mut u = Mat3::zeros();
    let mut rank = 0;
    for k in 0..3 {
        if norms[k] > tiny {
            u.set_column(k, &(b_sorted.column(k) / norms[k]));
            rank += 1;
        } else {
            break;
        }
    }
    // complete an orthonormal basis for rank-deficient inputs
    if rank == 0 {
        u = Mat3::identity();
    } else if rank == 1 {
        let u0 = u.column(0).into_owned();
        let u1 = any_orthogonal(&u0);
        u.set_column(1, &u1);
        u.set_column(2, &u0.cross(&u1));
    } else if rank == 2 {
        let u2 = u.column(0).cross(&u.column(1)).normalize();
        u.set_column(2, &u2);
    }

    Svd3 {
        u,
        sigma: Vec3::new(norms[0], norms[1], norms[2]),
        v: v_sorted,
    }
}

fn any_orthogonal(a: &Vec3) -> Vec3 {
    let (ax, ay, az) = (a.x.abs(), a.y.abs(), a.z.abs());
    let pick = if ax <= ay && ax <= az {
        Vec3::x()
    } else if ay <= az {
        Vec3::y()
    } else {
        Vec3::z()
    };
    a.cross(&pick).normalize()
}

impl Svd3 {
    /// Sign of `det(u) det(v)`; −1 means the closest rotation flips the
    /// direction of the smallest singular value.
    pub fn orientation(&self) -> f64 {
        let d = self.u.determinant() * self.v.determinant();
        if d < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// The rotation maximizing `<R, m>`: `u diag(1, 1, s) v^T` with `s` the
    /// orientation sign.
    pub fn closest_rotation(&self) -> Mat3 {
        let s = self.orientation();
        let d = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, s));
        self.u * d * self.v.transpose()
    }
}

/// Closest proper rotation to `m` in the Frobenius norm.
pub fn closest_rotation(m: &Mat3) -> Mat3 {
    svd3(m).closest_rotation()
}

pub fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues formula for `exp(skew(w))`.
pub fn rotation_exp(w: &Vec3) -> Mat3 {
    let theta = w.norm();
    if theta < 1e-12 {
        return Mat3::identity() + skew(w);
    }
    let k = skew(&(w / theta));
    Mat3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Axis-angle vector `w` with `exp(skew(w)) = r`, angle in `[0, π]`.
///
/// At angle π the axis is taken from the largest column of `(r + I)/2`
/// with its first non-negligible component made positive.
pub fn rotation_log(r: &Mat3) -> Vec3 {
    let cos_theta = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let axial = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if theta < 1e-8 {
        return axial * 0.5;
    }
    if std::f64::consts::PI - theta > 1e-6 {
        return axial * (theta / (2.0 * theta.sin()));
    }
    // near π: r ≈ 2 n n^T − I
    let sym = (r + Mat3::identity()) * 0.5;
    let mut best = 0;
    for k in 1..3 {
        if sym[(k, k)] > sym[(best, best)] {
            best = k;
        }
    }
    let mut n = sym.column(best).into_owned();
    n /= n.norm();
    let lead = if n.x.abs() > 1e-12 {
        n.x
    } else if n.y.abs() > 1e-12 {
        n.y
    } else {
        n.z
    };
    if lead < 0.0 {
        n = -n;
    }
    n * theta
}

/// Frobenius distance between two matrices.
pub fn frobenius_dist(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, scale: f64) -> Mat3 {
        Mat3::from_fn(|_, _| rng.gen_range(-scale..scale))
    }

    #[test]
    fn svd_reconstructs_and_matches_nalgebra_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let m = random_matrix(&mut rng, 3.0);
            let s = svd3(&m);
            let rebuilt = s.u * Mat3::from_diagonal(&s.sigma) * s.v.transpose();
            assert!((rebuilt - m).norm() < 1e-13 * (1.0 + m.norm()));
            assert!((s.u.transpose() * s.u - Mat3::identity()).norm() < 1e-13);
            assert!((s.v.transpose() * s.v - Mat3::identity()).norm() < 1e-13);
            let mut reference: Vec<f64> = m.singular_values().iter().copied().collect();
            reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for k in 0..3 {
                assert!((s.sigma[k] - reference[k]).abs() < 1e-12 * (1.0 + reference[0]));
            }
        }
    }

    #[test]
    fn svd_handles_rank_deficient_inputs() {
        let zero = svd3(&Mat3::zeros());
        assert_eq!(zero.sigma, Vec3::zeros());
        assert!((zero.closest_rotation() - Mat3::identity()).norm() < 1e-15);

        let rank_one = Vec3::new(1.0, 2.0, 3.0) * Vec3::new(0.0, 1.0, -1.0).transpose();
        let s = svd3(&rank_one);
        assert!(s.sigma[1] < 1e-14 && s.sigma[2] < 1e-14);
        let r = s.closest_rotation();
        assert!((r.determinant() - 1.0).abs() < 1e-13);

        let rank_two = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 0.0));
        let r2 = closest_rotation(&rank_two);
        assert!((r2 - Mat3::identity()).norm() < 1e-14);
    }

    #[test]
    fn closest_rotation_beats_sampled_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_matrix(&mut rng, 2.0);
            let r = closest_rotation(&m);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let best = (m - r).norm();
            for _ in 0..50 {
                let w = Vec3::new(rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2));
                let q = rotation_exp(&w);
                assert!((m - q).norm() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let mut w = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let angle = rng.gen_range(0.0..3.1);
            w = w.normalize() * angle;
            let r = rotation_exp(&w);
            assert!((rotation_log(&r) - w).norm() < 1e-9);
        }
        let half_turn = rotation_exp(&(Vec3::new(0.0, 0.0, 1.0) * std::f64::consts::PI));
        let w = rotation_log(&half_turn);
        assert!((rotation_exp(&w) - half_turn).norm() < 1e-12);
        assert!(w.z > 0.0);
    }
}
