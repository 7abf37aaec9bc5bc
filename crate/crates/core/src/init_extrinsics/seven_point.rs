//! Minimal 7-point fundamental matrix solver.
//!
//! Seven epipolar constraints leave a 2-dimensional nullspace spanned by
//! (F1, F2); the rank-2 requirement det(F1 + lambda * F2) = 0 is a cubic in
//! lambda, so the sample yields one to three candidate matrices.

use nalgebra::{Matrix3, SMatrix, SVector};
use thiserror::Error;

use super::{Correspondence, FundamentalMatrix};

/// Nullspace larger than two dimensions (coincident or otherwise degenerate
/// points); the RANSAC driver discards the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("degenerate 7-point configuration")]
pub struct DegenerateConfiguration;

/// Solves the 7-point problem, returning 1 to 3 rank-2 candidates.
pub fn seven_point(
    corr: &[Correspondence; 7],
) -> Result<Vec<FundamentalMatrix>, DegenerateConfiguration> {
    for i in 0..7 {
        for j in (i + 1)..7 {
            if corr[i].a == corr[j].a && corr[i].b == corr[j].b {
                return Err(DegenerateConfiguration);
            }
        }
    }

    let mut a = SMatrix::<f64, 7, 9>::zeros();
    for (i, c) in corr.iter().enumerate() {
        a.set_row(i, &epipolar_row(c).transpose());
    }

    // Two smallest eigenvectors of A^T A span the nullspace.
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scale = eig.eigenvalues[order[8]].max(f64::MIN_POSITIVE);
    if eig.eigenvalues[order[2]] < 1e-12 * scale {
        // Third eigenvalue also ~0: nullspace dimension > 2.
        return Err(DegenerateConfiguration);
    }
    let f1 = mat_from_vec(&eig.eigenvectors.column(order[0]).into_owned());
    let f2 = mat_from_vec(&eig.eigenvectors.column(order[1]).into_owned());

    // det(F1 + lambda * F2) = 0; coefficients by expanding column choices.
    let mut coeffs = [0.0f64; 4]; // coeffs[k] multiplies lambda^k
    for s in 0..8u32 {
        let cols: Vec<_> = (0..3)
            .map(|c| {
                if s & (1 << c) != 0 {
                    f2.column(c).into_owned()
                } else {
                    f1.column(c).into_owned()
                }
            })
            .collect();
        let det = Matrix3::from_columns(&cols).determinant();
        coeffs[s.count_ones() as usize] += det;
    }

    let mut out = Vec::new();
    for lambda in real_cubic_roots(coeffs) {
        let f = f1 + lambda * f2;
        let norm = f.norm();
        if norm > 1e-12 {
            out.push(FundamentalMatrix(f / norm));
        }
    }
    if out.is_empty() {
        // A cubic always has at least one real root; empty means the pencil
        // collapsed numerically.
        return Err(DegenerateConfiguration);
    }
    Ok(out)
}

/// Row of the linear system for `b^T F a = 0`, F flattened row-major.
pub(super) fn epipolar_row(c: &Correspondence) -> SVector<f64, 9> {
    SVector::<f64, 9>::from_column_slice(&[
        c.b.x * c.a.x,
        c.b.x * c.a.y,
        c.b.x,
        c.b.y * c.a.x,
        c.b.y * c.a.y,
        c.b.y,
        c.a.x,
        c.a.y,
        1.0,
    ])
}

pub(super) fn mat_from_vec(v: &SVector<f64, 9>) -> Matrix3<f64> {
    Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

/// Real roots of `c[3] x^3 + c[2] x^2 + c[1] x + c[0]`, via companion-matrix
/// eigenvalues plus Newton polish. Near-equal roots are merged.
fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return vec![];
    }
    let eval = |x: f64| ((c[3] * x + c[2]) * x + c[1]) * x + c[0];
    let deriv = |x: f64| (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1];

    let mut roots: Vec<f64> = if c[3].abs() > 1e-12 * scale {
        let companion = Matrix3::new(
            -c[2] / c[3],
            -c[1] / c[3],
            -c[0] / c[3],
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
        );
        companion
            .complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() < 1e-8 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect()
    } else if c[2].abs() > 1e-12 * scale {
        // Degenerate cubic: quadratic.
        let disc = c[1] * c[1] - 4.0 * c[2] * c[0];
        if disc < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (c[1] + c[1].signum() * disc.sqrt());
            let mut r = vec![q / c[2]];
            if q.abs() > 0.0 {
                r.push(c[0] / q);
            }
            r
        }
    } else if c[1].abs() > 1e-12 * scale {
        vec![-c[0] / c[1]]
    } else {
        vec![]
    };

    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = deriv(*r);
            if d.abs() > 1e-300 {
                *r -= eval(*r) / d;
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + a.abs()));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraPose, Point3, Vec3};
    use rand::Rng;

    /// Projects world points into two normalized cameras.
    pub(super) fn make_correspondences(
        pose_b: &CameraPose,
        points: &[Point3],
    ) -> Vec<Correspondence> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let pb = pose_b.transform_point(p);
                Correspondence {
                    a: nalgebra::Vector2::new(p.x / p.z, p.y / p.z),
                    b: nalgebra::Vector2::new(pb.x / pb.z, pb.y / pb.z),
                    timestamp: i as f64,
                    marker_index: i % 3,
                }
            })
            .collect()
    }

    fn random_scene(seed: u64) -> (CameraPose, Vec<Point3>) {
        let mut rng = crate::rng::rng_from(seed, "seven-point-test");
        let pose = CameraPose::from_rotvec(
            Vec3::new(
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            ),
            Vec3::new(rng.gen_range(0.5..1.5), rng.gen_range(-0.3..0.3), 0.2),
        );
        let points = (0..7)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(2.0..6.0),
                )
            })
            .collect();
        (pose, points)
    }

    #[test]
    fn construction_residual_vanishes() {
        for seed in 0..20u64 {
            let (pose, points) = random_scene(seed);
            let corr = make_correspondences(&pose, &points);
            let sample: [Correspondence; 7] = corr.clone().try_into().unwrap();
            let fs = seven_point(&sample).unwrap();
            assert!(!fs.is_empty() && fs.len() <= 3);
            for f in &fs {
                for c in &corr {
                    assert!(
                        f.epipolar_residual(&c.a, &c.b).abs() < 1e-10,
                        "seed {seed}: residual {}",
                        f.epipolar_residual(&c.a, &c.b).abs()
                    );
                }
                // rank 2 by construction
                let svd = f.0.svd(false, false);
                assert!(svd.singular_values[2] < 1e-9);
            }
        }
    }

    /// Independent root-count oracle: nullspace by Gaussian elimination and
    /// sign changes of det(F1 + lambda F2) over a dense grid. The root count
    /// of the pencil determinant does not depend on the basis choice.
    fn oracle_root_count(corr: &[Correspondence; 7]) -> usize {
        let mut m = [[0.0f64; 9]; 7];
        for (i, c) in corr.iter().enumerate() {
            let row = epipolar_row(c);
            for j in 0..9 {
                m[i][j] = row[j];
            }
        }
        // Gaussian elimination with partial pivoting to row echelon form.
        let mut pivot_cols = Vec::new();
        let mut r = 0usize;
        for col in 0..9 {
            let (best, val) = (r..7)
                .map(|i| (i, m[i][col].abs()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((r, 0.0));
            if val < 1e-12 {
                continue;
            }
            m.swap(r, best);
            for i in 0..7 {
                if i != r {
                    let f = m[i][col] / m[r][col];
                    for j in 0..9 {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
            pivot_cols.push(col);
            r += 1;
            if r == 7 {
                break;
            }
        }
        assert_eq!(r, 7, "oracle expects full row rank");
        let free: Vec<usize> = (0..9).filter(|c| !pivot_cols.contains(c)).collect();
        assert_eq!(free.len(), 2);
        let mut basis = Vec::new();
        for &fc in &free {
            let mut v = [0.0f64; 9];
            v[fc] = 1.0;
            for (ri, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -m[ri][fc] / m[ri][pc];
            }
            basis.push(Matrix3::new(
                v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8],
            ));
        }
        // Rank-2 members of the pencil are projective: parameterize by angle
        // so the count does not depend on the basis (a root can sit at
        // lambda = infinity of one parameterization). det is homogeneous of
        // degree 3, so q(theta + pi) = -q(theta): scanning [0, pi) with the
        // sign wrap counts every odd-multiplicity projective root once.
        let q = |theta: f64| {
            (theta.cos() * basis[0] + theta.sin() * basis[1]).determinant()
        };
        let n = 400_000;
        let mut count = 0;
        let q0 = q(0.0);
        let mut prev = q0;
        for i in 1..=n {
            let cur = if i == n {
                -q0
            } else {
                q(std::f64::consts::PI * i as f64 / n as f64)
            };
            if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
                count += 1;
            }
            if cur != 0.0 {
                prev = cur;
            }
        }
        count
    }

    #[test]
    fn root_count_matches_oracle() {
        let mut seen_one = false;
        let mut seen_three = false;
        for seed in 0..30u64 {
            let (pose, points) = random_scene(seed);
            let corr: [Correspondence; 7] =
                make_correspondences(&pose, &points).try_into().unwrap();
            let fs = seven_point(&corr).unwrap();
            let oracle = oracle_root_count(&corr);
            assert_eq!(fs.len(), oracle, "seed {seed}");
            seen_one |= oracle == 1;
            seen_three |= oracle == 3;
        }
        assert!(seen_one, "no single-root scene sampled");
        assert!(seen_three, "no triple-root scene sampled");
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let (pose, mut points) = random_scene(3);
        points[6] = points[5];
        let corr: [Correspondence; 7] = make_correspondences(&pose, &points).try_into().unwrap();
        assert_eq!(seven_point(&corr), Err(DegenerateConfiguration));
    }

    #[test]
    fn planar_pure_rotation_is_degenerate_or_zero_residual_everywhere() {
        // Pure rotation (no translation): every F in the nullspace satisfies
        // the constraints for any scene point; the driver must flag it.
        let pose = CameraPose::from_rotvec(Vec3::new(0.0, 0.3, 0.0), Vec3::zeros());
        let mut rng = crate::rng::rng_from(9, "planar");
        let points: Vec<Point3> = (0..7)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(2.0..6.0),
                )
            })
            .collect();
        let corr: [Correspondence; 7] = make_correspondences(&pose, &points).try_into().unwrap();
        match seven_point(&corr) {
            Err(DegenerateConfiguration) => {}
            Ok(fs) => {
                // Any fresh point must also have (near) zero residual: the
                // epipolar constraint carries no information here.
                let extra = Point3::new(0.3, -0.2, 3.0);
                let ec = make_correspondences(&pose, &[extra]);
                for f in fs {
                    assert!(f.epipolar_residual(&ec[0].a, &ec[0].b).abs() < 1e-8);
                }
            }
        }
    }
}
