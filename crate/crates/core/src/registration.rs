//! Closed-form rigid registration of corresponding point sets (Horn's
//! quaternion method).

use crate::geometry::{CameraPose, Quaternion};
use crate::math::{symmetric_eigen4, Vec3};

/// Best rigid transform `T` with `dst ≈ T(src)` in the least-squares sense.
///
/// Returns `None` for fewer than three correspondences or mismatched lengths.
pub fn register_rigid(src: &[Vec3], dst: &[Vec3]) -> Option<CameraPose> {
    if src.len() != dst.len() || src.len() < 3 {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vec3::ZERO, |a, &p| a + p) / n;
    let cd = dst.iter().fold(Vec3::ZERO, |a, &p| a + p) / n;

    let mut s = [[0.0; 3]; 3];
    for (a, b) in src.iter().zip(dst) {
        let a = *a - cs;
        let b = *b - cd;
        let (av, bv) = (a.to_array(), b.to_array());
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += av[i] * bv[j];
            }
        }
    }
    let [[sxx, sxy, sxz], [syx, syy, syz], [szx, szy, szz]] = s;
    let k = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    let (vals, vecs) = symmetric_eigen4(k);
    let best = (0..4).max_by(|&a, &b| vals[a].total_cmp(&vals[b]))?;
    let q = Quaternion::new(vecs[0][best], vecs[1][best], vecs[2][best], vecs[3][best]).ok()?;
    let t = cd - q.rotate(cs);
    Some(CameraPose::new(q, t))
}
