use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{rotation_distance, translation_distance, CameraPose, Quaternion};
use crate::math::{Mat3, Vec3};
use crate::world::Scene;

use super::episode::{check_log, frame_of, EpisodeConfig, EpisodeLog};
use super::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameMetrics {
    pub frame: u32,
    pub step: usize,
    pub coverage: f64,
    pub r_dist: f64,
    pub t_dist: f64,
    pub retrieved: Vec<u32>,
    /// Whether the retrieved set reached the outbound visit (return-leg frames only).
    pub revisit_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub strategy: alloc::string::String,
    pub k: usize,
    pub scene: alloc::string::String,
    pub trajectory: alloc::string::String,
    pub stride: usize,
    pub frames: Vec<FrameMetrics>,
    pub mean_coverage: f64,
    /// Over all return-leg frames of a cycle trajectory.
    pub revisit_recall: Option<f64>,
    /// Over the far half of the return leg.
    pub far_revisit_recall: Option<f64>,
    pub mean_r_dist: f64,
    pub mean_t_dist: f64,
    pub config: EpisodeConfig,
}

/// Pose of `p` expressed relative to `origin`, as a rotation matrix and translation.
fn relative(origin: &CameraPose, p: &CameraPose) -> (Mat3, Vec3) {
    let r0 = origin.rotation_matrix();
    let r = r0.transpose().mul_mat(&p.rotation_matrix());
    (r, r0.tr_mul_vec(p.translation - origin.translation))
}

/// `R_dist` and normalized `t_dist` per frame between commanded and realized
/// poses, both taken relative to the first frame. Translations are divided by
/// the distance of the furthest frame of their own sequence.
pub fn pose_errors(commanded: &[CameraPose], realized: &[CameraPose]) -> Vec<(f64, f64)> {
    assert_eq!(commanded.len(), realized.len());
    if commanded.is_empty() {
        return Vec::new();
    }
    let rel = |seq: &[CameraPose]| -> Vec<(Mat3, Vec3)> { seq.iter().map(|p| relative(&seq[0], p)).collect() };
    let (c, r) = (rel(commanded), rel(realized));
    let scale = |v: &[(Mat3, Vec3)]| {
        let m = v.iter().map(|(_, t)| t.norm()).fold(0.0, f64::max);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let (sc, sr) = (scale(&c), scale(&r));
    c.iter()
        .zip(&r)
        .map(|((rc, tc), (rr, tr))| {
            let rd = rotation_distance(&Quaternion::from_matrix(rc), &Quaternion::from_matrix(rr));
            (rd, translation_distance(*tc / sc, *tr / sr))
        })
        .collect()
}

/// Combined pose distance used to match return frames to outbound frames.
fn pose_gap(a: &CameraPose, b: &CameraPose, diagonal: f64) -> f64 {
    rotation_distance(&a.rotation, &b.rotation) + translation_distance(a.translation, b.translation) / diagonal
}

/// For each return-leg camera index `j`, the nearest outbound index and
/// whether `j` lies in the far half of the return leg.
pub fn outbound_matches(trajectory: &Trajectory, diagonal: f64) -> Vec<(usize, usize, bool)> {
    let Some(turn) = trajectory.cycle_turn else {
        return Vec::new();
    };
    let cams = &trajectory.cameras;
    (turn + 1..cams.len())
        .map(|j| {
            let m = (0..=turn)
                .min_by(|&a, &b| {
                    pose_gap(&cams[j].pose, &cams[a].pose, diagonal)
                        .total_cmp(&pose_gap(&cams[j].pose, &cams[b].pose, diagonal))
                })
                .expect("outbound leg is nonempty");
            let position = j - turn;
            (j, m, 2 * position > turn)
        })
        .collect()
}

/// Scores an episode: coverage, revisit recall and pose errors per frame,
/// keeping frames whose offset from the first generated frame is a multiple of `stride`.
pub fn score_episode(log: &EpisodeLog, scene: &Scene, trajectory: &Trajectory, stride: usize) -> Result<MetricsReport> {
    check_log(log, scene, trajectory)?;
    let stride = stride.max(1);
    let m = trajectory.step_size;

    let mut commanded = alloc::vec![trajectory.cameras[0].pose];
    let mut realized = alloc::vec![log.input_realized];
    for s in &log.steps {
        for (i, &f) in s.frames.iter().enumerate() {
            commanded.push(trajectory.cameras[f as usize - 1].pose);
            realized.push(s.realized[i]);
        }
    }
    let errors = pose_errors(&commanded, &realized);

    let matches = outbound_matches(trajectory, scene.diagonal());
    let revisit = |frame: u32, retrieved: &[u32]| -> Option<(bool, bool)> {
        let &(_, mo, far) = matches.iter().find(|(j, _, _)| frame_of(*j) == frame)?;
        let lo = mo.saturating_sub(m - 1);
        let hi = (mo + m - 1).min(trajectory.cycle_turn.unwrap_or(0));
        let hit = retrieved.iter().any(|&r| (frame_of(lo)..=frame_of(hi)).contains(&r));
        Some((hit, far))
    };

    let mut frames = Vec::new();
    let (mut all_hits, mut all_n, mut far_hits, mut far_n) = (0usize, 0usize, 0usize, 0usize);
    for s in &log.steps {
        for (i, &f) in s.frames.iter().enumerate() {
            if (f as usize - 2) % stride != 0 {
                continue;
            }
            let rv = revisit(f, &s.retrieved);
            if let Some((hit, far)) = rv {
                all_n += 1;
                all_hits += hit as usize;
                if far {
                    far_n += 1;
                    far_hits += hit as usize;
                }
            }
            let (r_dist, t_dist) = errors[f as usize - 1];
            frames.push(FrameMetrics {
                frame: f,
                step: s.step,
                coverage: s.coverage[i],
                r_dist,
                t_dist,
                retrieved: s.retrieved.clone(),
                revisit_hit: rv.map(|(h, _)| h),
            });
        }
    }
    let mean = |v: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let ratio = |h: usize, n: usize| (n > 0).then(|| h as f64 / n as f64);
    Ok(MetricsReport {
        strategy: log.config.label().into(),
        k: log.config.retrieval.k,
        scene: log.scene.clone(),
        trajectory: log.trajectory.clone(),
        stride,
        mean_coverage: mean(&mut frames.iter().map(|f| f.coverage)),
        revisit_recall: ratio(all_hits, all_n),
        far_revisit_recall: ratio(far_hits, far_n),
        mean_r_dist: mean(&mut frames.iter().map(|f| f.r_dist)),
        mean_t_dist: mean(&mut frames.iter().map(|f| f.t_dist)),
        frames,
        config: log.config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;

    fn pose(yaw: f64, x: f64) -> CameraPose {
        CameraPose::new(Quaternion::from_axis_angle(Vec3::Z, yaw), Vec3::new(x, 0.0, 0.0))
    }

    #[test]
    fn identical_sequences_have_zero_error() {
        let seq: Vec<_> = (0..5).map(|i| pose(0.3 * i as f64, i as f64)).collect();
        for (r, t) in pose_errors(&seq, &seq) {
            assert!(r < 1e-6 && t < 1e-9);
        }
    }

    #[test]
    fn rigidly_moved_realization_is_invisible() {
        // errors are relative to the first frame, so a global offset cancels
        let seq: Vec<_> = (0..4).map(|i| pose(0.2 * i as f64, i as f64)).collect();
        let shift = pose(0.7, 3.0);
        let moved: Vec<_> = seq
            .iter()
            .map(|p| {
                let r = shift.rotation_matrix().mul_mat(&p.rotation_matrix());
                CameraPose::new(Quaternion::from_matrix(&r), shift.to_world(p.translation))
            })
            .collect();
        for (r, t) in pose_errors(&seq, &moved) {
            assert!(r < 1e-6 && t < 1e-9, "{r} {t}");
        }
    }

    #[test]
    fn rotation_error_reported_in_radians() {
        let a = [pose(0.0, 0.0), pose(0.0, 1.0)];
        let b = [pose(0.0, 0.0), pose(0.5, 1.0)];
        let e = pose_errors(&a, &b);
        assert!((e[1].0 - 0.5).abs() < 1e-9);
        assert!(e[1].1 < 1e-12);
    }
}
