//! Patch-token capture: turning a room into a budgeted set of embedded
//! feature tokens (the working memory for that room).
//!
//! A synthetic camera stands at the room's center and takes `v` views at
//! evenly spaced yaw angles. Each view is patchified on a fixed grid; every
//! patch casts a ray through its center pixel and intersects the room's box
//! from the inside, producing a world-space surface point. Patch features
//! are the position embeddings of those points — fully determined by the
//! geometry, no randomness anywhere — and farthest-point sampling trims the
//! candidate set down to the per-room token budget.

use crate::linalg::Mat;
use crate::memory::camera::{CameraModel, Pose};
use crate::memory::embed::position_embed;
use crate::memory::fps::fps;
use crate::memory::fusion::{FusionConfig, FusionError};
use crate::scene::{Aabb, Vec3};

/// Synthetic image width in pixels.
pub const IMAGE_WIDTH: usize = 64;
/// Synthetic image height in pixels.
pub const IMAGE_HEIGHT: usize = 48;

/// All candidate patch tokens captured from one room, before downsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub views: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    pub patch_size: usize,
    /// One row per patch across all views, view-major then row-major.
    pub features: Mat,
    /// The back-projected world point of each patch center, same order.
    pub positions: Vec<Vec3>,
}

/// The budgeted token set for one room.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingMemory {
    /// `n × d` embedded features.
    pub features: Mat,
    /// World points behind each kept token.
    pub positions: Vec<Vec3>,
    /// Indices into the capture's candidate list, in selection order.
    pub selected: Vec<usize>,
}

/// Distance along `origin + t·dir` to the inside of `aabb`'s boundary.
/// `origin` must be strictly inside. Axes with zero direction are already
/// inside their slab and never bound the exit.
fn exit_distance(aabb: &Aabb, origin: Vec3, dir: Vec3) -> f64 {
    let mut t_exit = f64::INFINITY;
    for (o, d, lo, hi) in [
        (origin.x, dir.x, aabb.min.x, aabb.max.x),
        (origin.y, dir.y, aabb.min.y, aabb.max.y),
        (origin.z, dir.z, aabb.min.z, aabb.max.z),
    ] {
        if d != 0.0 {
            let t = if d > 0.0 { (hi - o) / d } else { (lo - o) / d };
            t_exit = t_exit.min(t);
        }
    }
    t_exit
}

/// Captures a room: `config.v` views from the room center, patch grid of
/// `config.p`-pixel patches over a 64×48 image, features embedded at width
/// `config.d`.
///
/// # Panics
/// If the patch size does not tile the image.
#[must_use]
pub fn capture_room(room_aabb: &Aabb, config: &FusionConfig) -> PatchGrid {
    assert!(
        IMAGE_WIDTH.is_multiple_of(config.p) && IMAGE_HEIGHT.is_multiple_of(config.p),
        "patch size {} must tile the {IMAGE_WIDTH}×{IMAGE_HEIGHT} image",
        config.p
    );
    let grid_w = IMAGE_WIDTH / config.p;
    let grid_h = IMAGE_HEIGHT / config.p;
    let center = room_aabb.center();
    let fx = IMAGE_WIDTH as f64;
    let fy = IMAGE_WIDTH as f64;
    let cx = IMAGE_WIDTH as f64 / 2.0;
    let cy = IMAGE_HEIGHT as f64 / 2.0;
    let mut positions = Vec::with_capacity(config.v * grid_w * grid_h);
    for view in 0..config.v {
        let yaw = std::f64::consts::TAU * view as f64 / config.v as f64;
        let pose = Pose::from_yaw_translation(yaw, center);
        let camera = CameraModel {
            fx,
            fy,
            cx,
            cy,
            pose,
        };
        for gy in 0..grid_h {
            for gx in 0..grid_w {
                let u = (gx * config.p) as f64 + config.p as f64 / 2.0;
                let v = (gy * config.p) as f64 + config.p as f64 / 2.0;
                // Camera-space ray with unit forward component: its
                // parameter equals camera depth, so the exit distance *is*
                // the depth to feed back through the camera model.
                let ray_cam = Vec3::new((u - cx) / fx, (v - cy) / fy, 1.0);
                let rotated = pose.transform(ray_cam);
                let ray_world = Vec3::new(
                    rotated.x - center.x,
                    rotated.y - center.y,
                    rotated.z - center.z,
                );
                let depth = exit_distance(room_aabb, center, ray_world);
                let world = camera.unproject(u, v, depth).expect("positive depth");
                positions.push(world);
            }
        }
    }
    let features = position_embed(&positions, config.d, config.time_embed_base);
    PatchGrid {
        views: config.v,
        grid_w,
        grid_h,
        patch_size: config.p,
        features,
        positions,
    }
}

/// Downsamples a capture to the room's token budget with farthest-point
/// sampling (seeded at the first patch). The candidate count must respect
/// the pipeline token cap and cover the budget.
pub fn build_working_memory(
    grid: &PatchGrid,
    config: &FusionConfig,
) -> Result<WorkingMemory, FusionError> {
    config.validate()?;
    let candidates = grid.positions.len();
    if candidates > config.token_cap {
        return Err(FusionError::CapacityExceeded {
            tokens: candidates,
            cap: config.token_cap,
        });
    }
    if candidates < config.n {
        return Err(FusionError::InvalidConfig(format!(
            "capture produced {candidates} candidate tokens, below the budget of {}",
            config.n
        )));
    }
    let selected = fps(&grid.positions, config.n, 0);
    let features = Mat::from_fn(config.n, grid.features.cols(), |r, c| {
        grid.features.get(selected[r], c)
    });
    let positions = selected.iter().map(|&i| grid.positions[i]).collect();
    Ok(WorkingMemory {
        features,
        positions,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> Aabb {
        Aabb::new(Vec3::new(2.0, 0.0, -1.0), Vec3::new(6.0, 3.0, 5.0))
    }

    fn config() -> FusionConfig {
        FusionConfig {
            d: 12,
            n: 6,
            v: 2,
            p: 16,
            ..FusionConfig::default()
        }
    }

    #[test]
    fn capture_hits_the_room_boundary() {
        let aabb = room();
        let grid = capture_room(&aabb, &config());
        assert_eq!(grid.positions.len(), 2 * 4 * 3);
        let eps = 1e-9;
        for p in &grid.positions {
            assert!(aabb.contains_point(*p, eps), "{p:?} escaped the room");
            let on_face = (p.x - aabb.min.x).abs() < eps
                || (p.x - aabb.max.x).abs() < eps
                || (p.y - aabb.min.y).abs() < eps
                || (p.y - aabb.max.y).abs() < eps
                || (p.z - aabb.min.z).abs() < eps
                || (p.z - aabb.max.z).abs() < eps;
            assert!(on_face, "{p:?} not on a wall, floor, or ceiling");
        }
    }

    #[test]
    fn capture_is_deterministic() {
        let a = capture_room(&room(), &config());
        let b = capture_room(&room(), &config());
        assert_eq!(a, b);
    }

    #[test]
    fn views_look_in_different_directions() {
        let grid = capture_room(&room(), &config());
        let per_view = grid.grid_w * grid.grid_h;
        // Center-row patches of opposite views land on opposite walls.
        let first = grid.positions[0];
        let opposite = grid.positions[per_view];
        assert!((first.z - opposite.z).signum() != 0.0);
        assert!(first.z != opposite.z);
    }

    #[test]
    fn working_memory_respects_the_budget() {
        let grid = capture_room(&room(), &config());
        let wm = build_working_memory(&grid, &config()).unwrap();
        assert_eq!(wm.features.rows(), 6);
        assert_eq!(wm.positions.len(), 6);
        assert_eq!(wm.selected.len(), 6);
        assert_eq!(wm.selected[0], 0);
        // Selected rows are verbatim copies of the capture rows.
        for (r, &i) in wm.selected.iter().enumerate() {
            for c in 0..wm.features.cols() {
                assert_eq!(wm.features.get(r, c), grid.features.get(i, c));
            }
        }
    }

    #[test]
    fn token_cap_rejects_oversized_captures() {
        let grid = capture_room(&room(), &config());
        let tight = FusionConfig {
            token_cap: 10,
            n: 4,
            ..config()
        };
        assert!(matches!(
            build_working_memory(&grid, &tight),
            Err(FusionError::CapacityExceeded {
                tokens: 24,
                cap: 10
            })
        ));
    }

    #[test]
    fn budget_larger_than_candidates_is_an_error() {
        let grid = capture_room(&room(), &config());
        let greedy = FusionConfig { n: 100, ..config() };
        assert!(build_working_memory(&grid, &greedy).is_err());
    }
}
