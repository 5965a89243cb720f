//! Sinusoidal embeddings for commit times and 3D positions.
//!
//! Both embeddings interleave sine/cosine pairs over a geometric frequency
//! ladder: pair `i` of a width-`m` block uses angle `x / base^(2i/m)`. The
//! position embedding applies that block per axis (x, y, z) and
//! concatenates, so its width must be divisible by 6 (three axes, even
//! block).

use crate::linalg::Mat;
use crate::scene::Vec3;

/// Fills `out` (even length) with interleaved sin/cos of `value` over the
/// standard frequency ladder.
fn sinusoid_into(out: &mut [f64], value: f64, base: f64) {
    debug_assert!(out.len().is_multiple_of(2));
    let m = out.len() as f64;
    for i in 0..out.len() / 2 {
        let freq = base.powf(-(2.0 * i as f64) / m);
        let angle = value * freq;
        out[2 * i] = angle.sin();
        out[2 * i + 1] = angle.cos();
    }
}

/// Embedding of a commit time `t` as a length-`m` vector (`m` even).
/// `t = 0` is a legal timestep and embeds to `[0, 1, 0, 1, ...]`.
///
/// # Panics
/// If `m` is zero or odd.
#[must_use]
pub fn time_embed(t: u64, m: usize, base: f64) -> Vec<f64> {
    assert!(
        m > 0 && m.is_multiple_of(2),
        "time embedding width must be even and positive, got {m}"
    );
    let mut out = vec![0.0; m];
    // u64 → f64 is exact for any timestep this library can reach.
    sinusoid_into(&mut out, t as f64, base);
    out
}

/// Embedding of 3D points as an `n × d` matrix: per-axis sinusoidal blocks
/// of width `d/3`, concatenated x-block, y-block, z-block.
///
/// # Panics
/// If `d` is zero or not divisible by 6.
#[must_use]
pub fn position_embed(points: &[Vec3], d: usize, base: f64) -> Mat {
    assert!(
        d > 0 && d.is_multiple_of(6),
        "position embedding width must be divisible by 6, got {d}"
    );
    let block = d / 3;
    let mut out = Mat::zeros(points.len(), d);
    for (r, p) in points.iter().enumerate() {
        let row = out.row_mut(r);
        sinusoid_into(&mut row[0..block], p.x, base);
        sinusoid_into(&mut row[block..2 * block], p.y, base);
        sinusoid_into(&mut row[2 * block..3 * block], p.z, base);
    }
    out
}
