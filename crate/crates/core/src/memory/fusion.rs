//! Attention fusion of a query against the episodic bank.
//!
//! Keys and values from every bank entry are stacked in room order, the
//! query rows attend over them with scaled dot-product attention
//! (`softmax(q·Kᵀ/√C)·V`), and the fused rows are concatenated with the
//! query rows along the feature axis, so an `n×m` query comes back as an
//! `n×2m` output.
//!
//! [`fuse_reference`] recomputes the same quantity along a deliberately
//! different numerical route — direct exponentials without the max shift,
//! compensated (Kahan) summation for every accumulation — and exists purely
//! as an oracle for the fast path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Mat;
use crate::memory::bank::MemoryBank;
use crate::memory::project::ProjectionParams;

/// How the query matrix is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryInit {
    /// Query map applied to the current working-memory features.
    WorkingMemory,
    /// The key matrix of the most recently committed bank entry.
    MostRecentEpisodic,
    /// An all-zero query (attention collapses to uniform weights).
    Zeros,
}

/// Dimensions and knobs shared across the memory pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Raw feature width (position-embedding width); divisible by 6.
    pub d: usize,
    /// Memory-space width; even, so timesteps can be embedded into it.
    pub m: usize,
    /// Working-memory token budget per room.
    pub n: usize,
    /// Synthetic camera views per room capture.
    pub v: usize,
    /// Patch edge length in pixels.
    pub p: usize,
    /// Base of the sinusoidal frequency ladders (time and position).
    pub time_embed_base: f64,
    /// Hard ceiling on tokens anywhere in the pipeline (candidate patches,
    /// stacked bank rows); exceeding it is an error, never a silent trim.
    pub token_cap: usize,
    /// Whether commits stamp entries with the time embedding.
    pub use_time_embed: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            d: 36,
            m: 16,
            n: 8,
            v: 2,
            p: 16,
            time_embed_base: 10_000.0,
            token_cap: 8192,
            use_time_embed: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        let fail = |what: &str| Err(FusionError::InvalidConfig(what.to_string()));
        if self.d == 0 || !self.d.is_multiple_of(6) {
            return fail("feature width d must be positive and divisible by 6");
        }
        if self.m == 0 || !self.m.is_multiple_of(2) {
            return fail("memory width m must be positive and even");
        }
        if self.n == 0 {
            return fail("token budget n must be positive");
        }
        if self.v == 0 {
            return fail("view count v must be positive");
        }
        if self.p == 0 {
            return fail("patch size p must be positive");
        }
        if !(self.time_embed_base.is_finite() && self.time_embed_base > 1.0) {
            return fail("time embedding base must be finite and greater than 1");
        }
        if self.token_cap < self.n {
            return fail("token cap must admit at least one room's tokens");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot fuse against an empty memory bank")]
    EmptyBank,
    #[error("query width {found} does not match bank width {expected}")]
    QueryWidth { found: usize, expected: usize },
    #[error("query init {0:?} needs working-memory features, but none were given")]
    MissingWorking(QueryInit),
    #[error("query init {0:?} needs projection parameters, but none were given")]
    MissingParams(QueryInit),
    #[error("working-memory features are {found_rows}×{found_cols}, expected width {expected}")]
    WorkingShape {
        found_rows: usize,
        found_cols: usize,
        expected: usize,
    },
    #[error("{tokens} tokens exceed the configured cap of {cap}")]
    CapacityExceeded { tokens: usize, cap: usize },
}

/// Everything the fusion step produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutput {
    /// `n×2m`: fused features concatenated with the query rows.
    pub fused: Mat,
    /// `n×T` attention weights, `T` = total bank rows in room order.
    pub weights: Mat,
    /// The `n×m` query that was attended.
    pub query: Mat,
}

/// Builds the query matrix for `init`.
///
/// `working` (raw `n×d` features) and `params` are required for
/// [`QueryInit::WorkingMemory`]; [`QueryInit::MostRecentEpisodic`] reads the
/// newest entry's key matrix; [`QueryInit::Zeros`] produces `config.n` rows
/// of zeros.
pub fn build_query(
    bank: &MemoryBank,
    init: QueryInit,
    working: Option<&Mat>,
    params: Option<&ProjectionParams>,
    config: &FusionConfig,
) -> Result<Mat, FusionError> {
    config.validate()?;
    if bank.is_empty() {
        return Err(FusionError::EmptyBank);
    }
    match init {
        QueryInit::WorkingMemory => {
            let working = working.ok_or(FusionError::MissingWorking(init))?;
            let params = params.ok_or(FusionError::MissingParams(init))?;
            if working.cols() != params.d {
                return Err(FusionError::WorkingShape {
                    found_rows: working.rows(),
                    found_cols: working.cols(),
                    expected: params.d,
                });
            }
            Ok(params.query(working))
        }
        QueryInit::MostRecentEpisodic => {
            Ok(bank.latest().expect("bank checked non-empty").key.clone())
        }
        QueryInit::Zeros => {
            let width = bank.width().expect("bank checked non-empty");
            Ok(Mat::zeros(config.n, width))
        }
    }
}

/// Row-wise softmax with the usual max shift; sequential accumulation order,
/// so results are reproducible bit-for-bit.
fn softmax_rows(scores: &Mat) -> Mat {
    let mut out = scores.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Fuses `query` against the bank: stacked keys/values in room order, scaled
/// dot-product attention, fused-plus-query concatenation.
pub fn fuse_detailed(
    bank: &MemoryBank,
    query: &Mat,
    config: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    config.validate()?;
    if bank.is_empty() {
        return Err(FusionError::EmptyBank);
    }
    let width = bank.width().expect("non-empty");
    if query.cols() != width {
        return Err(FusionError::QueryWidth {
            found: query.cols(),
            expected: width,
        });
    }
    let tokens = bank.total_rows();
    if tokens > config.token_cap {
        return Err(FusionError::CapacityExceeded {
            tokens,
            cap: config.token_cap,
        });
    }
    let keys: Vec<&Mat> = bank.entries().map(|e| &e.key).collect();
    let values: Vec<&Mat> = bank.entries().map(|e| &e.value).collect();
    let k = Mat::vstack(&keys);
    let v = Mat::vstack(&values);
    let scale = 1.0 / (width as f64).sqrt();
    let mut scores = query.matmul_nt(&k);
    scores.scale(scale);
    let weights = softmax_rows(&scores);
    let fused = weights.matmul(&v);
    Ok(FusionOutput {
        fused: Mat::hstack(&fused, query),
        weights,
        query: query.clone(),
    })
}

/// Convenience wrapper: builds the query for `init`, then fuses it.
pub fn fuse(
    bank: &MemoryBank,
    init: QueryInit,
    working: Option<&Mat>,
    params: Option<&ProjectionParams>,
    config: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    let query = build_query(bank, init, working, params, config)?;
    fuse_detailed(bank, &query, config)
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Oracle twin of [`fuse_detailed`]: same mathematical definition, different
/// numerical route (no max shift, Kahan-compensated sums, scalar loops).
/// Used in tests and behind the CLI's oracle flag; agreement within 1e-6 is
/// the acceptance bar.
pub fn fuse_reference(
    bank: &MemoryBank,
    query: &Mat,
    config: &FusionConfig,
) -> Result<FusionOutput, FusionError> {
    config.validate()?;
    if bank.is_empty() {
        return Err(FusionError::EmptyBank);
    }
    let width = bank.width().expect("non-empty");
    if query.cols() != width {
        return Err(FusionError::QueryWidth {
            found: query.cols(),
            expected: width,
        });
    }
    let tokens = bank.total_rows();
    if tokens > config.token_cap {
        return Err(FusionError::CapacityExceeded {
            tokens,
            cap: config.token_cap,
        });
    }
    // Row-major stacked copies, built entry by entry.
    let mut krows: Vec<Vec<f64>> = Vec::with_capacity(tokens);
    let mut vrows: Vec<Vec<f64>> = Vec::with_capacity(tokens);
    for entry in bank.entries() {
        for r in 0..entry.key.rows() {
            krows.push(entry.key.row(r).to_vec());
            vrows.push(entry.value.row(r).to_vec());
        }
    }
    let scale = 1.0 / (width as f64).sqrt();
    let n = query.rows();
    let mut weights = Mat::zeros(n, tokens);
    let mut fused = Mat::zeros(n, 2 * width);
    for r in 0..n {
        let qrow = query.row(r);
        // Scores and their exponentials, un-shifted.
        let mut exps = vec![0.0; tokens];
        let mut denom = Kahan::default();
        for (j, krow) in krows.iter().enumerate() {
            let mut dot = Kahan::default();
            for (a, b) in qrow.iter().zip(krow) {
                dot.add(a * b);
            }
            exps[j] = (dot.sum * scale).exp();
            denom.add(exps[j]);
        }
        for (j, e) in exps.iter().enumerate() {
            weights.set(r, j, e / denom.sum);
        }
        for c in 0..width {
            let mut acc = Kahan::default();
            for (j, vrow) in vrows.iter().enumerate() {
                acc.add(weights.get(r, j) * vrow[c]);
            }
            fused.set(r, c, acc.sum);
        }
        for (c, q) in qrow.iter().enumerate() {
            fused.set(r, width + c, *q);
        }
    }
    Ok(FusionOutput {
        fused,
        weights,
        query: query.clone(),
    })
}

/// Mean over query rows of the Shannon entropy (nats) of the attention
/// distribution; `0 · ln 0` counts as zero.
#[must_use]
pub fn attention_entropy(weights: &Mat) -> f64 {
    if weights.rows() == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for r in 0..weights.rows() {
        let mut h = 0.0;
        for &a in weights.row(r) {
            if a > 0.0 {
                h -= a * a.ln();
            }
        }
        total += h;
    }
    total / weights.rows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::bank::TimeEmbed;
    use crate::synthetic::SyntheticRng;

    fn small_config(m: usize, n: usize) -> FusionConfig {
        FusionConfig {
            d: 6,
            m,
            n,
            ..FusionConfig::default()
        }
    }

    fn seeded_bank(seed: u64, rooms: &[u32], n: usize, m: usize, te: TimeEmbed) -> MemoryBank {
        let mut rng = SyntheticRng::from_seed(seed);
        let mut bank = MemoryBank::new();
        for (i, &room) in rooms.iter().enumerate() {
            let k = rng.mat(n, m, -1.0, 1.0);
            let v = rng.mat(n, m, -1.0, 1.0);
            bank.commit(room, (i + 1) as u64, k, v, te).unwrap();
        }
        bank
    }

    #[test]
    fn weights_are_row_stochastic() {
        let bank = seeded_bank(3, &[1, 2, 5], 3, 4, TimeEmbed::None);
        let mut rng = SyntheticRng::from_seed(9);
        let q = rng.mat(2, 4, -1.0, 1.0);
        let out = fuse_detailed(&bank, &q, &small_config(4, 2)).unwrap();
        assert_eq!((out.weights.rows(), out.weights.cols()), (2, 9));
        for r in 0..2 {
            let sum: f64 = out.weights.row(r).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "row {r} sums to {sum}");
        }
        assert_eq!((out.fused.rows(), out.fused.cols()), (2, 8));
    }

    #[test]
    fn zero_query_attends_uniformly() {
        let bank = seeded_bank(5, &[1, 4], 2, 4, TimeEmbed::None);
        let cfg = small_config(4, 3);
        let q = build_query(&bank, QueryInit::Zeros, None, None, &cfg).unwrap();
        assert_eq!((q.rows(), q.cols()), (3, 4));
        let out = fuse_detailed(&bank, &q, &cfg).unwrap();
        for r in 0..out.weights.rows() {
            for &w in out.weights.row(r) {
                assert!((w - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn latest_episodic_query_is_the_newest_key() {
        let bank = seeded_bank(8, &[9, 2, 6], 2, 4, TimeEmbed::None);
        let cfg = small_config(4, 2);
        let q = build_query(&bank, QueryInit::MostRecentEpisodic, None, None, &cfg).unwrap();
        assert_eq!(q, bank.get(6).unwrap().key);
    }

    #[test]
    fn single_entry_attention_returns_its_value_rows() {
        // With one key row, softmax over one logit is exactly 1, so the
        // fused half equals the value row bit-for-bit.
        let bank = seeded_bank(11, &[3], 1, 4, TimeEmbed::None);
        let mut rng = SyntheticRng::from_seed(2);
        let q = rng.mat(1, 4, -1.0, 1.0);
        let out = fuse_detailed(&bank, &q, &small_config(4, 1)).unwrap();
        assert_eq!(out.weights.get(0, 0), 1.0);
        let v = &bank.get(3).unwrap().value;
        for c in 0..4 {
            assert_eq!(out.fused.get(0, c), v.get(0, c));
            assert_eq!(out.fused.get(0, 4 + c), q.get(0, c));
        }
    }

    #[test]
    fn reference_path_agrees_with_fast_path() {
        for seed in 0..20 {
            let bank = seeded_bank(
                seed,
                &[1, 2, 3, 8],
                3,
                6,
                TimeEmbed::Sinusoidal { base: 10_000.0 },
            );
            let mut rng = SyntheticRng::from_seed(seed + 1000);
            let q = rng.mat(4, 6, -2.0, 2.0);
            let cfg = small_config(6, 4);
            let fast = fuse_detailed(&bank, &q, &cfg).unwrap();
            let slow = fuse_reference(&bank, &q, &cfg).unwrap();
            assert!(fast.fused.max_abs_diff(&slow.fused) <= 1e-6, "seed {seed}");
            assert!(fast.weights.max_abs_diff(&slow.weights) <= 1e-6);
        }
    }

    #[test]
    fn empty_bank_and_width_mismatch_are_errors() {
        let bank = MemoryBank::new();
        let q = Mat::zeros(1, 4);
        let cfg = small_config(4, 1);
        assert!(matches!(
            fuse_detailed(&bank, &q, &cfg),
            Err(FusionError::EmptyBank)
        ));
        let bank = seeded_bank(1, &[1], 2, 4, TimeEmbed::None);
        let q = Mat::zeros(1, 6);
        assert!(matches!(
            fuse_detailed(&bank, &q, &cfg),
            Err(FusionError::QueryWidth {
                found: 6,
                expected: 4
            })
        ));
    }

    #[test]
    fn token_cap_is_a_hard_error() {
        let bank = seeded_bank(1, &[1, 2, 3], 4, 4, TimeEmbed::None);
        let cfg = FusionConfig {
            d: 6,
            m: 4,
            n: 4,
            token_cap: 11,
            ..FusionConfig::default()
        };
        let q = Mat::zeros(2, 4);
        assert!(matches!(
            fuse_detailed(&bank, &q, &cfg),
            Err(FusionError::CapacityExceeded {
                tokens: 12,
                cap: 11
            })
        ));
    }

    #[test]
    fn entropy_of_uniform_weights_is_ln_t() {
        let bank = seeded_bank(4, &[1, 2], 2, 4, TimeEmbed::None);
        let cfg = small_config(4, 2);
        let q = Mat::zeros(2, 4);
        let out = fuse_detailed(&bank, &q, &cfg).unwrap();
        assert!((attention_entropy(&out.weights) - 4.0f64.ln()).abs() < 1e-12);
        // A sharply peaked distribution has near-zero entropy.
        let mut peaked = Mat::zeros(1, 4);
        peaked.set(0, 0, 1.0);
        assert_eq!(attention_entropy(&peaked), 0.0);
    }

    #[test]
    fn config_validation_rejects_bad_dimensions() {
        let bad = FusionConfig {
            d: 8,
            ..FusionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FusionConfig {
            m: 7,
            ..FusionConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FusionConfig {
            token_cap: 2,
            n: 8,
            ..FusionConfig::default()
        };
        assert!(bad.validate().is_err());
        FusionConfig::default().validate().unwrap();
    }
}
