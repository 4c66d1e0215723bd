//! Gray-level co-occurrence matrices computed three ways: a serial oracle,
//! data-parallel voting (shared atomic accumulator or privatized copies), and
//! a chunked two-stage pipeline that overlaps ingestion with voting.
//!
//! ```
//! use texture_forge_core::{
//!     compute_glcm_privatized, compute_glcm_serial, plan, quantize, synth_noise, Angle,
//!     GlcmParams, DEFAULT_SCRATCH_BUDGET,
//! };
//!
//! let img = quantize(&synth_noise(64, 64, 7).unwrap(), 8).unwrap();
//! let params = GlcmParams::new(1, Angle::Deg45, 8).unwrap();
//! let plan = plan(8, DEFAULT_SCRATCH_BUDGET, 2);
//! let (glcm, stats) = compute_glcm_privatized(&img, &params, &plan).unwrap();
//! assert_eq!(glcm, compute_glcm_serial(&img, &params).unwrap());
//! assert_eq!(stats.total_votes, 63 * 63);
//! ```

pub mod engine;
pub mod features;
pub mod glcm;
pub mod imaging;
pub mod pipeline;

pub use engine::{
    compute_glcm_privatized, compute_glcm_shared, contention_profile, detect_workers, plan,
    reduce_subglcms, vote_privatized, ContentionStats, ExecutionPlan, SubGlcms,
    DEFAULT_SCRATCH_BUDGET,
};
pub use features::{extract_features, FeatureError, FeatureVector};
pub use glcm::{
    compute_glcm_serial, neighbor_offset, normalize, symmetrize, valid_pair_count, Angle, Glcm,
    GlcmError, GlcmParams, NormalizedGlcm,
};
pub use imaging::{
    load_pgm, quantize, read_glcm_csv, synth_noise, synth_smooth, write_glcm_csv,
    write_normalized_csv, write_pgm, GrayImage, ImageError, QuantizedImage,
};
pub use pipeline::{
    compute_glcm_chunked, compute_glcm_chunked_sequential, merge_chunk_glcms, partition,
    ChunkSource, ChunkSpec, InMemorySource, LatencySource, PgmFileSource, PipelineError,
};
