//! Desk-scale dual cross-attention occupancy VAE.
//!
//! Surface clouds are split into uniform (`P_u`) and salient (`P_a`) parts;
//! a query set `P_s` drawn from both attends to each part through its own
//! cross-attention and the results are summed. Self-attention layers and
//! Gaussian heads produce the latent set `z`, which an occupancy decoder
//! queries at arbitrary points of `[-1, 1]³`.

pub mod checkpoint;
mod features;
pub mod gradcheck;
pub mod mcubes;
mod model;
pub mod occupancy;
mod params;
pub mod tape;
mod train;

pub use checkpoint::{from_checkpoint_bytes, load_checkpoint, save_checkpoint, to_checkpoint_bytes};
pub use features::{build_ps, fourier_embed, fourier_width, split_labels};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use mcubes::{extract_isosurface, extract_isosurface_banded, marching_cubes, VertexPlacement};
pub use model::{
    kl_divergence, standard_normal, AttentionBlock, CrossAttention, EncoderConfig, EncoderInput, LatentCode, Layout, LossParts,
    Model, SALIENT_PREFIX,
};
pub use occupancy::{sample_queries, OccupancyBatch, OccupancyOracle, DEFAULT_NEAR_SIGMA};
pub use params::{Adam, Linear, Norm, ParamStore};
pub use train::{
    arm_cloud, extract_mesh, extract_mesh_with, occupancy_accuracy, prepare_shape, reconstruction_fscore, toy_dataset, train_toy,
    Arm, EpochLog, PreparedShape, Profile, ToyDataset, TrainConfig, TrainOutcome, TrainReport, DEFAULT_KL_WEIGHT,
};

#[cfg(test)]
mod tests;
