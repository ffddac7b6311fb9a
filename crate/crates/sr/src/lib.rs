//! Super-resolution preprocessing: a LISTA-based sparse-coding network for
//! lifting small images, bicubic resampling, binary PPM/PGM I/O, and the
//! histogram / PSNR checks used to judge the result.

pub mod error;
pub mod qa;
pub mod raster;
pub mod resize;
pub mod scn;
pub mod synthetic;

pub use error::{Result, SrError};
pub use qa::{histogram, histogram_distance, psnr, simulate_sr_roundtrip, upscale_with};
pub use raster::{PnmHeader, RasterImage};
pub use resize::resize;
pub use scn::{
    lista_encode, soft_threshold, super_resolve, train_scn, upscale_factor, PatchPair, ScnConfig,
    ScnParams, TrainedScn,
};
