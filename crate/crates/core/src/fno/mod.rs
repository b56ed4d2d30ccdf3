//! One-dimensional Fourier neural operator mapping voltage trajectories to
//! displacement (and latent) trajectories, with hand-derived adjoints and
//! Adam training.

mod hyper;
mod io;
mod model;
mod spectral;
mod train;

pub use hyper::{Activation, FnoHyperparams};
pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use model::{forward, loss, normalize_inputs, predict, FnoModel, Normalization, Prediction};
pub use spectral::{spectral_conv_reference, SpectralBasis};
pub use train::{fit, train, TrainReport};
