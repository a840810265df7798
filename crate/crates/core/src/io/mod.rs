//! File formats and synthetic test data.

mod cube;
mod pgm;
mod synth;

pub use cube::{
    load_cube, load_raw_cube, read_cube, save_cube, write_cube, CubeHeader, Interleave, SampleFormat, CUBE_HEADER_LEN,
    CUBE_MAGIC, CUBE_VERSION,
};
pub use pgm::{load_image, read_pgm, save_image, write_pgm};
pub use synth::{synth_cube, synth_image, CubeProfile, ImageProfile, SYNTH_VERSION};
