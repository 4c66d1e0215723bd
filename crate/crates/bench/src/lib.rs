//! Shared fixtures for the criterion benches.

use texture_forge_core::{quantize, synth_noise, synth_smooth, QuantizedImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    Smooth,
    Noise,
}

impl Texture {
    pub fn label(self) -> &'static str {
        match self {
            Texture::Smooth => "smooth",
            Texture::Noise => "noise",
        }
    }
}

/// A square synthetic image quantized to `levels`, seed fixed at 1.
pub fn fixture(texture: Texture, size: usize, levels: usize) -> QuantizedImage {
    let raw = match texture {
        Texture::Smooth => synth_smooth(size, size, 1),
        Texture::Noise => synth_noise(size, size, 1),
    }
    .expect("fixture size is at least 2");
    quantize(&raw, levels).expect("fixture levels in range")
}
