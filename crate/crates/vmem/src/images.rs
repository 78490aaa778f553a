//! PNG encoding of frames and false-color surfel-index images.

use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};
use vmem_core::raster::{IdImage, EMPTY};
use vmem_core::{RgbImage, SurfelStore};

use crate::error::Result;
use crate::fsio::write_atomic;

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf).write_image(&img.data, img.width, img.height, ExtendedColorType::Rgb8)?;
    Ok(buf)
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    Ok(RgbImage {
        width: img.width(),
        height: img.height(),
        data: img.into_raw(),
    })
}

/// Stable, never-black color for a frame index.
pub fn palette(frame: u32) -> [u8; 3] {
    let mut z = (frame as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let c = [z as u8, (z >> 8) as u8, (z >> 16) as u8];
    if c == [0, 0, 0] {
        [1, 1, 1]
    } else {
        c
    }
}

/// Colors each pixel by the newest frame index of its surfel; empty pixels stay black.
pub fn id_image_colors(image: &IdImage, store: &SurfelStore) -> RgbImage {
    let mut out = RgbImage::new(image.width, image.height);
    for (i, &id) in image.ids.iter().enumerate() {
        if id == EMPTY {
            continue;
        }
        if let Some(&f) = store.surfel(id).views.last() {
            let (x, y) = (i as u32 % image.width, i as u32 / image.width);
            out.put_pixel(x, y, palette(f));
        }
    }
    out
}

pub fn dump_id_image(image: &IdImage, store: &SurfelStore, path: &Path) -> Result<()> {
    dump_frame(&id_image_colors(image, store), path)
}

pub fn dump_frame(img: &RgbImage, path: &Path) -> Result<()> {
    let bytes = encode_png(img)?;
    write_atomic(path, &bytes)
}
