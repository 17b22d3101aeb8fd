//! Patch embedding, frozen encoder and projection to the fusion width.

use std::path::Path;

use ndarray::{s, Array3};
use rand::Rng;

use crate::autograd::{Mat, Precision, Tape};
use crate::block::{block_forward, init_block, BlockShape};
use crate::config::VisionConfig;
use crate::params::{normal, Binder, ParamStore};
use crate::ModelError;

pub const PATCH_EMBED: &str = "vision.patch_embed";
pub const POS_EMBED: &str = "vision.pos_embed";
pub const CLASS_TOKEN: &str = "vision.class_token";
pub const PROJECTION: &str = "vision.projection";

/// Init scale of the frozen encoder weights.
const VISION_INIT_STD: f64 = 0.02;

/// `H × W × 3` pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub pixels: Array3<f64>,
}

impl Image {
    pub fn new(pixels: Array3<f64>) -> Result<Self, ModelError> {
        if pixels.dim().2 != 3 {
            return Err(ModelError::DimensionError(format!(
                "image must have 3 channels, got {}",
                pixels.dim().2
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ModelError::NumericalError("pixel values outside [0, 1]".into()));
        }
        Ok(Self { pixels })
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }
}

/// Decodes a PNG/JPEG file and resizes it (bilinear) to `size × size`.
pub fn load_image(path: &Path, size: usize) -> Result<Image, ModelError> {
    let err = |message: String| ModelError::Image {
        path: path.display().to_string(),
        message,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    let rgb = img
        .resize_exact(size as u32, size as u32, image::imageops::FilterType::Triangle)
        .to_rgb8();
    let pixels = Array3::from_shape_fn((size, size, 3), |(y, x, c)| {
        f64::from(rgb.get_pixel(x as u32, y as u32)[c]) / 255.0
    });
    Image::new(pixels)
}

/// Flattened patches, one row per patch, grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    pub patches: Mat,
    pub patch_size: usize,
    pub grid: (usize, usize),
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.patches.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.nrows() == 0
    }
}

/// Splits an image into `P × P` patches; each row is row-major pixels, RGB innermost.
pub fn patchify(image: &Image, patch: usize) -> Result<PatchSequence, ModelError> {
    let (h, w, c) = image.pixels.dim();
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(ModelError::PatchGridError {
            height: h,
            width: w,
            patch,
        });
    }
    let (gr, gc) = (h / patch, w / patch);
    let mut patches = Mat::zeros((gr * gc, patch * patch * c));
    for pr in 0..gr {
        for pc in 0..gc {
            let block = image
                .pixels
                .slice(s![pr * patch..(pr + 1) * patch, pc * patch..(pc + 1) * patch, ..]);
            let mut row = patches.row_mut(pr * gc + pc);
            for (dst, src) in row.iter_mut().zip(block.iter()) {
                *dst = *src;
            }
        }
    }
    Ok(PatchSequence {
        patches,
        patch_size: patch,
        grid: (gr, gc),
    })
}

/// Prepends the class embedding to the projected patches and adds positions.
pub fn embed_patches(patches: &Mat, embed: &Mat, pos: &Mat, class_token: &Mat) -> Result<Mat, ModelError> {
    let (n, pd) = patches.dim();
    let d = embed.ncols();
    if embed.nrows() != pd {
        return Err(ModelError::DimensionError(format!(
            "patch length {pd} vs embedding rows {}",
            embed.nrows()
        )));
    }
    if pos.dim() != (n + 1, d) || class_token.dim() != (1, d) {
        return Err(ModelError::DimensionError(format!(
            "positions {:?} / class token {:?} for {} rows of width {d}",
            pos.dim(),
            class_token.dim(),
            n + 1
        )));
    }
    let mut v0 = Mat::zeros((n + 1, d));
    v0.row_mut(0).assign(&class_token.row(0));
    v0.slice_mut(s![1.., ..]).assign(&patches.dot(embed));
    Ok(v0 + pos)
}

/// Runs the frozen encoder blocks (bidirectional attention) and a final
/// layer norm; with zero layers the input is returned unchanged.
pub fn encode(v0: &Mat, store: &ParamStore, cfg: &VisionConfig, precision: Precision) -> Result<Mat, ModelError> {
    if v0.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NumericalError("encoder input".into()));
    }
    if cfg.layers == 0 {
        return Ok(v0.clone());
    }
    if v0.ncols() != cfg.width {
        return Err(ModelError::DimensionError(format!(
            "encoder width {} vs input width {}",
            cfg.width,
            v0.ncols()
        )));
    }
    let mut tape = Tape::new(precision);
    let mut binder = Binder::new(store, false);
    let shape = BlockShape {
        width: cfg.width,
        hidden: 4 * cfg.width,
        heads: cfg.heads,
        causal: false,
    };
    let mut x = tape.leaf(v0.clone(), false);
    for layer in 0..cfg.layers {
        x = block_forward(&mut tape, &mut binder, &format!("vision.block{layer}"), x, &shape, None)?;
    }
    let g = binder.bind(&mut tape, "vision.final_ln_g")?;
    let b = binder.bind(&mut tape, "vision.final_ln_b")?;
    let out = tape.layer_norm(x, g, b);
    let out = tape.value(out).clone();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NumericalError("encoder output".into()));
    }
    Ok(out)
}

/// `features · W_proj`.
pub fn project(features: &Mat, w_proj: &Mat) -> Result<Mat, ModelError> {
    if features.ncols() != w_proj.nrows() {
        return Err(ModelError::DimensionError(format!(
            "features width {} vs projection rows {}",
            features.ncols(),
            w_proj.nrows()
        )));
    }
    Ok(features.dot(w_proj))
}

/// Pre-projection features for one image (all tokens, or the class token only).
pub fn image_features(
    image: &Image,
    store: &ParamStore,
    cfg: &VisionConfig,
    precision: Precision,
) -> Result<Mat, ModelError> {
    let patches = patchify(image, cfg.patch_size)?;
    let v0 = embed_patches(
        &patches.patches,
        store.get(PATCH_EMBED)?,
        store.get(POS_EMBED)?,
        store.get(CLASS_TOKEN)?,
    )?;
    let features = encode(&v0, store, cfg, precision)?;
    Ok(if cfg.class_token_only {
        features.slice(s![0..1, ..]).to_owned()
    } else {
        features
    })
}

/// Adds vision parameters: everything frozen except the projection.
pub fn init_vision_params(store: &mut ParamStore, cfg: &VisionConfig, d_v: usize, rng: &mut impl Rng) {
    let d = cfg.width;
    store.insert(PATCH_EMBED, normal(rng, cfg.patch_dim(), d, VISION_INIT_STD), true);
    store.insert(POS_EMBED, normal(rng, cfg.num_patches() + 1, d, VISION_INIT_STD), true);
    store.insert(CLASS_TOKEN, normal(rng, 1, d, VISION_INIT_STD), true);
    for layer in 0..cfg.layers {
        init_block(
            store,
            rng,
            &format!("vision.block{layer}"),
            d,
            4 * d,
            VISION_INIT_STD,
            VISION_INIT_STD,
        );
    }
    store.insert("vision.final_ln_g", Mat::ones((1, d)), true);
    store.insert("vision.final_ln_b", Mat::zeros((1, d)), true);
    store.insert(PROJECTION, normal(rng, d, d_v, 1.0 / (d as f64).sqrt()), false);
}
