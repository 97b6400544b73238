//! Synthetic videos and proposal pools written in the catalog layout.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{frame_file, Catalog};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::overlay::{write_mask_png, write_png};
use crate::proposals::{synthesize_proposals, ManifestEntry, PoolManifest, SynthConfig};
use crate::shapes::random_object;

/// Stable seed for one (run seed, label, index) triple.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub objects: usize,
    /// Maximum per-frame displacement along each axis, in pixels.
    pub max_speed: i64,
    /// Write frame images as well as masks.
    pub images: bool,
}

impl Default for VideoSpec {
    fn default() -> Self {
        VideoSpec {
            width: 128,
            height: 96,
            frames: 20,
            objects: 1,
            max_speed: 2,
            images: true,
        }
    }
}

const PALETTE: [[u8; 3]; 6] = [
    [214, 96, 77],
    [67, 147, 195],
    [120, 190, 90],
    [230, 180, 60],
    [150, 110, 190],
    [90, 200, 200],
];

/// Translating random objects over a noisy background. Objects that drift
/// fully out of frame simply lose their ground truth for those frames.
pub fn write_synthetic_video(root: &Path, video: &str, spec: &VideoSpec, seed: u64) -> Result<()> {
    if spec.width == 0 || spec.height == 0 || spec.frames == 0 || spec.objects == 0 {
        return Err(Error::invalid("video spec needs nonzero size, frames and objects"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, video, 0));
    let objects: Vec<(BinaryMask, i64, i64)> = (0..spec.objects)
        .map(|_| {
            let m = random_object(spec.width, spec.height, &mut rng);
            let vx = rng.random_range(-spec.max_speed..=spec.max_speed);
            let vy = rng.random_range(-spec.max_speed..=spec.max_speed);
            (m, vx, vy)
        })
        .collect();
    let noise: Vec<u8> = (0..spec.width * spec.height).map(|_| rng.random_range(0..24)).collect();
    let vdir = root.join(video);
    for t in 0..spec.frames {
        let mut img = spec.images.then(|| {
            RgbImage::from_fn(spec.width as u32, spec.height as u32, |x, y| {
                let n = noise[y as usize * spec.width + x as usize];
                Rgb([60 + n, 64 + n, 70 + n])
            })
        });
        for (i, (m, vx, vy)) in objects.iter().enumerate() {
            let moved = m.translated(vx * t as i64, vy * t as i64);
            if moved.is_empty() {
                continue;
            }
            write_mask_png(&moved, &vdir.join("gt").join(format!("obj{i}")).join(frame_file(t, "png")))?;
            if let Some(img) = img.as_mut() {
                let c = PALETTE[i % PALETTE.len()];
                for p in moved.iter_ones() {
                    img.put_pixel(p.x, p.y, Rgb(c));
                }
            }
        }
        if let Some(img) = img {
            write_png(img, &vdir.join("frames").join(frame_file(t, "png")))?;
        }
    }
    Ok(())
}

/// Write a proposal manifest for every annotated frame of `video`, drawing
/// proposals around each object present. Returns the number of manifests.
pub fn write_synthetic_pools(catalog: &Catalog, video: &str, config: &SynthConfig, seed: u64) -> Result<usize> {
    let v = catalog.video(video)?;
    let frames: std::collections::BTreeSet<usize> = v.objects.values().flatten().copied().collect();
    if frames.is_empty() {
        return Err(Error::invalid(format!("video {video:?} has no ground truth to synthesize from")));
    }
    for &f in &frames {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, video, f as u64));
        let mut entries = Vec::new();
        let mut dims = None;
        for (obj, obj_frames) in &v.objects {
            if !obj_frames.contains(&f) {
                continue;
            }
            let gt = catalog.load_gt(video, obj, f)?;
            dims = Some(gt.dims());
            for p in synthesize_proposals(&gt, config, &mut rng)? {
                entries.push(ManifestEntry::new(entries.len() as u64, &p.input.mask, p.input.objectness, p.input.source));
            }
        }
        let (width, height) = dims.expect("frame has an object");
        let image = v
            .image_frames
            .contains(&f)
            .then(|| format!("../frames/{}", frame_file(f, "png")));
        let manifest = PoolManifest {
            frame: f,
            image,
            width,
            height,
            proposals: entries,
        };
        manifest.write(&catalog.pool_path(video, f))?;
    }
    Ok(frames.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposals::{FramePools, IngestOptions};

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
        assert_ne!(derive_seed(1, "a", 0), derive_seed(1, "b", 0));
        assert_ne!(derive_seed(1, "a", 0), derive_seed(2, "a", 0));
        assert_eq!(derive_seed(7, "clip", 3), derive_seed(7, "clip", 3));
    }

    #[test]
    fn synthetic_video_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = VideoSpec {
            width: 64,
            height: 48,
            frames: 4,
            objects: 2,
            ..Default::default()
        };
        write_synthetic_video(dir.path(), "v", &spec, 3).unwrap();
        let cat = Catalog::scan(dir.path()).unwrap();
        let v = cat.video("v").unwrap();
        assert_eq!(v.objects.len(), 2);
        assert_eq!(v.image_frames.len(), 4);
        let cfg = SynthConfig {
            distractor: 10,
            ..Default::default()
        };
        assert_eq!(write_synthetic_pools(&cat, "v", &cfg, 5).unwrap(), 4);
        let first = std::fs::read(cat.pool_path("v", 0)).unwrap();
        write_synthetic_pools(&cat, "v", &cfg, 5).unwrap();
        assert_eq!(first, std::fs::read(cat.pool_path("v", 0)).unwrap());

        let cat = Catalog::scan(dir.path()).unwrap();
        cat.validate(&IngestOptions::default()).unwrap();
        let pools = cat.pools("v", IngestOptions::default()).unwrap();
        let p = pools.pool(0).unwrap();
        assert!(p.image().unwrap().ends_with("frames/00000.png"));
        // 20 proposals per object present in the frame
        assert_eq!(p.len() % 20, 0);
    }
}
