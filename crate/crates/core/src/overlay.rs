//! PNG rendering: mask overlays, contour heat-maps, thumbnails, and mask I/O.

use std::io::Cursor;
use std::path::Path;

use image::imageops::FilterType;
use image::{GrayImage, ImageFormat, Luma, Rgb, RgbImage, Rgba, RgbaImage};

use crate::carving::{ContourHeatMap, HEATMAP_DEPTH};
use crate::error::{Error, Result};
use crate::mask::{boundary_pixels, BinaryMask, Pixel};
use crate::proposals::ProposalPool;

pub const THUMBNAIL_MAX_EDGE: u32 = 256;
pub const OVERLAY_COLOR: [u8; 3] = [255, 40, 40];
pub const OVERLAY_ALPHA: f32 = 0.45;
const CLICK_COLOR: [u8; 3] = [230, 0, 0];

pub fn load_frame(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(other),
    })?;
    Ok(img.to_rgb8())
}

/// Stand-in for frames whose image is missing.
pub fn blank_frame(width: usize, height: usize) -> RgbImage {
    RgbImage::from_pixel(width as u32, height as u32, Rgb([96, 96, 96]))
}

fn check_dims(img: (u32, u32), mask: &BinaryMask) -> Result<()> {
    let found = (img.0 as usize, img.1 as usize);
    if found != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            found,
        });
    }
    Ok(())
}

/// Blend `color` into the masked pixels and outline the mask at full strength.
pub fn overlay_mask(frame: &RgbImage, mask: &BinaryMask, color: [u8; 3], alpha: f32) -> Result<RgbImage> {
    check_dims(frame.dimensions(), mask)?;
    let mut out = frame.clone();
    for p in mask.iter_ones() {
        let px = out.get_pixel_mut(p.x, p.y);
        for (v, &c) in px.0.iter_mut().zip(&color) {
            *v = (*v as f32 * (1.0 - alpha) + c as f32 * alpha).round() as u8;
        }
    }
    for p in boundary_pixels(mask).iter_ones() {
        out.put_pixel(p.x, p.y, Rgb(color));
    }
    Ok(out)
}

/// Small filled squares at the click positions.
pub fn draw_clicks(img: &mut RgbImage, clicks: &[Pixel]) {
    let (w, h) = img.dimensions();
    for c in clicks {
        for y in c.y.saturating_sub(1)..=(c.y + 1).min(h - 1) {
            for x in c.x.saturating_sub(1)..=(c.x + 1).min(w - 1) {
                img.put_pixel(x, y, Rgb(CLICK_COLOR));
            }
        }
    }
}

/// Blue for a single band through red for all of the top bands; zero is transparent.
pub fn heat_color(count: u8) -> Rgba<u8> {
    if count == 0 {
        return Rgba([0, 0, 0, 0]);
    }
    let t = (count.min(HEATMAP_DEPTH as u8) - 1) as f32 / (HEATMAP_DEPTH - 1) as f32;
    let r = (255.0 * t).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.6).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    Rgba([r, g, b, 170])
}

pub fn heatmap_image(h: &ContourHeatMap) -> RgbaImage {
    RgbaImage::from_fn(h.width as u32, h.height as u32, |x, y| heat_color(h.get(x as usize, y as usize)))
}

/// Downscale so the longer edge is at most `max_edge`. Smaller images are returned as is.
pub fn thumbnail(img: &RgbImage, max_edge: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    let long = w.max(h);
    if long <= max_edge {
        return img.clone();
    }
    let scale = max_edge as f64 / long as f64;
    let tw = ((w as f64 * scale).round() as u32).max(1);
    let th = ((h as f64 * scale).round() as u32).max(1);
    image::imageops::resize(img, tw, th, FilterType::Triangle)
}

pub fn png_bytes(img: impl Into<image::DynamicImage>) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    img.into().write_to(&mut buf, ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// 8-bit mask image: 255 for foreground, 0 elsewhere.
pub fn mask_image(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    })
}

pub fn write_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    write_png(image::DynamicImage::ImageLuma8(mask_image(mask)), path)
}

pub fn write_png(img: impl Into<image::DynamicImage>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bytes = png_bytes(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Any nonzero luma counts as foreground.
pub fn read_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?
        .to_luma8();
    BinaryMask::from_fn(img.width() as usize, img.height() as usize, |x, y| {
        img.get_pixel(x as u32, y as u32).0[0] != 0
    })
}

/// The pool's frame image, or a blank frame when it has none or it is unreadable.
pub fn pool_frame(pool: &ProposalPool) -> RgbImage {
    pool.image()
        .and_then(|p| load_frame(p).ok())
        .filter(|img| (img.width() as usize, img.height() as usize) == pool.dims())
        .unwrap_or_else(|| blank_frame(pool.width(), pool.height()))
}

/// Proposal `id` blended over its frame, optionally shrunk to a thumbnail.
pub fn proposal_overlay_png(pool: &ProposalPool, id: u32, max_edge: Option<u32>) -> Result<Vec<u8>> {
    let p = pool.get(id).ok_or(Error::UnknownProposal(id))?;
    let img = overlay_mask(&pool_frame(pool), &p.mask, OVERLAY_COLOR, OVERLAY_ALPHA)?;
    match max_edge {
        Some(edge) => png_bytes(thumbnail(&img, edge)),
        None => png_bytes(img),
    }
}

pub fn heatmap_png(h: &ContourHeatMap) -> Result<Vec<u8>> {
    png_bytes(heatmap_image(h))
}

pub fn mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    png_bytes(image::DynamicImage::ImageLuma8(mask_image(mask)))
}

/// `mask` over `frame` (or a blank frame) with the given clicks marked.
pub fn mask_overlay_png(frame: Option<&RgbImage>, mask: &BinaryMask, clicks: &[Pixel]) -> Result<Vec<u8>> {
    let base = match frame {
        Some(f) => f.clone(),
        None => blank_frame(mask.width(), mask.height()),
    };
    let mut img = overlay_mask(&base, mask, OVERLAY_COLOR, OVERLAY_ALPHA)?;
    draw_clicks(&mut img, clicks);
    png_bytes(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_blends_inside_only() {
        let frame = RgbImage::from_pixel(20, 10, Rgb([100, 100, 100]));
        let mask = BinaryMask::rect(20, 10, 5, 2, 6, 6).unwrap();
        let out = overlay_mask(&frame, &mask, [200, 0, 0], 0.5).unwrap();
        assert_eq!(out.get_pixel(0, 0).0, [100, 100, 100]);
        // interior blends, outline is solid
        assert_eq!(out.get_pixel(7, 4).0, [150, 50, 50]);
        assert_eq!(out.get_pixel(5, 2).0, [200, 0, 0]);
        let wrong = BinaryMask::new(10, 10).unwrap();
        assert!(overlay_mask(&frame, &wrong, [0, 0, 0], 0.5).is_err());
    }

    #[test]
    fn heat_ramp_ends() {
        assert_eq!(heat_color(0).0[3], 0);
        assert_eq!(heat_color(1).0, [0, 0, 255, 170]);
        assert_eq!(heat_color(HEATMAP_DEPTH as u8).0, [255, 0, 0, 170]);
    }

    #[test]
    fn thumbnail_caps_long_edge() {
        let img = RgbImage::new(640, 480);
        assert_eq!(thumbnail(&img, THUMBNAIL_MAX_EDGE).dimensions(), (256, 192));
        let img = RgbImage::new(100, 700);
        assert_eq!(thumbnail(&img, THUMBNAIL_MAX_EDGE).dimensions(), (37, 256));
        let img = RgbImage::new(200, 100);
        assert_eq!(thumbnail(&img, THUMBNAIL_MAX_EDGE).dimensions(), (200, 100));
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/m.png");
        let mask = BinaryMask::from_ascii(&["..##.", ".###.", "#...."]).unwrap();
        write_mask_png(&mask, &path).unwrap();
        assert_eq!(read_mask_png(&path).unwrap(), mask);
        let bytes = png_bytes(image::DynamicImage::ImageLuma8(mask_image(&mask))).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        assert!(matches!(
            read_mask_png(&dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn pool_renders_without_image() {
        use crate::proposals::{ProposalInput, Source};
        let m = BinaryMask::rect(300, 200, 10, 10, 50, 40).unwrap();
        let pool = ProposalPool::build(0, 300, 200, 5, vec![ProposalInput::new(m, 0.5, Source::Static)])
            .unwrap()
            .with_image("/no/such/frame.png");
        let full = image::load_from_memory(&proposal_overlay_png(&pool, 0, None).unwrap()).unwrap();
        assert_eq!((full.width(), full.height()), (300, 200));
        let thumb = image::load_from_memory(&proposal_overlay_png(&pool, 0, Some(THUMBNAIL_MAX_EDGE)).unwrap()).unwrap();
        assert_eq!((thumb.width(), thumb.height()), (256, 171));
        assert!(matches!(proposal_overlay_png(&pool, 3, None), Err(Error::UnknownProposal(3))));
    }

    #[test]
    fn clicks_clip_at_edges() {
        let mut img = RgbImage::new(5, 5);
        draw_clicks(&mut img, &[Pixel::new(0, 0), Pixel::new(4, 4)]);
        assert_eq!(img.get_pixel(1, 1).0, CLICK_COLOR);
        assert_eq!(img.get_pixel(2, 2).0, [0, 0, 0]);
    }
}
