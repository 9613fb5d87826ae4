//! Per-pixel cluster-assignment label maps and their PNG export.
//!
//! Colours are indexed by cluster id, so the same cluster gets the same colour
//! in every image rendered with the same vocabulary and palette.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ImageEncoder, Rgb, RgbImage};

use crate::aggregation::hard_assignments;
use crate::error::{Error, Result};
use crate::feature_store::FeatureMap;
use crate::vocabulary::Vocabulary;

/// Kelly's maximally distinct colours, first eight (white and black skipped).
pub const DEFAULT_PALETTE: [[u8; 3]; 8] = [
    [0xF3, 0xC3, 0x00], // yellow
    [0x87, 0x56, 0x92], // purple
    [0xF3, 0x84, 0x00], // orange
    [0xA1, 0xCA, 0xF1], // light blue
    [0xBE, 0x00, 0x32], // red
    [0xC2, 0xB2, 0x80], // buff
    [0x84, 0x84, 0x82], // grey
    [0x00, 0x88, 0x56], // green
];

/// Recommended vocabulary size for label-map figures.
pub const VIZ_CLUSTERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMap {
    pub image_id: String,
    pub height: usize,
    pub width: usize,
    pub k: usize,
    /// Row-major, each `< k`.
    pub labels: Vec<u32>,
}

impl AssignmentMap {
    pub fn new(image_id: impl Into<String>, height: usize, width: usize, k: usize, labels: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::Validation(format!(
                "{} labels for a {height}x{width} map",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= k) {
            return Err(Error::Validation(format!("label {bad} out of range for k = {k}")));
        }
        Ok(AssignmentMap {
            image_id: image_id.into(),
            height,
            width,
            k,
            labels,
        })
    }

    pub fn label(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Pixels per cluster.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.k];
        self.labels.iter().for_each(|&l| h[l as usize] += 1);
        h
    }
}

/// Nearest-centre label for every pixel, identical to hard VLAD assignment.
pub fn assign_map(map: &FeatureMap, vocab: &Vocabulary) -> Result<AssignmentMap> {
    assign_map_with(map, vocab, false)
}

/// Like [`assign_map`] with optional per-feature L2 normalization, matching a VLAD config.
pub fn assign_map_with(map: &FeatureMap, vocab: &Vocabulary, normalize_features: bool) -> Result<AssignmentMap> {
    let labels = hard_assignments(map, vocab, normalize_features)?;
    AssignmentMap::new(
        map.image_id(),
        map.height(),
        map.width(),
        vocab.k(),
        labels.into_iter().map(|l| l as u32).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub Vec<[u8; 3]>);

impl Default for Palette {
    fn default() -> Self {
        Palette(DEFAULT_PALETTE.to_vec())
    }
}

impl Palette {
    /// The default colours, extended with golden-angle hues when `k > 8`.
    pub fn for_clusters(k: usize) -> Self {
        let mut colors = DEFAULT_PALETTE.to_vec();
        for i in DEFAULT_PALETTE.len()..k {
            let hue = (i as f64 * 137.507_764_050_037_85) % 360.0;
            colors.push(hsv(hue, 0.65, 0.9));
        }
        colors.truncate(k.max(DEFAULT_PALETTE.len()));
        Palette(colors)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses comma-separated `RRGGBB` hex colours.
    pub fn parse(text: &str) -> Result<Self> {
        text.split(',')
            .map(|c| {
                let c = c.trim().trim_start_matches('#');
                let v = u32::from_str_radix(c, 16).ok().filter(|_| c.len() == 6);
                v.map(|v| [(v >> 16) as u8, (v >> 8) as u8, v as u8])
                    .ok_or_else(|| Error::Config(format!("bad colour {c:?}, expected RRGGBB")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Palette)
    }
}

fn hsv(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|u| ((u + m) * 255.0).round() as u8)
}

/// Draws the label map with nearest-neighbour upscaling by `scale`.
pub fn render(amap: &AssignmentMap, palette: &Palette, scale: u32) -> Result<RgbImage> {
    if scale == 0 {
        return Err(Error::Config("scale must be >= 1".into()));
    }
    if palette.len() < amap.k {
        return Err(Error::Config(format!(
            "palette has {} colours, vocabulary has {} clusters",
            palette.len(),
            amap.k
        )));
    }
    let (w, h) = (amap.width as u32 * scale, amap.height as u32 * scale);
    Ok(RgbImage::from_fn(w, h, |x, y| {
        let l = amap.label((y / scale) as usize, (x / scale) as usize);
        Rgb(palette.0[l as usize])
    }))
}

/// Label maps side by side on a white background, `gap` pixels apart, top-aligned.
pub fn montage(maps: &[&AssignmentMap], palette: &Palette, scale: u32, gap: u32) -> Result<RgbImage> {
    if maps.is_empty() {
        return Err(Error::Config("montage needs at least one label map".into()));
    }
    let tiles = maps
        .iter()
        .map(|m| render(m, palette, scale))
        .collect::<Result<Vec<_>>>()?;
    let width = tiles.iter().map(|t| t.width()).sum::<u32>() + gap * (tiles.len() as u32 - 1);
    let height = tiles.iter().map(|t| t.height()).max().unwrap();
    let mut out = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let mut x0 = 0;
    for t in &tiles {
        image::imageops::replace(&mut out, t, x0 as i64, 0);
        x0 += t.width() + gap;
    }
    Ok(out)
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    PngEncoder::new(&mut buf)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Format(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

pub fn save_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_png(img)?).map_err(|e| Error::io_at(path, e))
}

/// Renders and writes one label map as a PNG.
pub fn export_label_image(amap: &AssignmentMap, palette: &Palette, scale: u32, path: impl AsRef<Path>) -> Result<()> {
    save_png(&render(amap, palette, scale)?, path)
}
