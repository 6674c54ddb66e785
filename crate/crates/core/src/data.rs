//! Dataset ingestion: IDX (MNIST) and CIFAR-10 binary batches into grayscale
//! images with pixel values in `[0, 1]`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number in {what}: expected {expected}, found {found}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

/// Row-major grayscale image with luminance values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, DataError> {
        if width == 0 || height == 0 {
            return Err(DataError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(DataError::InvalidImage(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(DataError::InvalidImage(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, DataError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Quantizes to bytes (`round(v * 255)`).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.to_bytes());
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|source| io_err(path, source))
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, num_classes: usize) -> Result<Self, DataError> {
        if images.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if num_classes < 2 {
            return Err(DataError::InvalidDataset(format!(
                "num_classes must be > 1, got {num_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(DataError::InvalidDataset(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
        })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Image, usize)> {
        self.images.iter().zip(self.labels.iter().copied())
    }

    /// First `n` samples (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            num_classes: self.num_classes,
        }
    }

    /// Serializes images and labels as an IDX pair (`idx3` images, `idx1` labels).
    /// All images must share dimensions.
    pub fn to_idx(&self) -> Result<(Vec<u8>, Vec<u8>), DataError> {
        let (w, h) = match self.images.first() {
            Some(img) => (img.width(), img.height()),
            None => (0, 0),
        };
        if self.images.iter().any(|img| img.width() != w || img.height() != h) {
            return Err(DataError::InvalidDataset("IDX export needs uniform image dims".into()));
        }
        let mut images = Vec::with_capacity(16 + self.len() * w * h);
        images.extend(IDX_IMAGE_MAGIC.to_be_bytes());
        images.extend((self.len() as u32).to_be_bytes());
        images.extend((h as u32).to_be_bytes());
        images.extend((w as u32).to_be_bytes());
        for img in &self.images {
            images.extend(img.to_bytes());
        }
        let mut labels = Vec::with_capacity(8 + self.len());
        labels.extend(IDX_LABEL_MAGIC.to_be_bytes());
        labels.extend((self.len() as u32).to_be_bytes());
        labels.extend(self.labels.iter().map(|&l| l as u8));
        Ok((images, labels))
    }

    pub fn write_idx(&self, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<(), DataError> {
        let (images, labels) = self.to_idx()?;
        write_file(images_path.as_ref(), &images)?;
        write_file(labels_path.as_ref(), &labels)
    }
}

/// Rec.601 luma, `0.299 r + 0.587 g + 0.114 b`. Computed in thousandths so
/// that white maps to exactly 1.
#[inline]
pub fn to_grayscale(r: f64, g: f64, b: f64) -> f64 {
    ((299.0 * r + 587.0 * g + 114.0 * b) / 1000.0).clamp(0.0, 1.0)
}

pub fn load_mnist(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset, DataError> {
    let images = read_file(images_path.as_ref())?;
    let labels = read_file(labels_path.as_ref())?;
    parse_mnist(&images, &labels)
}

/// Parses an IDX image/label pair held in memory.
pub fn parse_mnist(images: &[u8], labels: &[u8]) -> Result<LabeledDataset, DataError> {
    let mut img_hdr = Header::new(images, "image file");
    img_hdr.magic(IDX_IMAGE_MAGIC)?;
    let count = img_hdr.u32()? as usize;
    let rows = img_hdr.u32()? as usize;
    let cols = img_hdr.u32()? as usize;
    let body = &images[16..];
    let expected = count * rows * cols;
    if body.len() < expected {
        return Err(DataError::Truncated {
            what: "image file",
            expected: 16 + expected,
            found: images.len(),
        });
    }

    let mut lbl_hdr = Header::new(labels, "label file");
    lbl_hdr.magic(IDX_LABEL_MAGIC)?;
    let label_count = lbl_hdr.u32()? as usize;
    let lbl_body = &labels[8..];
    if lbl_body.len() < label_count {
        return Err(DataError::Truncated {
            what: "label file",
            expected: 8 + label_count,
            found: labels.len(),
        });
    }
    if label_count != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let px = rows * cols;
    let imgs = body[..expected]
        .chunks_exact(px.max(1))
        .map(|chunk| Image::new(cols, rows, chunk.iter().map(|&b| f64::from(b) / 255.0).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let lbls: Vec<usize> = lbl_body[..label_count].iter().map(|&b| usize::from(b)).collect();
    let num_classes = lbls.iter().copied().max().map_or(10, |m| (m + 1).max(10));
    LabeledDataset::new(imgs, lbls, num_classes)
}

pub fn load_cifar10(batch_path: impl AsRef<Path>) -> Result<LabeledDataset, DataError> {
    parse_cifar10(&read_file(batch_path.as_ref())?)
}

pub fn parse_cifar10(bytes: &[u8]) -> Result<LabeledDataset, DataError> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        let records = bytes.len() / CIFAR_RECORD_LEN + 1;
        return Err(DataError::Truncated {
            what: "CIFAR-10 batch",
            expected: records * CIFAR_RECORD_LEN,
            found: bytes.len(),
        });
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    let mut labels = Vec::with_capacity(images.capacity());
    for record in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        let label = usize::from(record[0]);
        if label >= 10 {
            return Err(DataError::InvalidDataset(format!(
                "CIFAR-10 label {label} out of range"
            )));
        }
        let (r, rest) = record[1..].split_at(plane);
        let (g, b) = rest.split_at(plane);
        let pixels = (0..plane)
            .map(|i| {
                to_grayscale(
                    f64::from(r[i]) / 255.0,
                    f64::from(g[i]) / 255.0,
                    f64::from(b[i]) / 255.0,
                )
            })
            .collect();
        images.push(Image::new(CIFAR_SIDE, CIFAR_SIDE, pixels)?);
        labels.push(label);
    }
    LabeledDataset::new(images, labels, 10)
}

/// Constant images with levels drawn uniformly; label is the level's half
/// (0 below 0.5, 1 otherwise).
pub fn uniform_dataset(n: usize, side: usize, seed: u64) -> Result<LabeledDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let level: f64 = rng.gen_range(0.0..=1.0);
        images.push(Image::filled(side, side, level)?);
        labels.push(usize::from(level >= 0.5));
    }
    LabeledDataset::new(images, labels, 2)
}

/// Sum of isotropic Gaussian bumps plus uniform noise of amplitude `noise`,
/// clamped to `[0, 1]`. Each blob is `(cx, cy, sigma, peak)` in pixels.
pub fn blob_image(
    side: usize,
    blobs: &[(f64, f64, f64, f64)],
    noise: f64,
    rng: &mut impl Rng,
) -> Result<Image, DataError> {
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let mut v: f64 = blobs
                .iter()
                .map(|&(cx, cy, sigma, peak)| {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    peak * (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .sum();
            if noise > 0.0 {
                v += rng.gen_range(-noise..=noise);
            }
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    Image::new(side, side, pixels)
}

/// One bright blob per image whose position on a ring encodes the class.
pub fn blobs_dataset(n: usize, side: usize, classes: usize, seed: u64) -> Result<LabeledDataset, DataError> {
    if classes < 2 {
        return Err(DataError::InvalidDataset(format!(
            "num_classes must be > 1, got {classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_range(0..classes);
        let angle = std::f64::consts::TAU * label as f64 / classes as f64;
        let jitter = s / 16.0;
        let cx = s / 2.0 + s / 4.0 * angle.cos() + rng.gen_range(-jitter..=jitter);
        let cy = s / 2.0 + s / 4.0 * angle.sin() + rng.gen_range(-jitter..=jitter);
        images.push(blob_image(side, &[(cx, cy, s / 10.0, 1.0)], 0.02, &mut rng)?);
        labels.push(label);
    }
    LabeledDataset::new(images, labels, classes)
}

/// A smooth multi-blob scene for timing runs.
pub fn synthetic_scene(side: usize, seed: u64) -> Result<Image, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = side as f64;
    let blobs: Vec<_> = (0..6)
        .map(|_| {
            (
                rng.gen_range(0.0..s),
                rng.gen_range(0.0..s),
                rng.gen_range(s / 20.0..s / 6.0),
                rng.gen_range(0.3..0.9),
            )
        })
        .collect();
    blob_image(side, &blobs, 0.01, &mut rng)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        let end = self.pos + 4;
        let raw = self.bytes.get(self.pos..end).ok_or(DataError::Truncated {
            what: self.what,
            expected: end,
            found: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<(), DataError> {
        let found = self.u32()?;
        if found != expected {
            return Err(DataError::BadMagic {
                what: self.what,
                expected,
                found,
            });
        }
        Ok(())
    }
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| io_err(path, source))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|source| io_err(path, source))
}
