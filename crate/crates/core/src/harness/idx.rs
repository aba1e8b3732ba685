//! IDX file handling (the MNIST on-disk format) plus a synthetic digit
//! generator.
//!
//! The reader speaks the real format — big-endian magic 2051 for images and
//! 2049 for labels — so genuine MNIST files work unchanged. Because this
//! lab never downloads datasets, it also ships a generator that writes
//! digit-glyph fixtures in the same format: 7×7 glyph bitmaps upscaled to
//! 28×28 with seeded pixel noise. The glyphs are crude but well separated,
//! which is exactly what a classifier fixture needs.

use super::HarnessError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

/// Raw contents of an IDX image file.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major then row-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// The pixel block of one image.
    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, HarnessError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(HarnessError::Truncated {
            path: path.to_path_buf(),
            needed: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages, HarnessError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(HarnessError::BadMagic {
            path: path.to_path_buf(),
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    let needed = 16 + count * rows * cols;
    if bytes.len() < needed {
        return Err(HarnessError::Truncated {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..needed].to_vec(),
    })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>, HarnessError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(HarnessError::BadMagic {
            path: path.to_path_buf(),
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(HarnessError::Truncated {
            path: path.to_path_buf(),
            needed,
            found: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    images: &[Vec<u8>],
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(16 + images.len() * rows * cols);
    bytes.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for image in images {
        debug_assert_eq!(image.len(), rows * cols);
        bytes.extend_from_slice(image);
    }
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

/// 7×7 glyph bitmaps for the digits 0–9 (`#` = foreground).
const GLYPHS: [[&str; 7]; 10] = [
    [
        ".#####.", "#.....#", "#.....#", "#.....#", "#.....#", "#.....#", ".#####.",
    ],
    [
        "...#...", "..##...", "...#...", "...#...", "...#...", "...#...", "..###..",
    ],
    [
        ".#####.", "#.....#", "......#", "....##.", "..##...", "##.....", "#######",
    ],
    [
        "######.", "......#", ".....#.", "..###..", ".....#.", "......#", "######.",
    ],
    [
        "....##.", "...#.#.", "..#..#.", ".#...#.", "#######", ".....#.", ".....#.",
    ],
    [
        "#######", "#......", "#####..", ".....#.", "......#", "#.....#", ".#####.",
    ],
    [
        "..####.", ".#.....", "#......", "######.", "#.....#", "#.....#", ".#####.",
    ],
    [
        "#######", "......#", ".....#.", "....#..", "...#...", "..#....", "..#....",
    ],
    [
        ".#####.", "#.....#", "#.....#", ".#####.", "#.....#", "#.....#", ".#####.",
    ],
    [
        ".#####.", "#.....#", "#.....#", ".######", "......#", ".....#.", ".####..",
    ],
];

const GLYPH_SIDE: usize = 7;
const UPSCALE: usize = 4;
pub const SYNTHETIC_SIDE: usize = GLYPH_SIDE * UPSCALE;

/// Renders one noisy 28×28 digit image.
fn render_digit(digit: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let glyph = &GLYPHS[digit as usize];
    let mut image = vec![0u8; SYNTHETIC_SIDE * SYNTHETIC_SIDE];
    for (r, row) in glyph.iter().enumerate() {
        for (c, cell) in row.bytes().enumerate() {
            let foreground = cell == b'#';
            for dr in 0..UPSCALE {
                for dc in 0..UPSCALE {
                    let value = if foreground {
                        rng.random_range(170..=255)
                    } else {
                        rng.random_range(0..=20)
                    };
                    image[(r * UPSCALE + dr) * SYNTHETIC_SIDE + (c * UPSCALE + dc)] = value;
                }
            }
        }
    }
    image
}

/// File paths produced by [`write_synthetic_mnist`]; the names follow the
/// official distribution so the loader treats fixtures and real data alike.
#[derive(Debug, Clone)]
pub struct SyntheticPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// Writes a synthetic MNIST-format fixture into `dir`.
///
/// Samples are interleaved class-round-robin so every prefix stays
/// class-balanced. Deterministic per seed.
pub fn write_synthetic_mnist(
    dir: impl AsRef<Path>,
    n_train_per_class: usize,
    n_test_per_class: usize,
    classes: &[u8],
    seed: u64,
) -> Result<SyntheticPaths, HarnessError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut render_split = |n_per_class: usize| {
        let mut images = Vec::with_capacity(n_per_class * classes.len());
        let mut labels = Vec::with_capacity(n_per_class * classes.len());
        for _ in 0..n_per_class {
            for &class in classes {
                images.push(render_digit(class, &mut rng));
                labels.push(class);
            }
        }
        (images, labels)
    };
    let (train_images, train_labels) = render_split(n_train_per_class);
    let (test_images, test_labels) = render_split(n_test_per_class);

    let paths = SyntheticPaths {
        train_images: dir.join("train-images-idx3-ubyte"),
        train_labels: dir.join("train-labels-idx1-ubyte"),
        test_images: dir.join("t10k-images-idx3-ubyte"),
        test_labels: dir.join("t10k-labels-idx1-ubyte"),
    };
    write_idx_images(
        &paths.train_images,
        SYNTHETIC_SIDE,
        SYNTHETIC_SIDE,
        &train_images,
    )?;
    write_idx_labels(&paths.train_labels, &train_labels)?;
    write_idx_images(
        &paths.test_images,
        SYNTHETIC_SIDE,
        SYNTHETIC_SIDE,
        &test_images,
    )?;
    write_idx_labels(&paths.test_labels, &test_labels)?;
    Ok(paths)
}
