//! Dataset construction: MNIST-format loading with average pooling, and a
//! synthetic Gaussian-blob generator for fast deterministic fixtures.

use super::idx::{read_idx_images, read_idx_labels};
use super::HarnessError;
use crate::hqnn::{Dataset, Sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::TAU;
use std::path::Path;

/// Scales pixels to [0, 1] and average-pools `pooling`×`pooling` blocks.
///
/// A 28×28 image at the default pooling factor 4 becomes a 7×7 = 49-feature
/// vector. The factor must divide both sides.
pub fn pool_average(
    pixels: &[u8],
    rows: usize,
    cols: usize,
    pooling: usize,
) -> Result<Vec<f64>, HarnessError> {
    if pooling == 0 || !rows.is_multiple_of(pooling) {
        return Err(HarnessError::BadPooling {
            pooling,
            side: rows,
        });
    }
    if !cols.is_multiple_of(pooling) {
        return Err(HarnessError::BadPooling {
            pooling,
            side: cols,
        });
    }
    let out_rows = rows / pooling;
    let out_cols = cols / pooling;
    let block = (pooling * pooling) as f64;
    let mut features = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        for c in 0..out_cols {
            let mut sum = 0.0;
            for dr in 0..pooling {
                for dc in 0..pooling {
                    sum += pixels[(r * pooling + dr) * cols + (c * pooling + dc)] as f64 / 255.0;
                }
            }
            features.push(sum / block);
        }
    }
    Ok(features)
}

/// Guesses the split name from the file name, following the official MNIST
/// distribution's `train-` / `t10k-` prefixes.
fn split_from_path(path: &Path) -> &'static str {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_lowercase())
        .unwrap_or_default();
    if name.contains("t10k") || name.contains("test") {
        "test"
    } else {
        "train"
    }
}

/// Loads an IDX image/label pair into a [`Dataset`].
///
/// Pixels are scaled to [0, 1] and average-pooled. When `class_filter` is
/// given, only those labels are kept and they are remapped to their index
/// in the filter (so `&[0, 1]` yields binary labels); otherwise all ten
/// digits pass through unchanged.
pub fn load_mnist(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    pooling: usize,
    class_filter: Option<&[u8]>,
) -> Result<Dataset, HarnessError> {
    let images_path = images_path.as_ref();
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(HarnessError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }

    let n_classes = class_filter.map_or(10, <[u8]>::len);
    let name = format!("mnist{n_classes}");
    let mut dataset = Dataset::new(name, split_from_path(images_path), n_classes);
    for (index, &raw_label) in labels.iter().enumerate().take(images.count) {
        let label = match class_filter {
            Some(classes) => match classes.iter().position(|c| *c == raw_label) {
                Some(mapped) => mapped,
                None => continue,
            },
            None => {
                if raw_label > 9 {
                    return Err(HarnessError::UnexpectedLabel { label: raw_label });
                }
                raw_label as usize
            }
        };
        let features = pool_average(images.image(index), images.rows, images.cols, pooling)?;
        dataset.samples.push(Sample { features, label });
    }
    if dataset.samples.is_empty() {
        return Err(HarnessError::EmptyFilter);
    }
    Ok(dataset)
}

/// Generates Gaussian clusters at fixed, well-separated centers.
///
/// Class `c` sits at radius 2 along direction `2πc/C`, repeated across the
/// feature dimensions (even dims take the cosine, odd the sine). Samples
/// are emitted class-round-robin, so every prefix is balanced, and the
/// whole dataset is a pure function of the seed.
pub fn make_blobs(
    n_per_class: usize,
    n_classes: usize,
    dims: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, HarnessError> {
    if n_per_class == 0 {
        return Err(HarnessError::EmptyBlobs);
    }
    if n_classes < 2 {
        return Err(HarnessError::TooFewClasses(n_classes));
    }
    if dims == 0 {
        return Err(HarnessError::DegenerateDims);
    }
    if !spread.is_finite() || spread < 0.0 {
        return Err(HarnessError::BadSpread(spread));
    }
    const RADIUS: f64 = 2.0;
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            let angle = TAU * c as f64 / n_classes as f64;
            (0..dims)
                .map(|d| RADIUS * if d % 2 == 0 { angle.cos() } else { angle.sin() })
                .collect()
        })
        .collect();

    let noise = Normal::new(0.0, spread).map_err(|_| HarnessError::BadSpread(spread))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dataset = Dataset::new("blobs", "synthetic", n_classes);
    for _ in 0..n_per_class {
        for (label, center) in centers.iter().enumerate() {
            let features = center.iter().map(|c| c + noise.sample(&mut rng)).collect();
            dataset.samples.push(Sample { features, label });
        }
    }
    Ok(dataset)
}
