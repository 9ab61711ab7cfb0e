//! Big-endian IDX decoding (the MNIST file format).

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Validates magic and length, returns the declared dims and the payload.
fn parse<'a>(path: &Path, bytes: &'a [u8], magic: u32) -> Result<(Vec<usize>, &'a [u8])> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            len: bytes.len(),
            declared: 4,
        });
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found,
        });
    }
    let ndim = (magic & 0xff) as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            len: bytes.len(),
            declared: header,
        });
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|d| read_u32(bytes, 4 + 4 * d) as usize)
        .collect();
    let declared = header + dims.iter().product::<usize>();
    if bytes.len() < declared {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            len: bytes.len(),
            declared,
        });
    }
    if bytes.len() > declared {
        return Err(Error::DimMismatch(format!(
            "{}: {} trailing bytes after declared payload",
            path.display(),
            bytes.len() - declared
        )));
    }
    Ok((dims, &bytes[header..]))
}

/// Scales a raw pixel byte to `[-1, 1]`.
#[inline]
pub fn scale_pixel(p: u8) -> f64 {
    p as f64 / 127.5 - 1.0
}

/// Decodes an image/label IDX pair held in memory. Paths are used only for
/// error messages.
pub fn decode_idx(
    images_path: &Path,
    image_bytes: &[u8],
    labels_path: &Path,
    label_bytes: &[u8],
) -> Result<LabeledDataset> {
    let (idims, pixels) = parse(images_path, image_bytes, IMAGE_MAGIC)?;
    let (ldims, labels) = parse(labels_path, label_bytes, LABEL_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(Error::DimMismatch(format!(
            "{} declares {} images but {} declares {} labels",
            images_path.display(),
            idims[0],
            labels_path.display(),
            ldims[0]
        )));
    }
    let n = idims[0];
    let width = idims[1] * idims[2];
    let data: Vec<f64> = pixels.iter().map(|&p| scale_pixel(p)).collect();
    let images = Matrix::new(n, width, data)?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(images, labels, classes, name)
}

/// Reads an image/label IDX pair from disk.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let ib = std::fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let lb = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
    decode_idx(ip, &ib, lp, &lb)
}

/// Which half of a standard dataset directory to load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Loads `train-*` or `t10k-*` files from a directory laid out like the
/// standard MNIST distribution.
pub fn load_split(dir: impl AsRef<Path>, split: Split) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let mut ds = load_idx(
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )?;
    ds.name = format!(
        "{}/{prefix}",
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    );
    Ok(ds)
}

#[cfg(test)]
pub(crate) fn encode_idx(
    pixels: &[u8],
    n: usize,
    rows: usize,
    cols: usize,
    labels: &[u8],
) -> (Vec<u8>, Vec<u8>) {
    let mut img = IMAGE_MAGIC.to_be_bytes().to_vec();
    for d in [n, rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = LABEL_MAGIC.to_be_bytes().to_vec();
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths() -> (&'static Path, &'static Path) {
        (Path::new("imgs.idx"), Path::new("labs.idx"))
    }

    #[test]
    fn decodes_and_scales() {
        let (img, lab) = encode_idx(&[0, 255, 51, 204, 127, 128, 0, 0], 2, 2, 2, &[3, 1]);
        let (ip, lp) = paths();
        let ds = decode_idx(ip, &img, lp, &lab).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.pixels(), 4);
        assert_eq!(ds.images.get(0, 0), -1.0);
        assert_eq!(ds.images.get(0, 1), 1.0);
        assert_eq!(ds.labels, vec![3, 1]);
        assert_eq!(ds.classes, 4);
    }

    #[test]
    fn bad_magic_names_file() {
        let (mut img, lab) = encode_idx(&[0; 4], 1, 2, 2, &[0]);
        img[3] = 0x01;
        let (ip, lp) = paths();
        let err = decode_idx(ip, &img, lp, &lab).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().contains("imgs.idx"));
        let (img, mut lab) = encode_idx(&[0; 4], 1, 2, 2, &[0]);
        lab[3] = 0x03;
        let err = decode_idx(ip, &img, lp, &lab).unwrap_err();
        assert!(err.to_string().contains("labs.idx"));
    }

    #[test]
    fn truncated_and_mismatched() {
        let (ip, lp) = paths();
        let (img, lab) = encode_idx(&[0; 4], 1, 2, 2, &[0]);
        assert!(matches!(
            decode_idx(ip, &img[..img.len() - 1], lp, &lab),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_idx(ip, &img[..2], lp, &lab),
            Err(Error::Truncated { .. })
        ));
        let (img2, lab2) = encode_idx(&[0; 8], 2, 2, 2, &[0]);
        assert!(matches!(
            decode_idx(ip, &img2, lp, &lab2),
            Err(Error::DimMismatch(_))
        ));
    }
}
