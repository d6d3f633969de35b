//! Binary PPM (P6) reader/writer for [`RgbImage`].
//!
//! Images are written with `maxval = 65535` (two big-endian bytes per sample).
//! Reading accepts any maxval in `1..=65535`.

use std::fs;
use std::path::Path;

use super::{HypercubeError, Result, RgbImage};

pub const MAXVAL: u16 = 65535;

pub fn encode(img: &RgbImage) -> Vec<u8> {
    encode_with_comments(img, &[])
}

/// Like [`encode`] with `# ` comment lines after the magic number.
pub fn encode_with_comments(img: &RgbImage, comments: &[String]) -> Vec<u8> {
    let mut out = b"P6\n".to_vec();
    for c in comments {
        out.extend_from_slice(format!("# {}\n", c.replace('\n', " ")).as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n{}\n", img.width(), img.height(), MAXVAL).as_bytes());
    out.reserve(img.data().len() * 2);
    for &v in img.data() {
        let q = (v as f64 * MAXVAL as f64).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> HypercubeError {
    HypercubeError::MalformedHeader(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PPM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let num = |t: String| t.parse::<usize>().map_err(|_| bad(format!("bad PPM number '{t}'")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("PPM maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates header and raster
    pos += 1;
    let bps = if maxval > 255 { 2 } else { 1 };
    let expected = width * height * 3 * bps;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != expected {
        return Err(HypercubeError::SizeMismatch {
            expected: expected as u64,
            actual: raster.len() as u64,
        });
    }
    let scale = maxval as f64;
    let data = if bps == 2 {
        raster
            .chunks_exact(2)
            .map(|c| ((u16::from_be_bytes([c[0], c[1]]) as f64 / scale) as f32).min(1.0))
            .collect()
    } else {
        raster.iter().map(|&c| ((c as f64 / scale) as f32).min(1.0)).collect()
    };
    RgbImage::new(height, width, data)
}

pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    write_ppm_with_comments(img, path, &[])
}

pub fn write_ppm_with_comments(img: &RgbImage, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_with_comments(img, comments)).map_err(|source| HypercubeError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| HypercubeError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_values_round_trip_exactly() {
        let vals: Vec<f32> = (0..12).map(|i| ((i * 5000) as f64 / 65535.0) as f32).collect();
        let img = RgbImage::new(2, 2, vals).unwrap();
        let back = decode(&encode(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn eight_bit_with_comment() {
        let mut bytes = b"P6\n# made by hand\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 51]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0, 0.2]);
    }

    #[test]
    fn truncated_raster_rejected() {
        let bytes = b"P6\n2 2\n255\n\x00\x00".to_vec();
        assert!(decode(&bytes).is_err());
    }
}
