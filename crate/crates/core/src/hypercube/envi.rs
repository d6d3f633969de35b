//! ENVI-style header + raw binary codec.
//!
//! The header is a text file of `key = value` lines. Required keys are
//! `samples`, `lines`, `bands`, `interleave`, `data type`, `byte order` and
//! `wavelength` (a brace-delimited comma list, which may span lines).
//! Data type codes follow ENVI: 4 = float32, 12 = uint16.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Hypercube, HypercubeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interleave {
    Bsq,
    Bil,
    Bip,
}

impl Interleave {
    pub const ALL: [Interleave; 3] = [Interleave::Bsq, Interleave::Bil, Interleave::Bip];

    /// Position in the raw stream of canonical element `(row, col, band)`.
    #[inline]
    pub fn raw_index(self, row: usize, col: usize, band: usize, lines: usize, samples: usize, bands: usize) -> usize {
        match self {
            Interleave::Bsq => band * lines * samples + row * samples + col,
            Interleave::Bil => row * bands * samples + band * samples + col,
            Interleave::Bip => (row * samples + col) * bands + band,
        }
    }
}

impl fmt::Display for Interleave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interleave::Bsq => "bsq",
            Interleave::Bil => "bil",
            Interleave::Bip => "bip",
        })
    }
}

impl FromStr for Interleave {
    type Err = HypercubeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bsq" => Ok(Interleave::Bsq),
            "bil" => Ok(Interleave::Bil),
            "bip" => Ok(Interleave::Bip),
            other => Err(HypercubeError::MalformedHeader(format!("unknown interleave '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Float32,
    Uint16,
}

impl DataType {
    pub const ALL: [DataType; 2] = [DataType::Float32, DataType::Uint16];

    pub fn envi_code(self) -> u32 {
        match self {
            DataType::Float32 => 4,
            DataType::Uint16 => 12,
        }
    }

    pub fn from_envi_code(code: &str) -> Result<Self> {
        match code.trim() {
            "4" => Ok(DataType::Float32),
            "12" => Ok(DataType::Uint16),
            other => Err(HypercubeError::UnsupportedDataType(other.to_string())),
        }
    }

    pub fn bytes_per_value(self) -> usize {
        match self {
            DataType::Float32 => 4,
            DataType::Uint16 => 2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            DataType::Float32 => "float32",
            DataType::Uint16 => "uint16",
        }
    }
}

/// How a cube is laid out on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeFormat {
    pub interleave: Interleave,
    pub data_type: DataType,
}

impl Default for CubeFormat {
    fn default() -> Self {
        Self {
            interleave: Interleave::Bsq,
            data_type: DataType::Float32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub interleave: Interleave,
    pub data_type: DataType,
    pub little_endian: bool,
    pub wavelengths: Vec<f64>,
    pub source_range: Option<(f32, f32)>,
}

impl CubeHeader {
    pub fn raw_len(&self) -> u64 {
        (self.samples * self.lines * self.bands * self.data_type.bytes_per_value()) as u64
    }

    pub fn parse(text: &str) -> Result<Self> {
        let fields = parse_fields(text)?;
        let get = |key: &str| {
            fields
                .get(key)
                .map(String::as_str)
                .ok_or_else(|| HypercubeError::MalformedHeader(format!("missing field '{key}'")))
        };
        let count = |key: &str| -> Result<usize> {
            let v = get(key)?;
            match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(HypercubeError::MalformedHeader(format!("'{key}' must be a positive integer, got '{v}'"))),
            }
        };
        let samples = count("samples")?;
        let lines = count("lines")?;
        let bands = count("bands")?;
        let interleave: Interleave = get("interleave")?.parse()?;
        let data_type = DataType::from_envi_code(get("data type")?)?;
        let little_endian = match get("byte order")?.trim() {
            "0" => true,
            "1" => false,
            other => return Err(HypercubeError::MalformedHeader(format!("byte order '{other}'"))),
        };
        let wavelengths = parse_list(get("wavelength")?)?;
        if wavelengths.len() != bands {
            return Err(HypercubeError::MalformedHeader(format!(
                "bands = {bands} but {} wavelengths listed",
                wavelengths.len()
            )));
        }
        let source_range = match fields.get("source range") {
            Some(v) => match parse_list(v)?.as_slice() {
                [lo, hi] => Some((*lo as f32, *hi as f32)),
                _ => return Err(HypercubeError::MalformedHeader("source range needs two values".into())),
            },
            None => None,
        };
        Ok(Self {
            samples,
            lines,
            bands,
            interleave,
            data_type,
            little_endian,
            wavelengths,
            source_range,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::from("ENVI\n");
        s.push_str(&format!("samples = {}\n", self.samples));
        s.push_str(&format!("lines = {}\n", self.lines));
        s.push_str(&format!("bands = {}\n", self.bands));
        s.push_str("header offset = 0\n");
        s.push_str(&format!("data type = {}\n", self.data_type.envi_code()));
        s.push_str(&format!("interleave = {}\n", self.interleave));
        s.push_str(&format!("byte order = {}\n", if self.little_endian { 0 } else { 1 }));
        if let Some((lo, hi)) = self.source_range {
            s.push_str(&format!("source range = {{{lo:?}, {hi:?}}}\n"));
        }
        s.push_str("wavelength units = nm\n");
        let list: Vec<String> = self.wavelengths.iter().map(|w| format!("{w:?}")).collect();
        s.push_str(&format!("wavelength = {{{}}}\n", list.join(", ")));
        s
    }
}

fn parse_fields(text: &str) -> Result<BTreeMap<String, String>> {
    let mut fields = BTreeMap::new();
    let mut lines = text.lines().peekable();
    if lines.peek().map(|l| l.trim()) == Some("ENVI") {
        lines.next();
    }
    while let Some(line) = lines.next() {
        if line.trim().is_empty() || line.trim_start().starts_with(';') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HypercubeError::MalformedHeader(format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let mut value = value.trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                let more = lines
                    .next()
                    .ok_or_else(|| HypercubeError::MalformedHeader(format!("unterminated list for '{key}'")))?;
                value.push(' ');
                value.push_str(more.trim());
            }
        }
        if fields.insert(key.clone(), value).is_some() {
            return Err(HypercubeError::MalformedHeader(format!("duplicate field '{key}'")));
        }
    }
    Ok(fields)
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    let inner = value
        .trim()
        .strip_prefix('{')
        .and_then(|v| v.strip_suffix('}'))
        .ok_or_else(|| HypercubeError::MalformedHeader(format!("expected '{{...}}' list, got '{value}'")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| HypercubeError::MalformedHeader(format!("bad number '{t}'")))
        })
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> HypercubeError {
    HypercubeError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a header/raw pair into canonical `(H, W, B)` order.
pub fn read_cube(header_path: impl AsRef<Path>, raw_path: impl AsRef<Path>) -> Result<Hypercube> {
    let (header_path, raw_path) = (header_path.as_ref(), raw_path.as_ref());
    let text = fs::read_to_string(header_path).map_err(|e| io_err(header_path, e))?;
    let header = CubeHeader::parse(&text)?;
    let raw = fs::read(raw_path).map_err(|e| io_err(raw_path, e))?;
    decode(&header, &raw)
}

pub fn decode(header: &CubeHeader, raw: &[u8]) -> Result<Hypercube> {
    if raw.len() as u64 != header.raw_len() {
        return Err(HypercubeError::SizeMismatch {
            expected: header.raw_len(),
            actual: raw.len() as u64,
        });
    }
    let (lines, samples, bands) = (header.lines, header.samples, header.bands);
    let width = header.data_type.bytes_per_value();
    let value_at = |i: usize| -> f32 {
        let bytes = &raw[i * width..(i + 1) * width];
        match (header.data_type, header.little_endian) {
            (DataType::Float32, true) => f32::from_le_bytes(bytes.try_into().unwrap()),
            (DataType::Float32, false) => f32::from_be_bytes(bytes.try_into().unwrap()),
            (DataType::Uint16, true) => u16::from_le_bytes(bytes.try_into().unwrap()) as f32,
            (DataType::Uint16, false) => u16::from_be_bytes(bytes.try_into().unwrap()) as f32,
        }
    };
    let mut data = Vec::with_capacity(lines * samples * bands);
    for row in 0..lines {
        for col in 0..samples {
            for band in 0..bands {
                data.push(value_at(header.interleave.raw_index(row, col, band, lines, samples, bands)));
            }
        }
    }
    Ok(Hypercube::new(lines, samples, header.wavelengths.clone(), data)?
        .with_source_range(header.source_range))
}

pub fn encode(cube: &Hypercube, format: CubeFormat) -> Result<(CubeHeader, Vec<u8>)> {
    let header = CubeHeader {
        samples: cube.width(),
        lines: cube.height(),
        bands: cube.bands(),
        interleave: format.interleave,
        data_type: format.data_type,
        little_endian: true,
        wavelengths: cube.wavelengths().to_vec(),
        source_range: cube.source_range(),
    };
    let (lines, samples, bands) = (header.lines, header.samples, header.bands);
    let width = format.data_type.bytes_per_value();
    let mut raw = vec![0u8; lines * samples * bands * width];
    for row in 0..lines {
        for col in 0..samples {
            for band in 0..bands {
                let v = cube.get(row, col, band);
                let at = format.interleave.raw_index(row, col, band, lines, samples, bands) * width;
                match format.data_type {
                    DataType::Float32 => raw[at..at + 4].copy_from_slice(&v.to_le_bytes()),
                    DataType::Uint16 => {
                        if v.fract() != 0.0 || !(0.0..=65535.0).contains(&v) {
                            return Err(HypercubeError::UnrepresentableValue {
                                value: v,
                                data_type: DataType::Uint16.name(),
                            });
                        }
                        raw[at..at + 2].copy_from_slice(&(v as u16).to_le_bytes());
                    }
                }
            }
        }
    }
    Ok((header, raw))
}

/// Writes `cube` so that [`read_cube`] reproduces it exactly.
pub fn write_cube(
    cube: &Hypercube,
    format: CubeFormat,
    header_path: impl AsRef<Path>,
    raw_path: impl AsRef<Path>,
) -> Result<()> {
    let (header_path, raw_path) = (header_path.as_ref(), raw_path.as_ref());
    let (header, raw) = encode(cube, format)?;
    fs::write(raw_path, raw).map_err(|e| io_err(raw_path, e))?;
    fs::write(header_path, header.render()).map_err(|e| io_err(header_path, e))?;
    Ok(())
}

/// `stem.hdr` / `stem.raw` next to each other.
pub fn cube_paths(stem: impl AsRef<Path>) -> (std::path::PathBuf, std::path::PathBuf) {
    let stem = stem.as_ref();
    (stem.with_extension("hdr"), stem.with_extension("raw"))
}
