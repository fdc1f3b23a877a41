//! Image, mask and table serialization.
//!
//! Images are stored either as 16-bit big-endian binary PGM (`P5`, maxval
//! 65535) whose samples are multiplied by the `# scale=<float>` header comment,
//! or as raw little-endian `f32` preceded by a text line `rows cols spacing_mm`.
//! Masks are 8-bit PGM with nonzero meaning "inside".

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::RegionMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Raw,
}

impl ImageFormat {
    /// `.pgm` selects PGM; anything else is raw float.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm,
            _ => ImageFormat::Raw,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Raw => "raw",
        }
    }
}

const PGM16_MAX: f64 = 65535.0;

pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    match ImageFormat::from_path(path) {
        ImageFormat::Pgm => decode_pgm16(&bytes),
        ImageFormat::Raw => decode_raw(&bytes),
    }
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    let bytes = match ImageFormat::from_path(path) {
        ImageFormat::Pgm => encode_pgm16(image),
        ImageFormat::Raw => encode_raw(image),
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<RegionMask> {
    decode_mask(&fs::read(path)?)
}

pub fn write_mask(path: &Path, mask: &RegionMask) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

/// Quantizes to `round(v / scale)` with `scale = max / 65535`; negative
/// intensities are clipped to zero.
pub fn encode_pgm16(image: &Image) -> Vec<u8> {
    let (_, max) = image.min_max();
    let scale = if max > 0.0 && max.is_finite() { max / PGM16_MAX } else { 1.0 };
    let mut out = format!(
        "P5\n# scale={scale:e}\n# spacing_mm={:e}\n{} {}\n65535\n",
        image.spacing_mm(),
        image.cols(),
        image.rows()
    )
    .into_bytes();
    out.reserve(image.len() * 2);
    for &v in image.as_slice() {
        let q = (v / scale).round().clamp(0.0, PGM16_MAX) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<Image> {
    let header = parse_pgm_header(bytes)?;
    if header.maxval != 65535 {
        return Err(Error::parse(
            header.maxval_offset,
            format!("expected maxval 65535, found {}", header.maxval),
        ));
    }
    let scale = match header.comment_value("scale") {
        Some((offset, text)) => parse_positive(text, offset, "scale")?,
        None => 1.0,
    };
    let spacing = match header.comment_value("spacing_mm") {
        Some((offset, text)) => parse_positive(text, offset, "spacing_mm")?,
        None => 1.0,
    };
    let n = pixel_count(header.rows, header.cols)?;
    let data = take_payload(bytes, header.data_offset, n, 2)?;
    let values = data
        .chunks_exact(2)
        .map(|b| f64::from(u16::from_be_bytes([b[0], b[1]])) * scale)
        .collect();
    Image::from_vec(header.rows, header.cols, spacing, values)
}

pub fn encode_raw(image: &Image) -> Vec<u8> {
    let mut out = format!("{} {} {}\n", image.rows(), image.cols(), image.spacing_mm()).into_bytes();
    out.reserve(image.len() * 4);
    for &v in image.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_raw(bytes: &[u8]) -> Result<Image> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(0, "missing header line"))?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::parse(0, "header is not text"))?;
    let mut fields = Vec::with_capacity(3);
    let mut offset = 0;
    for token in line.split(' ') {
        if !token.is_empty() {
            fields.push((offset, token));
        }
        offset += token.len() + 1;
    }
    if fields.len() != 3 {
        return Err(Error::parse(0, format!("header needs 'rows cols spacing_mm', got '{line}'")));
    }
    let rows = parse_dim(fields[0].1, fields[0].0)?;
    let cols = parse_dim(fields[1].1, fields[1].0)?;
    let spacing = parse_positive(fields[2].1, fields[2].0, "spacing_mm")?;
    let n = pixel_count(rows, cols)?;
    let data = take_payload(bytes, end + 1, n, 4)?;
    let values = data
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    Image::from_vec(rows, cols, spacing, values)
}

pub fn encode_mask(mask: &RegionMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.cols(), mask.rows()).into_bytes();
    out.extend(mask.as_slice().iter().map(|&m| if m { 255u8 } else { 0 }));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<RegionMask> {
    let header = parse_pgm_header(bytes)?;
    if header.maxval != 255 {
        return Err(Error::parse(
            header.maxval_offset,
            format!("mask maxval must be 255, found {}", header.maxval),
        ));
    }
    let n = pixel_count(header.rows, header.cols)?;
    let data = take_payload(bytes, header.data_offset, n, 1)?;
    RegionMask::new(header.rows, header.cols, data.iter().map(|&b| b != 0).collect())
}

struct PgmHeader<'a> {
    rows: usize,
    cols: usize,
    maxval: u32,
    maxval_offset: usize,
    data_offset: usize,
    /// `(offset of the comment text, text)` for every `#` comment.
    comments: Vec<(usize, &'a str)>,
}

impl<'a> PgmHeader<'a> {
    fn comment_value(&self, key: &str) -> Option<(usize, &'a str)> {
        self.comments.iter().find_map(|&(offset, text)| {
            let (k, v) = text.split_once('=')?;
            (k.trim() == key).then(|| (offset + k.len() + 1, v.trim()))
        })
    }
}

fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader<'_>> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::parse(0, "missing P5 magic"));
    }
    let mut pos = 2;
    let mut comments = Vec::new();
    let mut fields = [(0usize, 0u64); 3];
    for field in fields.iter_mut() {
        // whitespace and comments may precede every header field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    let start = pos + 1;
                    let end = bytes[start..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map_or(bytes.len(), |i| start + i);
                    let text = std::str::from_utf8(&bytes[start..end])
                        .map_err(|_| Error::parse(start, "comment is not text"))?;
                    comments.push((start, text.trim_start()));
                    pos = end;
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == start {
            return Err(Error::parse(start, "expected a decimal header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        let value = text
            .parse::<u64>()
            .map_err(|_| Error::invalid(format!("header value {text} overflows")))?;
        *field = (start, value);
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::parse(pos, "expected one whitespace byte after maxval")),
    }
    let [(_, cols), (_, rows), (maxval_offset, maxval)] = fields;
    let to_usize = |v: u64| usize::try_from(v).map_err(|_| Error::invalid(format!("dimension {v} overflows")));
    Ok(PgmHeader {
        rows: to_usize(rows)?,
        cols: to_usize(cols)?,
        maxval: u32::try_from(maxval).unwrap_or(u32::MAX),
        maxval_offset,
        data_offset: pos,
        comments,
    })
}

fn pixel_count(rows: usize, cols: usize) -> Result<usize> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!("image dimensions must be positive, got {rows}x{cols}")));
    }
    rows.checked_mul(cols)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::invalid(format!("dimensions {rows}x{cols} overflow")))
}

fn take_payload(bytes: &[u8], offset: usize, n: usize, width: usize) -> Result<&[u8]> {
    let need = n * width;
    let have = bytes.len().saturating_sub(offset);
    if have < need {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated pixel data: need {need} bytes, found {have}"),
        ));
    }
    Ok(&bytes[offset..offset + need])
}

fn parse_dim(text: &str, offset: usize) -> Result<usize> {
    if !text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(offset, format!("expected a dimension, found '{text}'")));
    }
    text.parse()
        .map_err(|_| Error::invalid(format!("dimension {text} overflows")))
}

fn parse_positive(text: &str, offset: usize, what: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::parse(offset, format!("{what} must be a positive number, found '{text}'"))),
    }
}

/// Comma-separated table with a header row of column names.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `index` parsed as numbers.
    pub fn numeric_column(&self, index: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let cell = &row[index];
                cell.parse::<f64>().map_err(|_| Error::Config {
                    line: i + 2,
                    message: format!("column '{}': '{cell}' is not a number", self.header[index]),
                })
            })
            .collect()
    }
}

/// Minimal CSV: no quoting, `#` comment lines and blank lines skipped.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, head) = lines.next().ok_or_else(|| Error::Config {
        line: 1,
        message: "empty table".into(),
    })?;
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, l) in lines {
        let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(Error::Config {
                line,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(17, 23, 0.6, |_, _| f64::from(rng.random_range(0.0f32..500.0))).unwrap()
    }

    #[test]
    fn raw_round_trip_is_bit_identical() {
        let img = random_image(1);
        let back = decode_raw(&encode_raw(&img)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_round_trip_within_half_step() {
        let img = random_image(2);
        let bytes = encode_pgm16(&img);
        let back = decode_pgm16(&bytes).unwrap();
        let scale = img.min_max().1 / 65535.0;
        assert_eq!(back.dims(), img.dims());
        assert_eq!(back.spacing_mm(), img.spacing_mm());
        for (a, b) in back.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() <= scale / 2.0 * (1.0 + 1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn pgm_header_with_comments_between_fields() {
        let mut bytes = b"P5 # scale=2\n2 # c\n1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 3, 1, 0]);
        let img = decode_pgm16(&bytes).unwrap();
        assert_eq!(img.dims(), (1, 2));
        assert_eq!(img.as_slice(), &[6.0, 512.0]);
    }

    #[test]
    fn truncated_files_are_parse_errors() {
        let bytes = encode_pgm16(&random_image(3));
        for cut in [0, 1, 5, 20, bytes.len() - 1] {
            assert!(matches!(decode_pgm16(&bytes[..cut]), Err(Error::Parse { .. })), "cut {cut}");
        }
        let raw = encode_raw(&random_image(3));
        for cut in [0, 3, raw.len() - 1] {
            assert!(matches!(decode_raw(&raw[..cut]), Err(Error::Parse { .. })), "cut {cut}");
        }
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        match decode_pgm16(b"P2\n1 1\n65535\n00") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match decode_pgm16(b"P5\n1 x\n65535\n00") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overflowing_dimensions_are_invalid() {
        let huge = format!("{} {} 1\n", usize::MAX, 2);
        assert!(matches!(decode_raw(huge.as_bytes()), Err(Error::InvalidArgument(_))));
        let huge = b"P5\n99999999999999999999999 1\n65535\n";
        assert!(matches!(decode_pgm16(huge), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn checkerboard_mask_round_trip() {
        let mask = RegionMask::from_fn(7, 5, |r, c| (r + c) % 2 == 0).unwrap();
        assert_eq!(decode_mask(&encode_mask(&mask)).unwrap(), mask);
    }

    #[test]
    fn empty_mask_loads() {
        let mask = RegionMask::empty(3, 3).unwrap();
        let back = decode_mask(&encode_mask(&mask)).unwrap();
        assert_eq!(back.count(), 0);
    }

    #[test]
    fn mask_maxval_must_be_255() {
        let mut bytes = b"P5\n2 1\n1\n".to_vec();
        bytes.extend_from_slice(&[0, 1]);
        assert!(matches!(decode_mask(&bytes), Err(Error::Parse { offset: 7, .. })));
    }

    #[test]
    fn files_round_trip_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(4);
        for name in ["a.raw", "b.pgm"] {
            let path = dir.path().join(name);
            write_image(&path, &img).unwrap();
            assert_eq!(read_image(&path).unwrap().dims(), img.dims());
        }
        let mask = RegionMask::rect(17, 23, 2, 3, 9, 11).unwrap();
        let path = dir.path().join("m.pgm");
        write_mask(&path, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn csv_parsing() {
        let t = parse_csv("# note\na, b\n1,2\n\n3, 4\n").unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.numeric_column(1).unwrap(), vec![2.0, 4.0]);
        assert!(parse_csv("a,b\n1\n").is_err());
        assert!(t.column("c").is_none());
    }
}
