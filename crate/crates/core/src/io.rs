//! 8-bit grayscale images in the binary PGM format (P5, maxval 255).
//!
//! The parser accepts the usual header liberties (comments, arbitrary
//! whitespace) and reports the byte offset where parsing failed; the
//! writer emits the canonical minimal header.

use std::path::Path;

use thiserror::Error;

/// PGM format and I/O errors.
#[derive(Debug, Error)]
pub enum PgmError {
    /// The file does not start with the binary-PGM magic `P5`.
    #[error("not a binary PGM: missing P5 magic")]
    BadMagic,
    /// Header ended before all fields were read.
    #[error("unexpected end of header at byte {0}")]
    UnexpectedEof(usize),
    /// A header field is not a decimal number.
    #[error("invalid header number at byte {0}")]
    BadNumber(usize),
    /// Only maxval 255 is supported.
    #[error("unsupported maxval {0}, only 255")]
    UnsupportedMaxval(usize),
    /// Pixel payload does not match width x height.
    #[error("pixel payload holds {got} bytes, header promises {want}")]
    PayloadSize { want: usize, got: usize },
    /// Zero-sized images are rejected.
    #[error("image dimensions {width}x{height} invalid")]
    BadDimensions { width: usize, height: usize },
    /// Underlying file error.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An 8-bit grayscale image, pixels row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    /// Image from row-major pixels; their count must be `width * height`.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, PgmError> {
        if width == 0 || height == 0 {
            return Err(PgmError::BadDimensions { width, height });
        }
        if pixels.len() != width * height {
            return Err(PgmError::PayloadSize {
                want: width * height,
                got: pixels.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// Width in pixels.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Height in pixels.
    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major pixel values.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Side length when the image is square, `None` otherwise.
    pub fn side(&self) -> Option<usize> {
        (self.width == self.height).then_some(self.width)
    }

    /// Pixels as floating-point values in [0, 255].
    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Quantize real-valued pixels: clip to [0, 255], round to nearest.
    pub fn from_f64_clipped(
        width: usize,
        height: usize,
        values: &[f64],
    ) -> Result<Self, PgmError> {
        let pixels = values
            .iter()
            .map(|v| v.clamp(0.0, 255.0).round() as u8)
            .collect();
        GrayImage::new(width, height, pixels)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    /// Skip whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.at < self.bytes.len() {
            match self.bytes[self.at] {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c => self.at += 1,
                b'#' => {
                    while self.at < self.bytes.len() && self.bytes[self.at] != b'\n' {
                        self.at += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn read_number(&mut self) -> Result<usize, PgmError> {
        self.skip_separators();
        if self.at >= self.bytes.len() {
            return Err(PgmError::UnexpectedEof(self.at));
        }
        if !self.bytes[self.at].is_ascii_digit() {
            return Err(PgmError::BadNumber(self.at));
        }
        let mut value = 0usize;
        while self.at < self.bytes.len() && self.bytes[self.at].is_ascii_digit() {
            value = value * 10 + usize::from(self.bytes[self.at] - b'0');
            self.at += 1;
        }
        Ok(value)
    }
}

/// Decode a binary PGM held in memory.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut cursor = Cursor { bytes, at: 2 };
    let width = cursor.read_number()?;
    let height = cursor.read_number()?;
    let maxval = cursor.read_number()?;
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cursor.at >= bytes.len() {
        return Err(PgmError::UnexpectedEof(cursor.at));
    }
    if !bytes[cursor.at].is_ascii_whitespace() {
        return Err(PgmError::BadNumber(cursor.at));
    }
    cursor.at += 1;
    let payload = &bytes[cursor.at..];
    if width == 0 || height == 0 {
        return Err(PgmError::BadDimensions { width, height });
    }
    if payload.len() != width * height {
        return Err(PgmError::PayloadSize {
            want: width * height,
            got: payload.len(),
        });
    }
    GrayImage::new(width, height, payload.to_vec())
}

/// Encode as binary PGM with the canonical `P5\n<w> <h>\n255\n` header.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Read a binary PGM file.
pub fn read_pgm(path: &Path) -> Result<GrayImage, PgmError> {
    parse_pgm(&std::fs::read(path)?)
}

/// Write a binary PGM file.
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<(), PgmError> {
    Ok(std::fs::write(path, encode_pgm(image))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_parse_round_trip() {
        let image = GrayImage::new(3, 2, vec![0, 64, 128, 192, 255, 7]).unwrap();
        let bytes = encode_pgm(&image);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back, image);
    }

    #[test]
    fn parser_accepts_comments_and_whitespace() {
        let mut bytes = b"P5 # comment\n# another line\n 4\t1 \n255\n".to_vec();
        bytes.extend_from_slice(&[9, 8, 7, 6]);
        let image = parse_pgm(&bytes).unwrap();
        assert_eq!((image.width(), image.height()), (4, 1));
        assert_eq!(image.pixels(), &[9, 8, 7, 6]);
    }

    #[test]
    fn parser_reports_failure_offsets() {
        assert!(matches!(parse_pgm(b"P6\n1 1\n255\nx"), Err(PgmError::BadMagic)));
        assert!(matches!(parse_pgm(b"P5\n1"), Err(PgmError::UnexpectedEof(4))));
        assert!(matches!(parse_pgm(b"P5\nw 1\n255\nx"), Err(PgmError::BadNumber(3))));
        assert!(matches!(
            parse_pgm(b"P5\n1 1\n16\nx"),
            Err(PgmError::UnsupportedMaxval(16))
        ));
        assert!(matches!(
            parse_pgm(b"P5\n2 2\n255\nxy"),
            Err(PgmError::PayloadSize { want: 4, got: 2 })
        ));
        assert!(matches!(
            parse_pgm(b"P5\n0 2\n255\n"),
            Err(PgmError::BadDimensions { width: 0, height: 2 })
        ));
    }

    #[test]
    fn quantization_clips_and_rounds() {
        let image =
            GrayImage::from_f64_clipped(2, 2, &[-5.0, 300.0, 127.4, 127.5]).unwrap();
        assert_eq!(image.pixels(), &[0, 255, 127, 128]);
        assert_eq!(image.side(), Some(2));
        assert_eq!(image.to_f64(), vec![0.0, 255.0, 127.0, 128.0]);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("kahs-pgm-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.pgm");
        let image = GrayImage::new(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        write_pgm(&path, &image).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), image);
        std::fs::remove_file(&path).unwrap();
    }
}
