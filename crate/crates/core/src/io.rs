//! Image file I/O: binary PGM (P5) and 8-bit grayscale PNG, plus palette
//! rendering of label maps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::scalar::Real;

/// Fixed class colors: water, settlements, sand, vegetation.
pub const CLASS_PALETTE: [[u8; 3]; 4] = [
    [0x1F, 0x77, 0xB4],
    [0xD6, 0x27, 0x28],
    [0xE8, 0xC5, 0x47],
    [0x2C, 0xA0, 0x2C],
];

/// Color for pixels left undecided.
pub const UNCERTAIN_COLOR: [u8; 3] = [0x80, 0x80, 0x80];

/// Raw 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayU8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayU8 {
    pub fn to_image<T: Real>(&self) -> ImageBuffer<T> {
        ImageBuffer::from_fn(self.width, self.height, |r, c| {
            T::lit(self.data[r * self.width + c] as f64)
        })
    }

    pub fn from_image<T: Real>(img: &ImageBuffer<T>) -> Self {
        GrayU8 {
            width: img.width(),
            height: img.height(),
            data: img.to_u8(),
        }
    }
}

pub fn encode_pgm(img: &GrayU8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayU8> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("PGM", "truncated header"));
        }
        fields.push(
            std::str::from_utf8(&bytes[start..pos])
                .unwrap_or("")
                .to_string(),
        );
    }
    if fields[0] != "P5" {
        return Err(Error::format(
            "PGM",
            format!("unsupported magic {:?}", fields[0]),
        ));
    }
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::format("PGM", format!("bad {what} {s:?}")))
    };
    let width = parse(&fields[1], "width")?;
    let height = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format("PGM", format!("unsupported maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(Error::format("PGM", "raster shorter than header size"));
    }
    let mut data = bytes[pos..pos + n].to_vec();
    if maxval != 255 {
        for v in data.iter_mut() {
            *v = ((*v as u32 * 255 + maxval as u32 / 2) / maxval as u32).min(255) as u8;
        }
    }
    Ok(GrayU8 {
        width,
        height,
        data,
    })
}

pub fn encode_png_gray(img: &GrayU8) -> Result<Vec<u8>> {
    encode_png(img.width, img.height, png::ColorType::Grayscale, &img.data)
}

pub fn encode_png_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    encode_png(width, height, png::ColorType::Rgb, rgb)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::format("PNG", e.to_string()))?;
        w.write_image_data(data)
            .map_err(|e| Error::format("PNG", e.to_string()))?;
    }
    Ok(out)
}

pub fn decode_png_gray(bytes: &[u8]) -> Result<GrayU8> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("PNG", "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format("PNG", e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = match info.color_type {
        png::ColorType::Grayscale => buf[..w * h].to_vec(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).take(w * h).map(|p| p[0]).collect(),
        other => {
            return Err(Error::format(
                "PNG",
                format!("expected a grayscale image, found {other:?}"),
            ))
        }
    };
    Ok(GrayU8 {
        width: w,
        height: h,
        data,
    })
}

fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("png"))
        .unwrap_or(false)
}

/// Reads a PGM or (by extension) grayscale PNG file.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayU8> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if is_png(path) {
        decode_png_gray(&bytes)
    } else {
        decode_pgm(&bytes)
    }
}

/// Writes a PGM or (by extension) grayscale PNG file.
pub fn write_gray(path: impl AsRef<Path>, img: &GrayU8) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_png(path) {
        encode_png_gray(img)?
    } else {
        encode_pgm(img)
    };
    write_bytes(path, &bytes)
}

pub fn read_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageBuffer<T>> {
    Ok(read_gray(path)?.to_image())
}

/// Saves after clipping to `[0, 255]` and rounding half away from zero.
pub fn write_image<T: Real>(path: impl AsRef<Path>, img: &ImageBuffer<T>) -> Result<()> {
    write_gray(path, &GrayU8::from_image(img))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    Ok(bytes)
}

/// Little-endian cursor over a byte slice for the binary model formats.
pub(crate) struct LeReader<'a> {
    kind: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> LeReader<'a> {
    pub fn new(kind: &'static str, bytes: &'a [u8], magic: &[u8; 8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != magic {
            return Err(Error::format(kind, "bad magic bytes"));
        }
        Ok(LeReader {
            kind,
            bytes,
            pos: 8,
        })
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::format(self.kind, "unexpected end of data"));
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.kind,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}
