//! Portable graymap (PGM) input and output, ASCII (`P2`) and binary (`P5`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{AolError, Result};

use super::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

fn parse_err(msg: impl Into<String>) -> AolError {
    AolError::Parse(msg.into())
}

struct Header {
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn read_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err("truncated PGM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| parse_err("non-ASCII PGM header"))?);
    }
    let binary = match tokens[0] {
        "P5" => true,
        "P2" => false,
        other => return Err(parse_err(format!("not a PGM file (magic '{other}')"))),
    };
    let num = |t: &str, what: &str| t.parse::<usize>().map_err(|_| parse_err(format!("bad PGM {what} '{t}'")));
    let width = num(tokens[1], "width")?;
    let height = num(tokens[2], "height")?;
    let maxval = num(tokens[3], "maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("unsupported PGM geometry {width}x{height}, maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from binary data.
    Ok(Header {
        binary,
        width,
        height,
        maxval: maxval as u32,
        data_start: pos + 1,
    })
}

/// Decodes a PGM image; pixel values are returned unscaled.
pub fn decode_pgm(bytes: &[u8]) -> Result<(GrayImage, u32)> {
    let h = read_header(bytes)?;
    let count = h.width * h.height;
    let mut values = Vec::with_capacity(count);
    if h.binary {
        let wide = h.maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes
            .get(h.data_start..h.data_start + need)
            .ok_or_else(|| parse_err("truncated PGM raster"))?;
        if wide {
            values.extend(data.chunks_exact(2).map(|b| f64::from(u16::from_be_bytes([b[0], b[1]]))));
        } else {
            values.extend(data.iter().map(|&b| f64::from(b)));
        }
    } else {
        let text = std::str::from_utf8(bytes.get(h.data_start.min(bytes.len())..).unwrap_or(&[]))
            .map_err(|_| parse_err("non-ASCII PGM raster"))?;
        for tok in text.split_ascii_whitespace().take(count) {
            let v: u32 = tok.parse().map_err(|_| parse_err(format!("bad PGM sample '{tok}'")))?;
            values.push(f64::from(v));
        }
        if values.len() != count {
            return Err(parse_err("truncated PGM raster"));
        }
    }
    if values.iter().any(|&v| v > f64::from(h.maxval)) {
        return Err(parse_err("PGM sample exceeds maxval"));
    }
    let pixels = DMatrix::from_row_iterator(h.height, h.width, values);
    Ok((GrayImage::new(pixels)?, h.maxval))
}

/// Encodes `img` with samples rounded and clamped to `0..=maxval`.
pub fn encode_pgm(img: &GrayImage, maxval: u32, format: PgmFormat) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("unsupported PGM maxval {maxval}")));
    }
    let magic = if format == PgmFormat::Binary { "P5" } else { "P2" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    let top = f64::from(maxval);
    let sample = |v: f64| v.round().clamp(0.0, top) as u32;
    for r in 0..img.height() {
        for c in 0..img.width() {
            let v = sample(img.get(r, c));
            match format {
                PgmFormat::Binary if maxval > 255 => out.extend_from_slice(&(v as u16).to_be_bytes()),
                PgmFormat::Binary => out.push(v as u8),
                PgmFormat::Ascii => {
                    out.extend_from_slice(v.to_string().as_bytes());
                    out.push(if c + 1 == img.width() { b'\n' } else { b' ' });
                }
            }
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    Ok(decode_pgm(&bytes)?.0)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>, maxval: u32, format: PgmFormat) -> Result<()> {
    let bytes = encode_pgm(img, maxval, format)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}
