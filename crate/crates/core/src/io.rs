//! Binary PGM images and CSV rows.

use std::io::{BufRead, Write};

use crate::apps::denoise::GrayImage;
use crate::error::{Error, Result};

/// Writes an 8-bit binary (P5) PGM with `round(255 v)` per pixel.
pub fn write_pgm<W: Write>(image: &GrayImage, out: &mut W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", image.width(), image.height())?;
    let bytes: Vec<u8> = image.pixels().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads an 8-bit binary PGM, mapping `v / maxval` into `[0, 1]`.
pub fn read_pgm<R: BufRead>(input: &mut R) -> Result<GrayImage> {
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        let token = next_token(input)?;
        fields.push(token);
    }
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("expected P5 magic, got {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM header field {s:?}")));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported maxval {maxval}")));
    }
    let mut bytes = vec![0u8; width * height];
    input.read_exact(&mut bytes).map_err(|e| Error::Parse(format!("truncated PGM data: {e}")))?;
    GrayImage::new(width, height, bytes.iter().map(|b| f64::from(*b) / maxval as f64).collect())
}

/// Next whitespace-delimited header token, skipping `#` comments. Consumes
/// exactly one whitespace byte after the token.
fn next_token<R: BufRead>(input: &mut R) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if input.read(&mut byte)? == 0 {
            return Err(Error::Parse("unexpected end of PGM header".into()));
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut skipped = Vec::new();
            input.read_until(b'\n', &mut skipped)?;
        } else if c.is_ascii_whitespace() {
            if !token.is_empty() {
                return Ok(token);
            }
        } else {
            token.push(char::from(c));
        }
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one CSV row of already-formatted cells.
pub fn write_row<W: Write, S: AsRef<str>>(out: &mut W, cells: &[S]) -> Result<()> {
    let line = cells.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(",");
    writeln!(out, "{line}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::denoise::test_pattern;
    use std::io::Cursor;

    #[test]
    fn pgm_round_trip_on_byte_levels() {
        let pixels: Vec<f64> = (0..12).map(|i| f64::from(i * 20) / 255.0).collect();
        let img = GrayImage::new(4, 3, pixels).unwrap();
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n4 3\n255\n"));
        let back = read_pgm(&mut Cursor::new(buf)).unwrap();
        assert_eq!(back.width(), 4);
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pgm_quantizes_to_nearest_level() {
        let img = test_pattern(8, 8);
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        let back = read_pgm(&mut Cursor::new(buf)).unwrap();
        for (a, b) in back.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let mut data = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        data.extend_from_slice(&[0, 255]);
        let img = read_pgm(&mut Cursor::new(data)).unwrap();
        assert_eq!(img.pixels(), &[0.0, 1.0]);
        assert!(read_pgm(&mut Cursor::new(b"P2\n1 1\n255\n0".to_vec())).is_err());
        assert!(read_pgm(&mut Cursor::new(b"P5\n2 2\n255\n\x01".to_vec())).is_err());
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let mut out = Vec::new();
        write_row(&mut out, &["a", "b"]).unwrap();
        assert_eq!(out, b"a,b\n");
    }
}
