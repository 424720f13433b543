//! Binary PPM (`P6`) and PGM (`P5`) with maxval 255, the raster format used
//! for image-directory frames and masks.

use std::io::{self, Read, Write};

use tubeforge_core::{GrayImage, RgbImage};

fn invalid(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 2]) -> io::Result<(usize, usize)> {
    let mut m = [0u8; 2];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(invalid("unexpected netpbm magic"));
    }
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = read_number(r)?;
    }
    if fields[2] != 255 {
        return Err(invalid("only maxval 255 is supported"));
    }
    Ok((fields[0], fields[1]))
}

// Reads a decimal token plus exactly one trailing whitespace byte, skipping
// leading whitespace and `#` comments.
fn read_number<R: Read>(r: &mut R) -> io::Result<usize> {
    let mut byte = [0u8; 1];
    let mut digits = String::new();
    loop {
        r.read_exact(&mut byte)?;
        match byte[0] {
            b'#' if digits.is_empty() => {
                while byte[0] != b'\n' {
                    r.read_exact(&mut byte)?;
                }
            }
            c if c.is_ascii_whitespace() => {
                if !digits.is_empty() {
                    break;
                }
            }
            c if c.is_ascii_digit() => digits.push(c as char),
            _ => return Err(invalid("malformed netpbm header")),
        }
    }
    digits.parse().map_err(|_| invalid("netpbm dimension out of range"))
}

pub fn read_ppm<R: Read>(mut r: R) -> io::Result<RgbImage> {
    let (w, h) = read_header(&mut r, b"P6")?;
    let mut data = vec![0u8; w * h * 3];
    r.read_exact(&mut data)?;
    RgbImage::from_raw(w, h, data).map_err(|e| invalid(&e.to_string()))
}

pub fn read_pgm<R: Read>(mut r: R) -> io::Result<GrayImage> {
    let (w, h) = read_header(&mut r, b"P5")?;
    let mut data = vec![0u8; w * h];
    r.read_exact(&mut data)?;
    GrayImage::from_raw(w, h, data).map_err(|e| invalid(&e.to_string()))
}

pub fn write_ppm<W: Write>(mut w: W, img: &RgbImage) -> io::Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.as_bytes())
}

pub fn write_pgm<W: Write>(mut w: W, img: &GrayImage) -> io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.as_bytes())
}
