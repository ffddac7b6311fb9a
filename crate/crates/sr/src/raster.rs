//! 8-bit raster images and binary PNM (P5 grey / P6 colour) I/O.

use std::path::Path;

use crate::error::{Result, SrError};

/// Row-major, channel-interleaved 8-bit image with 1 or 3 channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(SrError::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(SrError::Dimension(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(SrError::Dimension(format!(
                "{} samples for a {width}x{height}x{channels} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a `height x width` plane scaled to `[0, 1]`.
    pub fn plane(&self, c: usize) -> Vec<f32> {
        self.pixels
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| v as f32 / 255.0)
            .collect()
    }

    /// Builds an image from `[0, 1]` planes, rounding and clamping each sample.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f32>]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(SrError::Dimension(format!(
                "planes do not all hold {width}x{height} samples"
            )));
        }
        let mut pixels = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            pixels.extend(planes.iter().map(|p| to_u8(p[i])));
        }
        Self::new(width, height, planes.len(), pixels)
    }

    /// Parses binary PNM data: `P6` (RGB) or `P5` (grey), maxval 255.
    pub fn decode_pnm(bytes: &[u8]) -> Result<Self> {
        let PnmHeader {
            width,
            height,
            channels,
            data_offset: pos,
        } = PnmHeader::parse(bytes)?;
        let need = width * height * channels;
        let data = &bytes[pos..];
        if data.len() < need {
            return Err(SrError::Format(format!(
                "raster holds {} bytes, header promises {need}",
                data.len()
            )));
        }
        Self::new(width, height, channels, data[..need].to_vec())
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        Self::decode_pnm(&bytes).map_err(|e| match e {
            SrError::Format(m) => SrError::Format(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode_pnm())?;
        Ok(())
    }

    /// Copies out the `w x h` region whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if x + w > self.width || y + h > self.height {
            return Err(SrError::Dimension(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut pixels = Vec::with_capacity(w * h * c);
        for row in y..y + h {
            let start = (row * self.width + x) * c;
            pixels.extend_from_slice(&self.pixels[start..start + w * c]);
        }
        Self::new(w, h, c, pixels)
    }

    pub fn flip_horizontal(&self) -> Self {
        let c = self.channels;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks(self.width * c) {
            for px in row.chunks(c).rev() {
                pixels.extend_from_slice(px);
            }
        }
        Self { pixels, ..*self }
    }

    /// Replicates a grey image into three channels; colour images are returned as is.
    pub fn to_rgb(&self) -> Self {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            pixels,
            channels: 3,
            ..*self
        }
    }
}

/// Geometry of a binary PNM file, read without decoding the raster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PnmHeader {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Byte offset of the first raster sample.
    pub data_offset: usize,
}

impl PnmHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = next_token(bytes, &mut pos)?;
        let channels = match magic {
            b"P6" => 3,
            b"P5" => 1,
            _ => {
                return Err(SrError::Format(format!(
                    "unsupported magic {:?} (expected P6 or P5)",
                    String::from_utf8_lossy(magic)
                )))
            }
        };
        let width = parse_number(next_token(bytes, &mut pos)?, "width")?;
        let height = parse_number(next_token(bytes, &mut pos)?, "height")?;
        let maxval = parse_number(next_token(bytes, &mut pos)?, "maxval")?;
        if maxval != 255 {
            return Err(SrError::Format(format!(
                "maxval {maxval} unsupported (only 255)"
            )));
        }
        if width == 0 || height == 0 {
            return Err(SrError::Format(format!("empty image {width}x{height}")));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(SrError::Format("missing whitespace after header".into())),
        }
        Ok(Self {
            width,
            height,
            channels,
            data_offset: pos,
        })
    }

    /// Reads just enough of `path` to parse its header.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        use std::io::Read;
        let mut buf = Vec::with_capacity(1024);
        std::fs::File::open(path.as_ref())?
            .take(4096)
            .read_to_end(&mut buf)?;
        Self::parse(&buf).map_err(|e| match e {
            SrError::Format(m) => SrError::Format(format!("{}: {m}", path.as_ref().display())),
            other => other,
        })
    }
}

pub(crate) fn to_u8(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(SrError::Format("truncated header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn parse_number(tok: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            SrError::Format(format!(
                "bad {what} field {:?}",
                String::from_utf8_lossy(tok)
            ))
        })
}

/// BT.601 full-range RGB -> (Y, Cb, Cr) planes, all in `[0, 1]` with chroma
/// centred on 0.5.
pub fn rgb_to_ycbcr(img: &RasterImage) -> [Vec<f32>; 3] {
    let (r, g, b) = if img.channels() == 3 {
        (img.plane(0), img.plane(1), img.plane(2))
    } else {
        let p = img.plane(0);
        (p.clone(), p.clone(), p)
    };
    let mut y = Vec::with_capacity(r.len());
    let mut cb = Vec::with_capacity(r.len());
    let mut cr = Vec::with_capacity(r.len());
    for ((&r, &g), &b) in r.iter().zip(&g).zip(&b) {
        y.push(0.299 * r + 0.587 * g + 0.114 * b);
        cb.push(0.5 - 0.168_736 * r - 0.331_264 * g + 0.5 * b);
        cr.push(0.5 + 0.5 * r - 0.418_688 * g - 0.081_312 * b);
    }
    [y, cb, cr]
}

/// Inverse of [`rgb_to_ycbcr`], returning unclamped `[R, G, B]` planes.
pub fn ycbcr_to_rgb(y: &[f32], cb: &[f32], cr: &[f32]) -> [Vec<f32>; 3] {
    let mut r = Vec::with_capacity(y.len());
    let mut g = Vec::with_capacity(y.len());
    let mut b = Vec::with_capacity(y.len());
    for ((&y, &cb), &cr) in y.iter().zip(cb).zip(cr) {
        let (cb, cr) = (cb - 0.5, cr - 0.5);
        r.push(y + 1.402 * cr);
        g.push(y - 0.344_136 * cb - 0.714_136 * cr);
        b.push(y + 1.772 * cb);
    }
    [r, g, b]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_sample_count() {
        assert!(RasterImage::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(RasterImage::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterImage::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn header_with_comments_and_exact_layout() {
        let mut bytes = b"P6 # comment\n2 1\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = RasterImage::decode_pnm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.get(1, 0, 2), 6);
        assert_eq!(img.encode_pnm(), b"P6\n2 1\n255\n\x01\x02\x03\x04\x05\x06".to_vec());
    }

    #[test]
    fn raster_may_start_with_whitespace_bytes() {
        let mut bytes = b"P5\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[b' ', b'\n']);
        let img = RasterImage::decode_pnm(&bytes).unwrap();
        assert_eq!(img.pixels(), &[b' ', b'\n']);
    }

    #[test]
    fn malformed_headers_fail() {
        for bad in [&b"P3\n1 1\n255\n\0\0\0"[..], b"P6\n1 1\n65535\n", b"P6\n2 2\n255\n\0", b"P6\nx 1\n255\n"] {
            assert!(matches!(RasterImage::decode_pnm(bad), Err(SrError::Format(_))));
        }
    }

    #[test]
    fn grey_round_trips_through_ycbcr() {
        let img = RasterImage::filled(3, 2, [77, 77, 77]).unwrap();
        let [y, cb, cr] = rgb_to_ycbcr(&img);
        let back = ycbcr_to_rgb(&y, &cb, &cr);
        let out = RasterImage::from_planes(3, 2, &back).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_and_flip() {
        let img = RasterImage::new(3, 2, 1, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(img.crop(1, 0, 2, 2).unwrap().pixels(), &[1, 2, 4, 5]);
        assert_eq!(img.flip_horizontal().pixels(), &[2, 1, 0, 5, 4, 3]);
        assert!(img.crop(2, 0, 2, 1).is_err());
    }
}
