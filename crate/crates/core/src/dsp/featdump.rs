//! Binary feature dump: 16-byte header (`PHFX`, version, frames, dims as
//! little-endian u32) followed by row-major little-endian f32 values.

use std::io::{Read, Write};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::score::FrameClock;

pub const FEATURE_DUMP_MAGIC: &[u8; 4] = b"PHFX";
/// Version 1: HTK-mel filters over 0-12 kHz, natural log, 1e-10 floor.
pub const FEATURE_DUMP_VERSION: u32 = 1;

pub fn write_feature_dump<W: Write>(mut w: W, m: &FeatureMatrix) -> Result<()> {
    let frames = u32::try_from(m.frames()).map_err(|_| Error::Shape("too many frames".into()))?;
    let mut buf = Vec::with_capacity(16 + 4 * m.as_slice().len());
    buf.extend_from_slice(FEATURE_DUMP_MAGIC);
    buf.extend_from_slice(&FEATURE_DUMP_VERSION.to_le_bytes());
    buf.extend_from_slice(&frames.to_le_bytes());
    buf.extend_from_slice(&(m.dims() as u32).to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_feature_dump<R: Read>(mut r: R, clock: FrameClock) -> Result<FeatureMatrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::schema("feature dump shorter than its 16-byte header"))?;
    if &header[..4] != FEATURE_DUMP_MAGIC {
        return Err(Error::schema("feature dump magic is not PHFX"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (version, frames, dims) = (word(4), word(8) as usize, word(12) as usize);
    if version != FEATURE_DUMP_VERSION {
        return Err(Error::schema(format!("unsupported feature dump version {version}")));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != frames * dims * 4 {
        return Err(Error::schema(format!(
            "feature dump body has {} bytes, header says {frames}x{dims} floats",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureMatrix::new(data, dims, clock)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_and_round_trip() {
        let m = FeatureMatrix::new(vec![1.0, -2.5, 0.25, 3.0, 4.0, 5.0], 3, FrameClock::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &m).unwrap();
        assert_eq!(&buf[..4], b"PHFX");
        assert_eq!(&buf[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(buf.len(), 16 + 6 * 4);
        assert_eq!(read_feature_dump(&buf[..], FrameClock::default()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_dumps() {
        assert!(read_feature_dump(&b"PHF"[..], FrameClock::default()).is_err());
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &FeatureMatrix::zeros(2, 2, FrameClock::default())).unwrap();
        assert!(read_feature_dump(&buf[..buf.len() - 1], FrameClock::default()).is_err());
        buf[0] = b'X';
        assert!(read_feature_dump(&buf[..], FrameClock::default()).is_err());
    }
}
