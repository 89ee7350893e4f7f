//! Fixed-size binary glyph records: one kind byte (Move=0, Line=1, Curve=2,
//! End=3) followed by six little-endian `f32`, padded with zero `End` records.

use std::path::Path;

use super::{Command, CommandType, Glyph};
use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 1 + 6 * 4;

pub fn encode_record(glyph: &Glyph, l_max: usize) -> Result<Vec<u8>> {
    if glyph.commands.len() > l_max {
        return Err(Error::TooLong {
            len: glyph.commands.len(),
            max: l_max,
        });
    }
    let mut out = Vec::with_capacity(l_max * RECORD_BYTES);
    let pad = l_max - glyph.commands.len();
    for c in glyph
        .commands
        .iter()
        .copied()
        .chain(std::iter::repeat_n(Command::end(), pad))
    {
        out.push(c.kind.code());
        for v in c.args {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes commands up to and including the first `End`; the padding after it
/// is ignored.
pub fn decode_record(bytes: &[u8], char_class: usize) -> std::result::Result<Glyph, String> {
    if !bytes.len().is_multiple_of(RECORD_BYTES) {
        return Err(format!(
            "length {} is not a multiple of {RECORD_BYTES}",
            bytes.len()
        ));
    }
    let mut commands = Vec::new();
    for (i, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let kind = CommandType::from_code(rec[0])
            .ok_or_else(|| format!("record {i}: unknown command kind {}", rec[0]))?;
        let mut args = [0.0f64; 6];
        for (k, a) in args.iter_mut().enumerate() {
            let o = 1 + 4 * k;
            *a = f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64;
        }
        commands.push(Command::new(kind, args));
        if kind == CommandType::End {
            break;
        }
    }
    Ok(Glyph::new(char_class, commands))
}

pub fn write_glyph_file(path: &Path, glyph: &Glyph, l_max: usize) -> Result<()> {
    let bytes = encode_record(glyph, l_max)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_glyph_file(path: &Path, char_class: usize) -> Result<Glyph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_record(&bytes, char_class).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    #[test]
    fn layout_and_padding() {
        let g = Glyph::new(
            1,
            vec![
                Command::move_by(Point::new(0.25, 0.5)),
                Command::line_by(Point::new(0.5, 0.0)),
                Command::end(),
            ],
        );
        let bytes = encode_record(&g, 5).unwrap();
        assert_eq!(bytes.len(), 5 * RECORD_BYTES);
        assert_eq!(bytes[0], 0);
        assert_eq!(&bytes[17..21], &0.25f32.to_le_bytes());
        assert_eq!(bytes[RECORD_BYTES], 1);
        assert_eq!(bytes[2 * RECORD_BYTES], 3);
        assert!(bytes[3 * RECORD_BYTES..].iter().all(|&b| b == 3 || b == 0));
        assert_eq!(bytes[4 * RECORD_BYTES], 3);
        let back = decode_record(&bytes, 1).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn too_long_and_garbage() {
        let g = Glyph::new(0, vec![Command::end(); 4]);
        assert!(matches!(
            encode_record(&g, 3),
            Err(Error::TooLong { len: 4, max: 3 })
        ));
        assert!(decode_record(&[0u8; 7], 0).is_err());
        let mut bad = vec![0u8; RECORD_BYTES];
        bad[0] = 9;
        assert!(decode_record(&bad, 0)
            .unwrap_err()
            .contains("unknown command kind 9"));
    }
}
