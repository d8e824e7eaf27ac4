//! Binary embedding file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "EMB1" | u32 version = 1 | u32 rows | u32 dim
//! rows × ( u32 id_len | id bytes (UTF-8) | dim × f32 )
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{EmbeddingError, EmbeddingMatrix};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;

pub fn write_embeddings(mut w: impl Write, m: &EmbeddingMatrix) -> Result<(), EmbeddingError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(m.len() as u32).to_le_bytes())?;
    w.write_all(&(m.dim() as u32).to_le_bytes())?;
    for (id, row) in m.iter() {
        w.write_all(&(id.len() as u32).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(&mut w, m)?;
    w.flush()?;
    Ok(())
}

/// Cursor over a fully buffered file.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).ok_or(EmbeddingError::Truncated)?;
        let bytes = self.buf.get(self.pos..end).ok_or(EmbeddingError::Truncated)?;
        self.pos = end;
        Ok(bytes)
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn read_embeddings(mut r: impl Read) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(4).map_err(|_| EmbeddingError::BadMagic)? != MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(EmbeddingError::UnsupportedVersion(version));
    }
    let rows = r.u32()? as usize;
    let dim = r.u32()? as usize;
    if dim == 0 {
        return Err(EmbeddingError::InvalidDimension(dim));
    }
    // Each record needs at least 4 + 4·dim bytes; reject absurd headers
    // before allocating.
    let min_record = 4 + 4 * dim;
    if rows.saturating_mul(min_record) > buf.len() {
        return Err(EmbeddingError::Truncated);
    }
    let mut ids = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for _ in 0..rows {
        let len = r.u32()? as usize;
        let id = std::str::from_utf8(r.take(len)?).map_err(|_| EmbeddingError::InvalidUtf8)?;
        ids.push(id.to_string());
        for chunk in r.take(4 * dim)?.chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().expect("4 bytes")));
        }
    }
    if r.pos != buf.len() {
        return Err(EmbeddingError::TrailingBytes(buf.len() - r.pos));
    }
    EmbeddingMatrix::new(dim, ids, data)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, EmbeddingError> {
    read_embeddings(BufReader::new(File::open(path)?))
}
