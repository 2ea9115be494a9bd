use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{BlockVector, CsrBlock};

const MAGIC: &[u8; 8] = b"XAMGBIN1";
const HEADER_LEN: u64 = 41;
const FLAG_RHS: u8 = 1;
const FLAG_GUESS: u8 = 2;

/// Contents of a system file.
#[derive(Debug, Clone)]
pub struct SystemFile {
    pub matrix: CsrBlock,
    pub rhs: Option<BlockVector>,
    pub guess: Option<BlockVector>,
}

/// Serializes a matrix and optional RHS / initial guess (little-endian,
/// 64-bit indices).
pub fn write_system(
    path: impl AsRef<Path>,
    matrix: &CsrBlock,
    rhs: Option<&BlockVector>,
    guess: Option<&BlockVector>,
) -> Result<()> {
    fs::write(path, encode_system(matrix, rhs, guess)?)?;
    Ok(())
}

pub fn encode_system(matrix: &CsrBlock, rhs: Option<&BlockVector>, guess: Option<&BlockVector>) -> Result<Vec<u8>> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot write an empty matrix".into()));
    }
    let mut nrhs = 0;
    for v in [rhs, guess].into_iter().flatten() {
        if v.nrows() != n {
            return Err(Error::shape(format_args!("vector has {} rows, matrix {}", v.nrows(), n)));
        }
        if nrhs != 0 && v.nrhs() != nrhs {
            return Err(Error::shape(format_args!("rhs and guess differ in column count")));
        }
        nrhs = v.nrhs();
    }
    let nnz = matrix.nnz();
    let mut out = Vec::with_capacity(HEADER_LEN as usize + 8 * (n + 1 + 2 * nnz + 2 * n * nrhs));
    out.extend_from_slice(MAGIC);
    for v in [n, matrix.ncols(), nnz, nrhs] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    let flags = if rhs.is_some() { FLAG_RHS } else { 0 } | if guess.is_some() { FLAG_GUESS } else { 0 };
    out.push(flags);
    for &p in matrix.row_ptr() {
        out.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for k in 0..nnz {
        out.extend_from_slice(&(matrix.col(k) as u64).to_le_bytes());
    }
    for k in 0..nnz {
        out.extend_from_slice(&matrix.value(k).to_le_bytes());
    }
    for v in [rhs, guess].into_iter().flatten() {
        for x in v.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_system(path: impl AsRef<Path>) -> Result<SystemFile> {
    decode_system(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl Cursor<'_> {
    fn fail<T>(&self, at: u64, message: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            offset: at,
            message: message.into(),
        })
    }

    fn remaining(&self) -> u64 {
        self.bytes.len() as u64 - self.pos
    }

    fn take(&mut self, len: u64, what: &str) -> Result<&[u8]> {
        if self.remaining() < len {
            return self.fail(self.pos, format!("truncated {what}: need {len} bytes, {} left", self.remaining()));
        }
        let s = &self.bytes[self.pos as usize..(self.pos + len) as usize];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u64_array(&mut self, count: u64, what: &str) -> Result<Vec<u64>> {
        let need = count.saturating_mul(8);
        let raw = self.take(need, what)?;
        Ok(raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn f64_array(&mut self, count: u64, what: &str) -> Result<Vec<f64>> {
        Ok(self.u64_array(count, what)?.into_iter().map(f64::from_bits).collect())
    }
}

pub fn decode_system(bytes: &[u8]) -> Result<SystemFile> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8, "magic")? != MAGIC {
        return c.fail(0, "bad magic, expected XAMGBIN1");
    }
    let nrows = c.u64("nrows")?;
    let ncols = c.u64("ncols")?;
    let nnz = c.u64("nnz")?;
    let nrhs = c.u64("nrhs")?;
    if nrows == 0 || ncols == 0 {
        return c.fail(8, "matrix dimensions must be positive");
    }
    if ncols > u32::MAX as u64 + 1 {
        return c.fail(16, format!("ncols = {ncols} exceeds 32-bit index range"));
    }
    let flags = c.take(1, "flags")?[0];
    if flags & !(FLAG_RHS | FLAG_GUESS) != 0 {
        return c.fail(40, format!("unknown flag bits {flags:#04x}"));
    }
    if flags != 0 && nrhs == 0 {
        return c.fail(32, "vectors present but nrhs = 0");
    }
    let nvec = u64::from(flags & FLAG_RHS != 0) + u64::from(flags & FLAG_GUESS != 0);
    let need = (nrows + 1)
        .checked_add(nnz.saturating_mul(2))
        .and_then(|v| v.checked_add(nrows.checked_mul(nrhs)?.checked_mul(nvec)?))
        .and_then(|v| v.checked_mul(8));
    match need {
        Some(need) if need == c.remaining() => {}
        Some(need) if need > c.remaining() => {
            return c.fail(c.pos, format!("truncated payload: header implies {need} bytes, {} present", c.remaining()))
        }
        Some(need) => return c.fail(HEADER_LEN + need, "trailing bytes after payload"),
        None => return c.fail(8, "header sizes overflow"),
    }

    let ptr_at = c.pos;
    let row_ptr = c.u64_array(nrows + 1, "row_ptr")?;
    if row_ptr[0] != 0 {
        return c.fail(ptr_at, format!("row_ptr[0] = {}", row_ptr[0]));
    }
    for i in 0..nrows as usize {
        if row_ptr[i + 1] < row_ptr[i] {
            return c.fail(ptr_at + 8 * (i as u64 + 1), format!("row_ptr decreases at row {i}"));
        }
    }
    if row_ptr[nrows as usize] != nnz {
        return c.fail(
            ptr_at + 8 * nrows,
            format!("row_ptr[{nrows}] = {} but nnz = {nnz}", row_ptr[nrows as usize]),
        );
    }
    let col_at = c.pos;
    let cols = c.u64_array(nnz, "col_idx")?;
    if let Some(k) = cols.iter().position(|&j| j >= ncols) {
        return c.fail(col_at + 8 * k as u64, format!("column index {} >= ncols = {ncols}", cols[k]));
    }
    let vals = c.f64_array(nnz, "values")?;
    let row_ptr: Vec<usize> = row_ptr.into_iter().map(|p| p as usize).collect();
    for i in 0..nrows as usize {
        let mut row: Vec<u64> = cols[row_ptr[i]..row_ptr[i + 1]].to_vec();
        row.sort_unstable();
        if let Some(w) = row.windows(2).find(|w| w[0] == w[1]) {
            return c.fail(col_at + 8 * row_ptr[i] as u64, format!("duplicate column {} in row {i}", w[0]));
        }
    }
    let matrix = CsrBlock::from_unsorted(
        nrows as usize,
        ncols as usize,
        row_ptr,
        cols.into_iter().map(|j| j as usize).collect(),
        vals,
    )
    .map_err(|e| Error::Format {
        offset: ptr_at,
        message: e.to_string(),
    })?;
    let mut read_vec = |present: bool, what: &str| -> Result<Option<BlockVector>> {
        if !present {
            return Ok(None);
        }
        let data = c.f64_array(nrows * nrhs, what)?;
        Ok(Some(BlockVector::from_interleaved(nrows as usize, nrhs as usize, data)?))
    };
    let rhs = read_vec(flags & FLAG_RHS != 0, "rhs")?;
    let guess = read_vec(flags & FLAG_GUESS != 0, "guess")?;
    Ok(SystemFile { matrix, rhs, guess })
}
