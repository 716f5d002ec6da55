//! Little-endian binary snapshots. Layouts are described in docs/FORMATS.md.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::storage::schema::Schema;
use crate::storage::table::{ColumnarTable, Database};

pub const TABLE_MAGIC: &[u8; 4] = b"SCTB";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) struct Encoder<W: Write> {
    w: W,
}

impl<W: Write> Encoder<W> {
    pub fn new(w: W) -> Self {
        Encoder { w }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.w.write_all(b)?;
        Ok(())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    pub fn i32s(&mut self, vals: &[i32]) -> Result<()> {
        let mut buf = Vec::with_capacity(vals.len() * 4);
        for v in vals {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub fn header(&mut self, magic: &[u8; 4], schema: &Schema) -> Result<()> {
        self.bytes(magic)?;
        self.u32(FORMAT_VERSION)?;
        self.bytes(&schema.hash())
    }

    pub fn finish(mut self) -> Result<W> {
        self.w.flush()?;
        Ok(self.w)
    }
}

pub(crate) struct Decoder<R: Read> {
    r: R,
}

impl<R: Read> Decoder<R> {
    pub fn new(r: R) -> Self {
        Decoder { r }
    }

    pub fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.r
            .read_exact(&mut buf)
            .map_err(|e| Error::data(format!("truncated snapshot: {e}")))?;
        Ok(buf)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?).map_err(|_| Error::data("snapshot string is not UTF-8"))
    }

    pub fn i32s(&mut self, n: usize) -> Result<Vec<i32>> {
        let raw = self.bytes(n * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn header(&mut self, magic: &[u8; 4], schema: &Schema) -> Result<()> {
        let m = self.bytes(4)?;
        if m != magic {
            return Err(Error::data(format!(
                "bad snapshot magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::data(format!("unsupported snapshot version {v}")));
        }
        if self.bytes(8)? != schema.hash() {
            return Err(Error::data("snapshot schema hash does not match workload schema"));
        }
        Ok(())
    }
}

fn write_table<W: Write>(enc: &mut Encoder<W>, t: &ColumnarTable) -> Result<()> {
    enc.str(&t.name)?;
    enc.u64(t.rows as u64)?;
    enc.u32(t.columns.len() as u32)?;
    for name in &t.column_names {
        enc.str(name)?;
    }
    for col in &t.columns {
        enc.i32s(col)?;
    }
    Ok(())
}

fn read_table<R: Read>(dec: &mut Decoder<R>) -> Result<ColumnarTable> {
    let name = dec.str()?;
    let rows = dec.u64()? as usize;
    let ncols = dec.u32()? as usize;
    let names = (0..ncols).map(|_| dec.str()).collect::<Result<Vec<_>>>()?;
    let columns = (0..ncols).map(|_| dec.i32s(rows)).collect::<Result<Vec<_>>>()?;
    // Dimensions may have no attribute columns, so the row count is explicit.
    Ok(ColumnarTable {
        name,
        column_names: names,
        columns,
        rows,
    })
}

/// Writes the fact table followed by every dimension.
pub fn write_database<W: Write>(w: W, db: &Database) -> Result<W> {
    let mut enc = Encoder::new(w);
    enc.header(TABLE_MAGIC, &db.schema)?;
    enc.u32(1 + db.dims.len() as u32)?;
    write_table(&mut enc, &db.fact)?;
    for d in &db.dims {
        write_table(&mut enc, d)?;
    }
    enc.finish()
}

pub fn read_database<R: Read>(r: R, schema: &Schema) -> Result<Database> {
    let mut dec = Decoder::new(r);
    dec.header(TABLE_MAGIC, schema)?;
    let n = dec.u32()? as usize;
    if n != 1 + schema.dimensions.len() {
        return Err(Error::data(format!("snapshot holds {n} tables")));
    }
    let fact = read_table(&mut dec)?;
    let dims = (1..n).map(|_| read_table(&mut dec)).collect::<Result<Vec<_>>>()?;
    Database::new(schema.clone(), fact, dims)
}
