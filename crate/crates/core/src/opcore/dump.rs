//! Binary matrix dumps.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "SCTRMAT1"
//! dim          u32
//! n            u64
//! z            f64 re, f64 im
//! kind         u8       0 = F, 1 = P, 2 = BS, 3 = custom
//! node table   n × (f64 x, f64 y, f64 z, f64 weight, u64 bump index)
//! entries      n² × (f64 re, f64 im), row-major, weighted basis
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{MatrixKind, NystromGrid, OperatorMatrix};
use crate::error::{Result, ScatterError};
use crate::linalg::CMatrix;

const MAGIC: &[u8; 8] = b"SCTRMAT1";

pub fn write_dump(m: &OperatorMatrix, out: &mut impl Write) -> Result<()> {
    let n = m.len();
    let mut buf = Vec::with_capacity(8 + 4 + 8 + 17 + n * 40 + n * n * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(m.grid.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&m.z.re.to_le_bytes());
    buf.extend_from_slice(&m.z.im.to_le_bytes());
    buf.push(m.kind.tag());
    for i in 0..n {
        for c in m.grid.nodes[i] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        buf.extend_from_slice(&m.grid.weights[i].to_le_bytes());
        buf.extend_from_slice(&(m.grid.bump_index[i] as u64).to_le_bytes());
    }
    for i in 0..n {
        for j in 0..n {
            let e = m.entries[(i, j)];
            buf.extend_from_slice(&e.re.to_le_bytes());
            buf.extend_from_slice(&e.im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a dump and checks that its node table matches `grid` bit for bit.
pub fn read_dump(input: &mut impl Read, grid: &std::sync::Arc<NystromGrid>) -> Result<OperatorMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(ScatterError::Dump("bad magic".into()));
    }
    let dim = u32::from_le_bytes(cur.array()?) as usize;
    let n = u64::from_le_bytes(cur.array()?) as usize;
    if dim != grid.dim || n != grid.len() {
        return Err(ScatterError::Dump(format!(
            "dump has d = {dim}, n = {n}; grid has d = {}, n = {}",
            grid.dim,
            grid.len()
        )));
    }
    let z = Complex64::new(cur.f64()?, cur.f64()?);
    let kind = MatrixKind::from_tag(cur.take(1)?[0]).ok_or_else(|| ScatterError::Dump("unknown kind tag".into()))?;
    for i in 0..n {
        let node = [cur.f64()?, cur.f64()?, cur.f64()?];
        let w = cur.f64()?;
        let b = u64::from_le_bytes(cur.array()?) as usize;
        if node != grid.nodes[i] || w != grid.weights[i] || b != grid.bump_index[i] {
            return Err(ScatterError::Dump(format!("node {i} differs from the current grid")));
        }
    }
    let mut entries = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            entries[(i, j)] = Complex64::new(cur.f64()?, cur.f64()?);
        }
    }
    if cur.pos != bytes.len() {
        return Err(ScatterError::Dump("trailing bytes".into()));
    }
    OperatorMatrix::new(entries, std::sync::Arc::clone(grid), z, kind)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(ScatterError::Dump("truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("slice length checked"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcore::assemble_f;
    use crate::potential::{Bump, Profile, SparsePotential};
    use crate::specfun::SpectralPoint;
    use std::sync::Arc;

    #[test]
    fn roundtrip_is_exact() {
        let b = Bump::new(Profile::StepWell, -2.0, 0.5).unwrap();
        let p = SparsePotential::generated(3, 0.5, 1.0, 2.0, 2, 0, b).unwrap();
        let g = Arc::new(NystromGrid::build(&p, 0.25, 4).unwrap());
        let f = assemble_f(&p, &g, SpectralPoint::new(1.5, 0.25).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = read_dump(&mut buf.as_slice(), &g).unwrap();
        assert_eq!(back.entries, f.entries);
        assert_eq!(back.z, f.z);
        assert_eq!(back.kind, MatrixKind::F);
        assert!(read_dump(&mut &buf[..buf.len() - 1], &g).is_err());
    }
}
