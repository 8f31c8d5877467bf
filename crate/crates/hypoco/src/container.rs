//! `HYPO1` binary container. All integers and floats are little-endian.
//!
//! ```text
//! "HYPO1"            5 bytes magic
//! version            u32 (= 1)
//! section count      u32
//! per section:
//!   name length      u32, then UTF-8 name
//!   kind             u8: 0 dense f64 vector, 1 CSR matrix, 2 UTF-8 text
//!   dense:  len u64, len × f64
//!   CSR:    rows u64, cols u64, nnz u64, symmetry u8,
//!           row_ptr (rows+1) × u64, col nnz × u64, values nnz × f64
//!   text:   len u64, len bytes
//! ```

use std::io::{self, Read, Write};

use hypoco_core::sparse::{SparseOperator, SymmetryTag};

pub const MAGIC: &[u8; 5] = b"HYPO1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Dense(Vec<f64>),
    Csr(SparseOperator),
    Text(String),
}

impl Section {
    fn kind(&self) -> u8 {
        match self {
            Section::Dense(_) => 0,
            Section::Csr(_) => 1,
            Section::Text(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub sections: Vec<(String, Section)>,
}

#[derive(Debug, thiserror::Error)]
pub enum ContainerError {
    #[error("container: {0}")]
    Io(#[from] io::Error),
    #[error("container: bad magic bytes")]
    BadMagic,
    #[error("container: unsupported version {0}")]
    Version(u32),
    #[error("container: malformed section `{0}`")]
    Malformed(String),
    #[error("container: missing section `{0}`")]
    Missing(String),
}

impl Container {
    pub fn push(&mut self, name: &str, section: Section) {
        self.sections.push((name.to_string(), section));
    }

    pub fn get(&self, name: &str) -> Result<&Section, ContainerError> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| ContainerError::Missing(name.into()))
    }

    pub fn operator(&self, name: &str) -> Result<&SparseOperator, ContainerError> {
        match self.get(name)? {
            Section::Csr(op) => Ok(op),
            _ => Err(ContainerError::Malformed(name.into())),
        }
    }

    pub fn text(&self, name: &str) -> Result<&str, ContainerError> {
        match self.get(name)? {
            Section::Text(t) => Ok(t),
            _ => Err(ContainerError::Malformed(name.into())),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.sections.len() as u32).to_le_bytes())?;
        for (name, section) in &self.sections {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[section.kind()])?;
            match section {
                Section::Dense(v) => {
                    write_u64(w, v.len())?;
                    for x in v {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Section::Csr(op) => {
                    write_u64(w, op.nrows)?;
                    write_u64(w, op.ncols)?;
                    write_u64(w, op.nnz())?;
                    w.write_all(&[op.symmetry.code()])?;
                    for &p in &op.row_ptr {
                        write_u64(w, p)?;
                    }
                    for &c in &op.col_idx {
                        write_u64(w, c)?;
                    }
                    for x in &op.values {
                        w.write_all(&x.to_le_bytes())?;
                    }
                }
                Section::Text(t) => {
                    write_u64(w, t.len())?;
                    w.write_all(t.as_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ContainerError> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(ContainerError::Version(version));
        }
        let count = read_u32(r)?;
        let mut sections = Vec::new();
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name =
                String::from_utf8(name).map_err(|_| ContainerError::Malformed("<name>".into()))?;
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)?;
            let section = match kind[0] {
                0 => {
                    let n = read_len(r)?;
                    Section::Dense((0..n).map(|_| read_f64(r)).collect::<io::Result<_>>()?)
                }
                1 => {
                    let rows = read_len(r)?;
                    let cols = read_len(r)?;
                    let nnz = read_len(r)?;
                    let mut tag = [0u8; 1];
                    r.read_exact(&mut tag)?;
                    let symmetry = SymmetryTag::from_code(tag[0])
                        .ok_or_else(|| ContainerError::Malformed(name.clone()))?;
                    let row_ptr = (0..=rows)
                        .map(|_| read_len(r))
                        .collect::<io::Result<Vec<_>>>()?;
                    let col_idx = (0..nnz)
                        .map(|_| read_len(r))
                        .collect::<io::Result<Vec<_>>>()?;
                    let values = (0..nnz)
                        .map(|_| read_f64(r))
                        .collect::<io::Result<Vec<_>>>()?;
                    let well_formed = row_ptr.first() == Some(&0)
                        && row_ptr.last() == Some(&nnz)
                        && row_ptr.windows(2).all(|w| w[0] <= w[1])
                        && col_idx.iter().all(|&c| c < cols);
                    if !well_formed {
                        return Err(ContainerError::Malformed(name));
                    }
                    Section::Csr(SparseOperator {
                        name: name.clone(),
                        symmetry,
                        nrows: rows,
                        ncols: cols,
                        row_ptr,
                        col_idx,
                        values,
                    })
                }
                2 => {
                    let n = read_len(r)?;
                    let mut bytes = vec![0u8; n];
                    r.read_exact(&mut bytes)?;
                    Section::Text(
                        String::from_utf8(bytes)
                            .map_err(|_| ContainerError::Malformed(name.clone()))?,
                    )
                }
                _ => return Err(ContainerError::Malformed(name)),
            };
            sections.push((name, section));
        }
        Ok(Container { sections })
    }
}

fn write_u64(w: &mut impl Write, v: usize) -> io::Result<()> {
    w.write_all(&(v as u64).to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_len(r: &mut impl Read) -> io::Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    // Guards against allocating from a corrupted length field.
    let v = u64::from_le_bytes(b);
    if v > 1 << 28 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "length field out of range",
        ));
    }
    Ok(v as usize)
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        let op = SparseOperator::from_triplets(
            "A",
            SymmetryTag::Antisymmetric,
            3,
            3,
            vec![(0, 1, 1.5), (1, 0, -1.5), (2, 1, f64::MIN_POSITIVE)],
        );
        let mut c = Container::default();
        c.push("meta", Section::Text("model = langevin\n".into()));
        c.push("w", Section::Dense(vec![0.25, -0.0, 1e-300, f64::MAX]));
        c.push("A", Section::Csr(op));
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Container::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.operator("A").unwrap().get(0, 1), 1.5);
        assert_eq!(back.text("meta").unwrap(), "model = langevin\n");
    }

    #[test]
    fn lookups_distinguish_missing_and_wrong_kind() {
        let c = sample();
        assert!(matches!(c.get("S"), Err(ContainerError::Missing(_))));
        assert!(matches!(
            c.operator("meta"),
            Err(ContainerError::Malformed(_))
        ));
        assert!(matches!(c.text("A"), Err(ContainerError::Malformed(_))));
    }

    #[test]
    fn rejects_bad_header() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            Container::read_from(&mut bytes.as_slice()),
            Err(ContainerError::BadMagic)
        ));
        let mut bytes = sample().to_bytes();
        bytes[5] = 2;
        assert!(matches!(
            Container::read_from(&mut bytes.as_slice()),
            Err(ContainerError::Version(2))
        ));
    }

    #[test]
    fn truncation_is_an_error_at_every_length() {
        let bytes = sample().to_bytes();
        for n in 0..bytes.len() {
            assert!(
                Container::read_from(&mut &bytes[..n]).is_err(),
                "accepted {n} bytes"
            );
        }
    }

    #[test]
    fn rejects_out_of_range_column() {
        let mut c = Container::default();
        c.push(
            "D",
            Section::Csr(SparseOperator::diagonal_matrix("D", &[1.0, 2.0])),
        );
        let mut bytes = c.to_bytes();
        // Layout: magic, version, count, name len, "D", kind, rows, cols, nnz,
        // tag, row_ptr (3 × u64), then the first column index.
        let col0 = 5 + 4 + 4 + 4 + 1 + 1 + 3 * 8 + 1 + 3 * 8;
        bytes[col0..col0 + 8].copy_from_slice(&7u64.to_le_bytes());
        assert!(matches!(
            Container::read_from(&mut bytes.as_slice()),
            Err(ContainerError::Malformed(_))
        ));
    }

    #[test]
    fn huge_length_field_fails_without_allocating() {
        let mut c = Container::default();
        c.push("w", Section::Dense(vec![1.0]));
        let mut bytes = c.to_bytes();
        let len_at = 5 + 4 + 4 + 4 + 1 + 1;
        bytes[len_at..len_at + 8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(
            Container::read_from(&mut bytes.as_slice()),
            Err(ContainerError::Io(_))
        ));
    }
}
