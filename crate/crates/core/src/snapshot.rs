//! Snapshot container.
//!
//! Layout: 8-byte magic `AFSNAP01`, little-endian `u64` header length, the
//! JSON header, then the payload as little-endian `f64` in row-major order.
//! Several fields may share one file; they follow each other in the order
//! listed by `fields`. Spectral payloads interleave `(re, im)` pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::SnapshotError;
use crate::field::{Representation, ScalarField};
use crate::grid::TorusGrid;

const MAGIC: &[u8; 8] = b"AFSNAP01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n_per_dim: usize,
    pub length: f64,
    pub representation: Representation,
    pub time: f64,
    pub fields: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SnapshotError {
    SnapshotError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

pub fn encode(fields: &[(&str, &ScalarField)], time: f64, repr: Representation) -> Vec<u8> {
    assert!(!fields.is_empty(), "snapshot needs at least one field");
    let grid = fields[0].1.grid();
    let header = SnapshotHeader {
        dim: grid.dim(),
        n_per_dim: grid.n_per_dim(),
        length: grid.length(),
        representation: repr,
        time,
        fields: fields.iter().map(|(name, _)| name.to_string()).collect(),
    };
    let head = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + head.len() + 16 * grid.len() * fields.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(head.len() as u64).to_le_bytes());
    out.extend_from_slice(&head);
    for (_, f) in fields {
        assert!(f.grid() == grid, "snapshot fields must share a grid");
        match repr {
            Representation::Physical => {
                for v in f.values() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Representation::Spectral => {
                for c in f.spectrum() {
                    out.extend_from_slice(&c.re.to_le_bytes());
                    out.extend_from_slice(&c.im.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(SnapshotHeader, Vec<ScalarField>), SnapshotError> {
    let fmt = |m: &str| SnapshotError::Format(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(fmt("bad magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = 16 + hlen;
    if bytes.len() < body {
        return Err(fmt("truncated header"));
    }
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[16..body]).map_err(|e| fmt(&e.to_string()))?;
    let grid = TorusGrid::new(header.dim, header.n_per_dim, header.length)
        .map_err(|e| fmt(&e.to_string()))?;
    let per = match header.representation {
        Representation::Physical => grid.len(),
        Representation::Spectral => 2 * grid.len(),
    };
    let need = body + 8 * per * header.fields.len();
    if bytes.len() != need {
        return Err(fmt(&format!("payload size {} != {}", bytes.len(), need)));
    }
    let mut floats = bytes[body..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut out = Vec::with_capacity(header.fields.len());
    for _ in &header.fields {
        let chunk: Vec<f64> = floats.by_ref().take(per).collect();
        let field = match header.representation {
            Representation::Physical => ScalarField::from_values(&grid, chunk),
            Representation::Spectral => ScalarField::from_spectrum(
                &grid,
                chunk.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
            ),
        }
        .map_err(|e| fmt(&e.to_string()))?;
        out.push(field);
    }
    Ok((header, out))
}

pub fn write(
    path: &Path,
    fields: &[(&str, &ScalarField)],
    time: f64,
    repr: Representation,
) -> Result<(), SnapshotError> {
    let bytes = encode(fields, time, repr);
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&bytes).map_err(|e| io_err(path, e))
}

pub fn read(path: &Path) -> Result<(SnapshotHeader, Vec<ScalarField>), SnapshotError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn roundtrip_both_representations() {
        let g = make_grid(2, 8, 2.0).unwrap();
        let a = ScalarField::from_fn(&g, |x| x[0] * 0.5 - x[1]);
        let b = ScalarField::from_fn(&g, |x| (x[0] * 3.0).sin());
        for repr in [Representation::Physical, Representation::Spectral] {
            let bytes = encode(&[("rho", &a), ("u", &b)], 1.25, repr);
            let (h, fs) = decode(&bytes).unwrap();
            assert_eq!(h.fields, vec!["rho", "u"]);
            assert_eq!(h.time, 1.25);
            for (orig, back) in [&a, &b].iter().zip(&fs) {
                let x = orig.values();
                let y = back.values();
                for (p, q) in x.iter().zip(&y) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_truncation() {
        let g = make_grid(1, 8, 2.0).unwrap();
        let a = ScalarField::constant(&g, 1.0);
        let bytes = encode(&[("rho", &a)], 0.0, Representation::Physical);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"nope").is_err());
    }
}
