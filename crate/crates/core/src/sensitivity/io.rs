//! Jacobian file: text header then row-major little-endian f64 data.
//!
//! ```text
//! EITJAC 1
//! rows <R>
//! cols <C>
//! basis elements|voxels
//! mesh_sha256 <hex>
//! sigma_sha256 <hex>
//! protocol_sha256 <hex>
//! data f64le row-major
//! <R*C*8 bytes>
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use super::{ColumnBasis, Jacobian, Provenance};
use crate::error::{Error, Result};

pub fn write_jacobian(j: &Jacobian) -> Vec<u8> {
    let p = &j.provenance;
    let mut out = format!(
        "EITJAC 1\nrows {}\ncols {}\nbasis {}\nmesh_sha256 {}\nsigma_sha256 {}\nprotocol_sha256 {}\ndata f64le row-major\n",
        j.rows(),
        j.cols(),
        j.basis.as_str(),
        or_dash(&p.mesh),
        or_dash(&p.sigma),
        or_dash(&p.protocol),
    )
    .into_bytes();
    out.reserve(j.rows() * j.cols() * 8);
    for r in 0..j.rows() {
        for c in 0..j.cols() {
            out.extend_from_slice(&j.matrix[(r, c)].to_le_bytes());
        }
    }
    out
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

pub fn parse_jacobian(bytes: &[u8], path: impl AsRef<Path>) -> Result<Jacobian> {
    let path = path.as_ref();
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut pos = 0;
    let mut header = Vec::new();
    while header.len() < 8 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| err(header.len() + 1, "truncated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end])
            .map_err(|_| err(header.len() + 1, "header is not UTF-8"))?;
        header.push(line.to_string());
        pos += end + 1;
    }
    if header[0] != "EITJAC 1" {
        return Err(err(1, "missing `EITJAC 1` header"));
    }
    let field = |i: usize, key: &str| -> Result<String> {
        header[i]
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| err(i + 1, &format!("expected `{key} <value>`")))
    };
    let rows: usize = field(1, "rows")?.parse().map_err(|_| err(2, "invalid row count"))?;
    let cols: usize = field(2, "cols")?.parse().map_err(|_| err(3, "invalid column count"))?;
    let basis = match field(3, "basis")?.as_str() {
        "elements" => ColumnBasis::Elements,
        "voxels" => ColumnBasis::Voxels,
        _ => return Err(err(4, "basis must be `elements` or `voxels`")),
    };
    let hash = |i: usize, key: &str| -> Result<String> {
        let v = field(i, key)?;
        Ok(if v == "-" { String::new() } else { v })
    };
    let provenance = Provenance {
        mesh: hash(4, "mesh_sha256")?,
        sigma: hash(5, "sigma_sha256")?,
        protocol: hash(6, "protocol_sha256")?,
    };
    if header[7] != "data f64le row-major" {
        return Err(err(8, "expected `data f64le row-major`"));
    }
    let data = &bytes[pos..];
    if data.len() != rows * cols * 8 {
        return Err(err(
            9,
            &format!("expected {} data bytes, found {}", rows * cols * 8, data.len()),
        ));
    }
    let matrix = DMatrix::from_fn(rows, cols, |r, c| {
        let o = (r * cols + c) * 8;
        f64::from_le_bytes(data[o..o + 8].try_into().unwrap())
    });
    Jacobian::new(matrix, basis, provenance)
}

pub fn save_jacobian(j: &Jacobian, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_jacobian(j)).map_err(|e| Error::io(path, e))
}

pub fn load_jacobian(path: impl AsRef<Path>) -> Result<Jacobian> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_jacobian(&bytes, path)
}
