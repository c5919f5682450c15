//! Line-oriented text format for meshes.
//!
//! ```text
//! EITMESH 1
//! dimension 3
//! regions <count>
//! <tag> <name>
//! nodes <count>
//! <id> <x> <y> <z>
//! elements <count>
//! <id> <n1> .. <n4> <region_tag>
//! electrodes <count>
//! <id> <z_contact> <a,b,c> <a,b,c> ...
//! ```
//!
//! Ids are 1-based and sequential; `#` starts a comment. Coordinates are
//! written in shortest round-trip form, so save/load is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ElectrodePatch, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let dim = mesh.dimension();
    writeln!(out, "EITMESH 1").unwrap();
    writeln!(out, "dimension {dim}").unwrap();
    writeln!(out, "regions {}", mesh.region_names().len()).unwrap();
    for (tag, name) in mesh.region_names() {
        writeln!(out, "{tag} {name}").unwrap();
    }
    writeln!(out, "nodes {}", mesh.n_nodes()).unwrap();
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(out, "{} {} {} {}", i + 1, p[0], p[1], p[2]).unwrap();
    }
    writeln!(out, "elements {}", mesh.n_elements()).unwrap();
    for k in 0..mesh.n_elements() {
        write!(out, "{}", k + 1).unwrap();
        for n in mesh.element(k) {
            write!(out, " {}", n + 1).unwrap();
        }
        writeln!(out, " {}", mesh.region_tags()[k]).unwrap();
    }
    writeln!(out, "electrodes {}", mesh.electrodes().len()).unwrap();
    for e in mesh.electrodes() {
        write!(out, "{} {}", e.id, e.contact_impedance).unwrap();
        for f in &e.facets {
            let ids: Vec<String> = f.iter().map(|n| (n + 1).to_string()).collect();
            write!(out, " {}", ids.join(",")).unwrap();
        }
        writeln!(out).unwrap();
    }
    out
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_mesh(mesh)).map_err(|e| Error::io(path, e))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    path: PathBuf,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            msg: msg.into(),
        }
    }

    /// Next non-empty line, comments stripped, split on whitespace.
    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, raw) in self.iter.by_ref() {
            self.line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some(tokens);
            }
        }
        None
    }

    fn expect_tokens(&mut self, what: &str) -> Result<Vec<&'a str>> {
        self.next_tokens()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn header(&mut self, name: &str) -> Result<usize> {
        let t = self.expect_tokens(name)?;
        if t.len() != 2 || t[0] != name {
            return Err(self.err(format!("expected `{name} <count>`, found `{}`", t.join(" "))));
        }
        self.parse(t[1], "count")
    }

    fn parse<T: std::str::FromStr>(&self, token: &str, field: &str) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(format!("invalid {field} `{token}`")))
    }

    fn sequential_id(&self, token: &str, expected: usize, what: &str) -> Result<()> {
        let id: usize = self.parse(token, &format!("{what} id"))?;
        if id != expected {
            return Err(self.err(format!("{what} id {id} out of sequence, expected {expected}")));
        }
        Ok(())
    }
}

/// Parses the text format; `path` is only used for error context.
pub fn parse_mesh(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        path: path.as_ref().to_path_buf(),
        line: 0,
    };
    let magic = lines.expect_tokens("header")?;
    if magic != ["EITMESH", "1"] {
        return Err(lines.err("missing `EITMESH 1` header"));
    }
    let dim = lines.header("dimension")?;
    if dim != 2 && dim != 3 {
        return Err(lines.err(format!("dimension must be 2 or 3, got {dim}")));
    }

    let n_regions = lines.header("regions")?;
    let mut region_names = BTreeMap::new();
    for _ in 0..n_regions {
        let t = lines.expect_tokens("region")?;
        if t.len() != 2 {
            return Err(lines.err("region line must be `<tag> <name>`"));
        }
        region_names.insert(lines.parse(t[0], "region tag")?, t[1].to_string());
    }

    let n_nodes = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let t = lines.expect_tokens("node")?;
        if t.len() != 4 && !(dim == 2 && t.len() == 3) {
            return Err(lines.err("node line must be `<id> <x> <y> <z>`"));
        }
        lines.sequential_id(t[0], i + 1, "node")?;
        let mut p = [0.0; 3];
        for (d, tok) in t[1..].iter().enumerate() {
            p[d] = lines.parse(tok, "coordinate")?;
        }
        nodes.push(p);
    }

    let n_elements = lines.header("elements")?;
    let npe = dim + 1;
    let mut cells = Vec::with_capacity(n_elements * npe);
    let mut tags = Vec::with_capacity(n_elements);
    for k in 0..n_elements {
        let t = lines.expect_tokens("element")?;
        if t.len() != npe + 2 {
            return Err(lines.err(format!(
                "element line must have id, {npe} node ids and a region tag"
            )));
        }
        lines.sequential_id(t[0], k + 1, "element")?;
        for tok in &t[1..=npe] {
            let n: usize = lines.parse(tok, "node id")?;
            if n == 0 || n > n_nodes {
                return Err(lines.err(format!("node id {n} out of range")));
            }
            cells.push(n - 1);
        }
        tags.push(lines.parse(t[npe + 1], "region tag")?);
    }

    let n_electrodes = lines.header("electrodes")?;
    let mut electrodes = Vec::with_capacity(n_electrodes);
    for _ in 0..n_electrodes {
        let t = lines.expect_tokens("electrode")?;
        if t.len() < 3 {
            return Err(lines.err("electrode line must be `<id> <z_contact> <facet>...`"));
        }
        let id: usize = lines.parse(t[0], "electrode id")?;
        let z: f64 = lines.parse(t[1], "contact impedance")?;
        let mut facets = Vec::new();
        for tok in &t[2..] {
            let mut facet = Vec::with_capacity(dim);
            for part in tok.split(',') {
                let n: usize = lines.parse(part, "facet node id")?;
                if n == 0 || n > n_nodes {
                    return Err(lines.err(format!("electrode {id}: node id {n} out of range")));
                }
                facet.push(n - 1);
            }
            if facet.len() != dim {
                return Err(lines.err(format!(
                    "electrode {id}: facet `{tok}` must list {dim} nodes"
                )));
            }
            facets.push(facet);
        }
        electrodes.push(ElectrodePatch {
            id,
            facets,
            contact_impedance: z,
        });
    }
    if let Some(extra) = lines.next_tokens() {
        return Err(lines.err(format!("trailing content `{}`", extra.join(" "))));
    }

    Mesh::new(dim, nodes, cells, tags, region_names, electrodes)
}
