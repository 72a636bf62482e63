use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{fmt_f64, format_metadata, parse_error, parse_metadata, parse_value, require, write_atomic, Metadata};
use crate::domain::{build_flat_torus, BuilderTag, Cells, DiscreteManifold};
use crate::error::Result;

const SIDECAR_FORMAT: &str = "sdl-mesh 1";

/// `OFF`, then `nv nf 0`, one `x y z` line per vertex and one `3 a b c` line
/// per triangle. Grid domains are written with no faces.
pub fn write_off(man: &DiscreteManifold, mut w: impl Write) -> Result<()> {
    let tris = man.triangles().unwrap_or(&[]);
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", man.vertex_count(), tris.len())?;
    for p in man.positions() {
        writeln!(w, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]))?;
    }
    for t in tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

fn sidecar(man: &DiscreteManifold) -> Metadata {
    let tag = man.tag();
    let mut m = Metadata::new();
    m.insert("format".into(), SIDECAR_FORMAT.into());
    m.insert("builder".into(), tag.name.clone());
    m.insert("dim".into(), man.dim().to_string());
    m.insert("vertices".into(), man.vertex_count().to_string());
    let cells = match man.cells() {
        Cells::Triangles(_) => "triangles",
        Cells::Grid { .. } => "grid",
    };
    m.insert("cells".into(), cells.into());
    for (k, v) in &tag.params {
        m.insert(format!("param.{k}"), v.clone());
    }
    m
}

pub fn write_sidecar(man: &DiscreteManifold, mut w: impl Write) -> Result<()> {
    w.write_all(format_metadata(&sidecar(man), "").as_bytes())?;
    Ok(())
}

/// `mesh.off` pairs with `mesh.meta`.
pub fn sidecar_path(off: &Path) -> PathBuf {
    off.with_extension("meta")
}

pub fn save_mesh(man: &DiscreteManifold, off: &Path) -> Result<()> {
    let mut a = Vec::new();
    write_off(man, &mut a)?;
    let mut b = Vec::new();
    write_sidecar(man, &mut b)?;
    write_atomic(off, &a)?;
    write_atomic(&sidecar_path(off), &b)
}

pub fn load_mesh(off: &Path) -> Result<DiscreteManifold> {
    let meta = fs::read_to_string(sidecar_path(off))?;
    read_off(fs::File::open(off)?, &meta)
}

struct OffData {
    positions: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
}

fn parse_off(r: impl Read) -> Result<OffData> {
    let mut lines = BufReader::new(r)
        .lines()
        .enumerate()
        .map(|(k, l)| l.map(|s| (k + 1, s)))
        .filter(|l| l.as_ref().map_or(true, |(_, s)| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(l) => Ok(l?),
            None => parse_error(format!("OFF ended before {what}")),
        }
    };
    let (_, head) = next("the header")?;
    if head.trim() != "OFF" {
        return parse_error(format!("expected OFF header, found {head:?}"));
    }
    let (ln, counts) = next("the counts")?;
    let c: Vec<usize> = counts.split_whitespace().map(|s| parse_value("count", s)).collect::<Result<_>>()?;
    if c.len() != 3 {
        return parse_error(format!("line {ln}: expected 'vertices faces edges'"));
    }
    let (nv, nf) = (c[0], c[1]);
    let mut positions = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("all vertices")?;
        let x: Vec<f64> = l.split_whitespace().map(|s| parse_value("coordinate", s)).collect::<Result<_>>()?;
        if x.len() != 3 || x.iter().any(|v| !v.is_finite()) {
            return parse_error(format!("line {ln}: expected three finite coordinates"));
        }
        positions.push([x[0], x[1], x[2]]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = next("all faces")?;
        let f: Vec<usize> = l.split_whitespace().map(|s| parse_value("vertex index", s)).collect::<Result<_>>()?;
        if f.len() != 4 || f[0] != 3 {
            return parse_error(format!("line {ln}: only triangular faces are supported"));
        }
        if f[1..].iter().any(|&v| v >= nv) {
            return parse_error(format!("line {ln}: face references a missing vertex"));
        }
        triangles.push([f[1], f[2], f[3]]);
    }
    if let Some(l) = lines.next() {
        let (ln, _) = l?;
        return parse_error(format!("line {ln}: trailing content after the last face"));
    }
    Ok(OffData { positions, triangles })
}

/// Rebuilds the manifold from OFF text and its sidecar. Triangle meshes are
/// reassembled from the faces; grid domains are rebuilt from the recorded
/// builder parameters and checked against the stored coordinates.
pub fn read_off(r: impl Read, sidecar_text: &str) -> Result<DiscreteManifold> {
    let meta = parse_metadata(sidecar_text.lines())?;
    if require(&meta, "format")? != SIDECAR_FORMAT {
        return parse_error(format!("unsupported mesh sidecar format {:?}", meta["format"]));
    }
    let off = parse_off(r)?;
    let vertices: usize = parse_value("vertices", require(&meta, "vertices")?)?;
    if vertices != off.positions.len() {
        return parse_error(format!("sidecar lists {vertices} vertices, OFF has {}", off.positions.len()));
    }
    let mut tag = BuilderTag::new(require(&meta, "builder")?);
    for (k, v) in &meta {
        if let Some(p) = k.strip_prefix("param.") {
            tag = tag.with(p, v);
        }
    }
    let man = match require(&meta, "cells")? {
        "triangles" => DiscreteManifold::from_triangles(off.positions, off.triangles, tag)?,
        "grid" => {
            if tag.name != "flat_torus" || !off.triangles.is_empty() {
                return parse_error("grid cells are only supported for flat_torus meshes without faces");
            }
            let res: usize = parse_value("resolution", require(&meta, "param.resolution")?)?;
            let sides: Vec<f64> = require(&meta, "param.side_lengths")?
                .split(',')
                .map(|s| parse_value("side length", s))
                .collect::<Result<_>>()?;
            let man = build_flat_torus(&sides, res)?;
            if man.positions() != off.positions.as_slice() {
                return parse_error("grid coordinates do not match the recorded torus parameters");
            }
            man
        }
        other => return parse_error(format!("unknown cell kind {other:?}")),
    };
    let dim: usize = parse_value("dim", require(&meta, "dim")?)?;
    if dim != man.dim() {
        return parse_error(format!("sidecar dim {dim} does not match the mesh dimension {}", man.dim()));
    }
    Ok(man)
}
