use std::io::{Read, Write};

use super::{fmt_f64, format_metadata, parse_error, parse_metadata, parse_value, require, Metadata};
use crate::domain::{DiscreteManifold, VectorField};
use crate::error::Result;
use crate::harmonic::SphereMap;
use crate::spectral::{DensityField, Support};

/// A vertex-major matrix with its `# key = value` header.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Metadata,
    pub field: VectorField,
}

/// `# key = value` lines (including `vertices` and `columns`), then one line
/// of space-separated values per vertex.
pub fn write_checkpoint(field: &VectorField, meta: &Metadata, mut w: impl Write) -> Result<()> {
    let mut meta = meta.clone();
    meta.insert("vertices".into(), field.vertex_count().to_string());
    meta.insert("columns".into(), field.dim().to_string());
    w.write_all(format_metadata(&meta, "# ").as_bytes())?;
    for row in field.rows() {
        let r: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(w, "{}", r.join(" "))?;
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let meta = parse_metadata(text.lines().take_while(|l| l.starts_with('#')))?;
    let n: usize = parse_value("vertices", require(&meta, "vertices")?)?;
    let d: usize = parse_value("columns", require(&meta, "columns")?)?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty()) {
        let before = data.len();
        for s in line.split_whitespace() {
            data.push(parse_value::<f64>("matrix entry", s)?);
        }
        if data.len() - before != d {
            return parse_error(format!("line {}: expected {d} values", k + 1));
        }
        rows += 1;
    }
    if rows != n {
        return parse_error(format!("expected {n} rows, found {rows}"));
    }
    Ok(Checkpoint { field: VectorField::new(d, data)?, meta })
}

/// Provenance recorded with a map checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MapMeta {
    /// Name of the producing operation.
    pub operation: String,
    /// Relaxation parameter, for maps produced by a Ginzburg–Landau stage.
    pub epsilon: Option<f64>,
}

pub fn write_map(map: &SphereMap, info: &MapMeta, w: impl Write) -> Result<()> {
    let mut meta = Metadata::new();
    meta.insert("kind".into(), "map".into());
    meta.insert("target_dim".into(), (map.target_dim()).to_string());
    meta.insert("on_sphere".into(), map.on_sphere().to_string());
    meta.insert("operation".into(), info.operation.clone());
    if let Some(e) = info.epsilon {
        meta.insert("epsilon".into(), fmt_f64(e));
    }
    write_checkpoint(map.field(), &meta, w)
}

pub fn read_map(r: impl Read) -> Result<(SphereMap, MapMeta)> {
    let c = read_checkpoint(r)?;
    if require(&c.meta, "kind")? != "map" {
        return parse_error("checkpoint does not hold a map");
    }
    let k: usize = parse_value("target_dim", require(&c.meta, "target_dim")?)?;
    if k + 1 != c.field.dim() {
        return parse_error(format!("target_dim {k} needs {} columns, found {}", k + 1, c.field.dim()));
    }
    let on_sphere: bool = parse_value("on_sphere", require(&c.meta, "on_sphere")?)?;
    let epsilon = c.meta.get("epsilon").map(|e| parse_value("epsilon", e)).transpose()?;
    let info = MapMeta { operation: require(&c.meta, "operation")?.to_string(), epsilon };
    Ok((SphereMap::new(c.field, on_sphere)?, info))
}

pub fn write_density(beta: &DensityField, extra: &Metadata, w: impl Write) -> Result<()> {
    let mut meta = extra.clone();
    meta.insert("kind".into(), "density".into());
    let support = match beta.support() {
        Support::Volume => "volume",
        Support::Boundary => "boundary",
    };
    meta.insert("support".into(), support.into());
    write_checkpoint(&VectorField::new(1, beta.values().to_vec())?, &meta, w)
}

pub fn read_density(man: &DiscreteManifold, r: impl Read) -> Result<(DensityField, Metadata)> {
    let c = read_checkpoint(r)?;
    if require(&c.meta, "kind")? != "density" || c.field.dim() != 1 {
        return parse_error("checkpoint does not hold a density");
    }
    let values = c.field.into_data();
    let beta = match require(&c.meta, "support")? {
        "volume" => DensityField::new(man, values)?,
        "boundary" => DensityField::on_boundary(man, values)?,
        other => return parse_error(format!("unknown density support {other:?}")),
    };
    Ok((beta, c.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count_is_checked() {
        let text = "# columns = 2\n# vertices = 2\n1 2\n";
        assert!(read_checkpoint(text.as_bytes()).is_err());
        let text = "# columns = 2\n# vertices = 1\n1 2 3\n";
        assert!(read_checkpoint(text.as_bytes()).is_err());
        let text = "# columns = 2\n# vertices = 1\n1 2\n";
        assert_eq!(read_checkpoint(text.as_bytes()).unwrap().field.data(), &[1.0, 2.0]);
    }
}
