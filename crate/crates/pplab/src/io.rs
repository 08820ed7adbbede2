//! Field and report serialization: CSV rows, a compact little-endian
//! binary dump, and deterministic JSON with floats rendered at 17
//! significant digits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, FieldState, Gauge, GridDomain};

/// Writes one row per grid point: coordinates, then the value.
pub fn field_to_csv(f: &Field, out: &mut impl Write) -> Result<()> {
    let d = f.domain;
    let n = d.dimension();
    let mut header: Vec<String> = (0..n).map(|k| format!("x{}", k + 1)).collect();
    header.push("value".into());
    writeln!(out, "{}", header.join(","))?;
    for i in d.indices() {
        let c = d.coords(i);
        let mut row: Vec<String> = c[..n].iter().map(|v| format_f64(*v)).collect();
        row.push(format_f64(f.values[i]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Compact binary dump: header `n: u32, L: f64, M: u32, t: f64, gauge: u8`
/// (all little-endian), then `M^n` values as little-endian f64 in row-major
/// order.
pub fn field_to_binary(f: &Field, out: &mut impl Write) -> Result<()> {
    let d = f.domain;
    out.write_all(&(d.dimension() as u32).to_le_bytes())?;
    out.write_all(&d.half_width().to_le_bytes())?;
    out.write_all(&(d.points_per_dim() as u32).to_le_bytes())?;
    out.write_all(&f.time.to_le_bytes())?;
    out.write_all(&[match f.gauge {
        Gauge::U => 0u8,
        Gauge::Mu => 1u8,
    }])?;
    for v in &f.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a field written by [`field_to_binary`].
pub fn field_from_binary(inp: &mut impl Read) -> Result<Field> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b1 = [0u8; 1];
    inp.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    inp.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    inp.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    inp.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    inp.read_exact(&mut b1)?;
    let gauge = match b1[0] {
        0 => Gauge::U,
        1 => Gauge::Mu,
        g => return Err(Error::Precondition(format!("unknown gauge tag {g}"))),
    };
    let domain = GridDomain::new(n, l, m)?;
    let mut values = vec![0.0f64; domain.len()];
    for v in values.iter_mut() {
        inp.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    let mut f = Field {
        domain,
        values,
        time: t,
        gauge,
        state: FieldState::Finite,
    };
    f.refresh_state();
    Ok(f)
}

/// Renders a float with 17 significant digits, the fixed manifest format.
pub fn format_f64(v: f64) -> String {
    if v == 0.0 {
        return "0.0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "Infinity".into()
        } else {
            "-Infinity".into()
        };
    }
    format!("{v:.16e}")
}

/// Deterministic JSON writer: walks a `serde_json::Value` and renders every
/// number through [`format_f64`], keys in the order the value carries them.
pub fn write_json_17(value: &serde_json::Value, out: &mut impl Write) -> Result<()> {
    write_value(value, out, 0)?;
    writeln!(out)?;
    Ok(())
}

fn write_value(value: &serde_json::Value, out: &mut impl Write, indent: usize) -> Result<()> {
    use serde_json::Value::*;
    match value {
        Null => write!(out, "null")?,
        Bool(b) => write!(out, "{b}")?,
        Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}")?;
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}")?;
            } else {
                write!(out, "{}", format_f64(n.as_f64().unwrap_or(f64::NAN)))?;
            }
        }
        String(s) => write!(out, "{}", serde_json::to_string(s).unwrap())?,
        Array(items) => {
            if items.is_empty() {
                write!(out, "[]")?;
            } else {
                writeln!(out, "[")?;
                for (i, item) in items.iter().enumerate() {
                    write!(out, "{:indent$}", "", indent = indent + 2)?;
                    write_value(item, out, indent + 2)?;
                    writeln!(out, "{}", if i + 1 < items.len() { "," } else { "" })?;
                }
                write!(out, "{:indent$}]", "", indent = indent)?;
            }
        }
        Object(map) => {
            if map.is_empty() {
                write!(out, "{{}}")?;
            } else {
                writeln!(out, "{{")?;
                for (i, (k, v)) in map.iter().enumerate() {
                    write!(
                        out,
                        "{:indent$}{}: ",
                        "",
                        serde_json::to_string(k).unwrap(),
                        indent = indent + 2
                    )?;
                    write_value(v, out, indent + 2)?;
                    writeln!(out, "{}", if i + 1 < map.len() { "," } else { "" })?;
                }
                write!(out, "{:indent$}}}", "", indent = indent)?;
            }
        }
    }
    Ok(())
}
