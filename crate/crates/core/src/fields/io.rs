//! Field data files.
//!
//! Binary layout (little-endian): `N` as u64, `L` as f64, then the three
//! real components one after another, each as N³ f64 samples in x-fastest
//! order. The text layout carries the same numbers: a header line
//! `zeromode-field N L` followed by one `bx by bz` line per site.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{divergence_residual, GRID_DATA_DIV_TOL};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField};

const TEXT_MAGIC: &str = "zeromode-field";

pub fn write_binary<W: Write>(field: &VectorField, mut out: W) -> Result<()> {
    let grid = field.grid();
    out.write_all(&(grid.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&grid.half_width().to_le_bytes())?;
    for c in 0..3 {
        for v in field.component(c) {
            out.write_all(&v.re.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<VectorField> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word).map_err(|e| Error::Format(format!("missing header: {e}")))?;
    let n = u64::from_le_bytes(word);
    input.read_exact(&mut word).map_err(|e| Error::Format(format!("missing header: {e}")))?;
    let l = f64::from_le_bytes(word);
    let n = usize::try_from(n).map_err(|_| Error::Format(format!("grid size {n} too large")))?;
    if n > 1024 {
        return Err(Error::Format(format!("grid size {n} too large")));
    }
    let grid = GridSpec::new(l, n).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps = Vec::with_capacity(3);
    for _ in 0..3 {
        let mut values = Vec::with_capacity(grid.sites());
        for _ in 0..grid.sites() {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::Format(format!("truncated sample data: {e}")))?;
            values.push(Complex64::new(f64::from_le_bytes(word), 0.0));
        }
        comps.push(ScalarField::from_values(grid, values).map_err(|e| Error::Format(e.to_string()))?);
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after sample data", rest.len())));
    }
    let [a, b, c]: [ScalarField; 3] = comps.try_into().expect("three components");
    VectorField::from_components([a, b, c])
}

pub fn write_text<W: Write>(field: &VectorField, mut out: W) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "{TEXT_MAGIC} {} {:?}", grid.points_per_axis(), grid.half_width())?;
    for s in 0..grid.sites() {
        let v = field.real_at(s);
        writeln!(out, "{:?} {:?} {:?}", v[0], v[1], v[2])?;
    }
    Ok(())
}

pub fn read_text<R: Read>(input: R) -> Result<VectorField> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty field file".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != TEXT_MAGIC {
        return Err(Error::Format(format!("bad header line {header:?}")));
    }
    let n: usize = parts[1].parse().map_err(|_| Error::Format(format!("bad N {:?}", parts[1])))?;
    let l: f64 = parts[2].parse().map_err(|_| Error::Format(format!("bad L {:?}", parts[2])))?;
    let grid = GridSpec::new(l, n).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps = [Vec::new(), Vec::new(), Vec::new()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
        if vals.len() != 3 {
            return Err(Error::Format(format!("line {}: expected 3 values", lineno + 2)));
        }
        for c in 0..3 {
            comps[c].push(Complex64::new(vals[c], 0.0));
        }
    }
    if comps[0].len() != grid.sites() {
        return Err(Error::Format(format!(
            "expected {} sites, found {}",
            grid.sites(),
            comps[0].len()
        )));
    }
    let [a, b, c] = comps.map(|v| ScalarField::from_values(grid, v));
    VectorField::from_components([
        a.map_err(|e| Error::Format(e.to_string()))?,
        b.map_err(|e| Error::Format(e.to_string()))?,
        c.map_err(|e| Error::Format(e.to_string()))?,
    ])
}

/// Loads a field file (text if it starts with the text header, binary otherwise)
/// and validates that it is divergence free.
pub fn load_field(path: &Path) -> Result<VectorField> {
    let bytes = std::fs::read(path)?;
    let field = if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        read_text(bytes.as_slice())?
    } else {
        read_binary(bytes.as_slice())?
    };
    validate_grid_data(&field)?;
    Ok(field)
}

pub fn validate_grid_data(field: &VectorField) -> Result<()> {
    let residual = divergence_residual(field);
    if residual > GRID_DATA_DIV_TOL {
        return Err(Error::NotDivergenceFree {
            residual,
            tolerance: GRID_DATA_DIV_TOL,
        });
    }
    Ok(())
}

pub fn save_binary(field: &VectorField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    write_binary(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_text(field: &VectorField, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    write_text(field, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample, FieldSource};
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let g = make_grid(2.5, 8).unwrap();
        let f = sample(&FieldSource::LossYau, &g).unwrap();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 8 * 512);
        assert_eq!(&buf[..8], &8u64.to_le_bytes());
        assert_eq!(&buf[8..16], &2.5f64.to_le_bytes());
        // first x-component sample is site (0,0,0)
        assert_eq!(&buf[16..24], &f.component(0)[0].re.to_le_bytes());
        // y-components start after N³ x-samples
        assert_eq!(&buf[16 + 8 * 512..24 + 8 * 512], &f.component(1)[0].re.to_le_bytes());
    }

    #[test]
    fn truncated_and_corrupt_inputs_are_rejected() {
        let g = make_grid(2.0, 8).unwrap();
        let f = sample(&FieldSource::LossYau, &g).unwrap();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 3]).is_err());
        let mut odd = buf.clone();
        odd[..8].copy_from_slice(&7u64.to_le_bytes());
        assert!(read_binary(odd.as_slice()).is_err());
        assert!(read_text("zeromode-field 8 2.0\n1 2\n".as_bytes()).is_err());
        assert!(read_text("garbage".as_bytes()).is_err());
    }

    #[test]
    fn non_solenoidal_data_fails_validation() {
        let g = make_grid(2.0, 8).unwrap();
        let f = VectorField::from_real_fn(g, |x| [(std::f64::consts::PI * x[0] / 2.0).sin(), 0.0, 0.0]);
        assert!(matches!(validate_grid_data(&f), Err(Error::NotDivergenceFree { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn binary_and_text_round_trip(seed in 0u64..1000, l in 0.5f64..20.0) {
            let g = make_grid(l, 8).unwrap();
            let f = sample(&FieldSource::RandomDivFree { seed, amplitude: 1.0, correlation_length: l / 4.0 }, &g).unwrap();
            let mut bin = Vec::new();
            write_binary(&f, &mut bin).unwrap();
            prop_assert_eq!(&read_binary(bin.as_slice()).unwrap(), &f);
            let mut txt = Vec::new();
            write_text(&f, &mut txt).unwrap();
            prop_assert_eq!(&read_text(txt.as_slice()).unwrap(), &f);
        }
    }
}
