//! JSON reports and CSV artifacts.
//!
//! Every float is written with 17 significant digits so that output is
//! reproducible byte for byte and re-parses to the same `f64`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::finsler::{PolarGrid, ScalarField};
use crate::weights::MeasureProfile;

/// `{:.16e}`: 17 significant digits, always round-trips.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Wraps a serde_json formatter, printing floats with [`format_f64`].
/// Non-finite values are written as `null` by serde_json before reaching it.
struct FixedDigits<F>(F);

macro_rules! forward {
    ($($name:ident),*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.$name(w)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedDigits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    forward!(begin_array, end_array, end_array_value, begin_object, end_object, begin_object_value, end_object_value);
}

/// Single-line JSON.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Indented JSON.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes `r,theta,value` rows, ring by ring.
pub fn write_field_csv<W: Write>(field: &ScalarField, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["r", "theta", "value"])?;
    let g = field.grid();
    for i in 0..g.rings() {
        for j in 0..g.angles() {
            out.write_record([
                format_f64(g.radii()[i]),
                format_f64(g.theta(j)),
                format_f64(field.at(i, j)),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`], rebuilding its grid.
pub fn read_field_csv<R: Read>(r: R) -> Result<ScalarField> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["r", "theta", "value"] {
        return Err(Error::Parse(format!("field CSV needs header r,theta,value, got {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", rows.len() + 2)))
        };
        rows.push((num(0)?, num(1)?, num(2)?));
    }
    let n = rows.iter().take_while(|row| row.0 == rows[0].0).count();
    if n == 0 || rows.len() % n != 0 {
        return Err(Error::Parse("field CSV rows do not form complete rings".into()));
    }
    let radii: Vec<f64> = rows.chunks(n).map(|ring| ring[0].0).collect();
    let dtheta = 2.0 * PI / n as f64;
    for (k, row) in rows.iter().enumerate() {
        let (i, j) = (k / n, k % n);
        if row.0 != radii[i] || (row.1 - j as f64 * dtheta).abs() > 1e-12 {
            return Err(Error::Parse(format!(
                "field CSV row {} is off the polar grid (r = {}, theta = {})",
                k + 2,
                row.0,
                row.1
            )));
        }
    }
    let grid = PolarGrid::from_radii(radii, n)?;
    ScalarField::new(grid, rows.into_iter().map(|row| row.2).collect())
}

pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    write_field_csv(field, BufWriter::new(File::create(path)?))
}

pub fn load_field(path: &Path) -> Result<ScalarField> {
    read_field_csv(File::open(path)?)
}

/// Writes the profile mesh as `log2_r,log2_mu`.
pub fn write_profile_csv<W: Write>(profile: &MeasureProfile, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["log2_r", "log2_mu"])?;
    for (t, m) in profile.table() {
        out.write_record([format_f64(t), format_f64(m)])?;
    }
    out.flush()?;
    Ok(())
}
