//! CSV and JSON exchange formats.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), so a value
//! read back is bit-identical and repeated runs give identical files.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::model::{PhysicalParams, RhoProfile, TaperProfile};
use crate::optimize::Geometry;
use crate::transfer::{SteadyState, SweepRow};

/// Physical constants and fiber geometry in one JSON object with keys
/// `R_a, C_m, G_m, G_s, A_s, ell, a0, S` (and optionally `M`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    #[serde(flatten)]
    pub params: PhysicalParams,
    #[serde(flatten)]
    pub geometry: Geometry,
}

impl ParameterSet {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.geometry.validate()
    }
}

/// Round-trip float formatting.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn table<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn floats(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| fmt_f64(*v)).collect()
}

#[derive(Deserialize)]
struct ProfileRow {
    x: f64,
    a: f64,
}

pub fn read_profile<R: Read>(input: R) -> Result<TaperProfile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "a" {
        return Err(Error::InvalidProfile(format!(
            "expected header `x,a`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut x, mut a) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: ProfileRow = row?;
        x.push(row.x);
        a.push(row.a);
    }
    TaperProfile::new(x, a)
}

pub fn read_profile_file(path: &Path) -> Result<TaperProfile> {
    read_profile(File::open(path)?)
}

pub fn write_profile<W: Write>(out: W, a: &TaperProfile) -> Result<()> {
    let rows = a.nodes().iter().zip(a.radii()).map(|(x, r)| floats(&[*x, *r]));
    table(out, &["x", "a"], rows)
}

/// Cell-wise reduced weight as `y_left,y_right,rho`.
pub fn write_rho<W: Write>(out: W, rho: &RhoProfile) -> Result<()> {
    let y = rho.nodes();
    let rows = rho.values().iter().enumerate().map(|(j, v)| floats(&[y[j], y[j + 1], *v]));
    table(out, &["y_left", "y_right", "rho"], rows)
}

pub fn write_spectrum<W: Write>(out: W, pairs: &[EigenPair]) -> Result<()> {
    let rows = pairs.iter().map(|p| {
        let mut row = vec![p.index.to_string()];
        row.extend(floats(&[p.mu, p.phi.first(), p.phi.last()]));
        row
    });
    table(out, &["n", "mu_n", "phi_n_at_0", "phi_n_at_ell"], rows)
}

/// Eigenfunctions side by side: `x,phi_1,...,phi_k`.
pub fn write_eigenfunctions<W: Write>(out: W, pairs: &[EigenPair]) -> Result<()> {
    let Some(first) = pairs.first() else {
        return table(out, &["x"], std::iter::empty());
    };
    if let Some(p) = pairs.iter().find(|p| !p.phi.same_grid(&first.phi)) {
        return Err(Error::GridMismatch(format!("eigenfunction {} uses a different grid", p.index)));
    }
    let names: Vec<String> = pairs.iter().map(|p| format!("phi_{}", p.index)).collect();
    let mut header = vec!["x"];
    header.extend(names.iter().map(String::as_str));
    let rows = first.phi.nodes().iter().enumerate().map(|(i, x)| {
        let mut row = vec![fmt_f64(*x)];
        row.extend(pairs.iter().map(|p| fmt_f64(p.phi.values()[i])));
        row
    });
    table(out, &header, rows)
}

pub fn write_time_series<W: Write>(out: W, series: &[[f64; 3]]) -> Result<()> {
    table(out, &["t", "v0", "vell"], series.iter().map(|r| floats(r)))
}

pub fn write_state<W: Write>(out: W, state: &SteadyState) -> Result<()> {
    let rows = (0..state.nodes.len())
        .map(|i| floats(&[state.nodes[i], state.w0[i], state.q1[i], state.q2[i], state.f[i]]));
    table(out, &["y", "w0", "q1", "q2", "f"], rows)
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let rows = rows.iter().map(|r| floats(&[r.xi1, r.t1_closed, r.t1_numeric, r.dt1]));
    table(out, &["xi1", "T1_closed", "T1_numeric", "dT1"], rows)
}

pub fn read_json<T: serde::de::DeserializeOwned, R: Read>(input: R) -> Result<T> {
    Ok(serde_json::from_reader(input)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
