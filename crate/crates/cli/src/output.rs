//! CSV writers. Every number is written as `{:.16e}` (17 significant digits,
//! `.` decimal separator, no grouping), so values round-trip exactly.

use std::io::{self, Write};

use ptsoliton_core::model::poynting;
use ptsoliton_core::{Complex64, EvolutionTrace, FieldState, GridSpec, StabilityMap};

pub const MAP_HEADER: &str = "V1,W1,max_im,log10_max_im,status";
pub const TRACE_HEADER: &str = "t,P1,P2,P,amax1,amax2";
pub const SNAPSHOT_HEADER: &str = "x,re_psi1,im_psi1,re_psi2,im_psi2";
pub const EIGENVALUE_HEADER: &str = "re,im";
pub const PROFILE_HEADER: &str = "x,re_phi1,im_phi1,re_phi2,im_phi2,S1,S2";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<W: Write>(w: &mut W, values: &[f64]) -> io::Result<()> {
    let mut first = true;
    for &v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(num(v).as_bytes())?;
    }
    w.write_all(b"\n")
}

/// One row per cell, outer loop over `W1`, inner over `V1`. Sentinel cells
/// carry `NaN` numbers and a non-`ok` status.
pub fn write_map_csv<W: Write>(w: &mut W, map: &StabilityMap) -> io::Result<()> {
    writeln!(w, "{MAP_HEADER}")?;
    for cell in &map.cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            num(cell.depth),
            num(cell.gain_loss),
            num(cell.max_im),
            num(cell.log10_max_im),
            cell.status.as_str()
        )?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(w: &mut W, trace: &EvolutionTrace) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for i in 0..trace.len() {
        row(
            w,
            &[
                trace.times[i],
                trace.power1[i],
                trace.power2[i],
                trace.total_power[i],
                trace.peak1[i],
                trace.peak2[i],
            ],
        )?;
    }
    Ok(())
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t:010.3}.csv")
}

pub fn write_snapshot_csv<W: Write>(
    w: &mut W,
    state: &FieldState,
    grid: &GridSpec,
) -> io::Result<()> {
    writeln!(w, "{SNAPSHOT_HEADER}")?;
    let [p1, p2] = &state.fields;
    for ((&x, a), b) in grid.nodes().iter().zip(p1).zip(p2) {
        row(w, &[x, a.re, a.im, b.re, b.im])?;
    }
    Ok(())
}

pub fn write_eigenvalues_csv<W: Write>(w: &mut W, eigenvalues: &[Complex64]) -> io::Result<()> {
    writeln!(w, "{EIGENVALUE_HEADER}")?;
    for z in eigenvalues {
        row(w, &[z.re, z.im])?;
    }
    Ok(())
}

/// Sampled stationary profiles with their Poynting vectors `S_j`.
pub fn write_profile_csv<W: Write>(
    w: &mut W,
    fields: [&[Complex64]; 2],
    grid: &GridSpec,
) -> io::Result<()> {
    let flux = |f: &[Complex64]| {
        poynting(f, grid).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))
    };
    let s1 = flux(fields[0])?;
    let s2 = flux(fields[1])?;
    writeln!(w, "{PROFILE_HEADER}")?;
    for (i, &x) in grid.nodes().iter().enumerate() {
        let (a, b) = (fields[0][i], fields[1][i]);
        row(w, &[x, a.re, a.im, b.re, b.im, s1[i], s2[i]])?;
    }
    Ok(())
}
