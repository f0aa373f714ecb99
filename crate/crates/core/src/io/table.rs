//! Plain CSV tables.
//!
//! A field file holds two tables separated by one blank line: the site table
//! `x,y,vx,vy,s` in raster order and the edge table `x1,y1,x2,y2,l`.
//! Floats are written in Rust's shortest round-trip form, and absent values
//! as empty cells.

use std::fmt::Write as _;

use crate::ct::CtRow;
use crate::field::FieldState;
use crate::io::IoError;
use crate::lattice::{Lattice, Velocity};
use crate::scaling::SweepRow;

pub const SITE_HEADER: &str = "x,y,vx,vy,s";
pub const EDGE_HEADER: &str = "x1,y1,x2,y2,l";

/// A field together with the lattice shape it was read for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldTable {
    pub width: usize,
    pub height: usize,
    pub fields: FieldState,
}

pub fn write_field_csv(lattice: &Lattice, fields: &FieldState) -> Result<String, IoError> {
    fields.validate(lattice)?;
    let mut out = String::new();
    out.push_str(SITE_HEADER);
    out.push('\n');
    for site in 0..lattice.num_sites() {
        let (x, y) = lattice.coords(site);
        let d = fields.d[site];
        let _ = writeln!(out, "{x},{y},{},{},{}", d.vx, d.vy, fields.s[site]);
    }
    out.push('\n');
    out.push_str(EDGE_HEADER);
    out.push('\n');
    for (e, edge) in lattice.edges().iter().enumerate() {
        let (x1, y1) = lattice.coords(edge.a);
        let (x2, y2) = lattice.coords(edge.b);
        let _ = writeln!(out, "{x1},{y1},{x2},{y2},{}", fields.l[e]);
    }
    Ok(out)
}

fn cells<const N: usize>(line: &str, lineno: usize) -> Result<[i64; N], IoError> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(IoError::table(lineno, format!("expected {N} columns, found {}", parts.len())));
    }
    let mut out = [0i64; N];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| IoError::table(lineno, format!("not an integer: {p:?}")))?;
    }
    Ok(out)
}

fn bit(v: i64, lineno: usize, name: &str) -> Result<u8, IoError> {
    match v {
        0 | 1 => Ok(v as u8),
        _ => Err(IoError::table(lineno, format!("{name} must be 0 or 1, got {v}"))),
    }
}

fn coord(v: i64, lineno: usize) -> Result<usize, IoError> {
    usize::try_from(v).map_err(|_| IoError::table(lineno, format!("negative coordinate {v}")))
}

/// Parse a field file. The lattice shape is inferred from the site table,
/// which must list every site exactly once; the edge table must list every
/// nearest-neighbour edge exactly once.
pub fn read_field_csv(text: &str) -> Result<FieldTable, IoError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim() == SITE_HEADER => {}
        Some((n, h)) => return Err(IoError::table(n, format!("expected header {SITE_HEADER:?}, found {h:?}"))),
        None => return Err(IoError::table(1, "empty field file")),
    }
    let mut sites = Vec::new();
    let mut saw_edges = false;
    for (n, line) in lines.by_ref() {
        if line.trim().is_empty() {
            saw_edges = true;
            break;
        }
        let [x, y, vx, vy, s] = cells::<5>(line, n)?;
        let v = Velocity::new(
            i32::try_from(vx).map_err(|_| IoError::table(n, "vx out of range"))?,
            i32::try_from(vy).map_err(|_| IoError::table(n, "vy out of range"))?,
        );
        sites.push((n, coord(x, n)?, coord(y, n)?, v, bit(s, n, "s")?));
    }
    if !saw_edges {
        return Err(IoError::table(text.lines().count() + 1, "missing edge table"));
    }
    match lines.next() {
        Some((_, h)) if h.trim() == EDGE_HEADER => {}
        Some((n, h)) => return Err(IoError::table(n, format!("expected header {EDGE_HEADER:?}, found {h:?}"))),
        None => return Err(IoError::table(text.lines().count() + 1, "missing edge header")),
    }
    let width = sites.iter().map(|s| s.1 + 1).max().unwrap_or(0);
    let height = sites.iter().map(|s| s.2 + 1).max().unwrap_or(0);
    if sites.len() != width * height {
        return Err(IoError::table(1, format!("{} site rows do not tile a {width}x{height} lattice", sites.len())));
    }
    let lattice = Lattice::new(width, height)?;
    let mut fields = FieldState::zeros(&lattice);
    let mut seen = vec![false; lattice.num_sites()];
    for (n, x, y, v, s) in sites {
        let i = lattice.site(x, y);
        if std::mem::replace(&mut seen[i], true) {
            return Err(IoError::table(n, format!("duplicate site ({x}, {y})")));
        }
        fields.d[i] = v;
        fields.s[i] = s;
    }
    let mut seen = vec![false; lattice.num_edges()];
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let [x1, y1, x2, y2, l] = cells::<5>(line, n)?;
        let (x1, y1, x2, y2) = (coord(x1, n)?, coord(y1, n)?, coord(x2, n)?, coord(y2, n)?);
        if x1 >= width || x2 >= width || y1 >= height || y2 >= height {
            return Err(IoError::table(n, "edge endpoint outside the lattice"));
        }
        let e = lattice
            .edge_between(lattice.site(x1, y1), lattice.site(x2, y2))
            .ok_or_else(|| IoError::table(n, "endpoints are not nearest neighbours"))?;
        if std::mem::replace(&mut seen[e], true) {
            return Err(IoError::table(n, "duplicate edge"));
        }
        fields.l[e] = bit(l, n, "l")?;
    }
    if let Some(e) = seen.iter().position(|s| !s) {
        let edge = lattice.edge(e);
        return Err(IoError::table(0, format!("missing edge {:?} - {:?}", lattice.coords(edge.a), lattice.coords(edge.b))));
    }
    Ok(FieldTable { width, height, fields })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("mu,d1,d2,delta1,delta2,converged,diverged,iterations\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.mu,
            opt(r.d1),
            opt(r.d2),
            opt(r.delta1),
            opt(r.delta2),
            r.converged,
            r.diverged,
            r.iterations
        );
    }
    out
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>, IoError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let p: Vec<&str> = line.split(',').collect();
        if p.len() != 8 {
            return Err(IoError::table(n, format!("expected 8 columns, found {}", p.len())));
        }
        let num = |s: &str| -> Result<f64, IoError> { s.parse().map_err(|_| IoError::table(n, format!("bad number {s:?}"))) };
        let maybe = |s: &str| -> Result<Option<f64>, IoError> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
        let flag = |s: &str| -> Result<bool, IoError> { s.parse().map_err(|_| IoError::table(n, format!("bad flag {s:?}"))) };
        rows.push(SweepRow {
            mu: num(p[0])?,
            d1: maybe(p[1])?,
            d2: maybe(p[2])?,
            delta1: maybe(p[3])?,
            delta2: maybe(p[4])?,
            converged: flag(p[5])?,
            diverged: flag(p[6])?,
            iterations: p[7].parse().map_err(|_| IoError::table(n, "bad iteration count"))?,
        });
    }
    Ok(rows)
}

/// `iteration,beta,epsilon`, iterations counted from 1.
pub fn write_trace_csv(eps: &[f64], beta: &[f64]) -> String {
    let mut out = String::from("iteration,beta,epsilon\n");
    for (t, (e, b)) in eps.iter().zip(beta).enumerate() {
        let _ = writeln!(out, "{},{b},{e}", t + 1);
    }
    out
}

pub fn write_ct_csv(rows: &[CtRow]) -> String {
    let mut out = String::from("procedure,n,seconds\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.procedure.name(), r.n, r.seconds);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_round_trip() {
        let lat = Lattice::new(3, 2).unwrap();
        let f = FieldState::zeros(&lat);
        let text = write_field_csv(&lat, &f).unwrap();
        let back = read_field_csv(&text).unwrap();
        assert_eq!((back.width, back.height), (3, 2));
        assert_eq!(back.fields, f);
    }

    #[test]
    fn schema_errors() {
        let lat = Lattice::new(2, 2).unwrap();
        let text = write_field_csv(&lat, &FieldState::zeros(&lat)).unwrap();
        assert!(read_field_csv(&text.replace("x,y,vx,vy,s", "x,y,v,s")).is_err());
        assert!(read_field_csv(&text.replacen("0,0,0,0,0", "0,0,0,0,2", 1)).is_err());
        let no_edges: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(read_field_csv(&no_edges).is_err());
        let missing_edge: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(read_field_csv(&missing_edge).is_err());
    }

    #[test]
    fn sweep_round_trip_keeps_absent_cells() {
        let rows = vec![
            SweepRow { mu: 21.0, d1: Some(0.1 + 0.2), d2: None, delta1: Some(1.0 / 3.0), delta2: None, converged: true, diverged: false, iterations: 7 },
            SweepRow { mu: 1.0, d1: Some(5.0), d2: Some(0.0), delta1: Some(0.0), delta2: Some(1.0), converged: false, diverged: true, iterations: 0 },
        ];
        assert_eq!(read_sweep_csv(&write_sweep_csv(&rows)).unwrap(), rows);
    }
}
