//! Episode CSV files.
//!
//! One row per sample with header `k,t,x1,…,u,r1,…,f[,xc1,…]`. Single-channel
//! input and feedforward columns are named `u` and `f`; wider ones get an
//! index (`u1,u2`). Controller-state columns are optional.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lifting::Episode;

fn names(prefix: &str, n: usize, bare_if_single: bool) -> Vec<String> {
    if n == 1 && bare_if_single {
        vec![prefix.to_string()]
    } else {
        (1..=n).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub fn write_episode_csv(ep: &Episode, path: &Path) -> Result<()> {
    ep.validate()?;
    let mut wr = csv::Writer::from_path(path)?;
    let mut header = vec!["k".to_string(), "t".to_string()];
    header.extend(names("x", ep.plant_states.nrows(), false));
    header.extend(names("u", ep.plant_input.nrows(), true));
    header.extend(names("r", ep.references.nrows(), false));
    header.extend(names("f", ep.feedforward.nrows(), true));
    header.extend(names("xc", ep.controller_states.nrows(), false));
    wr.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for j in 0..ep.len() {
        rec.clear();
        let t = ep.time[j];
        rec.push(((t / ep.dt).round() as i64).to_string());
        rec.push(t.to_string());
        for m in [&ep.plant_states, &ep.plant_input, &ep.references, &ep.feedforward, &ep.controller_states] {
            rec.extend(m.column(j).iter().map(|v| v.to_string()));
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

fn column_group(header: &csv::StringRecord, prefix: &str, bare: bool) -> Vec<usize> {
    if bare {
        if let Some(i) = header.iter().position(|h| h == prefix) {
            return vec![i];
        }
    }
    let mut out = Vec::new();
    for n in 1.. {
        match header.iter().position(|h| h == format!("{prefix}{n}")) {
            Some(i) => out.push(i),
            None => break,
        }
    }
    out
}

/// Read an episode written by [`write_episode_csv`] (or any file with the same header).
pub fn read_episode_csv(path: &Path, index: usize, dt: f64) -> Result<Episode> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let t_col = header
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| Error::InvalidArgument(format!("{}: missing column t", path.display())))?;
    let groups = [
        column_group(&header, "x", false),
        column_group(&header, "u", true),
        column_group(&header, "r", false),
        column_group(&header, "f", true),
        column_group(&header, "xc", false),
    ];
    for (g, name) in groups.iter().zip(["x", "u", "r", "f"]) {
        if g.is_empty() {
            return Err(Error::InvalidArgument(format!("{}: missing {name} columns", path.display())));
        }
    }
    let mut time = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); 5];
    for rec in rd.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("{}: bad number {:?}: {e}", path.display(), &rec[i])))
        };
        time.push(parse(t_col)?);
        for (g, buf) in groups.iter().zip(data.iter_mut()) {
            for &i in g {
                buf.push(parse(i)?);
            }
        }
    }
    let n = time.len();
    let mat = |g: &Vec<usize>, buf: &Vec<f64>| DMatrix::from_column_slice(g.len(), n, buf);
    let ep = Episode {
        index,
        dt,
        time,
        plant_states: mat(&groups[0], &data[0]),
        plant_input: mat(&groups[1], &data[1]),
        references: mat(&groups[2], &data[2]),
        feedforward: mat(&groups[3], &data[3]),
        controller_states: mat(&groups[4], &data[4]),
    };
    ep.validate()?;
    Ok(ep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let n = 4;
        let ep = Episode {
            index: 3,
            dt: 0.002,
            time: (500..504).map(|k| k as f64 * 0.002).collect(),
            plant_states: DMatrix::from_fn(2, n, |i, j| (i as f64 + 1.0) / 3.0 + j as f64 * 1e-7),
            plant_input: DMatrix::from_fn(1, n, |_, j| -0.1 * j as f64),
            references: DMatrix::from_fn(2, n, |i, j| (i * j) as f64 / 7.0),
            feedforward: DMatrix::from_element(1, n, 0.25),
            controller_states: DMatrix::from_fn(2, n, |i, j| std::f64::consts::PI * (i + j) as f64),
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_episode_csv(&ep, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("k,t,x1,x2,u,r1,r2,f,xc1,xc2\n500,"));
        assert_eq!(read_episode_csv(&p, 3, 0.002).unwrap(), ep);
    }

    #[test]
    fn controller_columns_optional() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "k,t,x1,x2,u,r1,r2,f\n0,0,1,2,3,4,5,6\n1,0.002,1,2,3,4,5,6\n").unwrap();
        let ep = read_episode_csv(&p, 0, 0.002).unwrap();
        assert_eq!(ep.controller_states.shape(), (0, 2));
        assert_eq!(ep.references[(1, 1)], 5.0);
    }
}
