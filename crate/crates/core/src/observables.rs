//! Backend-agnostic collective observables and their CSV exchange format.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// `(⟨S_x⟩, ΔS_x)` from per-site `⟨σ^x_i⟩` and an `L x L` row-major table of
/// `⟨σ^x_i σ^x_j⟩` (diagonal ignored; `(σ^x)² = 1` is used instead).
pub fn assemble(one_point: &[f64], two_point: &[f64]) -> Result<(f64, f64)> {
    let n = one_point.len();
    if two_point.len() != n * n {
        return Err(Error::Dimension {
            expected: n * n,
            got: two_point.len(),
        });
    }
    let sx = one_point.iter().sum();
    let mut dsx = 0.0;
    for i in 0..n {
        for j in 0..n {
            dsx += if i == j {
                1.0 - one_point[i] * one_point[i]
            } else {
                two_point[i * n + j] - one_point[i] * one_point[j]
            };
        }
    }
    Ok((sx, dsx))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesMeta {
    pub backend: String,
    pub sites: usize,
    pub couplings: String,
    pub seeds: Vec<u64>,
    pub realizations: usize,
    /// Additional `key=value` pairs (integrator step, trajectory count, tree...).
    pub extra: Vec<(String, String)>,
}

impl SeriesMeta {
    pub fn new(backend: &str, sites: usize) -> Self {
        SeriesMeta {
            backend: backend.to_string(),
            sites,
            realizations: 1,
            ..Default::default()
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Time series of the reported quantities on a shared grid (units of 1/J).
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub sx: Vec<f64>,
    pub dsx: Vec<f64>,
    pub svn: Option<Vec<f64>>,
    /// Least-dominant natural populations, one column per tracked eigenvalue.
    pub natpop_tail: Vec<Vec<f64>>,
    pub stderr_sx: Option<Vec<f64>>,
    pub stderr_dsx: Option<Vec<f64>>,
    pub stderr_svn: Option<Vec<f64>>,
    pub meta: SeriesMeta,
}

impl ObservableSeries {
    pub fn new(t: Vec<f64>, meta: SeriesMeta) -> Self {
        let n = t.len();
        ObservableSeries {
            t,
            sx: vec![0.0; n],
            dsx: vec![0.0; n],
            svn: None,
            natpop_tail: Vec::new(),
            stderr_sx: None,
            stderr_dsx: None,
            stderr_svn: None,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Named columns in CSV order.
    pub fn columns(&self) -> Vec<(String, &[f64])> {
        let mut cols: Vec<(String, &[f64])> = vec![
            ("t".into(), &self.t[..]),
            ("Sx".into(), &self.sx[..]),
            ("dSx".into(), &self.dsx[..]),
        ];
        if let Some(s) = &self.svn {
            cols.push(("SvN".into(), s));
        }
        for (k, c) in self.natpop_tail.iter().enumerate() {
            cols.push((format!("natpop_tail_{k}"), c));
        }
        if let Some(s) = &self.stderr_sx {
            cols.push(("stderr_Sx".into(), s));
        }
        if let Some(s) = &self.stderr_dsx {
            cols.push(("stderr_dSx".into(), s));
        }
        if let Some(s) = &self.stderr_svn {
            cols.push(("stderr_SvN".into(), s));
        }
        cols
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns().into_iter().find(|(n, _)| n == name).map(|(_, c)| c)
    }

    /// CSV with `#`-prefixed metadata lines and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = &self.meta;
        writeln!(out, "# backend={}", m.backend)?;
        writeln!(out, "# sites={}", m.sites)?;
        writeln!(out, "# couplings={}", m.couplings)?;
        let seeds: Vec<String> = m.seeds.iter().map(|s| s.to_string()).collect();
        writeln!(out, "# seeds={}", seeds.join(";"))?;
        writeln!(out, "# realizations={}", m.realizations)?;
        for (k, v) in &m.extra {
            writeln!(out, "# {k}={v}")?;
        }
        let cols = self.columns();
        let names: Vec<&str> = cols.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(out, "{}", names.join(","))?;
        for row in 0..self.len() {
            let vals: Vec<String> = cols.iter().map(|(_, c)| format!("{:.16e}", c[row])).collect();
            writeln!(out, "{}", vals.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = SeriesMeta::default();
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad metadata line `{line}`")))?;
                let bad = |_| Error::Format(format!("bad metadata value `{line}`"));
                match k {
                    "backend" => meta.backend = v.to_string(),
                    "sites" => meta.sites = v.parse().map_err(bad)?,
                    "couplings" => meta.couplings = v.to_string(),
                    "seeds" => {
                        meta.seeds = v
                            .split(';')
                            .filter(|s| !s.is_empty())
                            .map(|s| s.parse().map_err(bad))
                            .collect::<Result<_>>()?
                    }
                    "realizations" => meta.realizations = v.parse().map_err(bad)?,
                    _ => meta.extra.push((k.to_string(), v.to_string())),
                }
            } else if header.is_none() {
                header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            } else {
                let vals = line
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Format(format!("bad number `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(vals);
            }
        }
        let header = header.ok_or_else(|| Error::Format("missing CSV header".into()))?;
        if rows.iter().any(|r| r.len() != header.len()) {
            return Err(Error::Format("ragged CSV rows".into()));
        }
        let col = |name: &str| -> Option<Vec<f64>> {
            header
                .iter()
                .position(|h| h == name)
                .map(|i| rows.iter().map(|r| r[i]).collect())
        };
        let need = |name: &str| col(name).ok_or_else(|| Error::Format(format!("missing column {name}")));
        let mut natpop_tail = Vec::new();
        while let Some(c) = col(&format!("natpop_tail_{}", natpop_tail.len())) {
            natpop_tail.push(c);
        }
        Ok(ObservableSeries {
            t: need("t")?,
            sx: need("Sx")?,
            dsx: need("dSx")?,
            svn: col("SvN"),
            natpop_tail,
            stderr_sx: col("stderr_Sx"),
            stderr_dsx: col("stderr_dSx"),
            stderr_svn: col("stderr_SvN"),
            meta,
        })
    }
}

fn mean_and_stderr(columns: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let r = columns.len() as f64;
    let n = columns[0].len();
    let mut mean = vec![0.0; n];
    let mut err = vec![0.0; n];
    for k in 0..n {
        let m = columns.iter().map(|c| c[k]).sum::<f64>() / r;
        mean[k] = m;
        if columns.len() > 1 {
            let var = columns.iter().map(|c| (c[k] - m).powi(2)).sum::<f64>() / (r - 1.0);
            err[k] = (var / r).sqrt();
        }
    }
    (mean, err)
}

/// Arithmetic mean per time point; standard error `stddev / sqrt(R)`.
pub fn ensemble_average(series: &[ObservableSeries]) -> Result<ObservableSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Series("no realizations to average".into()))?;
    if series.iter().any(|s| s.t != first.t) {
        return Err(Error::Series("time grids differ across realizations".into()));
    }
    let mut out = ObservableSeries::new(first.t.clone(), first.meta.clone());
    let gather = |f: &dyn Fn(&ObservableSeries) -> &[f64]| -> Vec<&[f64]> { series.iter().map(f).collect::<Vec<_>>() };
    let (sx, esx) = mean_and_stderr(&gather(&|s| &s.sx));
    let (dsx, edsx) = mean_and_stderr(&gather(&|s| &s.dsx));
    out.sx = sx;
    out.dsx = dsx;
    out.stderr_sx = Some(esx);
    out.stderr_dsx = Some(edsx);
    if series.iter().all(|s| s.svn.is_some()) {
        let cols: Vec<&[f64]> = series.iter().map(|s| s.svn.as_deref().unwrap()).collect();
        let (m, e) = mean_and_stderr(&cols);
        out.svn = Some(m);
        out.stderr_svn = Some(e);
    }
    let tails = first.natpop_tail.len();
    if tails > 0 && series.iter().all(|s| s.natpop_tail.len() == tails) {
        out.natpop_tail = (0..tails)
            .map(|k| {
                let cols: Vec<&[f64]> = series.iter().map(|s| &s.natpop_tail[k][..]).collect();
                mean_and_stderr(&cols).0
            })
            .collect();
    }
    out.meta.realizations = series.len();
    out.meta.seeds = series.iter().flat_map(|s| s.meta.seeds.iter().copied()).collect();
    Ok(out)
}

/// Largest absolute pointwise difference of a named column.
pub fn max_deviation(a: &ObservableSeries, b: &ObservableSeries, column: &str) -> Result<f64> {
    if a.t.len() != b.t.len() || a.t.iter().zip(&b.t).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::Series("time grids differ".into()));
    }
    let ca = a
        .column(column)
        .ok_or_else(|| Error::Series(format!("column {column} missing")))?;
    let cb = b
        .column(column)
        .ok_or_else(|| Error::Series(format!("column {column} missing")))?;
    Ok(ca.iter().zip(cb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn product_state_assembly() {
        let n = 5;
        let (sx, dsx) = assemble(&vec![1.0; n], &vec![1.0; n * n]).unwrap();
        assert_eq!((sx, dsx), (5.0, 0.0));
    }

    #[test]
    fn two_site_arithmetic() {
        let (sx, dsx) = assemble(&[0.0, 0.0], &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(sx, 0.0);
        assert_eq!(dsx, 4.0);
    }

    #[test]
    fn assembly_shape_mismatch() {
        assert!(assemble(&[1.0, 1.0], &[1.0; 3]).is_err());
    }

    fn sample(seed: f64) -> ObservableSeries {
        let mut s = ObservableSeries::new(vec![0.0, 0.5, 1.0], SeriesMeta::new("oracle", 4));
        s.sx = vec![4.0, 3.0 + seed, 2.0];
        s.dsx = vec![0.0, 1.0, 2.0 * seed];
        s
    }

    #[test]
    fn ensemble_of_one_and_identical() {
        let one = ensemble_average(&[sample(0.5)]).unwrap();
        assert_eq!(one.sx, sample(0.5).sx);
        assert!(one.stderr_sx.unwrap().iter().all(|&e| e == 0.0));
        let two = ensemble_average(&[sample(0.5), sample(0.5)]).unwrap();
        assert_eq!(two.sx, sample(0.5).sx);
        assert!(two.stderr_dsx.unwrap().iter().all(|&e| e == 0.0));
        assert_eq!(two.meta.realizations, 2);
    }

    #[test]
    fn ensemble_statistics() {
        let avg = ensemble_average(&[sample(0.0), sample(1.0)]).unwrap();
        assert_eq!(avg.sx[1], 3.5);
        // stddev of {3, 4} is 1/sqrt(2); stderr = 0.5.
        assert!((avg.stderr_sx.as_ref().unwrap()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ensemble_grid_mismatch() {
        let mut b = sample(0.0);
        b.t[1] = 0.4;
        assert!(ensemble_average(&[sample(0.0), b]).is_err());
        assert!(ensemble_average(&[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut s = sample(1.0 / 3.0);
        s.svn = Some(vec![0.0, 0.1, std::f64::consts::PI]);
        s.natpop_tail = vec![vec![0.0, 1e-7, 2e-6], vec![0.0, 0.0, 1e-9]];
        s.stderr_sx = Some(vec![0.0, 0.01, 0.02]);
        s.meta.seeds = vec![1, 2];
        s.meta = s.meta.with("tree", "8->[2]4->[4]2->[16]1");
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("t,Sx,dSx,SvN,natpop_tail_0,natpop_tail_1,stderr_Sx"));
        let back = ObservableSeries::read_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn assembly_is_permutation_invariant(
            vals in proptest::collection::vec(-1.0f64..1.0, 4 + 16),
            shift in 0usize..4,
        ) {
            let n = 4;
            let one = &vals[..n];
            let two = &vals[n..];
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let one_p: Vec<f64> = perm.iter().map(|&p| one[p]).collect();
            let mut two_p = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    two_p[i * n + j] = two[perm[i] * n + perm[j]];
                }
            }
            let (a, b) = assemble(one, two).unwrap();
            let (c, d) = assemble(&one_p, &two_p).unwrap();
            prop_assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
        }
    }
}
