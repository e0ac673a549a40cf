//! Text formats: dataset CSV, per-block draw tables, and atomic writes.
//!
//! Draw tables have a header and one row per retained draw, led by the
//! 1-based sweep index. Floats are written in shortest round-trip form so
//! that reloading reproduces every bit.

use std::fs;
use std::path::Path;

use crate::error::{input, Error, Result};
use crate::gibbs::{PosteriorDraws, TraceRow};
use crate::lcm::Dataset;
use crate::postproc::PosteriorMeans;

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses a dataset. Cells are 1-based category codes; missing
/// cardinalities are inferred as column maxima. Error rows count the header.
pub fn dataset_from_csv(text: &str, header: bool, cardinalities: Option<&[usize]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut values: Vec<u16> = Vec::new();
    let mut p = None;
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1 + usize::from(header);
        let record = record.map_err(|e| Error::Data {
            row,
            col: 0,
            message: e.to_string(),
        })?;
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Data {
                row,
                col: record.len().min(width) + 1,
                message: format!("expected {width} cells, found {}", record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: u16 = cell.parse().map_err(|_| Error::Data {
                row,
                col: c + 1,
                message: format!("expected a positive integer category, found {cell:?}"),
            })?;
            if v == 0 {
                return Err(Error::Data {
                    row,
                    col: c + 1,
                    message: "categories are 1-based".into(),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    let p = p.ok_or_else(|| Error::Input("dataset has no rows".into()))?;
    let cards = match cardinalities {
        Some(c) if c.len() != p => {
            return input(format!("{} cardinalities declared for {p} columns", c.len()))
        }
        Some(c) => c.to_vec(),
        None => (0..p)
            .map(|j| (0..n).map(|i| values[i * p + j] as usize).max().unwrap_or(0).max(2))
            .collect(),
    };
    Dataset::new(n, cards, values)
}

pub fn dataset_to_csv(data: &Dataset, header: bool) -> String {
    let mut out = String::new();
    if header {
        let names: Vec<String> = (1..=data.p()).map(|j| format!("y{j}")).collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for i in 0..data.n() {
        let row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Table with a header and numeric rows.
pub fn table_to_csv<T: ToString>(header: &[String], rows: &[Vec<T>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses a headed numeric table into `(header, rows)`.
pub fn table_from_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data {
            row: 1,
            col: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data {
            row: r + 2,
            col: 0,
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>().map_err(|_| Error::Data {
                    row: r + 2,
                    col: c + 1,
                    message: format!("expected a number, found {cell:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn labels(prefix: &str, dims: &[usize]) -> Vec<String> {
    let mut out = vec![String::new()];
    for &d in dims {
        out = out
            .iter()
            .flat_map(|s| (1..=d).map(move |i| format!("{s}_{i}")))
            .collect();
    }
    out.into_iter().map(|s| format!("{prefix}{s}")).collect()
}

fn with_iteration(names: Vec<String>) -> Vec<String> {
    std::iter::once("iteration".to_string()).chain(names).collect()
}

fn block_rows<T: Copy + ToString>(iterations: &[usize], blocks: &[Vec<T>]) -> Vec<Vec<String>> {
    iterations
        .iter()
        .zip(blocks)
        .map(|(t, b)| std::iter::once(t.to_string()).chain(b.iter().map(|v| v.to_string())).collect())
        .collect()
}

/// File name and CSV content of every draw table.
pub fn draw_tables(draws: &PosteriorDraws) -> Result<Vec<(String, String)>> {
    let (p, cm1, k, b, n) = (draws.p, draws.d - 1, draws.k, draws.b, draws.n);
    let it = &draws.iterations;
    let mut files = vec![
        (
            "shape.csv".to_string(),
            format!(
                "n,p,d,k,b,retained,csp\n{n},{p},{},{k},{b},{},{}\n",
                draws.d,
                draws.len(),
                (!draws.csp.is_empty()) as u8
            ),
        ),
        (
            "G.csv".into(),
            table_to_csv(&with_iteration(labels("g", &[p, k])), &block_rows(it, &draws.g)),
        ),
        (
            "beta.csv".into(),
            table_to_csv(&with_iteration(labels("beta", &[p, cm1, k])), &block_rows(it, &draws.beta)),
        ),
        (
            "beta0.csv".into(),
            table_to_csv(&with_iteration(labels("beta0", &[p, cm1])), &block_rows(it, &draws.beta0)),
        ),
        (
            "sigma2.csv".into(),
            table_to_csv(&with_iteration(labels("sigma2", &[cm1, k])), &block_rows(it, &draws.sigma2)),
        ),
        (
            "gamma.csv".into(),
            table_to_csv(
                &with_iteration(vec!["gamma".into()]),
                &block_rows(it, &draws.gamma.iter().map(|g| vec![*g]).collect::<Vec<_>>()),
            ),
        ),
        (
            "tau.csv".into(),
            table_to_csv(&with_iteration(labels("tau", &[b])), &block_rows(it, &draws.tau)),
        ),
        (
            "eta.csv".into(),
            table_to_csv(&with_iteration(labels("eta", &[k, b])), &block_rows(it, &draws.eta)),
        ),
    ];
    if !draws.csp.is_empty() {
        let v: Vec<Vec<f64>> = draws.csp.iter().map(|c| c.v.clone()).collect();
        let pi: Vec<Vec<f64>> = draws.csp.iter().map(|c| c.pi.clone()).collect();
        let z: Vec<Vec<usize>> = draws.csp.iter().map(|c| c.zind.clone()).collect();
        files.push(("csp_v.csv".into(), table_to_csv(&with_iteration(labels("v", &[k])), &block_rows(it, &v))));
        files.push(("csp_pi.csv".into(), table_to_csv(&with_iteration(labels("pi", &[k])), &block_rows(it, &pi))));
        files.push(("csp_zind.csv".into(), table_to_csv(&with_iteration(labels("zind", &[k])), &block_rows(it, &z))));
    }
    let means = PosteriorMeans::from_draws(draws)?;
    let a_rows: Vec<Vec<f64>> = (0..n).map(|i| means.a[i * k..(i + 1) * k].to_vec()).collect();
    files.push(("A_mean.csv".into(), table_to_csv(&labels("a", &[k]), &a_rows)));
    let z_rows: Vec<Vec<f64>> = (0..n).map(|i| means.z_freq[i * b..(i + 1) * b].to_vec()).collect();
    files.push(("Z_freq.csv".into(), table_to_csv(&labels("z", &[b]), &z_rows)));
    files.push(("trace.csv".into(), trace_csv(&draws.trace)));
    Ok(files)
}

fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,log_lik,gamma,edges,slab_columns\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iteration, r.log_lik, r.gamma, r.edges, r.slab_columns
        ));
    }
    out
}

/// Writes every draw table into `dir` (created if missing).
pub fn write_draws(dir: &Path, draws: &PosteriorDraws) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, content) in draw_tables(draws)? {
        write_atomic(&dir.join(name), content.as_bytes())?;
    }
    Ok(())
}

/// Posterior summaries reloaded from a draws directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSummary {
    pub means: PosteriorMeans,
    /// `(Σ(1 − π_k), Σ 1(zind_k > k))` posterior means, shrinkage-prior runs only.
    pub k_star: Option<(f64, f64)>,
}

fn column_means(dir: &Path, name: &str, width: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(dir.join(name))?;
    let (header, rows) = table_from_csv(&text)?;
    let skip = usize::from(header.first().is_some_and(|h| h == "iteration"));
    if header.len() != width + skip {
        return input(format!("{name}: expected {width} value columns, found {}", header.len() - skip));
    }
    if rows.is_empty() {
        return input(format!("{name}: no rows"));
    }
    let mut acc = vec![0.0; width];
    for r in &rows {
        for (a, v) in acc.iter_mut().zip(&r[skip..]) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / rows.len() as f64).collect())
}

pub fn read_draw_summary(dir: &Path) -> Result<DrawSummary> {
    let (_, shape) = table_from_csv(&fs::read_to_string(dir.join("shape.csv"))?)?;
    let s = shape
        .first()
        .filter(|r| r.len() == 7)
        .ok_or_else(|| Error::Input("shape.csv must have one row of 7 fields".into()))?;
    let [n, p, d, k, b] = [s[0], s[1], s[2], s[3], s[4]].map(|v| v as usize);
    let cm1 = d - 1;
    let means = PosteriorMeans {
        n,
        p,
        d,
        k,
        b,
        g: column_means(dir, "G.csv", p * k)?,
        beta: column_means(dir, "beta.csv", p * cm1 * k)?,
        beta0: column_means(dir, "beta0.csv", p * cm1)?,
        sigma2: column_means(dir, "sigma2.csv", cm1 * k)?,
        gamma: column_means(dir, "gamma.csv", 1)?[0],
        tau: column_means(dir, "tau.csv", b)?,
        eta: column_means(dir, "eta.csv", k * b)?,
        a: read_matrix(dir, "A_mean.csv", n, k)?,
        z_freq: read_matrix(dir, "Z_freq.csv", n, b)?,
    };
    let k_star = if s[6] != 0.0 {
        let (_, pi) = table_from_csv(&fs::read_to_string(dir.join("csp_pi.csv"))?)?;
        let (_, zind) = table_from_csv(&fs::read_to_string(dir.join("csp_zind.csv"))?)?;
        let m = pi.len().max(1) as f64;
        let tail: f64 = pi.iter().map(|r| r[1..].iter().map(|x| 1.0 - x).sum::<f64>()).sum();
        let slab: usize = zind
            .iter()
            .map(|r| r[1..].iter().enumerate().filter(|&(kk, &z)| z as usize > kk + 1).count())
            .sum();
        Some((tail / m, slab as f64 / m))
    } else {
        None
    };
    Ok(DrawSummary { means, k_star })
}

fn read_matrix(dir: &Path, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let (header, data) = table_from_csv(&fs::read_to_string(dir.join(name))?)?;
    if header.len() != cols || data.len() != rows {
        return input(format!("{name}: expected {rows}x{cols}"));
    }
    Ok(data.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{run_chain, SamplerConfig};
    use crate::postproc::PosteriorMeans;
    use crate::simgen::{paper_sim_truth, simulate_two_layer};

    #[test]
    fn dataset_round_trip_and_inference() {
        let data = Dataset::new(2, vec![3, 2], vec![1, 2, 3, 1]).unwrap();
        for header in [false, true] {
            let text = dataset_to_csv(&data, header);
            let back = dataset_from_csv(&text, header, Some(&[3, 2])).unwrap();
            assert_eq!(back, data);
        }
        let inferred = dataset_from_csv("1,1\n2,1\n", false, None).unwrap();
        assert_eq!(inferred.cardinalities(), &[2, 2]);
    }

    #[test]
    fn malformed_cells_name_row_and_column() {
        let err = dataset_from_csv("1,2\n1,x\n", false, None).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, col: 2, .. }), "{err}");
        let err = dataset_from_csv("y1,y2\n1,2\n0,1\n", true, None).unwrap_err();
        assert!(matches!(err, Error::Data { row: 3, col: 1, .. }), "{err}");
        let err = dataset_from_csv("1,2\n1\n", false, None).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, .. }), "{err}");
        let err = dataset_from_csv("1,3\n", false, Some(&[2, 2])).unwrap_err();
        assert!(matches!(err, Error::Data { row: 1, col: 2, .. }), "{err}");
    }

    #[test]
    fn draw_directory_reproduces_means() {
        let sim = simulate_two_layer(&paper_sim_truth(), 40, 2).unwrap();
        let cfg = SamplerConfig {
            k_upper: 3,
            iterations: 12,
            burn_in: 4,
            thin: 2,
            mode: "csp".into(),
            ..Default::default()
        };
        let draws = run_chain(&sim.dataset, &cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("pyramid-io-{}", std::process::id()));
        write_draws(&dir, &draws).unwrap();
        let summary = read_draw_summary(&dir).unwrap();
        let direct = PosteriorMeans::from_draws(&draws).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&summary.means.beta, &direct.beta));
        assert!(close(&summary.means.g, &direct.g));
        assert!(close(&summary.means.a, &direct.a));
        assert!(close(&summary.means.z_freq, &direct.z_freq));
        let (ks, ki) = summary.k_star.unwrap();
        assert!((ks - crate::gibbs::estimate_k_star(&draws).unwrap()).abs() < 1e-12);
        assert!((ki - crate::gibbs::estimate_k_star_indicator(&draws).unwrap()).abs() < 1e-12);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn floats_round_trip_exactly() {
        let x = [0.1f64, 1.0 / 3.0, -2.5e-300, 123456.789];
        let text = table_to_csv(&["a".into(), "b".into(), "c".into(), "d".into()], &[x.to_vec()]);
        let (_, rows) = table_from_csv(&text).unwrap();
        assert_eq!(rows[0], x);
    }
}
