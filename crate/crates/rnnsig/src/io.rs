//! CSV formats for sequences, datasets, checkpoints and experiment output.
//!
//! * samples: one row per time step, `d` numeric columns, optional header.
//! * dataset: `sample,label,step,x1..xd`, one row per (sequence, step).
//! * checkpoint: `key,values...` rows; `activation`, `shape` (e d p) and then
//!   `u`, `v`, `b`, `psi`, `h0` with row-major weights.
//! * trace: `epoch,loss,acc,frob_norm,rkhs_norm`.
//! * report: `name,value`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rnnsig_core::linalg::Matrix;
use rnnsig_core::rkhs::BoundReport;
use rnnsig_core::{Activation, RnnParams};

use crate::error::{Error, Result};
use crate::training::{EpochRecord, SpiralDataset};

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn parse_row(record: &csv::StringRecord, line: usize) -> Result<Vec<f64>> {
    record.iter().map(|f| f.parse::<f64>().map_err(|_| Error::parse(line, format!("not a number: `{f}`")))).collect()
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Reads a `T × d` sample matrix. A first row that does not parse as numbers
/// is taken as a header.
pub fn read_samples<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 1;
        match parse_row(&rec, line) {
            Ok(row) => {
                if let Some(first) = rows.first().map(Vec::len) {
                    if row.len() != first {
                        return Err(Error::parse(line, format!("expected {first} columns, found {}", row.len())));
                    }
                }
                rows.push(row);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(rnnsig_core::Error::EmptySamples.into());
    }
    Ok(rows)
}

pub fn write_samples<W: Write>(w: W, samples: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let d = samples.first().map_or(0, Vec::len);
    out.write_record((1..=d).map(|i| format!("x{i}"))).map_err(csv_err)?;
    for s in samples {
        out.write_record(s.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_dataset<W: Write>(w: W, data: &SpiralDataset) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["sample".to_string(), "label".into(), "step".into()];
    header.extend((1..=data.dim()).map(|i| format!("x{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for (i, (seq, y)) in data.sequences.iter().zip(&data.labels).enumerate() {
        for (j, x) in seq.iter().enumerate() {
            let mut row = vec![i.to_string(), format!("{y}"), (j + 1).to_string()];
            row.extend(x.iter().map(|v| format!("{v:?}")));
            out.write_record(&row).map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_dataset<R: Read>(r: R, seed: u64) -> Result<SpiralDataset> {
    let mut sequences: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if i == 0 && rec.get(0) == Some("sample") {
            continue;
        }
        let line = i + 1;
        let row = parse_row(&rec, line)?;
        if row.len() < 4 {
            return Err(Error::parse(line, "need sample,label,step and at least one coordinate"));
        }
        let idx = row[0] as usize;
        if idx == sequences.len() {
            sequences.push(Vec::new());
            labels.push(row[1]);
        } else if idx + 1 != sequences.len() {
            return Err(Error::parse(line, "rows must be grouped by consecutive sample index"));
        }
        if row[1] != labels[idx] {
            return Err(Error::parse(line, "label changes within a sample"));
        }
        sequences[idx].push(row[3..].to_vec());
    }
    let data = SpiralDataset { sequences, labels, seed };
    let (steps, dim) = (data.steps(), data.dim());
    if data.sequences.iter().any(|s| s.len() != steps || s.iter().any(|x| x.len() != dim)) {
        return Err(Error::parse(0, "all samples must share length and dimension"));
    }
    Ok(data)
}

pub fn write_checkpoint<W: Write>(w: W, params: &RnnParams) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let nums = |name: &str, xs: &[f64]| -> Vec<String> {
        std::iter::once(name.to_string()).chain(xs.iter().map(|v| format!("{v:?}"))).collect()
    };
    out.write_record(["activation", params.activation.name()]).map_err(csv_err)?;
    let shape = [params.hidden_size(), params.input_size(), params.output_size()];
    out.write_record(std::iter::once("shape".to_string()).chain(shape.iter().map(|s| s.to_string())))
        .map_err(csv_err)?;
    for (name, xs) in [
        ("u", params.u.data()),
        ("v", params.v.data()),
        ("b", &params.b[..]),
        ("psi", params.psi.data()),
        ("h0", &params.h0[..]),
    ] {
        out.write_record(nums(name, xs)).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<RnnParams> {
    let mut fields = std::collections::HashMap::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let key = rec.get(0).unwrap_or("").to_string();
        let rest: Vec<String> = rec.iter().skip(1).map(str::to_string).collect();
        if fields.insert(key.clone(), (i + 1, rest)).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate key `{key}`")));
        }
    }
    let take = |key: &str| fields.get(key).ok_or_else(|| Error::parse(0, format!("missing `{key}`")));
    let numbers = |key: &str, len: usize| -> Result<Vec<f64>> {
        let (line, vals) = take(key)?;
        if vals.len() != len {
            return Err(Error::parse(*line, format!("`{key}` needs {len} values, found {}", vals.len())));
        }
        vals.iter().map(|v| v.parse().map_err(|_| Error::parse(*line, format!("not a number: `{v}`")))).collect()
    };
    let (line, act) = take("activation")?;
    let activation = act
        .first()
        .and_then(|a| Activation::parse(a))
        .ok_or_else(|| Error::parse(*line, "unknown activation"))?;
    let (line, shape) = take("shape")?;
    let shape: Vec<usize> = shape.iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::parse(*line, "shape must be three integers"))?;
    let [e, d, p] = shape[..] else {
        return Err(Error::parse(*line, "shape must be three integers"));
    };
    let u = Matrix::from_vec(e, e, numbers("u", e * e)?)?;
    let v = Matrix::from_vec(e, d, numbers("v", e * d)?)?;
    let psi = Matrix::from_vec(p, e, numbers("psi", p * e)?)?;
    Ok(RnnParams::new(u, v, numbers("b", e)?, psi, numbers("h0", e)?, activation)?)
}

pub fn write_trace<W: Write>(w: W, trace: &[EpochRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "loss", "acc", "frob_norm", "rkhs_norm"]).map_err(csv_err)?;
    for r in trace {
        out.write_record([
            r.epoch.to_string(),
            format!("{:?}", r.loss),
            format!("{:?}", r.accuracy),
            format!("{:?}", r.frob_norm),
            format!("{:?}", r.rkhs_norm),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn write_report<W: Write>(w: W, report: &BoundReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["name", "value"]).map_err(csv_err)?;
    for (k, v) in report.entries() {
        out.write_record([k.to_string(), format!("{v:?}")]).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))
}

/// A table with a fixed header, written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record(r).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::{init_params, make_spirals};
    use rand::SeedableRng;

    #[test]
    fn samples_with_and_without_header() {
        let with = read_samples("x1,x2\n0.5,1\n-2,3e-1\n".as_bytes()).unwrap();
        let without = read_samples("0.5,1\n-2,0.3\n".as_bytes()).unwrap();
        assert_eq!(with, without);
        assert!(read_samples("1,2\n3\n".as_bytes()).is_err());
        assert!(read_samples("a,b\n".as_bytes()).is_err());
        assert!(read_samples("1,2\nx,y\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_samples(&mut buf, &with).unwrap();
        assert_eq!(read_samples(&buf[..]).unwrap(), with);
    }

    #[test]
    fn dataset_round_trip() {
        let data = make_spirals(5, 7, 9);
        let mut buf = Vec::new();
        write_dataset(&mut buf, &data).unwrap();
        assert_eq!(read_dataset(&buf[..], 9).unwrap(), data);
        assert!(read_dataset("sample,label,step,x1\n1,1,1,0.5\n".as_bytes(), 0).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut p = init_params(3, 2, Activation::Logistic, &mut rng);
        p.h0 = vec![0.1, -1.0 / 3.0, 2e-300];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), p);
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replace("activation,logistic", "activation,relu");
        assert!(read_checkpoint(broken.as_bytes()).is_err());
        let short: String = text.lines().filter(|l| !l.starts_with("h0")).map(|l| format!("{l}\n")).collect();
        assert!(read_checkpoint(short.as_bytes()).is_err());
    }

    #[test]
    fn tables_always_have_headers() {
        let t = Table::new(&["T", "gap", "bound"]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "T,gap,bound\n");
        let mut buf = Vec::new();
        write_trace(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss,acc,frob_norm,rkhs_norm\n");
    }
}
