//! Dataset files. All three share the container layout from
//! `qubit_readout::container`; records are fixed-stride rows in the payload.
//!
//! * `QRD-RAW`: `[prepared, actual_initial, samples...]`
//! * `QRD-TRAJ`: `[label, I_0..I_{n-1}, Q_0..Q_{n-1}]` (smoothed)
//! * `QRD-IQ`: `[label, I, Q]` (full-window demodulation)

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use qubit_readout::container::{read_container, write_container, Container, ContainerWriter};
use qubit_readout::classifiers::{MODEL_KIND, MODEL_VERSION};
use qubit_readout::demod::{IqPoint, Trajectory};
use qubit_readout::sim::{RawShot, SimConfig};

use crate::error::{BenchError, Result};

pub const RAW_KIND: &str = "QRD-RAW";
pub const TRAJ_KIND: &str = "QRD-TRAJ";
pub const IQ_KIND: &str = "QRD-IQ";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub tm_ns: f64,
    pub dt_ns: f64,
    pub f_if_hz: f64,
    pub sample_rate_hz: f64,
    pub n_states: usize,
    pub master_seed: u64,
    pub config_hash: String,
}

impl DatasetMeta {
    pub fn new(sim: &SimConfig, tm_ns: f64, n_states: usize, config_hash: &str) -> Self {
        DatasetMeta {
            tm_ns,
            dt_ns: sim.slice_ns,
            f_if_hz: sim.f_if_hz,
            sample_rate_hz: sim.sample_rate_hz,
            n_states,
            master_seed: sim.master_seed,
            config_hash: config_hash.to_string(),
        }
    }

    fn header(&self, n_records: usize, stride: usize) -> Vec<(String, String)> {
        let legend = (0..self.n_states).map(|s| format!("{s}:|{s}>")).collect::<Vec<_>>().join(",");
        vec![
            ("n_records".into(), n_records.to_string()),
            ("record_len".into(), stride.to_string()),
            ("tm_ns".into(), self.tm_ns.to_string()),
            ("dt_ns".into(), self.dt_ns.to_string()),
            ("f_if_hz".into(), self.f_if_hz.to_string()),
            ("sample_rate_hz".into(), self.sample_rate_hz.to_string()),
            ("n_states".into(), self.n_states.to_string()),
            ("labels".into(), legend),
            ("master_seed".into(), self.master_seed.to_string()),
            ("config_hash".into(), self.config_hash.clone()),
        ]
    }

    fn from_container(c: &Container) -> Result<Self> {
        Ok(DatasetMeta {
            tm_ns: c.parse("tm_ns")?,
            dt_ns: c.parse("dt_ns")?,
            f_if_hz: c.parse("f_if_hz")?,
            sample_rate_hz: c.parse("sample_rate_hz")?,
            n_states: c.parse("n_states")?,
            master_seed: c.parse("master_seed")?,
            config_hash: c.get("config_hash").unwrap_or_default().to_string(),
        })
    }
}

fn records(c: &Container) -> Result<(usize, usize)> {
    let n: usize = c.parse("n_records")?;
    let stride: usize = c.parse("record_len")?;
    if stride == 0 || n.checked_mul(stride) != Some(c.payload.len()) {
        return Err(BenchError::Data(format!(
            "{} header declares {n} records of {stride} values but the payload holds {}",
            c.kind,
            c.payload.len()
        )));
    }
    Ok((n, stride))
}

fn label_of(v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 64.0 {
        Ok(v as usize)
    } else {
        Err(BenchError::Data(format!("bad label value {v}")))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(BenchError::io(path))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(BenchError::io(path))?))
}

fn read_kind(path: &Path, kind: &str) -> Result<Container> {
    read_container(open(path)?, kind, FORMAT_VERSION).map_err(BenchError::file(path))
}

/// Streams raw shots to disk one at a time.
pub struct RawWriter {
    inner: ContainerWriter<BufWriter<File>>,
    n_samples: usize,
    path: std::path::PathBuf,
}

impl RawWriter {
    pub fn create(path: &Path, meta: &DatasetMeta, n_records: usize, n_samples: usize) -> Result<Self> {
        let mut header = meta.header(n_records, n_samples + 2);
        header.push(("n_samples".into(), n_samples.to_string()));
        let inner = ContainerWriter::new(create(path)?, RAW_KIND, FORMAT_VERSION, &header, n_records * (n_samples + 2))
            .map_err(BenchError::file(path))?;
        Ok(RawWriter {
            inner,
            n_samples,
            path: path.to_path_buf(),
        })
    }

    pub fn push(&mut self, shot: &RawShot) -> Result<()> {
        if shot.samples.len() != self.n_samples {
            return Err(BenchError::Data(format!(
                "shot has {} samples, file expects {}",
                shot.samples.len(),
                self.n_samples
            )));
        }
        let p = self.path.clone();
        self.inner
            .push(&[shot.prepared_label as f64, shot.actual_initial_state as f64])
            .map_err(BenchError::file(&p))?;
        self.inner.push(&shot.samples).map_err(BenchError::file(p))
    }

    pub fn finish(self) -> Result<()> {
        let p = self.path;
        self.inner.finish().map_err(BenchError::file(p))?;
        Ok(())
    }
}

/// Raw shots come back without their decay history, which is not stored.
pub fn read_raw(path: &Path) -> Result<(DatasetMeta, Vec<RawShot>)> {
    let c = read_kind(path, RAW_KIND)?;
    let meta = DatasetMeta::from_container(&c)?;
    let (_, stride) = records(&c)?;
    let shots = c
        .payload
        .chunks_exact(stride)
        .map(|r| {
            Ok(RawShot {
                prepared_label: label_of(r[0])?,
                actual_initial_state: label_of(r[1])?,
                samples: r[2..].to_vec(),
                decay_events: Vec::new(),
                duration_ns: meta.tm_ns,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((meta, shots))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajFile {
    pub meta: DatasetMeta,
    pub window_requested: usize,
    pub window_used: usize,
    pub trajectories: Vec<Trajectory>,
}

pub fn write_traj(path: &Path, file: &TrajFile) -> Result<()> {
    let n = file.trajectories.first().map_or(0, |t| t.len());
    let stride = 1 + 2 * n;
    let mut header = file.meta.header(file.trajectories.len(), stride);
    header.push(("n_slices".into(), n.to_string()));
    header.push(("smoothing_window".into(), file.window_requested.to_string()));
    header.push(("smoothing_window_used".into(), file.window_used.to_string()));
    let mut payload = Vec::with_capacity(stride * file.trajectories.len());
    for t in &file.trajectories {
        if t.len() != n {
            return Err(BenchError::Data("trajectories differ in length".into()));
        }
        let label = t.label.ok_or_else(|| BenchError::Data("unlabeled trajectory".into()))?;
        payload.push(label as f64);
        payload.extend_from_slice(&t.i_series);
        payload.extend_from_slice(&t.q_series);
    }
    write_container(create(path)?, TRAJ_KIND, FORMAT_VERSION, &header, &payload).map_err(BenchError::file(path))
}

pub fn read_traj(path: &Path) -> Result<TrajFile> {
    let c = read_kind(path, TRAJ_KIND)?;
    let meta = DatasetMeta::from_container(&c)?;
    let (_, stride) = records(&c)?;
    if stride % 2 != 1 {
        return Err(BenchError::Data(format!("trajectory record length {stride} is even")));
    }
    let n = stride / 2;
    let trajectories = c
        .payload
        .chunks_exact(stride)
        .map(|r| {
            Ok(Trajectory {
                label: Some(label_of(r[0])?),
                i_series: r[1..1 + n].to_vec(),
                q_series: r[1 + n..].to_vec(),
                dt_ns: meta.dt_ns,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajFile {
        window_requested: c.parse("smoothing_window")?,
        window_used: c.parse("smoothing_window_used")?,
        meta,
        trajectories,
    })
}

pub fn write_iq(path: &Path, meta: &DatasetMeta, points: &[(usize, IqPoint)]) -> Result<()> {
    let header = meta.header(points.len(), 3);
    let payload: Vec<f64> = points.iter().flat_map(|(l, p)| [*l as f64, p.i, p.q]).collect();
    write_container(create(path)?, IQ_KIND, FORMAT_VERSION, &header, &payload).map_err(BenchError::file(path))
}

pub fn read_iq(path: &Path) -> Result<(DatasetMeta, Vec<(usize, IqPoint)>)> {
    let c = read_kind(path, IQ_KIND)?;
    let meta = DatasetMeta::from_container(&c)?;
    let (_, stride) = records(&c)?;
    if stride != 3 {
        return Err(BenchError::Data(format!("I/Q record length {stride}, expected 3")));
    }
    let points = c
        .payload
        .chunks_exact(3)
        .map(|r| Ok((label_of(r[0])?, IqPoint { i: r[1], q: r[2] })))
        .collect::<Result<Vec<_>>>()?;
    Ok((meta, points))
}

/// Header summary of any container file, after verifying its checksum.
pub fn inspect(path: &Path) -> Result<String> {
    let mut reader = open(path)?;
    let first = {
        let buf = reader.fill_buf().map_err(BenchError::io(path))?;
        let end = buf.iter().position(|&b| b == b'\n').unwrap_or(buf.len()).min(64);
        String::from_utf8_lossy(&buf[..end]).to_string()
    };
    let kind = first.split(' ').next().unwrap_or_default();
    let supported = match kind {
        RAW_KIND | TRAJ_KIND | IQ_KIND => FORMAT_VERSION,
        MODEL_KIND => MODEL_VERSION,
        _ => return Err(BenchError::Data(format!("{}: not a dataset or model file", path.display()))),
    };
    let c = read_container(reader, kind, supported).map_err(BenchError::file(path))?;
    let mut out = format!("{} version {}\n", c.kind, c.version);
    for (k, v) in &c.header {
        let shown = if v.len() > 120 { format!("{}... ({} chars)", &v[..120], v.len()) } else { v.clone() };
        out.push_str(&format!("  {k} = {shown}\n"));
    }
    out.push_str(&format!("  payload: {} values, checksum ok\n", c.payload.len()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> DatasetMeta {
        DatasetMeta::new(&SimConfig::default(), 32.0, 2, "abc")
    }

    #[test]
    fn iq_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.qrd");
        let pts = vec![(0, IqPoint { i: 0.5, q: -1.0 }), (1, IqPoint { i: 1e-300, q: 3.0 })];
        write_iq(&p, &meta(), &pts).unwrap();
        let (m, back) = read_iq(&p).unwrap();
        assert_eq!(m, meta());
        assert_eq!(back, pts);
        assert!(inspect(&p).unwrap().contains("QRD-IQ"));
        assert!(read_traj(&p).is_err());
    }

    #[test]
    fn header_dt_is_16ns_by_default() {
        assert_eq!(meta().dt_ns, 16.0);
    }
}
