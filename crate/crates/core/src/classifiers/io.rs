//! Model files: networks go into the binary payload, everything else
//! (scaler, mixture parameters, label map, training logs) into the text header.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::container::{read_container, write_container, Container};
use crate::demod::Scaler;
use crate::error::{FormatError, ReadoutError, Result};
use crate::nn::{DenseNetwork, Layer, LayerSpec, TrainLog};

use super::ffnn::FfnnModel;
use super::gmm::{GmmComponent, GmmModel};
use super::pretrann::PreTraNNModel;

pub const MODEL_KIND: &str = "QRD-MODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    PreTraNN(PreTraNNModel),
    Ffnn(FfnnModel),
    Gmm(GmmModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::PreTraNN(_) => "pretrann",
            Model::Ffnn(_) => "ffnn",
            Model::Gmm(_) => "gmm",
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn split_f64(s: &str) -> std::result::Result<Vec<f64>, FormatError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.parse().map_err(|_| FormatError::Malformed(format!("bad number {t:?}"))))
        .collect()
}

fn split_usize(s: &str) -> std::result::Result<Vec<usize>, FormatError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.parse().map_err(|_| FormatError::Malformed(format!("bad integer {t:?}"))))
        .collect()
}

struct Writer {
    header: Vec<(String, String)>,
    payload: Vec<f64>,
    nets: Vec<String>,
}

impl Writer {
    fn put(&mut self, k: impl Into<String>, v: impl ToString) {
        self.header.push((k.into(), v.to_string()));
    }

    fn net(&mut self, name: &str, net: &DenseNetwork) {
        let desc = net
            .layers()
            .iter()
            .map(|l| format!("{}:{}x{}", l.spec.activation, l.spec.in_dim, l.spec.out_dim))
            .collect::<Vec<_>>()
            .join(";");
        self.put(format!("net.{name}"), desc);
        for s in net.param_slices() {
            self.payload.extend_from_slice(s);
        }
        self.nets.push(name.to_string());
    }

    fn scaler(&mut self, s: &Scaler) {
        self.put("scaler.min", join(&s.min));
        self.put("scaler.max", join(&s.max));
    }

    fn log(&mut self, name: &str, log: &Option<TrainLog>) {
        if let Some(log) = log {
            self.put(format!("log.{name}.loss"), join(&log.epoch_loss));
            self.put(format!("log.{name}.monitor"), join(&log.monitor));
            self.put(format!("log.{name}.epochs"), format!("{},{}", log.stop_epoch, log.best_epoch));
            self.put(format!("log.{name}.wall_time_s"), log.wall_time_s);
        }
    }
}

struct Reader<'a> {
    c: &'a Container,
    offset: usize,
}

impl Reader<'_> {
    fn get(&self, k: &str) -> std::result::Result<&str, FormatError> {
        self.c
            .get(k)
            .ok_or_else(|| FormatError::Malformed(format!("missing header key {k:?}")))
    }

    fn net(&mut self, name: &str) -> Result<DenseNetwork> {
        let desc = self.get(&format!("net.{name}"))?.to_string();
        let mut layers = Vec::new();
        for part in desc.split(';') {
            let bad = || FormatError::Malformed(format!("bad layer descriptor {part:?}"));
            let (act, dims) = part.split_once(':').ok_or_else(bad)?;
            let (i, o) = dims.split_once('x').ok_or_else(bad)?;
            let spec = LayerSpec::new(
                i.parse().map_err(|_| bad())?,
                o.parse().map_err(|_| bad())?,
                act.parse().map_err(|_| bad())?,
            );
            let nw = spec.in_dim * spec.out_dim;
            let need = nw + spec.out_dim;
            if self.offset + need > self.c.payload.len() {
                return Err(FormatError::Malformed("payload shorter than the declared networks".into()).into());
            }
            let block = &self.c.payload[self.offset..self.offset + need];
            layers.push(Layer {
                spec,
                weights: block[..nw].to_vec(),
                biases: block[nw..].to_vec(),
            });
            self.offset += need;
        }
        DenseNetwork::from_layers(layers)
    }

    fn scaler(&self) -> Result<Scaler> {
        let min = split_f64(self.get("scaler.min")?)?;
        let max = split_f64(self.get("scaler.max")?)?;
        if min.len() != max.len() {
            return Err(FormatError::Malformed("scaler min/max lengths differ".into()).into());
        }
        Ok(Scaler { min, max })
    }

    fn log(&self, name: &str) -> Result<Option<TrainLog>> {
        let Some(loss) = self.c.get(&format!("log.{name}.loss")) else {
            return Ok(None);
        };
        let epochs = split_usize(self.get(&format!("log.{name}.epochs"))?)?;
        if epochs.len() != 2 {
            return Err(FormatError::Malformed(format!("bad epoch pair for log {name}")).into());
        }
        Ok(Some(TrainLog {
            epoch_loss: split_f64(loss)?,
            monitor: split_f64(self.get(&format!("log.{name}.monitor"))?)?,
            stop_epoch: epochs[0],
            best_epoch: epochs[1],
            wall_time_s: self.c.parse(&format!("log.{name}.wall_time_s"))?,
        }))
    }
}

/// Serialize a model together with free-form metadata entries (stored under `meta.`).
pub fn model_to_container(model: &Model, meta: &[(String, String)]) -> (Vec<(String, String)>, Vec<f64>) {
    let mut w = Writer {
        header: Vec::new(),
        payload: Vec::new(),
        nets: Vec::new(),
    };
    w.put("model", model.kind());
    for (k, v) in meta {
        w.put(format!("meta.{k}"), v);
    }
    match model {
        Model::PreTraNN(m) => {
            w.put("n_classes", m.n_classes);
            w.scaler(&m.scaler);
            w.net("encoder", &m.encoder);
            if let Some(d) = &m.decoder {
                w.net("decoder", d);
            }
            w.net("head", &m.head);
            w.log("autoencoder", &m.autoencoder_log);
            w.log("head", &m.head_log);
        }
        Model::Ffnn(m) => {
            w.put("n_classes", m.n_classes);
            w.scaler(&m.scaler);
            w.net("net", &m.net);
            w.log("net", &m.log);
        }
        Model::Gmm(m) => {
            w.put("gmm.k", m.k());
            for (j, c) in m.components.iter().enumerate() {
                w.put(
                    format!("gmm.component.{j}"),
                    join(&[c.weight, c.mean[0], c.mean[1], c.cov[0][0], c.cov[0][1], c.cov[1][1]]),
                );
            }
            if let Some(l) = &m.labels {
                w.put("gmm.labels", l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
            }
            w.put("gmm.log_likelihood", join(&m.log_likelihood));
            w.put("gmm.converged", m.converged);
        }
    }
    let nets = w.nets.join(",");
    w.put("nets", nets);
    (w.header, w.payload)
}

pub fn model_from_container(c: &Container) -> Result<(Model, Vec<(String, String)>)> {
    let mut r = Reader { c, offset: 0 };
    let meta = c
        .header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
        .collect();
    let nets: Vec<String> = r.get("nets")?.split(',').filter(|s| !s.is_empty()).map(String::from).collect();
    let has = |n: &str| nets.iter().any(|x| x == n);
    let model = match r.get("model")? {
        "pretrann" => {
            let scaler = r.scaler()?;
            let encoder = r.net("encoder")?;
            let decoder = if has("decoder") { Some(r.net("decoder")?) } else { None };
            let head = r.net("head")?;
            Model::PreTraNN(PreTraNNModel {
                scaler,
                encoder,
                decoder,
                head,
                n_classes: c.parse("n_classes")?,
                autoencoder_log: r.log("autoencoder")?,
                head_log: r.log("head")?,
            })
        }
        "ffnn" => Model::Ffnn(FfnnModel {
            scaler: r.scaler()?,
            net: r.net("net")?,
            n_classes: c.parse("n_classes")?,
            log: r.log("net")?,
        }),
        "gmm" => {
            let k: usize = c.parse("gmm.k")?;
            let components = (0..k)
                .map(|j| {
                    let v = split_f64(r.get(&format!("gmm.component.{j}"))?)?;
                    if v.len() != 6 {
                        return Err(FormatError::Malformed(format!("component {j} needs 6 values")));
                    }
                    Ok(GmmComponent {
                        weight: v[0],
                        mean: [v[1], v[2]],
                        cov: [[v[3], v[4]], [v[4], v[5]]],
                    })
                })
                .collect::<std::result::Result<Vec<_>, FormatError>>()?;
            let labels = c.get("gmm.labels").map(split_usize).transpose()?;
            if labels.as_ref().is_some_and(|l| l.len() != k) {
                return Err(FormatError::Malformed("label map length differs from component count".into()).into());
            }
            Model::Gmm(GmmModel {
                components,
                labels,
                log_likelihood: split_f64(r.get("gmm.log_likelihood")?)?,
                converged: c.parse("gmm.converged")?,
            })
        }
        other => return Err(FormatError::Malformed(format!("unknown model kind {other:?}")).into()),
    };
    if r.offset != c.payload.len() {
        return Err(FormatError::Malformed("payload longer than the declared networks".into()).into());
    }
    Ok((model, meta))
}

pub fn save_model(path: &Path, model: &Model, meta: &[(String, String)]) -> Result<()> {
    let (header, payload) = model_to_container(model, meta);
    let file = File::create(path).map_err(FormatError::from)?;
    write_container(BufWriter::new(file), MODEL_KIND, MODEL_VERSION, &header, &payload)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(Model, Vec<(String, String)>)> {
    let file = File::open(path).map_err(FormatError::from)?;
    let c = read_container(BufReader::new(file), MODEL_KIND, MODEL_VERSION).map_err(ReadoutError::from)?;
    model_from_container(&c)
}
