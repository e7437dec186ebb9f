//! CSV readers and writers for topologies, supports, TMs and link loads.
//!
//! * topology: `src,dst,weight[,capacity]`
//! * support: `src,dst`
//! * traffic matrix: `src,dst,demand_mbps` (pairs not listed are zero)
//! * link loads: `src,dst,load_mbps`, one row per directed link
//! * routing matrix: `link,pair,fraction`, nonzero entries only

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tm::{LinkLoadVector, TrafficVector};
use crate::topology::{LinkSpec, RoutingMatrix, SupportSet, Topology};

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl Read, path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(csv_err(path))
}

#[derive(Debug, Deserialize)]
struct TopologyRow {
    src: String,
    dst: String,
    weight: f64,
    #[serde(default)]
    capacity: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct PairRow {
    src: String,
    dst: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct DemandRow {
    src: String,
    dst: String,
    demand_mbps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoadRow {
    src: String,
    dst: String,
    load_mbps: f64,
}

pub fn parse_topology(reader: impl Read, origin: &Path) -> Result<Topology> {
    let rows: Vec<TopologyRow> = read_rows(reader, origin)?;
    Topology::new(rows.into_iter().map(|r| LinkSpec {
        src: r.src,
        dst: r.dst,
        weight: r.weight,
        capacity: r.capacity,
    }))
}

pub fn read_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    parse_topology(open(path)?, path)
}

pub fn read_support(path: impl AsRef<Path>, topo: &Topology) -> Result<SupportSet> {
    let path = path.as_ref();
    let rows: Vec<PairRow> = read_rows(open(path)?, path)?;
    let pairs: Vec<(String, String)> = rows.into_iter().map(|r| (r.src, r.dst)).collect();
    SupportSet::from_names(topo, &pairs)
}

pub fn write_support(writer: impl Write, topo: &Topology, support: &SupportSet) -> Result<()> {
    let path = PathBuf::from("<support output>");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst"]).map_err(csv_err(&path))?;
    for &(s, d) in support.pairs() {
        w.write_record([topo.node_name(s), topo.node_name(d)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|source| Error::Io { path, source })
}

pub fn parse_tm(reader: impl Read, origin: &Path, topo: &Topology, support: &SupportSet) -> Result<TrafficVector> {
    let rows: Vec<DemandRow> = read_rows(reader, origin)?;
    let mut values = vec![0.0; support.len()];
    let mut seen = vec![false; support.len()];
    for r in rows {
        let (s, d) = (topo.node(&r.src)?, topo.node(&r.dst)?);
        match support.column(s, d) {
            Some(j) => {
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidVector(format!(
                        "{}: duplicate demand for {} -> {}",
                        origin.display(),
                        r.src,
                        r.dst
                    )));
                }
                values[j] = r.demand_mbps;
            }
            None if r.demand_mbps == 0.0 => {}
            None => {
                return Err(Error::InvalidSupport(format!(
                    "{}: nonzero demand for {} -> {} outside the support set",
                    origin.display(),
                    r.src,
                    r.dst
                )))
            }
        }
    }
    TrafficVector::new(values)
}

pub fn read_tm(path: impl AsRef<Path>, topo: &Topology, support: &SupportSet) -> Result<TrafficVector> {
    let path = path.as_ref();
    parse_tm(open(path)?, path, topo, support)
}

/// Demand column of a TM file, without resolving node names.
pub fn read_demands(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let rows: Vec<DemandRow> = read_rows(open(path)?, path)?;
    Ok(rows.into_iter().map(|r| r.demand_mbps).collect())
}

/// Writes every support pair in support order, zeros included.
pub fn write_tm(writer: impl Write, topo: &Topology, support: &SupportSet, x: &TrafficVector) -> Result<()> {
    if x.len() != support.len() {
        return Err(Error::mismatch("traffic vector", support.len(), x.len()));
    }
    let path = PathBuf::from("<tm output>");
    let mut w = csv::Writer::from_writer(writer);
    for (&(s, d), &v) in support.pairs().iter().zip(x.values()) {
        w.serialize(DemandRow {
            src: topo.node_name(s).to_string(),
            dst: topo.node_name(d).to_string(),
            demand_mbps: v,
        })
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|source| Error::Io { path, source })
}

pub fn write_tm_file(path: impl AsRef<Path>, topo: &Topology, support: &SupportSet, x: &TrafficVector) -> Result<()> {
    write_tm(create(path.as_ref())?, topo, support, x)
}

pub fn parse_loads(reader: impl Read, origin: &Path, topo: &Topology) -> Result<LinkLoadVector> {
    let rows: Vec<LoadRow> = read_rows(reader, origin)?;
    let by_ends: HashMap<_, _> = topo
        .links()
        .iter()
        .enumerate()
        .map(|(k, l)| ((l.src, l.dst), k))
        .collect();
    let mut values = vec![None; topo.link_count()];
    for r in rows {
        let key = (topo.node(&r.src)?, topo.node(&r.dst)?);
        let k = *by_ends.get(&key).ok_or_else(|| {
            Error::InvalidVector(format!("{}: no link {} -> {}", origin.display(), r.src, r.dst))
        })?;
        if values[k].replace(r.load_mbps).is_some() {
            return Err(Error::InvalidVector(format!(
                "{}: duplicate load for {} -> {}",
                origin.display(),
                r.src,
                r.dst
            )));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            v.ok_or_else(|| {
                Error::InvalidVector(format!("{}: missing load for link {}", origin.display(), topo.link_label(k)))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LinkLoadVector::new(values)
}

pub fn read_loads(path: impl AsRef<Path>, topo: &Topology) -> Result<LinkLoadVector> {
    let path = path.as_ref();
    parse_loads(open(path)?, path, topo)
}

/// One row per link, in topology order.
pub fn write_loads(writer: impl Write, topo: &Topology, b: &LinkLoadVector) -> Result<()> {
    if b.len() != topo.link_count() {
        return Err(Error::mismatch("link loads", topo.link_count(), b.len()));
    }
    let path = PathBuf::from("<loads output>");
    let mut w = csv::Writer::from_writer(writer);
    for (l, &v) in topo.links().iter().zip(b.values()) {
        w.serialize(LoadRow {
            src: topo.node_name(l.src).to_string(),
            dst: topo.node_name(l.dst).to_string(),
            load_mbps: v,
        })
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|source| Error::Io { path, source })
}

pub fn write_loads_file(path: impl AsRef<Path>, topo: &Topology, b: &LinkLoadVector) -> Result<()> {
    write_loads(create(path.as_ref())?, topo, b)
}

#[derive(Debug, Serialize)]
struct RoutingRow {
    link: String,
    pair: String,
    fraction: f64,
}

/// Nonzero entries of the routing matrix, row by row, as
/// `link,pair,fraction` with `src->dst` labels.
pub fn write_routing(writer: impl Write, topo: &Topology, routing: &RoutingMatrix) -> Result<()> {
    let path = PathBuf::from("<routing output>");
    let mut w = csv::Writer::from_writer(writer);
    for (i, &k) in routing.row_links().iter().enumerate() {
        let row = routing.matrix().row(i);
        for (&j, &v) in row.cols.iter().zip(row.values) {
            w.serialize(RoutingRow {
                link: topo.link_label(k),
                pair: routing.support().pair_label(topo, j),
                fraction: v,
            })
            .map_err(csv_err(&path))?;
        }
    }
    w.flush().map_err(|source| Error::Io { path, source })
}

/// Writes a topology back out as `src,dst,weight[,capacity]`.
pub fn write_topology(writer: impl Write, topo: &Topology) -> Result<()> {
    let path = PathBuf::from("<topology output>");
    let with_cap = topo.links().iter().any(|l| l.capacity.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let header: &[&str] = if with_cap {
        &["src", "dst", "weight", "capacity"]
    } else {
        &["src", "dst", "weight"]
    };
    w.write_record(header).map_err(csv_err(&path))?;
    for l in topo.links() {
        let mut rec = vec![
            topo.node_name(l.src).to_string(),
            topo.node_name(l.dst).to_string(),
            l.weight.to_string(),
        ];
        if with_cap {
            rec.push(l.capacity.map(|c| c.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|source| Error::Io { path, source })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
