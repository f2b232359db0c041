//! File formats: JSON reports, partition CSVs, network files, hashes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mlsbm::{MultilayerNetwork, NodeType, Partition};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

pub fn read_network(path: &Path) -> Result<MultilayerNetwork> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    MultilayerNetwork::read_json(BufReader::new(f)).with_context(|| format!("reading network {}", path.display()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize, Deserialize)]
struct PartitionRow {
    node_id: String,
    node_type: String,
    group_label: u32,
}

/// Write the nodes of `types` with their group labels, in node order.
pub fn write_partition(path: &Path, net: &MultilayerNetwork, partition: &Partition, types: &[NodeType]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (v, (&label, &t)) in partition.labels().iter().zip(partition.types()).enumerate() {
        if types.contains(&t) {
            w.serialize(PartitionRow {
                node_id: net.node_name(v).to_owned(),
                node_type: t.as_str().to_owned(),
                group_label: label,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Labels of one node type, keyed by node id in file order.
pub fn write_labels(path: &Path, ids: &[String], node_type: NodeType, labels: &[u32]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (id, &label) in ids.iter().zip(labels) {
        w.serialize(PartitionRow {
            node_id: id.clone(),
            node_type: node_type.as_str().to_owned(),
            group_label: label,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a partition file.
#[derive(Debug, Clone)]
pub struct PartitionFile {
    pub path: PathBuf,
    pub ids: Vec<String>,
    pub types: Vec<NodeType>,
    pub labels: Vec<u32>,
}

impl PartitionFile {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let (mut ids, mut types, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (i, row) in r.deserialize::<PartitionRow>().enumerate() {
            let row = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
            let Some(t) = NodeType::parse(&row.node_type) else {
                bail!("{}: row {}: unknown node type {:?}", path.display(), i + 2, row.node_type);
            };
            ids.push(row.node_id);
            types.push(t);
            labels.push(row.group_label);
        }
        Ok(Self {
            path: path.to_owned(),
            ids,
            types,
            labels,
        })
    }

    /// Node ids and labels of one type, in file order.
    pub fn of_type(&self, t: NodeType) -> (Vec<String>, Vec<u32>) {
        self.ids
            .iter()
            .zip(&self.types)
            .zip(&self.labels)
            .filter(|((_, &ty), _)| ty == t)
            .map(|((id, _), &l)| (id.clone(), l))
            .unzip()
    }

    /// Labels of type `t` arranged in the network's node order.
    pub fn labels_for(&self, net: &MultilayerNetwork, t: NodeType) -> Result<Vec<u32>> {
        let names = match t {
            NodeType::Doc => &net.docs,
            NodeType::Word => &net.words,
            NodeType::Tag => &net.tags,
        };
        let (ids, labels) = self.of_type(t);
        let index: std::collections::HashMap<&str, u32> = ids.iter().map(String::as_str).zip(labels).collect();
        names
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .with_context(|| format!("{}: no {} node {n:?}", self.path.display(), t.as_str()))
            })
            .collect()
    }
}

/// Same-type partitions from several files, checked to list the same nodes
/// in the same order.
pub fn read_aligned(paths: &[PathBuf], t: NodeType) -> Result<(Vec<String>, Vec<Partition>)> {
    let mut ids: Option<Vec<String>> = None;
    let mut parts = Vec::with_capacity(paths.len());
    for p in paths {
        let file = PartitionFile::read(p)?;
        let (these, labels) = file.of_type(t);
        match &ids {
            None => ids = Some(these),
            Some(first) if *first != these => {
                bail!("{} lists different {} nodes than {}", p.display(), t.as_str(), paths[0].display())
            }
            _ => {}
        }
        parts.push(Partition::of_type(labels, t));
    }
    Ok((ids.unwrap_or_default(), parts))
}
