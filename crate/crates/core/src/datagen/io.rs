use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::shift::ShiftKind;
use super::task::{ClientData, FederatedDataset};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientManifest {
    pub id: usize,
    pub cluster: usize,
    pub file: String,
    /// The first `n_train` rows of the file are training rows, the rest test.
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub shift: ShiftKind,
    pub dim: usize,
    pub classes: usize,
    pub cluster_sizes: Vec<usize>,
    pub clients: Vec<ClientManifest>,
}

fn client_file(id: usize) -> String {
    format!("client_{id:03}.csv")
}

/// Writes `client_XXX.csv` per client plus `manifest.json` into `dir`.
pub fn write_federated(data: &FederatedDataset, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let header: Vec<String> = (0..data.dim)
        .map(|j| format!("f{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    let mut clients = Vec::with_capacity(data.clients.len());
    for c in &data.clients {
        let file = client_file(c.id);
        let mut w = csv::Writer::from_path(dir.join(&file))?;
        w.write_record(&header)?;
        for (x, y) in c.train.iter().chain(c.test.iter()) {
            let row: Vec<String> = x
                .iter()
                .map(|v| v.to_string())
                .chain(std::iter::once(y.to_string()))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        clients.push(ClientManifest {
            id: c.id,
            cluster: c.cluster,
            file,
            n_train: c.train.len(),
            n_test: c.test.len(),
        });
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_VERSION,
        seed: data.seed,
        shift: data.shift,
        dim: data.dim,
        classes: data.classes,
        cluster_sizes: data.cluster_sizes.clone(),
        clients,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(manifest)
}

fn read_client(dir: &Path, m: &ClientManifest, dim: usize, classes: usize) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(dir.join(&m.file))?;
    let headers = r.headers()?;
    let expected: Vec<String> = (0..dim).map(|j| format!("f{j}")).chain(["label".into()]).collect();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Config(format!("{}: unexpected CSV header", m.file)));
    }
    let mut data = Dataset::empty(dim, classes);
    let mut x = vec![0.0; dim];
    for rec in r.records() {
        let rec = rec?;
        for (j, v) in x.iter_mut().enumerate() {
            *v = rec[j]
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad feature value {:?}", m.file, &rec[j])))?;
        }
        let y: usize = rec[dim]
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad label {:?}", m.file, &rec[dim])))?;
        if y >= classes {
            return Err(Error::Config(format!("{}: label {y} outside 0..{classes}", m.file)));
        }
        data.push(&x, y);
    }
    if data.len() != m.n_train + m.n_test {
        return Err(Error::Config(format!(
            "{}: {} rows, manifest says {}",
            m.file,
            data.len(),
            m.n_train + m.n_test
        )));
    }
    Ok(data)
}

/// Reads a directory written by [`write_federated`].
pub fn load_federated(dir: &Path) -> Result<FederatedDataset> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    if manifest.schema_version != MANIFEST_VERSION {
        return Err(Error::Config(format!(
            "unsupported manifest schema version {}",
            manifest.schema_version
        )));
    }
    let mut clients = Vec::with_capacity(manifest.clients.len());
    for m in &manifest.clients {
        let all = read_client(dir, m, manifest.dim, manifest.classes)?;
        let (train, test) = all.split_at(m.n_train);
        clients.push(ClientData {
            id: m.id,
            cluster: m.cluster,
            train,
            test,
        });
    }
    Ok(FederatedDataset {
        clients,
        dim: manifest.dim,
        classes: manifest.classes,
        cluster_sizes: manifest.cluster_sizes,
        shift: manifest.shift,
        seed: manifest.seed,
    })
}
