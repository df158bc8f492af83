//! Dataset loading.
//!
//! A dataset is a directory with a `network.toml` header naming the bases,
//! the substation bus and two CSV files:
//!
//! * buses: `bus_id,p_load_kw,q_load_kvar,mg_zone`
//! * branches: `branch_id,from,to,r_ohm,x_ohm,length_km,failures_per_km_yr,has_sectionalizer`

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{Branch, Bus, BusId, NetworkModel};
use crate::error::{Error, Result};

pub const HEADER_FILE: &str = "network.toml";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    name: Option<String>,
    v_base_kv: f64,
    s_base_kva: f64,
    substation_bus: BusId,
    #[serde(default = "default_buses")]
    buses: PathBuf,
    #[serde(default = "default_branches")]
    branches: PathBuf,
}

fn default_buses() -> PathBuf {
    "buses.csv".into()
}

fn default_branches() -> PathBuf {
    "branches.csv".into()
}

#[derive(Debug, Deserialize)]
struct BusRow {
    bus_id: BusId,
    p_load_kw: f64,
    q_load_kvar: f64,
    mg_zone: u32,
}

#[derive(Debug, Deserialize)]
struct BranchRow {
    branch_id: u32,
    from: BusId,
    to: BusId,
    r_ohm: f64,
    x_ohm: f64,
    length_km: f64,
    failures_per_km_yr: f64,
    has_sectionalizer: bool,
}

fn header_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(HEADER_FILE)
    } else {
        path.to_path_buf()
    }
}

fn read_header(path: &Path) -> Result<(PathBuf, Header)> {
    let header_file = header_path(path);
    let text = std::fs::read_to_string(&header_file).map_err(|e| Error::io(&header_file, e))?;
    let header: Header = toml::from_str(&text).map_err(|e| Error::Schema {
        file: header_file.clone(),
        line: e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(1),
        message: e.message().to_string(),
    })?;
    let dir = header_file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((dir, header))
}

fn read_rows<T: for<'de> Deserialize<'de>>(file: &Path) -> Result<Vec<(usize, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(file, io),
            other => Error::Schema {
                file: file.to_path_buf(),
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers()?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let schema = |line: usize, message: String| Error::Schema {
            file: file.to_path_buf(),
            line,
            message,
        };
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            schema(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| schema(line, format!("malformed row: {e}")))?;
        rows.push((line, row));
    }
    Ok(rows)
}

/// Loads and validates a dataset. `path` is the dataset directory or its
/// `network.toml`. Every structural problem is reported against the CSV
/// row that causes it.
pub fn load_network(path: &Path) -> Result<NetworkModel> {
    let (dir, header) = read_header(path)?;
    let bus_file = dir.join(&header.buses);
    let branch_file = dir.join(&header.branches);
    let bus_rows: Vec<(usize, BusRow)> = read_rows(&bus_file)?;
    let branch_rows: Vec<(usize, BranchRow)> = read_rows(&branch_file)?;

    let bus_err = |line: usize, message: String| Error::Schema {
        file: bus_file.clone(),
        line,
        message,
    };
    let branch_err = |line: usize, message: String| Error::Schema {
        file: branch_file.clone(),
        line,
        message,
    };

    let mut bus_line: HashMap<BusId, usize> = HashMap::new();
    for (line, b) in &bus_rows {
        if bus_line.insert(b.bus_id, *line).is_some() {
            return Err(bus_err(*line, format!("duplicate bus id {}", b.bus_id)));
        }
        if !(b.p_load_kw >= 0.0 && b.q_load_kvar >= 0.0 && b.p_load_kw.is_finite() && b.q_load_kvar.is_finite()) {
            return Err(bus_err(*line, format!("bus {} load must be finite and >= 0", b.bus_id)));
        }
    }
    if !bus_line.contains_key(&header.substation_bus) {
        return Err(Error::Schema {
            file: header_path(path),
            line: 1,
            message: format!("substation bus {} not in {}", header.substation_bus, bus_file.display()),
        });
    }

    // union-find over bus ids, in file order, so the first branch that
    // closes a loop is the one reported
    let index: HashMap<BusId, usize> = bus_rows.iter().enumerate().map(|(i, (_, b))| (b.bus_id, i)).collect();
    let mut parent: Vec<usize> = (0..bus_rows.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut branch_ids = HashSet::new();
    for (line, br) in &branch_rows {
        if !branch_ids.insert(br.branch_id) {
            return Err(branch_err(*line, format!("duplicate branch id {}", br.branch_id)));
        }
        let (Some(&f), Some(&t)) = (index.get(&br.from), index.get(&br.to)) else {
            return Err(branch_err(
                *line,
                format!("branch {} references an unknown bus", br.branch_id),
            ));
        };
        if !(br.r_ohm >= 0.0 && br.x_ohm >= 0.0 && br.length_km > 0.0 && br.failures_per_km_yr >= 0.0) {
            return Err(branch_err(
                *line,
                format!("branch {} needs r, x, failure rate >= 0 and length > 0", br.branch_id),
            ));
        }
        let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
        if rf == rt {
            return Err(branch_err(
                *line,
                format!("branch {} ({} -> {}) closes a cycle", br.branch_id, br.from, br.to),
            ));
        }
        parent[rf] = rt;
    }
    let root = find(&mut parent, index[&header.substation_bus]);
    for (i, (line, b)) in bus_rows.iter().enumerate() {
        if find(&mut parent, i) != root {
            return Err(bus_err(*line, format!("bus {} is disconnected from the substation", b.bus_id)));
        }
    }

    let buses = bus_rows
        .into_iter()
        .map(|(_, b)| Bus {
            id: b.bus_id,
            p_load_kw: b.p_load_kw,
            q_load_kvar: b.q_load_kvar,
            mg_zone: b.mg_zone,
        })
        .collect();
    let branches = branch_rows
        .into_iter()
        .map(|(_, b)| Branch {
            id: b.branch_id,
            from_bus: b.from,
            to_bus: b.to,
            r_ohm: b.r_ohm,
            x_ohm: b.x_ohm,
            length_km: b.length_km,
            failure_rate: b.failures_per_km_yr,
            has_sectionalizer: b.has_sectionalizer,
        })
        .collect();
    let name = header.name.unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "network".into())
    });
    NetworkModel::new(name, buses, branches, header.substation_bus, header.v_base_kv, header.s_base_kva)
}

/// SHA-256 over the header and both CSV files, hex encoded.
pub fn dataset_digest(path: &Path) -> Result<String> {
    let (dir, header) = read_header(path)?;
    let mut hasher = Sha256::new();
    for file in [header_path(path), dir.join(&header.buses), dir.join(&header.branches)] {
        let bytes = std::fs::read(&file).map_err(|e| Error::io(&file, e))?;
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dataset(dir: &Path, buses: &str, branches: &str) {
        std::fs::write(
            dir.join(HEADER_FILE),
            "v_base_kv = 1.0\ns_base_kva = 1000.0\nsubstation_bus = 1\n",
        )
        .unwrap();
        std::fs::write(dir.join("buses.csv"), buses).unwrap();
        std::fs::write(dir.join("branches.csv"), branches).unwrap();
    }

    const BUS_HEAD: &str = "bus_id,p_load_kw,q_load_kvar,mg_zone\n";
    const BR_HEAD: &str = "branch_id,from,to,r_ohm,x_ohm,length_km,failures_per_km_yr,has_sectionalizer\n";

    #[test]
    fn loads_two_bus_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,100,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1.0,0.1,false\n"),
        );
        let net = load_network(dir.path()).unwrap();
        assert_eq!(net.buses().len(), 2);
        assert_eq!(net.branches().len(), 1);
        let via_header = load_network(&dir.path().join(HEADER_FILE)).unwrap();
        assert_eq!(net, via_header);
    }

    #[test]
    fn duplicated_branch_is_a_cycle() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,100,0,1\n3,50,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1,0.1,false\n2,2,3,0.01,0,1,0.1,false\n3,2,3,0.01,0,1,0.1,false\n"),
        );
        match load_network(dir.path()) {
            Err(Error::Schema { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("cycle"), "{message}");
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn reports_disconnected_and_duplicate_rows() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,100,0,1\n3,50,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1,0.1,false\n"),
        );
        match load_network(dir.path()) {
            Err(Error::Schema { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("disconnected"));
            }
            other => panic!("{other:?}"),
        }

        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,100,0,1\n2,50,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1,0.1,false\n"),
        );
        match load_network(dir.path()) {
            Err(Error::Schema { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,abc,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1,0.1,false\n"),
        );
        match load_network(dir.path()) {
            Err(Error::Schema { file, line, .. }) => {
                assert_eq!(line, 3);
                assert!(file.ends_with("buses.csv"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_changes_with_content() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &format!("{BUS_HEAD}1,0,0,1\n2,100,0,1\n"),
            &format!("{BR_HEAD}1,1,2,0.01,0,1.0,0.1,false\n"),
        );
        let a = dataset_digest(dir.path()).unwrap();
        assert_eq!(a, dataset_digest(dir.path()).unwrap());
        std::fs::write(dir.path().join("buses.csv"), format!("{BUS_HEAD}1,0,0,1\n2,101,0,1\n")).unwrap();
        assert_ne!(a, dataset_digest(dir.path()).unwrap());
    }
}
