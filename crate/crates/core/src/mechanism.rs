//! Applying a PRAM matrix to microdata, plus CSV I/O for single columns.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dp::{certify, Certificate, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::types::{MicrodataColumn, PramMatrix, PrivacyLevel, RetentionVector};

pub fn build_matrix(q: RetentionVector) -> Result<PramMatrix> {
    PramMatrix::new(q)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` for record `index` of the stream named by `seed`.
pub fn record_uniform(seed: u64, index: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws the released category (0-based) for input `x` from one uniform.
fn draw(m: &PramMatrix, x: usize, u: f64) -> usize {
    let q = m.retention().as_slice()[x];
    if u < q {
        return x;
    }
    let others = m.size() - 1;
    let j = (((u - q) / (1.0 - q)) * others as f64) as usize;
    let j = j.min(others - 1);
    if j >= x {
        j + 1
    } else {
        j
    }
}

/// Randomizes every record independently through row `X_i` of `m`.
/// Output depends only on `(x, m, seed)`, not on thread scheduling.
pub fn privatize(x: &MicrodataColumn, m: &PramMatrix, seed: u64) -> Result<MicrodataColumn> {
    let size = m.size();
    if let Some((index, &category)) = x
        .records()
        .iter()
        .enumerate()
        .find(|(_, &c)| c == 0 || c as usize > size)
    {
        return Err(Error::CategoryOutOfRange {
            index,
            category,
            categories: size,
        });
    }
    let out: Vec<u32> = x
        .records()
        .par_iter()
        .enumerate()
        .map(|(i, &c)| draw(m, c as usize - 1, record_uniform(seed, i as u64)) as u32 + 1)
        .collect();
    let mut labels = x.labels().to_vec();
    labels.truncate(size);
    labels.extend((labels.len() + 1..=size).map(|i| i.to_string()));
    MicrodataColumn::with_labels(out, labels)
}

/// Hex SHA-256 over the record ids and the label list.
pub fn fingerprint(column: &MicrodataColumn) -> String {
    let mut h = Sha256::new();
    for label in column.labels() {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
    }
    for r in column.records() {
        h.update(r.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// A certified privatization: exists only if the matrix passes for `alpha`.
#[derive(Debug, Clone, Serialize)]
pub struct PrivatizationRun {
    input_fingerprint: String,
    matrix: PramMatrix,
    seed: u64,
    alpha: f64,
    certificate: Certificate,
}

impl PrivatizationRun {
    pub fn new(input: &MicrodataColumn, matrix: PramMatrix, alpha: PrivacyLevel, seed: u64) -> Result<Self> {
        let certificate = certify(&matrix, alpha, FEASIBILITY_TOL);
        if !certificate.pass {
            return Err(Error::CertificationFailed {
                alpha: alpha.value(),
                ratio: certificate.dp_ratio,
                bound: certificate.exp_alpha,
            });
        }
        Ok(Self {
            input_fingerprint: fingerprint(input),
            matrix,
            seed,
            alpha: alpha.value(),
            certificate,
        })
    }

    pub fn input_fingerprint(&self) -> &str {
        &self.input_fingerprint
    }

    pub fn matrix(&self) -> &PramMatrix {
        &self.matrix
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    /// Privatizes `input`, which must be the column this run was certified for.
    pub fn apply(&self, input: &MicrodataColumn) -> Result<MicrodataColumn> {
        if fingerprint(input) != self.input_fingerprint {
            return Err(Error::InfeasibleStrategy(
                "input differs from the certified column".into(),
            ));
        }
        privatize(input, &self.matrix, self.seed)
    }
}

/// Reads `column` from a headed CSV. Without `labels`, distinct values get
/// ids `1..=S` in order of first appearance.
pub fn load_column(
    path: impl AsRef<Path>,
    column: &str,
    labels: Option<&HashMap<String, u32>>,
) -> Result<MicrodataColumn> {
    let file = File::open(path)?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile);
    }
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;

    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let value = row.get(idx).unwrap_or("");
        let id = match labels {
            Some(map) => *map
                .get(value)
                .ok_or_else(|| Error::UnknownLabel(value.to_string()))?,
            None => match ids.get(value) {
                Some(&id) => id,
                None => {
                    order.push(value.to_string());
                    let id = order.len() as u32;
                    ids.insert(value.to_string(), id);
                    id
                }
            },
        };
        records.push(id);
    }

    let label_list = match labels {
        Some(map) => {
            let size = map.values().copied().max().unwrap_or(0) as usize;
            let mut list: Vec<String> = (1..=size).map(|i| i.to_string()).collect();
            for (label, &id) in map {
                if id == 0 {
                    return Err(Error::UnknownLabel(label.clone()));
                }
                list[id as usize - 1] = label.clone();
            }
            list
        }
        None => order,
    };
    MicrodataColumn::with_labels(records, label_list)
}

/// Writes a one-column CSV with header `column_name` and labeled values.
pub fn save_column(column: &MicrodataColumn, path: impl AsRef<Path>, column_name: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([column_name])?;
    for &r in column.records() {
        writer.write_record([column.label(r).unwrap_or_default()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Serializes `run` as pretty JSON.
pub fn save_run(run: &PrivatizationRun, path: impl AsRef<Path>) -> Result<()> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, run).map_err(std::io::Error::from)?;
    file.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::marginal_z;
    use crate::types::{frequencies, CategoricalDistribution};

    fn matrix(q: &[f64]) -> PramMatrix {
        build_matrix(RetentionVector::new(q.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn matrix_examples() {
        let m = matrix(&[0.7, 0.6]);
        let expected = [[0.7, 0.3], [0.4, 0.6]];
        for (row, want) in m.to_dense().iter().zip(expected) {
            for (a, b) in row.iter().zip(want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        let m = matrix(&[1.0; 4]);
        for k in 0..4 {
            for j in 0..4 {
                assert_eq!(m.entry(k, j), if k == j { 1.0 } else { 0.0 });
            }
        }
        let m = matrix(&[0.4; 3]);
        assert!((m.entry(0, 2) - 0.3).abs() < 1e-15);
        assert!((m.entry(2, 1) - 0.3).abs() < 1e-15);
        assert!(matches!(
            RetentionVector::new(vec![1.2, 0.5]),
            Err(Error::OutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn identity_and_swap() {
        let x = MicrodataColumn::new(vec![1, 2, 2, 1, 2], 2).unwrap();
        assert_eq!(privatize(&x, &matrix(&[1.0, 1.0]), 9).unwrap().records(), x.records());
        let z = privatize(&x, &matrix(&[0.0, 0.0]), 9).unwrap();
        assert_eq!(z.records(), &[2, 1, 1, 2, 1]);
    }

    #[test]
    fn out_of_range_record() {
        let three = MicrodataColumn::new(vec![1, 3, 2], 3).unwrap();
        assert!(matches!(
            privatize(&three, &matrix(&[0.5, 0.5]), 0),
            Err(Error::CategoryOutOfRange { index: 1, category: 3, categories: 2 })
        ));
        // ids within range are accepted even when the column declares more labels
        let unused = MicrodataColumn::new(vec![1, 2, 2], 3).unwrap();
        let z = privatize(&unused, &matrix(&[1.0, 1.0]), 0).unwrap();
        assert_eq!(z.records(), &[1, 2, 2]);
        assert_eq!(z.categories(), 2);
    }

    #[test]
    fn swap_branch_is_uniform_over_others() {
        // q = 0 sends each record to one of the other categories
        let x = MicrodataColumn::new(vec![2; 40_000], 5).unwrap();
        let z = privatize(&x, &matrix(&[0.0; 5]), 1).unwrap();
        let f = frequencies(&z);
        assert_eq!(f.counts()[1], 0);
        for k in [0, 2, 3, 4] {
            assert!((f.counts()[k] as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn determinism_across_pools() {
        let records: Vec<u32> = (0..50_000).map(|i| (i % 7) as u32 + 1).collect();
        let x = MicrodataColumn::new(records, 7).unwrap();
        let m = matrix(&[0.3, 0.5, 0.2, 0.6, 0.1, 0.4, 0.35]);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = serial.install(|| privatize(&x, &m, 42)).unwrap();
        let b = wide.install(|| privatize(&x, &m, 42)).unwrap();
        assert_eq!(a.records(), b.records());
        let c = privatize(&x, &m, 43).unwrap();
        assert_ne!(a.records(), c.records());
    }

    #[test]
    fn empirical_marginal_is_close() {
        let p = [0.3, 0.1, 0.2, 0.08, 0.02, 0.04, 0.06, 0.1, 0.01, 0.09];
        let n = 1_000_000usize;
        let mut records = Vec::with_capacity(n);
        for (k, &pk) in p.iter().enumerate() {
            records.extend(std::iter::repeat_n(k as u32 + 1, (pk * n as f64).round() as usize));
        }
        let x = MicrodataColumn::new(records, 10).unwrap();
        let dist = CategoricalDistribution::new(p.to_vec()).unwrap();
        let q = crate::polytope::vertex_values(10, PrivacyLevel::new(1.0).unwrap());
        let q = RetentionVector::constant(10, q.v_plus).unwrap();
        let expected = marginal_z(&dist, &q).unwrap();
        let z = privatize(&x, &build_matrix(q).unwrap(), 2024).unwrap();
        let observed = CategoricalDistribution::from_counts(&frequencies(&z)).unwrap();
        assert!(observed.total_variation(&expected).unwrap() < 0.005);
    }

    #[test]
    fn certification_gate() {
        let x = MicrodataColumn::new(vec![1, 2, 1], 2).unwrap();
        let a = PrivacyLevel::new(0.5).unwrap();
        let err = PrivatizationRun::new(&x, matrix(&[0.9, 0.9]), a, 1).unwrap_err();
        assert!(matches!(err, Error::CertificationFailed { .. }));
        let run = PrivatizationRun::new(&x, matrix(&[0.6, 0.6]), a, 1).unwrap();
        assert!(run.certificate().pass);
        assert_eq!(run.apply(&x).unwrap().len(), 3);
        let other = MicrodataColumn::new(vec![2, 2, 1], 2).unwrap();
        assert!(run.apply(&other).is_err());
        let json = serde_json::to_value(&run).unwrap();
        assert!(json["certificate"]["pass"].as_bool().unwrap());
        assert_eq!(json["input_fingerprint"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn csv_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.csv");
        std::fs::write(&path, "sex\nF\nM\nF\n").unwrap();
        let c = load_column(&path, "sex", None).unwrap();
        assert_eq!(c.records(), &[1, 2, 1]);
        assert_eq!(c.labels(), &["F", "M"]);

        let map: HashMap<String, u32> = [("M".to_string(), 1), ("F".to_string(), 2)].into();
        let c2 = load_column(&path, "sex", Some(&map)).unwrap();
        assert_eq!(c2.records(), &[2, 1, 2]);
        assert_eq!(c2.labels(), &["M", "F"]);

        assert!(matches!(load_column(&path, "age", None), Err(Error::MissingColumn(_))));
        let partial: HashMap<String, u32> = [("M".to_string(), 1)].into();
        assert!(matches!(
            load_column(&path, "sex", Some(&partial)),
            Err(Error::UnknownLabel(l)) if l == "F"
        ));

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_column(&empty, "sex", None), Err(Error::EmptyFile)));
    }

    #[test]
    fn csv_round_trip_and_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let c = MicrodataColumn::with_labels(
            vec![1, 2, 2, 1, 3],
            vec!["a,b".into(), "plain".into(), "say \"hi\"".into()],
        )
        .unwrap();
        let path = dir.path().join("out.csv");
        save_column(&c, &path, "loc").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("loc\n\"a,b\"\n"));
        let back = load_column(&path, "loc", None).unwrap();
        assert_eq!(back.records(), c.records());
        assert_eq!(back.labels(), c.labels());

        let none = c.with_records(Vec::new()).unwrap();
        let path = dir.path().join("none.csv");
        save_column(&none, &path, "loc").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "loc\n");
    }
}
