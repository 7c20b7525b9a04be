//! Versioned binary serialization for fitted forests.
//!
//! Layout: magic `PEPF`, u32 format version, u32 header length, JSON header
//! (schema hash, tree count, hyperparameters, fold id, standardization),
//! then per tree the flat node arrays in little-endian order. Floats travel
//! as raw bits, so a round trip is bit-exact.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use std::path::Path;

use super::{DensityForest, RegressionTree};
use crate::dataset::{schema_hash, Standardization};
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_atomic};

const MAGIC: &[u8; 4] = b"PEPF";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_hash: String,
    feature_names: Vec<String>,
    n_trees: usize,
    mtry: usize,
    min_node_size: usize,
    held_out_week: Option<u8>,
    master_seed: u64,
    standardization: Standardization,
}

impl DensityForest {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            schema_hash: schema_hash(&self.feature_names),
            feature_names: self.feature_names.clone(),
            n_trees: self.trees.len(),
            mtry: self.mtry,
            min_node_size: self.min_node_size,
            held_out_week: self.held_out_week,
            master_seed: self.master_seed,
            standardization: self.standardization.clone(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::model(format!("forest header encode: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION).unwrap();
        out.write_u32::<LittleEndian>(header_json.len() as u32).unwrap();
        out.extend_from_slice(&header_json);
        for tree in &self.trees {
            write_tree(&mut out, tree);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic)
            .map_err(|e| Error::model(format!("forest file truncated: {e}")))?;
        if &magic != MAGIC {
            return Err(Error::model("not a forest model file (bad magic)"));
        }
        let version = cur
            .read_u32::<LittleEndian>()
            .map_err(|e| Error::model(format!("forest file truncated: {e}")))?;
        if version != VERSION {
            return Err(Error::model(format!(
                "unsupported forest file version {version} (expected {VERSION})"
            )));
        }
        let header_len = cur
            .read_u32::<LittleEndian>()
            .map_err(|e| Error::model(format!("forest file truncated: {e}")))? as usize;
        let mut header_json = vec![0u8; header_len];
        cur.read_exact(&mut header_json)
            .map_err(|e| Error::model(format!("forest file truncated: {e}")))?;
        let header: Header = serde_json::from_slice(&header_json)
            .map_err(|e| Error::model(format!("forest header decode: {e}")))?;
        if header.schema_hash != schema_hash(&header.feature_names) {
            return Err(Error::model("forest header schema hash mismatch"));
        }
        let mut trees = Vec::with_capacity(header.n_trees);
        for _ in 0..header.n_trees {
            trees.push(read_tree(&mut cur)?);
        }
        Ok(DensityForest {
            trees,
            mtry: header.mtry,
            min_node_size: header.min_node_size,
            feature_names: header.feature_names,
            standardization: header.standardization,
            held_out_week: header.held_out_week,
            master_seed: header.master_seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}

fn write_tree(out: &mut Vec<u8>, tree: &RegressionTree) {
    out.write_u32::<LittleEndian>(tree.feature.len() as u32).unwrap();
    out.write_u64::<LittleEndian>(tree.seed).unwrap();
    for &f in &tree.feature {
        out.write_i32::<LittleEndian>(f).unwrap();
    }
    for &t in &tree.threshold {
        out.write_u64::<LittleEndian>(t.to_bits()).unwrap();
    }
    for &l in &tree.left {
        out.write_u32::<LittleEndian>(l).unwrap();
    }
    for &r in &tree.right {
        out.write_u32::<LittleEndian>(r).unwrap();
    }
    for &v in &tree.value {
        out.write_u64::<LittleEndian>(v.to_bits()).unwrap();
    }
}

fn read_tree(cur: &mut Cursor<&[u8]>) -> Result<RegressionTree> {
    let trunc = |e: std::io::Error| Error::model(format!("forest file truncated: {e}"));
    let n = cur.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let seed = cur.read_u64::<LittleEndian>().map_err(trunc)?;
    let mut tree = RegressionTree {
        feature: Vec::with_capacity(n),
        threshold: Vec::with_capacity(n),
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        value: Vec::with_capacity(n),
        seed,
    };
    for _ in 0..n {
        tree.feature.push(cur.read_i32::<LittleEndian>().map_err(trunc)?);
    }
    for _ in 0..n {
        tree.threshold
            .push(f64::from_bits(cur.read_u64::<LittleEndian>().map_err(trunc)?));
    }
    for _ in 0..n {
        tree.left.push(cur.read_u32::<LittleEndian>().map_err(trunc)?);
    }
    for _ in 0..n {
        tree.right.push(cur.read_u32::<LittleEndian>().map_err(trunc)?);
    }
    for _ in 0..n {
        tree.value
            .push(f64::from_bits(cur.read_u64::<LittleEndian>().map_err(trunc)?));
    }
    // Child indices must stay inside the node table.
    for i in 0..n {
        if tree.feature[i] >= 0 {
            let (l, r) = (tree.left[i] as usize, tree.right[i] as usize);
            if l >= n || r >= n {
                return Err(Error::model("forest file corrupt: child index out of range"));
            }
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::super::ForestConfig;
    use super::*;
    use crate::dataset::FeatureDataset;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut d = FeatureDataset::new(vec!["a".into(), "b".into()]);
        for i in 0..80 {
            let v = (i as f64 * 0.37).sin() * 10.0;
            d.push_row(i, 0, 1, &[v, i as f64], v * 2.0 + 1.0);
        }
        let rows: Vec<usize> = (0..d.n_rows()).collect();
        let cfg = ForestConfig {
            n_trees: 7,
            min_node_size: 3,
            mtry: Some(2),
        };
        let forest = DensityForest::fit(&d, &rows, &cfg, 77, Some(4)).unwrap();
        let bytes = forest.to_bytes().unwrap();
        let back = DensityForest::from_bytes(&bytes).unwrap();
        assert_eq!(forest, back);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(DensityForest::from_bytes(b"NOPE....").is_err());
    }
}
