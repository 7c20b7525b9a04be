//! Versioned binary serialization for the boosted EP model (`PEPE` files).

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use std::path::Path;

use super::boost::{BoostConfig, BoostTree, BoostedClassifier};
use super::state::N_OUTCOMES;
use super::train::{EpModel, GridPoint, WeightScheme};
use crate::dataset::schema_hash;
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_atomic};

const MAGIC: &[u8; 4] = b"PEPE";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_hash: String,
    feature_names: Vec<String>,
    base_score: Vec<f64>,
    n_trees: usize,
    boost: BoostConfig,
    weighting: WeightScheme,
    chosen: GridPoint,
    cv_table: Vec<(GridPoint, f64)>,
    seasons: Vec<u16>,
    seed: u64,
}

impl EpModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            schema_hash: schema_hash(&self.feature_names),
            feature_names: self.feature_names.clone(),
            base_score: self.classifier.base_score.to_vec(),
            n_trees: self.classifier.trees.len(),
            boost: self.classifier.config.clone(),
            weighting: self.weighting,
            chosen: self.chosen,
            cv_table: self.cv_table.clone(),
            seasons: self.seasons.clone(),
            seed: self.seed,
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::model(format!("ep header encode: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(VERSION).unwrap();
        out.write_u32::<LittleEndian>(header_json.len() as u32).unwrap();
        out.extend_from_slice(&header_json);
        for tree in &self.classifier.trees {
            write_tree(&mut out, tree);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let trunc = |e: std::io::Error| Error::model(format!("ep model file truncated: {e}"));
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(trunc)?;
        if &magic != MAGIC {
            return Err(Error::model("not an ep model file (bad magic)"));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(trunc)?;
        if version != VERSION {
            return Err(Error::model(format!(
                "unsupported ep model version {version} (expected {VERSION})"
            )));
        }
        let header_len = cur.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        let mut header_json = vec![0u8; header_len];
        cur.read_exact(&mut header_json).map_err(trunc)?;
        let header: Header = serde_json::from_slice(&header_json)
            .map_err(|e| Error::model(format!("ep header decode: {e}")))?;
        if header.schema_hash != schema_hash(&header.feature_names) {
            return Err(Error::model("ep model schema hash mismatch"));
        }
        if header.base_score.len() != N_OUTCOMES {
            return Err(Error::model("ep model base score has wrong arity"));
        }
        let mut trees = Vec::with_capacity(header.n_trees);
        for _ in 0..header.n_trees {
            trees.push(read_tree(&mut cur)?);
        }
        let mut base_score = [0.0; N_OUTCOMES];
        base_score.copy_from_slice(&header.base_score);
        Ok(EpModel {
            classifier: BoostedClassifier {
                base_score,
                trees,
                n_features: header.feature_names.len(),
                config: header.boost,
            },
            feature_names: header.feature_names,
            weighting: header.weighting,
            chosen: header.chosen,
            cv_table: header.cv_table,
            seasons: header.seasons,
            seed: header.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?)
    }
}

fn write_tree(out: &mut Vec<u8>, tree: &BoostTree) {
    out.write_u32::<LittleEndian>(tree.feature.len() as u32).unwrap();
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

fn read_tree(cur: &mut Cursor<&[u8]>) -> Result<BoostTree> {
    let trunc = |e: std::io::Error| Error::model(format!("ep model file truncated: {e}"));
    let n = cur.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let mut tree = BoostTree {
        feature: Vec::with_capacity(n),
        threshold: Vec::with_capacity(n),
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        value: Vec::with_capacity(n),
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
    for i in 0..n {
        if tree.feature[i] >= 0
            && (tree.left[i] as usize >= n || tree.right[i] as usize >= n)
        {
            return Err(Error::model("ep model file corrupt: child index out of range"));
        }
    }
    Ok(tree)
}
