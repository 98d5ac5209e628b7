//! Oracle-labelled random states, stored as JSON lines behind a header.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{encode_state, SceneGraph};
use super::oracle::{oracle_vap, OracleConfig};
use super::schema::FeatureSchema;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenario::{Domain, Scenario};
use crate::world::WorldState;

pub const DATASET_FORMAT: &str = "antplan-dataset";
pub const DATASET_VERSION: u32 = 1;
const STATE_RETRIES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub domain: Domain,
    pub scenario: String,
    pub records: usize,
    pub base_seed: u64,
    pub oracle: OracleConfig,
    pub schema: FeatureSchema,
    pub schema_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub index: usize,
    pub state_seed: u64,
    /// Seed from which every solver call behind `label` was derived.
    pub oracle_seed: u64,
    pub state: WorldState,
    pub graph: SceneGraph,
    pub label: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

fn labelled(scenario: &Scenario, index: usize, base_seed: u64, oracle: &OracleConfig) -> Result<Record> {
    let state_seed = rng::mix(base_seed, index as u64);
    let mut r = rng::seeded(state_seed);
    let state = (0..STATE_RETRIES)
        .find_map(|_| scenario.random_state(&mut r).ok())
        .ok_or_else(|| Error::Scenario(format!("no valid state for record {index}")))?;
    let oracle_seed = rng::mix(state_seed, u64::MAX);
    let label = oracle_vap(scenario, &state, &scenario.tasks, &oracle.with_seed(oracle_seed))?;
    Ok(Record { index, state_seed, oracle_seed, graph: encode_state(scenario, &state), state, label })
}

pub fn generate_dataset(scenario: &Scenario, n: usize, base_seed: u64, oracle: &OracleConfig) -> Result<Dataset> {
    let records = (0..n)
        .into_par_iter()
        .map(|i| labelled(scenario, i, base_seed, oracle))
        .collect::<Result<Vec<_>>>()?;
    let schema = FeatureSchema::of(scenario);
    Ok(Dataset {
        header: DatasetHeader {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            domain: scenario.domain,
            scenario: scenario.name.clone(),
            records: n,
            base_seed,
            oracle: oracle.clone(),
            schema_hash: schema.hash(),
            schema,
        },
        records,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
        let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
        let first = lines.next().ok_or_else(|| Error::Schema("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&first)?;
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::Schema(format!("unsupported dataset {} v{}", header.format, header.version)));
        }
        if header.schema.hash() != header.schema_hash {
            return Err(Error::Schema("dataset schema hash does not match its schema".into()));
        }
        let mut records = Vec::with_capacity(header.records);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str::<Record>(&line)?);
        }
        if records.len() != header.records {
            return Err(Error::Schema(format!("header promises {} records, found {}", header.records, records.len())));
        }
        Ok(Dataset { header, records })
    }
}
