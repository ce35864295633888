//! Manual distribution of the rank-one fast-path enumeration: `--shards k
//! --shard i` writes one part file, `merge` validates a complete set of
//! parts and stores the merged ball in the enumeration cache.

use anyhow::{bail, Context, Result};
use homocount_core::enumerate::{
    cache_store, enumerate_sl2_shard, merge_results, variety_hash, EnumerationResult, Method,
};
use homocount_core::geometry::{LatticePoint, NormMode, VarietySpec};
use homocount_core::Budget;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::config::{resolve_variety, Experiment, ExperimentConfig};
use crate::report::write_atomic;

const PART_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShardPart {
    schema_version: u32,
    variety: VarietySpec,
    #[serde(rename = "T")]
    t: f64,
    norm_mode: NormMode,
    method: Method,
    shards: u64,
    index: u64,
    count: u64,
    points: Vec<Vec<i64>>,
}

/// Enumerate one shard and write `<hash>-T<t>-part<i>of<k>.json` under
/// the output directory.
pub fn run_shard(
    experiment: Experiment,
    cfg: &mut ExperimentConfig,
    shards: u64,
    index: u64,
    budget: &Budget,
    out_dir: &Path,
) -> Result<PathBuf> {
    if experiment != Experiment::Growth {
        bail!("--shards applies to the growth experiment; run `growth --shards k --shard i`");
    }
    if shards == 0 {
        bail!("--shards must be at least 1");
    }
    if index >= shards {
        bail!("--shard {index} is out of range for --shards {shards}");
    }
    let variety = resolve_variety(cfg, "sl2")?;
    if variety != VarietySpec::sl(2) {
        bail!("sharding supports the special linear rank-one fast path only");
    }
    let mode = *cfg.norm.get_or_insert(NormMode::Euclidean);
    let t = match (cfg.t, &cfg.t_grid, &cfg.t_list) {
        (Some(t), _, _) => t,
        (None, _, Some(list)) if !list.is_empty() => {
            list.iter().cloned().fold(f64::MIN, f64::max)
        }
        (None, Some(grid), _) => grid.hi,
        _ => bail!("sharded enumeration needs t, t_list or t_grid in the config"),
    };
    let part = enumerate_sl2_shard(t, mode, shards, index, budget)?;
    let doc = ShardPart {
        schema_version: PART_SCHEMA_VERSION,
        variety: part.variety.clone(),
        t: part.t,
        norm_mode: part.norm_mode,
        method: part.method,
        shards,
        index,
        count: part.points.len() as u64,
        points: part.points.iter().map(|p| p.entries().to_vec()).collect(),
    };
    let path = out_dir.join(format!(
        "{}-T{}-part{}of{}.json",
        variety_hash(&doc.variety),
        t,
        index,
        shards
    ));
    let mut json = serde_json::to_string(&doc)?;
    json.push('\n');
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

fn load_part(path: &Path) -> Result<ShardPart> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read shard part {}", path.display()))?;
    let part: ShardPart = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a shard part file", path.display()))?;
    if part.schema_version != PART_SCHEMA_VERSION {
        bail!(
            "{}: shard schema version {} is not supported (expected {})",
            path.display(),
            part.schema_version,
            PART_SCHEMA_VERSION
        );
    }
    if part.count != part.points.len() as u64 {
        bail!("{}: header count {} does not match {} points", path.display(), part.count, part.points.len());
    }
    Ok(part)
}

/// Validate a full set of part files, merge them, and store the result
/// in the enumeration cache under `out_dir`. Returns (cache path, point
/// count).
pub fn merge(paths: &[PathBuf], out_dir: &Path) -> Result<(PathBuf, u64)> {
    if paths.is_empty() {
        bail!("merge needs at least one part file");
    }
    let mut parts = Vec::with_capacity(paths.len());
    for p in paths {
        parts.push((p.clone(), load_part(p)?));
    }
    let (first_path, first) = &parts[0];
    for (path, part) in &parts[1..] {
        if part.variety != first.variety
            || part.t != first.t
            || part.norm_mode != first.norm_mode
            || part.method != first.method
            || part.shards != first.shards
        {
            bail!(
                "{} and {} belong to different enumerations",
                first_path.display(),
                path.display()
            );
        }
    }
    let mut seen = vec![Vec::new(); first.shards as usize];
    for (path, part) in &parts {
        if part.index >= part.shards {
            bail!("{}: shard index {} out of range", path.display(), part.index);
        }
        seen[part.index as usize].push(path.clone());
    }
    let missing: Vec<String> =
        seen.iter().enumerate().filter(|(_, v)| v.is_empty()).map(|(i, _)| i.to_string()).collect();
    if !missing.is_empty() {
        bail!(
            "incomplete shard set: missing index(es) {} of {}",
            missing.join(", "),
            first.shards
        );
    }
    for (i, v) in seen.iter().enumerate() {
        if v.len() > 1 {
            bail!("shard index {i} appears {} times", v.len());
        }
    }

    let results: Vec<EnumerationResult> = parts
        .iter()
        .map(|(path, part)| {
            let points: Result<Vec<LatticePoint>> = part
                .points
                .iter()
                .map(|e| {
                    LatticePoint::square(2, e.clone())
                        .with_context(|| format!("{}: malformed point entry", path.display()))
                })
                .collect();
            Ok(EnumerationResult {
                variety: part.variety.clone(),
                t: part.t,
                norm_mode: part.norm_mode,
                method: part.method,
                points: points?,
                // set after the index check below proves coverage
                complete: false,
            })
        })
        .collect::<Result<_>>()?;
    let mut merged = merge_results(results)?;
    // every index 0..shards present exactly once, so the union is the ball
    merged.complete = true;
    let count = merged.points.len() as u64;
    let path = cache_store(&merged, out_dir)?;
    Ok((path, count))
}
