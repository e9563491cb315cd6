//! Dataset generation: seeds a scene stream, renders, corrupts, and
//! auto-labels each scene, and writes the sample files plus a manifest
//! listing every id with the per-sample seed that reproduces it.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_resolved, parse_as, parse_mix, unknown_key, Resolve};
use crate::dataset::io::save_sample;
use crate::error::{FsgError, FsgResult};
use crate::preprocess::INPUT_SIDE;
use crate::sim::{generate_scene, make_sample, CatalogParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GenDataConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Square frame side, px.
    pub side: usize,
    /// Opaque / specular / transparent / flat draw weights.
    pub material_mix: [f64; 4],
}

impl Default for GenDataConfig {
    fn default() -> Self {
        GenDataConfig {
            n_samples: 16,
            seed: 7,
            side: INPUT_SIDE,
            material_mix: [0.25, 0.25, 0.25, 0.25],
        }
    }
}

const KEYS: &[&str] = &["n_samples", "seed", "side", "material_mix"];

impl Resolve for GenDataConfig {
    fn set(&mut self, key: &str, value: &str) -> FsgResult<()> {
        match key {
            "n_samples" => self.n_samples = parse_as(key, value)?,
            "seed" => self.seed = parse_as(key, value)?,
            "side" => self.side = parse_as(key, value)?,
            "material_mix" => self.material_mix = parse_mix(key, value)?,
            _ => return Err(unknown_key(key, KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> FsgResult<()> {
        if self.n_samples == 0 {
            return Err(FsgError::Config("n_samples must be at least 1".into()));
        }
        if !(32..=2048).contains(&self.side) || self.side % 4 != 0 {
            return Err(FsgError::Config(format!(
                "side must be a multiple of 4 in [32, 2048], got {}",
                self.side
            )));
        }
        Ok(())
    }
}

/// One manifest row: the sample id and the seed that regenerates it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub id: String,
    pub seed: u64,
}

/// Written next to the samples as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub side: usize,
    pub material_mix: [f64; 4],
    pub samples: Vec<ManifestSample>,
}

#[derive(Debug, Clone)]
pub struct GenDataSummary {
    pub n_written: usize,
    pub manifest_path: PathBuf,
}

/// Generates `cfg.n_samples` labeled samples into `out_dir`.
pub fn gen_data(out_dir: &Path, cfg: &GenDataConfig) -> FsgResult<GenDataSummary> {
    cfg.validate()?;
    let catalog = CatalogParams {
        material_mix: cfg.material_mix,
        ..CatalogParams::default()
    };
    catalog.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| FsgError::io(out_dir.display(), e))?;
    log_resolved(
        "gen-data",
        &serde_json::json!({
            "out_dir": out_dir.display().to_string(),
            "n_samples": cfg.n_samples,
            "seed": cfg.seed,
            "side": cfg.side,
            "material_mix": cfg.material_mix,
        }),
    );

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let sample_seed: u64 = master.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let id = format!("{i:05}");
        let scene = generate_scene(&mut rng, &catalog)?;
        let (sample, _) = make_sample(scene, cfg.side, &mut rng, id.clone())?;
        save_sample(out_dir, &sample)?;
        rows.push(ManifestSample {
            id,
            seed: sample_seed,
        });
    }

    let manifest = DatasetManifest {
        seed: cfg.seed,
        side: cfg.side,
        material_mix: cfg.material_mix,
        samples: rows,
    };
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&manifest_path, text + "\n")
        .map_err(|e| FsgError::io(manifest_path.display(), e))?;
    println!(
        "[gen-data] wrote {} samples and {}",
        cfg.n_samples,
        manifest_path.display()
    );
    Ok(GenDataSummary {
        n_written: cfg.n_samples,
        manifest_path,
    })
}
