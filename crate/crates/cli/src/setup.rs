//! Geometry and basis construction backed by the on-disk cache.

use std::path::PathBuf;
use std::sync::Arc;

use gclab::cache::{self, CacheKey};
use gclab::differentials::{build_basis, DifferentialBasis};
use gclab::geometry::{build_bolza_group, build_mesh, DiscreteOperators, FuchsianGroup, SurfaceMesh};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const CACHE_ENV: &str = "GCLAB_CACHE_DIR";

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gclab-cache"))
}

pub struct Setup {
    pub group: Arc<FuchsianGroup>,
    pub mesh: SurfaceMesh,
    pub ops: DiscreteOperators,
    pub basis: Option<DifferentialBasis>,
    /// Whether anything was read from the cache.
    pub cache_hit: bool,
}

impl Setup {
    pub fn basis(&self) -> &DifferentialBasis {
        self.basis.as_ref().expect("setup built without a basis")
    }
}

pub fn key(cfg: &ExperimentConfig) -> CacheKey {
    CacheKey {
        mesh_level: cfg.mesh_level,
        r_cut: cfg.r_cut,
        kappa: cfg.kappa,
        power_count: cfg.power_count,
    }
}

/// Loads mesh (and basis when asked) from the cache, building and storing
/// whatever is missing. A cache that cannot be written only logs a warning.
pub fn prepare(cfg: &ExperimentConfig, with_basis: bool) -> Result<Setup, CliError> {
    let group = Arc::new(build_bolza_group(cfg.r_cut)?);
    let key = key(cfg);
    let path = key.path_in(&cache_dir());
    let cached = match cache::read(&path, &key, group.clone()) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("ignoring unreadable cache {}: {e}", path.display());
            None
        }
    };
    let cache_hit = cached.is_some();
    let (mesh, ops, mut basis) = match cached {
        Some(c) => (c.mesh, c.ops, c.basis),
        None => {
            let (m, o) = build_mesh(&group, cfg.mesh_level)?;
            (m, o, None)
        }
    };
    let mut dirty = !cache_hit;
    if with_basis && basis.is_none() {
        basis = Some(build_basis(group.clone(), &mesh, cfg.kappa, cfg.power_count)?);
        dirty = true;
    }
    if dirty {
        let stored = std::fs::create_dir_all(cache_dir())
            .map_err(gclab::GclabError::from)
            .and_then(|_| cache::write(&path, &key, &mesh, &ops, basis.as_ref()));
        if let Err(e) = stored {
            log::warn!("could not write cache {}: {e}", path.display());
        }
    }
    Ok(Setup {
        group,
        mesh,
        ops,
        basis,
        cache_hit,
    })
}
