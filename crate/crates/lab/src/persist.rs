//! Solution directories: `u.gpsf`, `v.gpsf` and a `solution.json` sidecar.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use seglab_core::solver::{energy, residual_l2, InitRecord, ModelParams, SolutionPair, Sources};
use seglab_core::Field;

use crate::error::{LabError, LabResult};

pub const U_FILE: &str = "u.gpsf";
pub const V_FILE: &str = "v.gpsf";
pub const META_FILE: &str = "solution.json";

/// Sidecar of a persisted pair. `params` carries the realized multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub params: ModelParams,
    pub residual_l2: f64,
    pub iterations: usize,
    pub dt_final: f64,
    pub init: Option<InitRecord>,
}

pub fn ensure_dir(dir: &Path) -> LabResult<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| LabError::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> LabResult<T> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::parse(path, e))
}

pub fn save_field(path: &Path, f: &Field) -> LabResult<()> {
    f.save(path).map_err(|e| match e {
        seglab_core::Error::Io(io) => LabError::io(path, io),
        other => LabError::Core(other),
    })
}

pub fn load_field(path: &Path) -> LabResult<Field> {
    Field::load(path).map_err(|e| match e {
        seglab_core::Error::Io(io) => LabError::io(path, io),
        other => LabError::parse(path, other),
    })
}

pub fn save_solution(dir: &Path, sol: &SolutionPair, init: Option<InitRecord>) -> LabResult<()> {
    ensure_dir(dir)?;
    save_field(&dir.join(U_FILE), &sol.u)?;
    save_field(&dir.join(V_FILE), &sol.v)?;
    let meta = SolutionMeta {
        params: sol.params.clone(),
        residual_l2: sol.residual_l2,
        iterations: sol.iterations,
        dt_final: sol.dt_final,
        init,
    };
    write_json(&dir.join(META_FILE), &meta)
}

/// Reloads a pair; energy and residual are recomputed from the fields.
pub fn load_solution(dir: &Path) -> LabResult<(SolutionPair, SolutionMeta)> {
    let u = load_field(&dir.join(U_FILE))?;
    let v = load_field(&dir.join(V_FILE))?;
    let meta: SolutionMeta = read_json(&dir.join(META_FILE))?;
    let energy = energy(&u, &v, &meta.params)?;
    let residual = residual_l2(&u, &v, &meta.params, &Sources::none())?;
    let sol = SolutionPair {
        u,
        v,
        params: meta.params.clone(),
        residual_l2: residual,
        iterations: meta.iterations,
        energy,
        dt_final: meta.dt_final,
        h_src: None,
        k_src: None,
    };
    Ok((sol, meta))
}
