//! Benchmark systems.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};
use crate::io::SystemDocument;
use crate::system::QbSystem;

/// Overrides the directory holding bundled model data.
pub const DATA_DIR_ENV: &str = "QBSTAB_DATA_DIR";

pub const SHEAR_FLOW_FILE: &str = "shear_flow_9.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    pub n: usize,
    pub m: usize,
    /// Parameter names with their default values.
    pub parameters: BTreeMap<String, f64>,
    pub provenance: String,
}

/// `ẋ₁ = −50x₁ − 16x₂ + 13.8x₁x₂`, `ẋ₂ = 13x₁ − 9x₂ + 5.5x₁x₂`.
pub fn two_state() -> QbSystem {
    let a = DMatrix::from_row_slice(2, 2, &[-50.0, -16.0, 13.0, -9.0]);
    let h = DMatrix::from_row_slice(2, 4, &[0.0, 6.9, 6.9, 0.0, 0.0, 2.75, 2.75, 0.0]);
    QbSystem::quadratic(a, h).expect("two-state data is consistent")
}

/// Three states, two inputs, with the printed `D₁`, `D₂` and `H` blocks.
pub fn three_state_qb() -> QbSystem {
    let a = DMatrix::from_row_slice(3, 3, &[-1.7, 1.7, 0.0, 1.37, -1.0, -0.7, 0.7, 1.0, -1.6]);
    let b = DMatrix::from_row_slice(3, 2, &[0.8, 3.2, 1.1, 0.2, 7.5, 0.6]);
    let d1 = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0]);
    let d2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.1]);
    let h1 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.0]);
    let h2 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -0.5, 0.1, 0.0, 0.0]);
    let h3 = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0]);
    let mut h = DMatrix::zeros(3, 9);
    for (i, blk) in [h1, h2, h3].iter().enumerate() {
        h.columns_mut(3 * i, 3).copy_from(blk);
    }
    QbSystem::new(a, h, b, vec![d1, d2]).expect("three-state data is consistent")
}

/// `ẋ = ax + hx² + dxu + bu`; `m = 1` when `b` or `d` is nonzero.
pub fn scalar_family(a: f64, h: f64, b: f64, d: f64) -> QbSystem {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    if b == 0.0 && d == 0.0 {
        QbSystem::quadratic(s(a), s(h)).expect("scalar data is consistent")
    } else {
        QbSystem::new(s(a), s(h), s(b), vec![s(d)]).expect("scalar data is consistent")
    }
}

pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")),
    }
}

/// The bundled nine-mode shear-flow document, if present.
pub fn shear_flow_document() -> Result<SystemDocument> {
    let path = data_dir().join(SHEAR_FLOW_FILE);
    if !path.is_file() {
        return Err(QbError::Config(format!(
            "shear-flow coefficient file not found at {} (set {DATA_DIR_ENV})",
            path.display()
        )));
    }
    SystemDocument::load(&path)
}

/// Nine-mode shear flow about the laminar state, `A(Re) = A₀ + A₁/Re`.
pub fn shear_flow_9(re: f64) -> Result<QbSystem> {
    Ok(shear_flow_document()?.to_system_at("Re", re)?.system)
}

pub fn registry() -> Vec<ModelDescriptor> {
    let d = |name: &str, n, m, params: &[(&str, f64)], provenance: &str| ModelDescriptor {
        name: name.to_string(),
        n,
        m,
        parameters: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        provenance: provenance.to_string(),
    };
    vec![
        d("two-state", 2, 0, &[], "two-state quadratic benchmark for region-of-attraction estimation"),
        d("three-state-qb", 3, 2, &[], "three-state quadratic-bilinear stabilization benchmark"),
        d(
            "shear-flow-9",
            9,
            0,
            &[("Re", 120.0)],
            "nine-mode sinusoidally forced shear flow (Moehlis, Faisst and Eckhardt 2004), bundled data file",
        ),
        d(
            "scalar",
            1,
            0,
            &[("a", -1.0), ("h", 1.0), ("b", 0.0), ("d", 0.0)],
            "closed-form scalar family x' = a x + h x^2 + d x u + b u (m = 1 once b or d is nonzero)",
        ),
    ]
}

/// Builds a registry model; `params` override the descriptor defaults.
pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<QbSystem> {
    let desc = registry()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| QbError::InvalidArgument(format!("unknown model {name:?}")))?;
    if let Some(bad) = params.keys().find(|k| !desc.parameters.contains_key(*k)) {
        return Err(QbError::InvalidArgument(format!("model {name:?} has no parameter {bad:?}")));
    }
    let get = |k: &str| params.get(k).copied().unwrap_or(desc.parameters[k]);
    match name {
        "two-state" => Ok(two_state()),
        "three-state-qb" => Ok(three_state_qb()),
        "shear-flow-9" => shear_flow_9(get("Re")),
        "scalar" => Ok(scalar_family(get("a"), get("h"), get("b"), get("d"))),
        _ => unreachable!("registry and constructors agree"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique() {
        let reg = registry();
        let mut names: Vec<_> = reg.iter().map(|d| d.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), reg.len());
    }

    #[test]
    fn scalar_input_dimension() {
        assert_eq!(scalar_family(-1.0, 1.0, 0.0, 0.0).m(), 0);
        assert_eq!(scalar_family(-1.0, 1.0, 0.0, 1.0).m(), 1);
        assert_eq!(scalar_family(-1.0, 1.0, 1.0, 0.0).m(), 1);
    }

    #[test]
    fn unknown_names_and_parameters() {
        assert!(by_name("lorenz", &BTreeMap::new()).is_err());
        let p = BTreeMap::from([("Re".to_string(), 100.0)]);
        assert!(by_name("two-state", &p).is_err());
    }
}
