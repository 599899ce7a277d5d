use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use qbstab::{zoo, QbSystem, SystemDocument};

use crate::failure::Failure;

/// Where the system comes from.
#[derive(Args, Clone, Debug)]
pub struct SystemArgs {
    /// Built-in model: two-state, three-state-qb, shear-flow-9 or scalar.
    #[arg(long, conflicts_with = "system", required_unless_present = "system")]
    pub zoo: Option<String>,

    /// System JSON file.
    #[arg(long)]
    pub system: Option<PathBuf>,

    /// Model parameter as NAME=VALUE, e.g. Re=130. Repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|_| format!("{v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

pub struct Source {
    pub name: String,
    pub system: QbSystem,
}

impl SystemArgs {
    pub fn load(&self) -> Result<Source, Failure> {
        let params: BTreeMap<String, f64> = self.params.iter().cloned().collect();
        if let Some(name) = &self.zoo {
            let system = zoo::by_name(name, &params)?;
            let label = if params.is_empty() {
                name.clone()
            } else {
                let p: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{name}[{}]", p.join(","))
            };
            return Ok(Source { name: label, system });
        }
        let path = self.system.as_ref().ok_or_else(|| Failure::Input("pass --zoo or --system".into()))?;
        let doc = SystemDocument::load(path)?;
        let loaded = match params.len() {
            0 => doc.to_system()?,
            1 => {
                let (k, v) = params.iter().next().expect("one parameter");
                doc.to_system_at(k, *v)?
            }
            _ => return Err(Failure::Input("system files take at most one --param".into())),
        };
        if loaded.max_symmetry_defect > 0.0 {
            eprintln!(
                "note: H was symmetrized on load (largest defect {:.3e})",
                loaded.max_symmetry_defect
            );
        }
        let name = doc
            .name
            .clone()
            .unwrap_or_else(|| path.file_stem().map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned()));
        Ok(Source {
            name,
            system: loaded.system,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse() {
        assert_eq!(parse_param("Re=130"), Ok(("Re".to_string(), 130.0)));
        assert!(parse_param("Re").is_err());
        assert!(parse_param("Re=abc").is_err());
    }
}
