//! Versioned JSON configuration.

use std::fmt;
use std::path::Path;

use birkhoff_core::spectrum::SolverOptions;
use birkhoff_core::thermo::SInfOptions;
use birkhoff_core::{MapFamily, MapSystem, Potential, Symbol};
use serde::Deserialize;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: String,
    pub map: MapFamily,
    #[serde(default)]
    pub potentials: Vec<Potential>,
    pub gamma: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Vec<Vec<f64>>,
    pub k: Option<usize>,
    pub n_max: Option<usize>,
    pub base_symbol: Option<Symbol>,
    /// Block orders for `suspension-check`, excursion ratios `M` for `delta-inf`.
    pub m: Option<Vec<usize>>,
    /// Levels `q` for `delta-inf`.
    pub q: Option<Vec<Symbol>>,
    pub certificate_k: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub s_inf: SInfOptions,
}

/// A config that could not be read or does not match the schema.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            SchemaError(format!("{path}: {}", e.into_inner()))
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(SchemaError(format!(
                "schema: unsupported version {:?}, expected {SCHEMA_VERSION:?}",
                cfg.schema
            )));
        }
        MapSystem::new(cfg.map.clone()).map_err(|e| SchemaError(format!("map: {e}")))?;
        if let Some(g) = &cfg.gamma {
            check_vector("gamma", g)?;
        }
        for (i, g) in cfg.grid.iter().enumerate() {
            check_vector(&format!("grid[{i}]"), g)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn system(&self) -> MapSystem {
        MapSystem::new(self.map.clone()).expect("validated on load")
    }

    /// Target vectors: the command-line list if given, else `gamma`, else `grid`.
    pub fn targets(&self, cli: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SchemaError> {
        let out = if !cli.is_empty() {
            cli.to_vec()
        } else if let Some(g) = &self.gamma {
            vec![g.clone()]
        } else {
            self.grid.clone()
        };
        if out.is_empty() {
            return Err(SchemaError(
                "gamma: no targets given (config gamma, grid or --gamma)".into(),
            ));
        }
        Ok(out)
    }
}

fn check_vector(field: &str, v: &[f64]) -> Result<(), SchemaError> {
    if v.is_empty() {
        return Err(SchemaError(format!("{field}: empty vector")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SchemaError(format!("{field}: entries must be finite")));
    }
    Ok(())
}

/// Parses `0.7,0.3` into a vector.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = Config::parse(r#"{"schema":"1","map":{"family":"base_n","n":3}}"#).unwrap();
        assert_eq!(c.map, MapFamily::BaseN { n: 3 });
        assert!(c.potentials.is_empty());
    }

    #[test]
    fn error_names_the_field() {
        let e = Config::parse(r#"{"schema":"1","map":{"family":"f_lambda","lambda":"x"}}"#)
            .unwrap_err();
        assert!(e.0.starts_with("map"), "{e}");
        let e =
            Config::parse(r#"{"schema":"1","map":{"family":"gauss"},"solver":{"mass_tol":[]}}"#)
                .unwrap_err();
        assert!(e.0.starts_with("solver.mass_tol"), "{e}");
        let e = Config::parse(r#"{"schema":"2","map":{"family":"gauss"}}"#).unwrap_err();
        assert!(e.0.starts_with("schema"), "{e}");
        let e = Config::parse(r#"{"schema":"1","map":{"family":"gauss"},"kk":3}"#).unwrap_err();
        assert!(e.0.contains("kk"), "{e}");
    }

    #[test]
    fn invalid_lambda_is_a_schema_error() {
        let e = Config::parse(r#"{"schema":"1","map":{"family":"f_lambda","lambda":1.5}}"#)
            .unwrap_err();
        assert!(e.0.starts_with("map:"), "{e}");
    }

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vector("0.7, 0.3").unwrap(), vec![0.7, 0.3]);
        assert!(parse_vector("0.7,x").is_err());
    }
}
