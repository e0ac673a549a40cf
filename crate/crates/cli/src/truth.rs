//! Truth file: the generating parameters of a simulation, as TOML.

use serde::{Deserialize, Serialize};

use pyramid_core::lcm::{GraphicalMatrix, TwoLayerParams};
use pyramid_core::simgen::{paper_sim_truth, LatentLayer, LinkParams, LinkRegistry};
use pyramid_core::BinaryMatrix;

use crate::error::{config_err, CliResult};

/// A binary layer above the first one, for deeper pyramids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Rows of the layer's graph to its parents, as 0/1 strings.
    pub graph: Vec<String>,
    /// Registered link name.
    pub link: String,
    #[serde(flatten)]
    pub params: LinkParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub source: String,
    /// Generating settings filled in by assumption rather than taken from a source.
    #[serde(default)]
    pub assumed_settings: Vec<String>,
    pub graph: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub beta0: Vec<Vec<f64>>,
    pub beta: Vec<Vec<Vec<f64>>>,
    pub tau: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<LayerSpec>,
}

fn rows_of(m: &BinaryMatrix) -> Vec<String> {
    (0..m.rows())
        .map(|r| m.row(r).iter().map(|v| if *v == 1 { '1' } else { '0' }).collect())
        .collect()
}

fn matrix_of(rows: &[String]) -> CliResult<BinaryMatrix> {
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    Ok(BinaryMatrix::from_row_strings(&refs)?)
}

impl TruthFile {
    pub fn paper() -> Self {
        let mut t = Self::from_params(&paper_sim_truth(), "paper_sim_truth");
        t.assumed_settings = vec![
            "B = 2 deep classes".into(),
            "tau = [0.5, 0.5]".into(),
            "eta[k] = [0.8, 0.2] for every k".into(),
        ];
        t
    }

    pub fn from_params(p: &TwoLayerParams, source: &str) -> Self {
        Self {
            source: source.into(),
            assumed_settings: Vec::new(),
            graph: rows_of(p.graph.matrix()),
            cardinalities: p.cardinalities.clone(),
            beta0: p.beta0.clone(),
            beta: p.beta.clone(),
            tau: p.tau.clone(),
            eta: p.eta.clone(),
            layers: Vec::new(),
        }
    }

    /// Two-layer parameters; `eta` is checked against the first graph only
    /// when there are no deeper layers.
    pub fn params(&self) -> CliResult<TwoLayerParams> {
        let p = TwoLayerParams {
            graph: GraphicalMatrix::new(matrix_of(&self.graph)?),
            cardinalities: self.cardinalities.clone(),
            beta0: self.beta0.clone(),
            beta: self.beta.clone(),
            tau: self.tau.clone(),
            eta: self.eta.clone(),
        };
        if self.layers.is_empty() {
            p.validate()?;
        }
        Ok(p)
    }

    pub fn latent_layers(&self) -> CliResult<Vec<LatentLayer>> {
        let registry = LinkRegistry::default();
        self.layers
            .iter()
            .map(|l| {
                Ok(LatentLayer {
                    graph: GraphicalMatrix::new(matrix_of(&l.graph)?),
                    link: registry.build(&l.link, &l.params)?,
                })
            })
            .collect()
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).or_else(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).or_else(|e| config_err(format!("cannot serialize truth: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_truth_round_trips() {
        let t = TruthFile::paper();
        let back: TruthFile = toml::from_str(&t.to_toml().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.params().unwrap(), paper_sim_truth());
        assert_eq!(back.assumed_settings.len(), 3);
    }

    #[test]
    fn deeper_layers_parse_through_the_registry() {
        let mut t = TruthFile::paper();
        t.eta = vec![vec![0.9, 0.1], vec![0.3, 0.6]];
        t.layers = vec![LayerSpec {
            graph: vec!["10".into(), "01".into(), "11".into(), "10".into()],
            link: "boolean-or".into(),
            params: LinkParams {
                theta0: Some(vec![0.1; 4]),
                theta1: Some(vec![0.9; 4]),
                ..Default::default()
            },
        }];
        let back: TruthFile = toml::from_str(&t.to_toml().unwrap()).unwrap();
        assert_eq!(back.latent_layers().unwrap().len(), 1);
        t.layers[0].link = "nope".into();
        assert!(t.latent_layers().is_err());
    }
}
