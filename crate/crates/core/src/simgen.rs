//! Forward simulation from two-layer and deeper pyramids.
//!
//! Subject `i` draws from its own stream `(seed, SUBJECT_TAG, i)`: first the
//! deep class, then each binary layer from the top down, then the observed
//! responses. Results do not depend on thread count.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::lcm::{softmax, Dataset, GraphicalMatrix, TwoLayerParams};
use crate::matrix::BinaryMatrix;
use crate::rngs::substream;

const SUBJECT_TAG: u64 = 0x5155;

/// Simulated data and its latent structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub dataset: Dataset,
    /// `n × K_m` binary latents per layer, bottom layer first.
    pub latents_alpha: Vec<BinaryMatrix>,
    /// Deep class per subject, 1-based.
    pub latents_z: Vec<usize>,
    /// Generating parameters when the model is a two-layer pyramid.
    pub truth: Option<TwoLayerParams>,
}

/// Conditional law of a binary layer given the layer above.
pub trait LayerLink: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &'static str;
    /// Checks the link's parameters against `graph` (children × parents).
    fn validate(&self, graph: &GraphicalMatrix) -> Result<()>;
    /// `P(child k = 1 | parents)`.
    fn prob_one(&self, graph: &GraphicalMatrix, k: usize, parents: &[u8]) -> f64;
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic main-effect link: `f(b0_k + Σ_{k': g=1} w_{k,k'} α_{k'})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainEffectLink {
    pub intercepts: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl LayerLink for MainEffectLink {
    fn name(&self) -> &'static str {
        "main-effect"
    }

    fn validate(&self, graph: &GraphicalMatrix) -> Result<()> {
        if self.intercepts.len() != graph.rows()
            || self.weights.len() != graph.rows()
            || self.weights.iter().any(|w| w.len() != graph.cols())
        {
            return input(format!(
                "main-effect link needs {} intercepts and a {}x{} weight matrix",
                graph.rows(),
                graph.rows(),
                graph.cols()
            ));
        }
        Ok(())
    }

    fn prob_one(&self, graph: &GraphicalMatrix, k: usize, parents: &[u8]) -> f64 {
        let eta = self.intercepts[k]
            + (0..graph.cols())
                .filter(|&l| graph.edge(k, l) && parents[l] == 1)
                .map(|l| self.weights[k][l])
                .sum::<f64>();
        logistic(eta)
    }
}

/// Noisy Boolean OR: `θ1_k` if any parent with an edge is active, else `θ0_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanOrLink {
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
}

impl LayerLink for BooleanOrLink {
    fn name(&self) -> &'static str {
        "boolean-or"
    }

    fn validate(&self, graph: &GraphicalMatrix) -> Result<()> {
        if self.theta0.len() != graph.rows() || self.theta1.len() != graph.rows() {
            return input(format!("boolean-or link needs {} thetas per state", graph.rows()));
        }
        if self
            .theta0
            .iter()
            .chain(&self.theta1)
            .any(|t| !(0.0..=1.0).contains(t))
        {
            return input("boolean-or probabilities must lie in [0,1]");
        }
        Ok(())
    }

    fn prob_one(&self, graph: &GraphicalMatrix, k: usize, parents: &[u8]) -> f64 {
        let any = (0..graph.cols()).any(|l| graph.edge(k, l) && parents[l] == 1);
        if any {
            self.theta1[k]
        } else {
            self.theta0[k]
        }
    }
}

/// Parameters accepted by registered link constructors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub intercepts: Option<Vec<f64>>,
    pub weights: Option<Vec<Vec<f64>>>,
    pub theta0: Option<Vec<f64>>,
    pub theta1: Option<Vec<f64>>,
}

type LinkCtor = fn(&LinkParams) -> Result<Box<dyn LayerLink>>;

/// Name-keyed registry of layer links.
pub struct LinkRegistry {
    ctors: BTreeMap<&'static str, LinkCtor>,
}

impl Default for LinkRegistry {
    fn default() -> Self {
        let mut ctors: BTreeMap<&'static str, LinkCtor> = BTreeMap::new();
        ctors.insert("main-effect", |p| {
            match (&p.intercepts, &p.weights) {
                (Some(i), Some(w)) => Ok(Box::new(MainEffectLink {
                    intercepts: i.clone(),
                    weights: w.clone(),
                })),
                _ => input("main-effect link needs intercepts and weights"),
            }
        });
        ctors.insert("boolean-or", |p| match (&p.theta0, &p.theta1) {
            (Some(t0), Some(t1)) => Ok(Box::new(BooleanOrLink {
                theta0: t0.clone(),
                theta1: t1.clone(),
            })),
            _ => input("boolean-or link needs theta0 and theta1"),
        });
        Self { ctors }
    }
}

impl LinkRegistry {
    pub fn register(&mut self, name: &'static str, ctor: LinkCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn build(&self, name: &str, params: &LinkParams) -> Result<Box<dyn LayerLink>> {
        let ctor = self.ctors.get(name).ok_or_else(|| {
            crate::Error::Usage(format!(
                "unknown layer link '{name}'; available: {}",
                self.names().join(", ")
            ))
        })?;
        ctor(params)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }
}

/// A binary latent layer `α^(m)` conditioned on the layer above it.
#[derive(Debug)]
pub struct LatentLayer {
    /// `K_m × K_{m+1}` graph from this layer's variables to their parents.
    pub graph: GraphicalMatrix,
    pub link: Box<dyn LayerLink>,
}

/// Index of the category drawn by inverse CDF.
fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    probs.len() - 1
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u8 {
    (rng.random::<f64>() < p) as u8
}

struct Subject {
    z: usize,
    alphas: Vec<Vec<u8>>,
    y: Vec<u16>,
}

/// `bottom` carries the observed layer and, through `tau`/`eta`, the law of
/// the topmost binary layer given the deep class. `layers[m]` links binary
/// layer `m + 1` (counting from the bottom) to layer `m + 2`.
fn simulate_subject(
    bottom: &TwoLayerParams,
    layers: &[LatentLayer],
    seed: u64,
    i: usize,
) -> Subject {
    let mut rng = substream(seed, &[SUBJECT_TAG, i as u64]);
    let z = draw_categorical(&bottom.tau, &mut rng);
    let top: Vec<u8> = bottom
        .eta
        .iter()
        .map(|row| bernoulli(row[z], &mut rng))
        .collect();
    let mut alphas = vec![top];
    for layer in layers.iter().rev() {
        let parents = alphas.last().expect("at least one layer");
        let child: Vec<u8> = (0..layer.graph.rows())
            .map(|k| bernoulli(layer.link.prob_one(&layer.graph, k, parents), &mut rng))
            .collect();
        alphas.push(child);
    }
    alphas.reverse();
    let y = (0..bottom.p())
        .map(|j| {
            let probs = softmax(&bottom.logits(j, &alphas[0]));
            draw_categorical(&probs, &mut rng) as u16 + 1
        })
        .collect();
    Subject { z, alphas, y }
}

fn assemble(subjects: Vec<Subject>, cardinalities: Vec<usize>) -> Result<SimOutput> {
    let n = subjects.len();
    let widths: Vec<usize> = subjects
        .first()
        .map(|s| s.alphas.iter().map(Vec::len).collect())
        .unwrap_or_default();
    let mut latents_alpha: Vec<BinaryMatrix> =
        widths.iter().map(|&w| BinaryMatrix::zeros(n, w)).collect();
    let mut values = Vec::with_capacity(n * cardinalities.len());
    let mut latents_z = Vec::with_capacity(n);
    for (i, s) in subjects.into_iter().enumerate() {
        for (m, a) in s.alphas.iter().enumerate() {
            for (k, &v) in a.iter().enumerate() {
                latents_alpha[m].set(i, k, v == 1);
            }
        }
        values.extend(s.y);
        latents_z.push(s.z + 1);
    }
    Ok(SimOutput {
        dataset: Dataset::new(n, cardinalities, values)?,
        latents_alpha,
        latents_z,
        truth: None,
    })
}

/// Ancestral sampling through a pyramid with any number of binary layers.
/// `bottom.graph` links the observed variables to the first binary layer and
/// `bottom.eta` is the law of the topmost binary layer given the deep class.
pub fn simulate_pyramid(
    bottom: &TwoLayerParams,
    layers: &[LatentLayer],
    n: usize,
    seed: u64,
) -> Result<SimOutput> {
    let mut widths = vec![bottom.k1()];
    for (m, layer) in layers.iter().enumerate() {
        if layer.graph.rows() != *widths.last().unwrap_or(&0) {
            return input(format!(
                "latent layer {} graph has {} rows, expected {}",
                m + 2,
                layer.graph.rows(),
                widths.last().unwrap_or(&0)
            ));
        }
        layer.link.validate(&layer.graph)?;
        widths.push(layer.graph.cols());
    }
    let top = *widths.last().unwrap_or(&0);
    // `validate` expects eta rows to match the bottom graph, so check the
    // remaining blocks with a top-sized eta
    let mut shape = bottom.clone();
    if !layers.is_empty() {
        shape.eta = vec![vec![0.5; bottom.tau.len()]; bottom.k1()];
        if bottom.eta.len() != top || bottom.eta.iter().any(|r| r.len() != bottom.tau.len()) {
            return input(format!("eta must be {top} x {}", bottom.tau.len()));
        }
        if bottom.eta.iter().flatten().any(|e| !(0.0..=1.0).contains(e)) {
            return input("eta entries must lie in [0,1]");
        }
    }
    shape.validate()?;
    let subjects: Vec<Subject> = (0..n)
        .into_par_iter()
        .map(|i| simulate_subject(bottom, layers, seed, i))
        .collect();
    assemble(subjects, bottom.cardinalities.clone())
}

/// Two-layer simulation: `z ~ Cat(τ)`, `α_k ~ Bern(η_{k,z})`, then
/// `y_j ~ Cat(P(y_j | α))`.
pub fn simulate_two_layer(params: &TwoLayerParams, n: usize, seed: u64) -> Result<SimOutput> {
    let mut out = simulate_pyramid(params, &[], n, seed)?;
    out.truth = Some(params.clone());
    Ok(out)
}

/// Default deep-layer truth used with the simulation-study graph.
pub const TRUTH_TAU: [f64; 2] = [0.5, 0.5];
pub const TRUTH_ETA: [f64; 2] = [0.8, 0.2];

/// The simulation-study ground truth: p = 20, d = 4, K1 = 4, B = 2.
pub fn paper_sim_truth() -> TwoLayerParams {
    let rows = [
        "1000", "0100", "0010", "0001", "1000", "0100", "0010", "0001", "1000", "0100", "0010",
        "0001", "1100", "0110", "0011", "1001", "1010", "0101", "1110", "0111",
    ];
    let graph = GraphicalMatrix::new(
        BinaryMatrix::from_row_strings(&rows).expect("literal graph is binary"),
    );
    let p = graph.rows();
    let k1 = graph.cols();
    let beta = (0..p)
        .map(|j| {
            let parents = graph.matrix().row(j).iter().filter(|&&g| g == 1).count();
            let w = if parents == 1 { 3.0 } else { 2.0 };
            let row: Vec<f64> = (0..k1)
                .map(|k| if graph.edge(j, k) { w } else { 0.0 })
                .collect();
            vec![row; 3]
        })
        .collect();
    TwoLayerParams {
        graph,
        cardinalities: vec![4; p],
        beta0: vec![vec![-3.0, -2.0, -1.0]; p],
        beta,
        tau: TRUTH_TAU.to_vec(),
        eta: vec![TRUTH_ETA.to_vec(); k1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identify::{check_multilayer, check_two_layer, IdStatus};

    fn small_params(beta_scale: f64) -> TwoLayerParams {
        let graph = GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["10", "01", "11"]).unwrap());
        TwoLayerParams {
            cardinalities: vec![3, 2, 3],
            beta0: vec![vec![-1.0, 0.5], vec![0.3], vec![0.2, -0.4]],
            beta: vec![
                vec![vec![2.0 * beta_scale, 0.0], vec![1.0 * beta_scale, 0.0]],
                vec![vec![0.0, -1.5 * beta_scale]],
                vec![vec![1.0 * beta_scale, 0.7 * beta_scale], vec![0.5 * beta_scale, 2.0 * beta_scale]],
            ],
            graph,
            tau: vec![0.3, 0.7],
            eta: vec![vec![0.9, 0.2], vec![0.4, 0.6]],
        }
    }

    #[test]
    fn truth_values() {
        let t = paper_sim_truth();
        t.validate().unwrap();
        assert_eq!((t.p(), t.k1(), t.b()), (20, 4, 2));
        assert_eq!(t.graph.matrix().row(12), &[1, 1, 0, 0]);
        assert_eq!(t.beta[0][0][0], 3.0);
        assert_eq!(t.beta[12][0][0], 2.0);
        assert_eq!(t.beta[12][2][1], 2.0);
        assert_eq!(t.beta[12][0][2], 0.0);
        assert_eq!(t.beta0[7], vec![-3.0, -2.0, -1.0]);
    }

    #[test]
    fn truth_passes_identifiability_checks() {
        let t = paper_sim_truth();
        let v = check_multilayer(std::slice::from_ref(&t.graph)).unwrap();
        assert_eq!(v.status, IdStatus::Strict);
        let v = check_two_layer(&t.graph, t.b(), Some(&t.beta));
        assert_eq!(v.status, IdStatus::Strict);
    }

    #[test]
    fn deterministic_given_seed() {
        let t = paper_sim_truth();
        let a = simulate_two_layer(&t, 300, 42).unwrap();
        let b = simulate_two_layer(&t, 300, 42).unwrap();
        let c = simulate_two_layer(&t, 300, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.dataset, c.dataset);
        assert_eq!(a.latents_alpha[0].rows(), 300);
        assert!(a.latents_z.iter().all(|&z| z == 1 || z == 2));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let t = paper_sim_truth();
        let a = simulate_two_layer(&t, 200, 5).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_two_layer(&t, 200, 5).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn two_layer_is_pyramid_without_links() {
        let p = small_params(1.0);
        let a = simulate_two_layer(&p, 100, 9).unwrap();
        let b = simulate_pyramid(&p, &[], 100, 9).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.latents_alpha, b.latents_alpha);
        assert_eq!(a.latents_z, b.latents_z);
    }

    fn three_layer_bottom(top_width: usize) -> TwoLayerParams {
        let mut p = small_params(1.0);
        p.eta = vec![vec![0.5, 0.5]; top_width];
        p
    }

    #[test]
    fn noiseless_boolean_link_is_boolean_product() {
        let layer = LatentLayer {
            graph: GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["110", "011"]).unwrap()),
            link: Box::new(BooleanOrLink {
                theta0: vec![0.0, 0.0],
                theta1: vec![1.0, 1.0],
            }),
        };
        let out = simulate_pyramid(&three_layer_bottom(3), &[layer], 500, 4).unwrap();
        let (a1, a2) = (&out.latents_alpha[0], &out.latents_alpha[1]);
        for i in 0..500 {
            assert_eq!(a1.get(i, 0), a2.get(i, 0) || a2.get(i, 1));
            assert_eq!(a1.get(i, 1), a2.get(i, 1) || a2.get(i, 2));
        }
    }

    #[test]
    fn zero_weight_main_effect_ignores_parents() {
        let reg = LinkRegistry::default();
        let link = reg
            .build(
                "main-effect",
                &LinkParams {
                    intercepts: Some(vec![1.0, -1.0]),
                    weights: Some(vec![vec![0.0; 3]; 2]),
                    ..Default::default()
                },
            )
            .unwrap();
        let layer = LatentLayer {
            graph: GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["111", "111"]).unwrap()),
            link,
        };
        let n = 20_000;
        let out = simulate_pyramid(&three_layer_bottom(3), &[layer], n, 6).unwrap();
        let a1 = &out.latents_alpha[0];
        for (k, b0) in [(0usize, 1.0f64), (1, -1.0)] {
            let p = logistic(b0);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = (0..n).filter(|&i| a1.get(i, k)).count() as f64 / n as f64;
            assert!((freq - p).abs() < 4.0 * se, "k={k} freq={freq} p={p}");
        }
    }

    #[test]
    fn link_validation_and_registry() {
        let reg = LinkRegistry::default();
        assert_eq!(reg.names(), vec!["boolean-or", "main-effect"]);
        assert!(reg.build("softplus", &LinkParams::default()).is_err());
        assert!(reg.build("boolean-or", &LinkParams::default()).is_err());
        let bad = LatentLayer {
            graph: GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["11", "01"]).unwrap()),
            link: Box::new(BooleanOrLink {
                theta0: vec![0.0, 1.2],
                theta1: vec![1.0, 1.0],
            }),
        };
        assert!(simulate_pyramid(&three_layer_bottom(2), &[bad], 10, 0).is_err());
        let mismatch = LatentLayer {
            graph: GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["11", "01", "10"]).unwrap()),
            link: Box::new(BooleanOrLink {
                theta0: vec![0.1; 3],
                theta1: vec![0.9; 3],
            }),
        };
        assert!(simulate_pyramid(&three_layer_bottom(2), &[mismatch], 10, 0).is_err());
    }
}
