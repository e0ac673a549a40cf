//! Constrained latent class models and the two-layer pyramid.
//!
//! Binary attribute patterns `α ∈ {0,1}^K` are indexed in lexicographic order
//! with the leftmost coordinate most significant: index 0 is `(0,…,0)` and
//! index `2^K − 1` is `(1,…,1)`. Category codes exposed through the public API
//! are 1-based; category `d_j` is the baseline of the multinomial-logit link.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::matrix::BinaryMatrix;

/// Largest K for which the 2^K attribute patterns are materialized.
pub const ENUMERATION_CAP: usize = 20;

/// Tolerance used when validating probability vectors and tied columns.
pub const PROB_TOL: f64 = 1e-12;

/// Binary pattern `α` at `index` in the canonical order.
pub fn pattern_bits(index: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| ((index >> (k - 1 - i)) & 1) as u8).collect()
}

/// Inverse of [`pattern_bits`].
pub fn pattern_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b as usize & 1))
}

/// All 2^K patterns in canonical order.
pub fn all_patterns(k: usize) -> Result<Vec<Vec<u8>>> {
    check_cap(k, ENUMERATION_CAP)?;
    Ok((0..1usize << k).map(|h| pattern_bits(h, k)).collect())
}

pub(crate) fn check_cap(k: usize, cap: usize) -> Result<()> {
    if k > cap {
        Err(Error::Capacity { k, cap })
    } else {
        Ok(())
    }
}

/// n×p table of category codes with per-column cardinalities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    cardinalities: Vec<usize>,
    values: Vec<u16>,
}

impl Dataset {
    /// `values` is row-major with 1-based codes.
    pub fn new(n: usize, cardinalities: Vec<usize>, values: Vec<u16>) -> Result<Self> {
        let p = cardinalities.len();
        if n == 0 || p == 0 {
            return input("dataset needs n >= 1 and p >= 1");
        }
        if let Some(j) = cardinalities.iter().position(|&d| d < 2) {
            return input(format!("variable {} has cardinality < 2", j + 1));
        }
        if values.len() != n * p {
            return input(format!("expected {} cells, got {}", n * p, values.len()));
        }
        for (idx, &v) in values.iter().enumerate() {
            let (i, j) = (idx / p, idx % p);
            if v == 0 || v as usize > cardinalities[j] {
                return Err(Error::Data {
                    row: i + 1,
                    col: j + 1,
                    message: format!("category {v} outside 1..={}", cardinalities[j]),
                });
            }
        }
        Ok(Self {
            n,
            p,
            cardinalities,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// 1-based category of subject `i` on variable `j`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.values[i * self.p + j]
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    /// Common cardinality, if every variable has the same one.
    pub fn constant_cardinality(&self) -> Option<usize> {
        let d = self.cardinalities[0];
        self.cardinalities.iter().all(|&x| x == d).then_some(d)
    }
}

/// Binary parent-child adjacency between two consecutive layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphicalMatrix(pub BinaryMatrix);

impl GraphicalMatrix {
    pub fn new(m: BinaryMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &BinaryMatrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn edge(&self, child: usize, parent: usize) -> bool {
        self.0.get(child, parent)
    }

    /// Latent columns with no children; such latents are vacuous.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.cols())
            .filter(|&k| (0..self.rows()).all(|j| !self.edge(j, k)))
            .collect()
    }

    /// Human-readable warnings (currently: vacuous latent columns).
    pub fn warnings(&self) -> Vec<String> {
        self.empty_columns()
            .into_iter()
            .map(|k| format!("latent column {} has no children", k + 1))
            .collect()
    }
}

/// Binary p×k constraint matrix; a 0 ties the class to the variable's baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintMatrix {
    matrix: BinaryMatrix,
    column_labels: Option<Vec<Vec<u8>>>,
}

impl ConstraintMatrix {
    pub fn new(matrix: BinaryMatrix) -> Self {
        Self {
            matrix,
            column_labels: None,
        }
    }

    /// Attaches `{0,1}^K` labels; requires exactly 2^K distinct labels.
    pub fn with_labels(matrix: BinaryMatrix, labels: Vec<Vec<u8>>) -> Result<Self> {
        let k = labels.first().map_or(0, |l| l.len());
        if labels.len() != matrix.cols() || labels.len() != 1usize << k {
            return input("column labels must be the 2^K binary patterns");
        }
        let mut seen = std::collections::HashSet::new();
        if !labels.iter().all(|l| l.len() == k && seen.insert(l.clone())) {
            return input("column labels must be distinct binary vectors of equal length");
        }
        Ok(Self {
            matrix,
            column_labels: Some(labels),
        })
    }

    pub fn matrix(&self) -> &BinaryMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> Option<&[Vec<u8>]> {
        self.column_labels.as_deref()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn get(&self, j: usize, h: usize) -> bool {
        self.matrix.get(j, h)
    }

    /// Column position of a labelled pattern.
    pub fn column_of(&self, label: &[u8]) -> Option<usize> {
        self.column_labels
            .as_ref()?
            .iter()
            .position(|l| l.as_slice() == label)
    }
}

/// Builds `S_{j,α} = 1 − 1{α ⪰ G_{j,·}}` over all α in canonical order.
pub fn constraint_matrix_from_graph(graph: &GraphicalMatrix) -> Result<ConstraintMatrix> {
    constraint_matrix_from_graph_capped(graph, ENUMERATION_CAP)
}

pub fn constraint_matrix_from_graph_capped(
    graph: &GraphicalMatrix,
    cap: usize,
) -> Result<ConstraintMatrix> {
    let k = graph.cols();
    check_cap(k, cap)?;
    let patterns: Vec<Vec<u8>> = (0..1usize << k).map(|h| pattern_bits(h, k)).collect();
    let mut s = BinaryMatrix::zeros(graph.rows(), patterns.len());
    for j in 0..graph.rows() {
        let row = graph.matrix().row(j);
        for (h, alpha) in patterns.iter().enumerate() {
            let dominates = row.iter().zip(alpha).all(|(&g, &a)| a >= g);
            s.set(j, h, !dominates);
        }
    }
    ConstraintMatrix::with_labels(s, patterns)
}

/// Parameters of a constrained latent class model.
#[derive(Debug, Clone, PartialEq)]
pub struct LcmParams {
    nu: Vec<f64>,
    lambdas: Vec<DMatrix<f64>>,
    constraint: ConstraintMatrix,
}

impl LcmParams {
    /// Validates normalization plus the equality and inequality constraints
    /// implied by `constraint`.
    pub fn new(
        nu: Vec<f64>,
        lambdas: Vec<DMatrix<f64>>,
        constraint: ConstraintMatrix,
    ) -> Result<Self> {
        let k = nu.len();
        if k == 0 {
            return input("need at least one latent class");
        }
        if nu.iter().any(|&v| !(v > 0.0)) {
            return input("mixture proportions must be positive");
        }
        if (nu.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
            return input("mixture proportions must sum to 1");
        }
        if constraint.cols() != k || constraint.rows() != lambdas.len() {
            return input(format!(
                "constraint matrix is {}x{}, expected {}x{k}",
                constraint.rows(),
                constraint.cols(),
                lambdas.len()
            ));
        }
        for (j, lam) in lambdas.iter().enumerate() {
            if lam.ncols() != k || lam.nrows() < 2 {
                return input(format!("Λ^({}) must be d_j x {k} with d_j >= 2", j + 1));
            }
            for h in 0..k {
                let col = lam.column(h);
                if col.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return input(format!("Λ^({}) column {} leaves [0,1]", j + 1, h + 1));
                }
                if (col.sum() - 1.0).abs() > PROB_TOL {
                    return input(format!("Λ^({}) column {} does not sum to 1", j + 1, h + 1));
                }
            }
        }
        let params = Self {
            nu,
            lambdas,
            constraint,
        };
        if let Some(msg) = params.constraint_violations().into_iter().next() {
            return input(msg);
        }
        Ok(params)
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn lambdas(&self) -> &[DMatrix<f64>] {
        &self.lambdas
    }

    pub fn constraint(&self) -> &ConstraintMatrix {
        &self.constraint
    }

    pub fn k(&self) -> usize {
        self.nu.len()
    }

    pub fn p(&self) -> usize {
        self.lambdas.len()
    }

    /// Descriptions of every violated equality / inequality constraint.
    pub fn constraint_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.constraint;
        for (j, lam) in self.lambdas.iter().enumerate() {
            let baseline = (0..self.k()).find(|&h| !s.get(j, h));
            let Some(b) = baseline else { continue };
            for h in 0..self.k() {
                let diff = lam.column(h) - lam.column(b);
                if !s.get(j, h) {
                    if diff.amax() > PROB_TOL {
                        out.push(format!(
                            "variable {}: tied classes {} and {} differ",
                            j + 1,
                            b + 1,
                            h + 1
                        ));
                    }
                } else if diff.iter().any(|v| v.abs() <= PROB_TOL) {
                    out.push(format!(
                        "variable {}: free class {} matches the baseline in some category",
                        j + 1,
                        h + 1
                    ));
                }
            }
        }
        out
    }
}

/// `P(y = pattern) = Σ_h ν_h Π_j λ^(j)_{pattern_j, h}` with 1-based pattern.
pub fn lcm_cell_probability(params: &LcmParams, pattern: &[u16]) -> Result<f64> {
    if pattern.len() != params.p() {
        return input(format!(
            "pattern has {} entries, expected {}",
            pattern.len(),
            params.p()
        ));
    }
    for (j, (&c, lam)) in pattern.iter().zip(params.lambdas()).enumerate() {
        if c == 0 || c as usize > lam.nrows() {
            return input(format!(
                "category {c} for variable {} outside 1..={}",
                j + 1,
                lam.nrows()
            ));
        }
    }
    Ok((0..params.k())
        .map(|h| {
            params.nu[h]
                * pattern
                    .iter()
                    .zip(params.lambdas())
                    .map(|(&c, lam)| lam[(c as usize - 1, h)])
                    .product::<f64>()
        })
        .sum())
}

/// Parameters of the two-layer model: multinomial-logit bottom layer with
/// graph-masked main effects, and a B-class latent class model for α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerParams {
    pub graph: GraphicalMatrix,
    pub cardinalities: Vec<usize>,
    /// `beta0[j][c]` for non-baseline categories `c < d_j − 1` (0-based).
    pub beta0: Vec<Vec<f64>>,
    /// `beta[j][c][k]`, zero wherever `g_{j,k} = 0`.
    pub beta: Vec<Vec<Vec<f64>>>,
    pub tau: Vec<f64>,
    /// `eta[k][b] = P(α_k = 1 | z = b)`.
    pub eta: Vec<Vec<f64>>,
}

impl TwoLayerParams {
    pub fn validate(&self) -> Result<()> {
        let p = self.graph.rows();
        let k1 = self.graph.cols();
        let b = self.tau.len();
        if self.cardinalities.len() != p || self.beta0.len() != p || self.beta.len() != p {
            return input("two-layer parameters: per-variable blocks must have p entries");
        }
        for j in 0..p {
            let c1 = self.cardinalities[j]
                .checked_sub(1)
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::Input(format!("variable {} needs d_j >= 2", j + 1)))?;
            if self.beta0[j].len() != c1 || self.beta[j].len() != c1 {
                return input(format!("variable {}: expected {c1} non-baseline rows", j + 1));
            }
            for (c, row) in self.beta[j].iter().enumerate() {
                if row.len() != k1 {
                    return input(format!("beta[{j}][{c}] must have K1 = {k1} entries"));
                }
                for (k, &v) in row.iter().enumerate() {
                    if !self.graph.edge(j, k) && v != 0.0 {
                        return input(format!(
                            "beta for variable {}, category {}, latent {} must be 0 without an edge",
                            j + 1,
                            c + 1,
                            k + 1
                        ));
                    }
                }
            }
        }
        if b == 0 || self.tau.iter().any(|&t| !(t >= 0.0)) {
            return input("tau must be a non-empty probability vector");
        }
        if (self.tau.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return input("tau must sum to 1");
        }
        if self.eta.len() != k1 || self.eta.iter().any(|r| r.len() != b) {
            return input(format!("eta must be {k1} x {b}"));
        }
        if self.eta.iter().flatten().any(|&e| !(0.0..=1.0).contains(&e)) {
            return input("eta entries must lie in [0,1]");
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.graph.rows()
    }

    pub fn k1(&self) -> usize {
        self.graph.cols()
    }

    pub fn b(&self) -> usize {
        self.tau.len()
    }

    /// Logits of all `d_j` categories for variable `j` (baseline last, 0).
    pub fn logits(&self, j: usize, alpha: &[u8]) -> Vec<f64> {
        let mut out: Vec<f64> = self.beta0[j]
            .iter()
            .zip(&self.beta[j])
            .map(|(&b0, row)| {
                b0 + row
                    .iter()
                    .zip(alpha)
                    .enumerate()
                    .filter(|(k, _)| self.graph.edge(j, *k))
                    .map(|(_, (&b, &a))| b * a as f64)
                    .sum::<f64>()
            })
            .collect();
        out.push(0.0);
        out
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `P(y_j = · | α)` under the two-layer model.
pub fn two_layer_conditional(params: &TwoLayerParams, j: usize, alpha: &[u8]) -> Result<Vec<f64>> {
    if j >= params.p() {
        return input(format!("variable index {j} out of range"));
    }
    if alpha.len() != params.k1() || alpha.iter().any(|&a| a > 1) {
        return input(format!("alpha must be a binary vector of length {}", params.k1()));
    }
    Ok(softmax(&params.logits(j, alpha)))
}

/// `P(α)` for every pattern in canonical order.
pub fn attribute_distribution(tau: &[f64], eta: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = eta.len();
    check_cap(k, ENUMERATION_CAP)?;
    if eta.iter().any(|r| r.len() != tau.len()) {
        return input("eta must have one column per deep class");
    }
    Ok((0..1usize << k)
        .map(|h| {
            let alpha = pattern_bits(h, k);
            tau.iter()
                .enumerate()
                .map(|(b, &t)| {
                    t * alpha
                        .iter()
                        .zip(eta)
                        .map(|(&a, row)| if a == 1 { row[b] } else { 1.0 - row[b] })
                        .product::<f64>()
                })
                .sum()
        })
        .collect())
}

/// Marginal probability of a 1-based response pattern, summing over α.
pub fn marginal_y_probability(params: &TwoLayerParams, pattern: &[u16]) -> Result<f64> {
    validate_pattern(pattern, &params.cardinalities)?;
    let k = params.k1();
    let weights = attribute_distribution(&params.tau, &params.eta)?;
    let mut total = 0.0;
    for (h, w) in weights.iter().enumerate() {
        let alpha = pattern_bits(h, k);
        let mut prod = *w;
        for (j, &c) in pattern.iter().enumerate() {
            prod *= softmax(&params.logits(j, &alpha))[c as usize - 1];
        }
        total += prod;
    }
    Ok(total)
}

fn validate_pattern(pattern: &[u16], cards: &[usize]) -> Result<()> {
    if pattern.len() != cards.len() {
        return input(format!("pattern has {} entries, expected {}", pattern.len(), cards.len()));
    }
    for (j, (&c, &d)) in pattern.iter().zip(cards).enumerate() {
        if c == 0 || c as usize > d {
            return input(format!("category {c} for variable {} outside 1..={d}", j + 1));
        }
    }
    Ok(())
}

/// The 2^K1-class constrained LCM obtained by marginalizing the deep layer.
pub fn induced_lcm(params: &TwoLayerParams) -> Result<LcmParams> {
    let k = params.k1();
    let nu = attribute_distribution(&params.tau, &params.eta)?;
    let s = constraint_matrix_from_graph(&params.graph)?;
    let lambdas = (0..params.p())
        .map(|j| {
            let d = params.cardinalities[j];
            let mut lam = DMatrix::zeros(d, 1 << k);
            for h in 0..1usize << k {
                let probs = softmax(&params.logits(j, &pattern_bits(h, k)));
                lam.set_column(h, &nalgebra::DVector::from_vec(probs));
            }
            lam
        })
        .collect();
    LcmParams::new(nu, lambdas, s)
}

/// Every 1-based response pattern for the given cardinalities, first
/// variable most significant.
pub fn all_response_patterns(cards: &[usize]) -> Vec<Vec<u16>> {
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut pat = vec![0u16; cards.len()];
            for j in (0..cards.len()).rev() {
                pat[j] = (idx % cards[j]) as u16 + 1;
                idx /= cards[j];
            }
            pat
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three_attribute_graph() -> GraphicalMatrix {
        GraphicalMatrix::new(
            BinaryMatrix::from_row_strings(&["100", "010", "001", "110", "101", "011"]).unwrap(),
        )
    }

    #[test]
    fn pattern_order_is_lexicographic() {
        assert_eq!(pattern_bits(0, 3), vec![0, 0, 0]);
        assert_eq!(pattern_bits(4, 3), vec![1, 0, 0]);
        assert_eq!(pattern_bits(1, 3), vec![0, 0, 1]);
        for h in 0..16 {
            assert_eq!(pattern_index(&pattern_bits(h, 4)), h);
        }
    }

    #[test]
    fn single_class_independence() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["1", "1"]).unwrap());
        let lam = DMatrix::from_column_slice(2, 1, &[0.5, 0.5]);
        let params = LcmParams::new(vec![1.0], vec![lam.clone(), lam], s).unwrap();
        for pat in all_response_patterns(&[2, 2]) {
            assert_abs_diff_eq!(lcm_cell_probability(&params, &pat).unwrap(), 0.25);
        }
    }

    #[test]
    fn two_class_hand_evaluation() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["11"]).unwrap());
        let lam = DMatrix::from_column_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        let params = LcmParams::new(vec![0.3, 0.7], vec![lam], s).unwrap();
        assert_abs_diff_eq!(lcm_cell_probability(&params, &[1]).unwrap(), 0.41, epsilon = 1e-15);
        assert!(lcm_cell_probability(&params, &[3]).is_err());
        assert!(lcm_cell_probability(&params, &[0]).is_err());
    }

    #[test]
    fn rejects_broken_equality_constraint() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["00"]).unwrap());
        let lam = DMatrix::from_column_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        assert!(LcmParams::new(vec![0.5, 0.5], vec![lam], s).is_err());
    }

    #[test]
    fn rejects_free_column_touching_baseline() {
        let s = ConstraintMatrix::new(BinaryMatrix::from_row_strings(&["01"]).unwrap());
        // first category equal in both columns
        let lam = DMatrix::from_column_slice(3, 2, &[0.2, 0.3, 0.5, 0.2, 0.5, 0.3]);
        assert!(LcmParams::new(vec![0.5, 0.5], vec![lam], s).is_err());
    }

    #[test]
    fn three_attribute_constraint_matrix() {
        let s = constraint_matrix_from_graph(&three_attribute_graph()).unwrap();
        // rows as printed, columns labelled (000) (100) (010) (001) (110) (101) (011) (111)
        let labels = ["000", "100", "010", "001", "110", "101", "011", "111"];
        let printed = BinaryMatrix::from_row_strings(&[
            "10110010", "11010100", "11101000", "11110110", "11111010", "11111100",
        ])
        .unwrap();
        for (pos, label) in labels.iter().enumerate() {
            let bits: Vec<u8> = label.bytes().map(|b| b - b'0').collect();
            let h = s.column_of(&bits).unwrap();
            let expected = printed.column(pos);
            assert_eq!(s.matrix().column(h), expected, "column {label}");
        }
    }

    #[test]
    fn empty_graph_row_gives_zero_constraint_row() {
        let g = GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["000", "101"]).unwrap());
        let s = constraint_matrix_from_graph(&g).unwrap();
        assert!(s.matrix().row(0).iter().all(|&v| v == 0));
        assert_eq!(g.empty_columns(), vec![1]);
    }

    #[test]
    fn identity_graph_constraint_rows() {
        let g = GraphicalMatrix::new(BinaryMatrix::identity(3));
        let s = constraint_matrix_from_graph(&g).unwrap();
        for j in 0..3 {
            for h in 0..8 {
                let alpha = pattern_bits(h, 3);
                assert_eq!(s.get(j, h), alpha[j] == 0);
            }
        }
    }

    #[test]
    fn capacity_error_above_cap() {
        let g = GraphicalMatrix::new(BinaryMatrix::zeros(2, 5));
        assert!(matches!(
            constraint_matrix_from_graph_capped(&g, 4),
            Err(Error::Capacity { k: 5, cap: 4 })
        ));
    }

    fn simple_two_layer() -> TwoLayerParams {
        TwoLayerParams {
            graph: GraphicalMatrix::new(BinaryMatrix::from_row_strings(&["10", "11"]).unwrap()),
            cardinalities: vec![4, 2],
            beta0: vec![vec![-3.0, -2.0, -1.0], vec![0.5]],
            beta: vec![
                vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![-1.0, 0.0]],
                vec![vec![0.7, -1.3]],
            ],
            tau: vec![0.4, 0.6],
            eta: vec![vec![0.2, 0.9], vec![0.7, 0.1]],
        }
    }

    #[test]
    fn conditional_with_intercepts_only() {
        let p = simple_two_layer();
        let probs = two_layer_conditional(&p, 0, &[0, 1]).unwrap();
        let z = (-3f64).exp() + (-2f64).exp() + (-1f64).exp() + 1.0;
        let expected = [(-3f64).exp() / z, (-2f64).exp() / z, (-1f64).exp() / z, 1.0 / z];
        for (a, b) in probs.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(probs[0], 0.0321, epsilon = 5e-5);
        assert_abs_diff_eq!(probs[3], 0.6439, epsilon = 5e-5);
    }

    #[test]
    fn zero_logits_give_uniform() {
        let mut p = simple_two_layer();
        p.beta0 = vec![vec![0.0; 3], vec![0.0]];
        p.beta = vec![vec![vec![0.0; 2]; 3], vec![vec![0.0; 2]]];
        let probs = two_layer_conditional(&p, 0, &[1, 1]).unwrap();
        assert!(probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let l = [0.3, -1.2, 2.0, 0.0];
        let shifted: Vec<f64> = l.iter().map(|v| v + 7.5).collect();
        for (a, b) in softmax(&l).iter().zip(softmax(&shifted)) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn attribute_distribution_cases() {
        let uniform = attribute_distribution(&[1.0], &vec![vec![0.5]; 3]).unwrap();
        assert!(uniform.iter().all(|&v| (v - 0.125).abs() < 1e-15));
        let mix = attribute_distribution(&[0.5, 0.5], &[vec![0.2, 0.8]]).unwrap();
        assert_abs_diff_eq!(mix[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn marginal_matches_induced_lcm() {
        let p = simple_two_layer();
        let lcm = induced_lcm(&p).unwrap();
        let mut total = 0.0;
        for pat in all_response_patterns(&p.cardinalities) {
            let a = marginal_y_probability(&p, &pat).unwrap();
            let b = lcm_cell_probability(&lcm, &pat).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
            total += a;
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_graph_marginal_is_product_of_intercepts() {
        let mut p = simple_two_layer();
        p.graph = GraphicalMatrix::new(BinaryMatrix::zeros(2, 2));
        p.beta = vec![vec![vec![0.0; 2]; 3], vec![vec![0.0; 2]]];
        for pat in all_response_patterns(&p.cardinalities) {
            let direct: f64 = pat
                .iter()
                .enumerate()
                .map(|(j, &c)| softmax(&p.logits(j, &[0, 0]))[c as usize - 1])
                .product();
            assert_abs_diff_eq!(marginal_y_probability(&p, &pat).unwrap(), direct, epsilon = 1e-15);
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(1, vec![2, 3], vec![1, 3]).is_ok());
        let err = Dataset::new(2, vec![2, 3], vec![1, 3, 2, 4]).unwrap_err();
        assert!(matches!(err, Error::Data { row: 2, col: 2, .. }));
        assert!(Dataset::new(0, vec![2], vec![]).is_err());
    }
}
