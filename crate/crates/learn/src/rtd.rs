//! Representation topology divergence.
//!
//! For weights `u` and `v` on the same `n` points the auxiliary graph has
//! vertices `A_0..A_n` and `B_0..B_n` with
//!
//! ```text
//! A_i – A_j : 0
//! A_j – B_i : u_ij for i < j, 0 for i = j, absent for i > j
//! B_i – B_j : min(u_ij, v_ij)
//! ```
//!
//! The bars of its Rips filtration in dimension `k` form the cross-barcode of
//! `(u, v)`. The loss sums bar lengths of both directions `(w, w̃)` and
//! `(w̃, w)`, where `w` comes from the input and `w̃` from the output.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use torsionscope_core::rips::{build_rips_from_distances, MaxRadius, RipsOptions};
use torsionscope_core::{reduce, Coefficients, Error, Result};

use crate::topo::distance_matrix;
use crate::train::{LossTerm, TermOutput};

/// Epochs trained on reconstruction alone before the RTD term switches on.
pub const RTD_WARMUP_EPOCHS: usize = 10;

/// Which weight realizes an edge of the auxiliary graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeight {
    Zero,
    Input { a: usize, b: usize },
    Target { a: usize, b: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtdBar {
    pub birth: f64,
    pub death: f64,
    pub birth_edge: EdgeWeight,
    pub death_edge: EdgeWeight,
}

impl RtdBar {
    pub fn length(&self) -> f64 {
        self.death - self.birth
    }
}

/// Weight matrices of both clouds and the cross-barcodes in both directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtdGraphs {
    pub hom_dim: usize,
    pub w: Vec<Vec<f64>>,
    pub w_tilde: Vec<Vec<f64>>,
    pub w_min: Vec<Vec<f64>>,
    /// Cross-barcode of `(w, w̃)`.
    pub forward: Vec<RtdBar>,
    /// Cross-barcode of `(w̃, w)`.
    pub backward: Vec<RtdBar>,
}

impl RtdGraphs {
    pub fn value(&self) -> f64 {
        self.forward.iter().chain(&self.backward).map(RtdBar::length).sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Cross edges weighted by the input.
    Forward,
    /// Cross edges weighted by the target.
    Backward,
}

struct Auxiliary {
    dist: Vec<Vec<f64>>,
    source: Vec<Vec<EdgeWeight>>,
}

fn auxiliary(w: &[Vec<f64>], w_tilde: &[Vec<f64>], direction: Direction) -> Auxiliary {
    let n = w.len();
    let mut dist = vec![vec![0.0; 2 * n]; 2 * n];
    let mut source = vec![vec![EdgeWeight::Zero; 2 * n]; 2 * n];
    let mut set = |x: usize, y: usize, d: f64, s: EdgeWeight| {
        dist[x][y] = d;
        dist[y][x] = d;
        source[x][y] = s;
        source[y][x] = s;
    };
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i.min(j), i.max(j));
            // cross edge A_j – B_i
            if i > j {
                set(j, n + i, f64::INFINITY, EdgeWeight::Zero);
            } else if i < j {
                let (d, s) = match direction {
                    Direction::Forward => (w[i][j], EdgeWeight::Input { a, b }),
                    Direction::Backward => (w_tilde[i][j], EdgeWeight::Target { a, b }),
                };
                set(j, n + i, d, s);
            }
            if i < j {
                let (d, s) = if w_tilde[i][j] < w[i][j] {
                    (w_tilde[i][j], EdgeWeight::Target { a, b })
                } else {
                    (w[i][j], EdgeWeight::Input { a, b })
                };
                set(n + i, n + j, d, s);
            }
        }
    }
    Auxiliary { dist, source }
}

/// The edge of `vertices` carrying the largest weight; ties go to the first
/// edge in lexicographic order.
fn critical_edge(aux: &Auxiliary, vertices: &[usize]) -> EdgeWeight {
    let mut best = (f64::NEG_INFINITY, EdgeWeight::Zero);
    for (k, &x) in vertices.iter().enumerate() {
        for &y in &vertices[k + 1..] {
            if aux.dist[x][y] > best.0 {
                best = (aux.dist[x][y], aux.source[x][y]);
            }
        }
    }
    best.1
}

fn cross_barcode(w: &[Vec<f64>], w_tilde: &[Vec<f64>], direction: Direction, hom_dim: usize) -> Result<Vec<RtdBar>> {
    let aux = auxiliary(w, w_tilde, direction);
    let f = build_rips_from_distances(&aux.dist, &RipsOptions::new(hom_dim + 1, MaxRadius::Infinite))?;
    let diagram = reduce(&f, Coefficients::Prime(2), hom_dim)?;
    let mut bars = Vec::new();
    for p in diagram.pairs_in_dim(hom_dim) {
        let Some(death_index) = p.death_index else {
            return Err(Error::InvalidArgument("auxiliary complex has an essential class".into()));
        };
        bars.push(RtdBar {
            birth: p.birth,
            death: p.death,
            birth_edge: critical_edge(&aux, f.simplex(p.birth_index).vertices()),
            death_edge: critical_edge(&aux, f.simplex(death_index).vertices()),
        });
    }
    Ok(bars)
}

/// RTD between `p` and `p_tilde` in dimension `hom_dim`, summed over both
/// directions.
pub fn rtd_loss(p: &Array2<f64>, p_tilde: &Array2<f64>, hom_dim: usize) -> Result<(f64, RtdGraphs)> {
    if p.nrows() != p_tilde.nrows() {
        return Err(Error::DimensionMismatch { expected: p.nrows(), found: p_tilde.nrows() });
    }
    rtd_from_weights(distance_matrix(p), distance_matrix(p_tilde), hom_dim)
}

/// RTD between two symmetric weight matrices with zero diagonal on the
/// same vertex set.
pub fn rtd_from_weights(w: Vec<Vec<f64>>, w_tilde: Vec<Vec<f64>>, hom_dim: usize) -> Result<(f64, RtdGraphs)> {
    let n = w.len();
    if w_tilde.len() != n || w.iter().chain(&w_tilde).any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("weight matrices must be square and of equal size".into()));
    }
    if n == 0 {
        return Err(Error::Empty("weight matrix"));
    }
    if hom_dim == 0 {
        return Err(Error::InvalidArgument("RTD homology dimension must be positive".into()));
    }
    let forward = cross_barcode(&w, &w_tilde, Direction::Forward, hom_dim)?;
    let backward = cross_barcode(&w, &w_tilde, Direction::Backward, hom_dim)?;
    let w_min = w.iter().zip(&w_tilde).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x.min(*y)).collect()).collect();
    let graphs = RtdGraphs { hom_dim, w, w_tilde, w_min, forward, backward };
    Ok((graphs.value(), graphs))
}

/// Value of the bars with their critical edges held fixed.
pub fn rtd_loss_frozen(p: &Array2<f64>, p_tilde: &Array2<f64>, graphs: &RtdGraphs) -> f64 {
    let weight = |e: EdgeWeight| match e {
        EdgeWeight::Zero => 0.0,
        EdgeWeight::Input { a, b } => crate::topo::row_distance(p.row(a), p.row(b)),
        EdgeWeight::Target { a, b } => crate::topo::row_distance(p_tilde.row(a), p_tilde.row(b)),
    };
    graphs.forward.iter().chain(&graphs.backward).map(|bar| weight(bar.death_edge) - weight(bar.birth_edge)).sum()
}

/// Gradient with respect to `p_tilde` with the bars' critical edges fixed.
pub fn rtd_loss_grad(p_tilde: &Array2<f64>, graphs: &RtdGraphs) -> Array2<f64> {
    let mut grad = Array2::zeros(p_tilde.raw_dim());
    let mut push = |e: EdgeWeight, sign: f64| {
        let EdgeWeight::Target { a, b } = e else { return };
        let d = crate::topo::row_distance(p_tilde.row(a), p_tilde.row(b));
        if d == 0.0 {
            return;
        }
        for k in 0..p_tilde.ncols() {
            let g = sign * (p_tilde[[a, k]] - p_tilde[[b, k]]) / d;
            grad[[a, k]] += g;
            grad[[b, k]] -= g;
        }
    };
    for bar in graphs.forward.iter().chain(&graphs.backward) {
        push(bar.death_edge, 1.0);
        push(bar.birth_edge, -1.0);
    }
    grad
}

/// `χ · RTD(input, output)`, switched on after the warm-up epochs.
#[derive(Clone, Copy, Debug)]
pub struct RtdTerm {
    pub weight: f64,
    pub hom_dim: usize,
    pub warmup_epochs: usize,
}

impl RtdTerm {
    pub fn new(weight: f64) -> Self {
        RtdTerm { weight, hom_dim: 1, warmup_epochs: RTD_WARMUP_EPOCHS }
    }
}

impl LossTerm for RtdTerm {
    fn name(&self) -> &str {
        "rtd"
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn active_at(&self, epoch: usize) -> bool {
        epoch > self.warmup_epochs
    }

    fn batch_local(&self) -> bool {
        true
    }

    fn compute(
        &self,
        input: &Array2<f64>,
        _latent: &Array2<f64>,
        output: &Array2<f64>,
        with_grad: bool,
    ) -> Result<TermOutput> {
        let (value, graphs) = rtd_loss(input, output, self.hom_dim)?;
        Ok(TermOutput { value, grad_latent: None, grad_output: with_grad.then(|| rtd_loss_grad(output, &graphs)) })
    }
}
