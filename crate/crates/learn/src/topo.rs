//! Topological autoencoder loss: alignment of the edges that realize
//! 0-dimensional persistence in the input and latent spaces.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use torsionscope_core::{Error, Result};

use crate::train::{LossTerm, TermOutput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeRole {
    Creator,
    Destroyer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedEdge {
    pub a: usize,
    pub b: usize,
    pub role: EdgeRole,
    pub hom_dim: usize,
}

/// Pairing edges of the input space and of the latent space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSelection {
    pub input: Vec<SelectedEdge>,
    pub latent: Vec<SelectedEdge>,
}

pub fn row_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn distance_matrix(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = row_distance(x.row(i), x.row(j));
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Edges that kill 0-dimensional classes in the Rips filtration, i.e. a
/// minimum spanning tree. Ties are broken by vertex indices.
pub fn persistence_edges(dist: &[Vec<f64>]) -> Vec<SelectedEdge> {
    let n = dist.len();
    let mut edges: Vec<(f64, usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (dist[i][j], i, j)).collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (_, a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            out.push(SelectedEdge { a, b, role: EdgeRole::Destroyer, hom_dim: 0 });
            if out.len() + 1 == n {
                break;
            }
        }
    }
    out
}

fn check_pair(input: &Array2<f64>, latent: &Array2<f64>) -> Result<()> {
    if input.nrows() != latent.nrows() {
        return Err(Error::DimensionMismatch { expected: input.nrows(), found: latent.nrows() });
    }
    if input.nrows() == 0 {
        return Err(Error::Empty("point set"));
    }
    Ok(())
}

/// `½‖A_X[π_X] − A_Z[π_X]‖² + ½‖A_Z[π_Z] − A_X[π_Z]‖²`.
pub fn topo_loss(input: &Array2<f64>, latent: &Array2<f64>) -> Result<(f64, EdgeSelection)> {
    check_pair(input, latent)?;
    let dx = distance_matrix(input);
    let dz = distance_matrix(latent);
    let selection = EdgeSelection { input: persistence_edges(&dx), latent: persistence_edges(&dz) };
    Ok((selection_value(&dx, &dz, &selection), selection))
}

fn selection_value(dx: &[Vec<f64>], dz: &[Vec<f64>], selection: &EdgeSelection) -> f64 {
    selection
        .input
        .iter()
        .chain(&selection.latent)
        .map(|e| {
            let diff = dx[e.a][e.b] - dz[e.a][e.b];
            0.5 * diff * diff
        })
        .sum()
}

/// Value of the loss with `selection` held fixed.
pub fn topo_loss_frozen(input: &Array2<f64>, latent: &Array2<f64>, selection: &EdgeSelection) -> Result<f64> {
    check_pair(input, latent)?;
    Ok(selection_value(&distance_matrix(input), &distance_matrix(latent), selection))
}

/// Gradient with respect to the latent coordinates, selection held fixed.
pub fn topo_loss_grad(input: &Array2<f64>, latent: &Array2<f64>, selection: &EdgeSelection) -> Array2<f64> {
    let mut grad = Array2::zeros(latent.raw_dim());
    for e in selection.input.iter().chain(&selection.latent) {
        let dz = row_distance(latent.row(e.a), latent.row(e.b));
        if dz == 0.0 {
            continue;
        }
        let dx = row_distance(input.row(e.a), input.row(e.b));
        let coef = (dz - dx) / dz;
        for k in 0..latent.ncols() {
            let g = coef * (latent[[e.a, k]] - latent[[e.b, k]]);
            grad[[e.a, k]] += g;
            grad[[e.b, k]] -= g;
        }
    }
    grad
}

/// `η · L_topo` comparing each batch with its latent codes.
#[derive(Clone, Copy, Debug)]
pub struct TopoTerm {
    pub weight: f64,
}

impl LossTerm for TopoTerm {
    fn name(&self) -> &str {
        "topo"
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn batch_local(&self) -> bool {
        true
    }

    fn compute(
        &self,
        input: &Array2<f64>,
        latent: &Array2<f64>,
        _output: &Array2<f64>,
        with_grad: bool,
    ) -> Result<TermOutput> {
        let (value, selection) = topo_loss(input, latent)?;
        Ok(TermOutput {
            value,
            grad_latent: with_grad.then(|| topo_loss_grad(input, latent, &selection)),
            grad_output: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_points() {
        let (v, sel) = topo_loss(&array![[0.0], [1.0]], &array![[0.0, 0.0], [3.0, 0.0]]).unwrap();
        assert_eq!(v, 4.0);
        assert_eq!(sel.input.len(), 1);
        assert_eq!(sel.latent[0].role, EdgeRole::Destroyer);
    }

    #[test]
    fn spanning_tree_of_square() {
        let d = distance_matrix(&array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let e = persistence_edges(&d);
        assert_eq!(e.iter().map(|e| (e.a, e.b)).collect::<Vec<_>>(), vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn coincident_latent_points_have_zero_gradient() {
        let x = array![[0.0, 0.0], [1.0, 0.0]];
        let z = array![[0.5], [0.5]];
        let (_, sel) = topo_loss(&x, &z).unwrap();
        assert!(topo_loss_grad(&x, &z, &sel).iter().all(|&g| g == 0.0));
    }
}
