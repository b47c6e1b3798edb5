//! Vietoris–Rips filtrations and integer boundary matrices.
//!
//! Simplices are ordered by `(birth, dim, lexicographic vertices)`. That key is
//! total and deterministic, and because a face never has a larger birth than
//! its cofaces it always precedes them.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

pub const DEFAULT_SIMPLEX_CAP: usize = 5_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Vec<usize>,
    birth: f64,
}

impl Simplex {
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn birth(&self) -> f64 {
        self.birth
    }

    fn key_cmp(&self, other: &Simplex) -> Ordering {
        self.birth
            .total_cmp(&other.birth)
            .then(self.vertices.len().cmp(&other.vertices.len()))
            .then_with(|| self.vertices.cmp(&other.vertices))
    }
}

/// Upper bound on the Rips scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MaxRadius {
    /// Enclosing radius: the smallest `r` such that some point is within `r`
    /// of every other point. Beyond it the Rips complex is a cone.
    Auto,
    Finite(f64),
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RipsOptions {
    pub max_dim: usize,
    pub max_radius: MaxRadius,
    pub simplex_cap: usize,
}

impl RipsOptions {
    pub fn new(max_dim: usize, max_radius: MaxRadius) -> Self {
        RipsOptions { max_dim, max_radius, simplex_cap: DEFAULT_SIMPLEX_CAP }
    }

    /// Default for torsion studies: top dimension one below the ambient dimension.
    pub fn for_ambient(dim: usize, max_radius: MaxRadius) -> Self {
        Self::new(dim.saturating_sub(1), max_radius)
    }
}

/// A simplex-wise filtration: simplices in filtration order, with a lookup
/// from vertex sets to positions.
#[derive(Clone, Debug)]
pub struct Filtration {
    simplices: Vec<Simplex>,
    max_dim: usize,
    n_vertices: usize,
    index: HashMap<(usize, u64), usize>,
    binom: Binomials,
}

impl Filtration {
    /// Builds a filtration from an explicit list of simplices with birth
    /// values. Every face of every simplex must be listed with a birth no
    /// larger than the simplex's own.
    pub fn from_simplices(simplices: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut list = Vec::with_capacity(simplices.len());
        for (mut vertices, birth) in simplices {
            if vertices.is_empty() {
                return Err(Error::InvalidArgument("empty simplex".into()));
            }
            if !birth.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite birth {birth}")));
            }
            vertices.sort_unstable();
            if vertices.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("repeated vertex in {vertices:?}")));
            }
            list.push(Simplex { vertices, birth });
        }
        list.sort_by(Simplex::key_cmp);
        let filtration = Self::assemble(list)?;
        for (j, s) in filtration.simplices.iter().enumerate() {
            if s.vertices.len() < 2 {
                continue;
            }
            for (face, _) in faces(&s.vertices) {
                match filtration.index_of(&face) {
                    Some(i) if i < j => {}
                    Some(_) => {
                        return Err(Error::InvalidArgument(format!(
                            "face {face:?} of {:?} is born after it",
                            s.vertices
                        )))
                    }
                    None => {
                        return Err(Error::InvalidArgument(format!(
                            "face {face:?} of {:?} is missing",
                            s.vertices
                        )))
                    }
                }
            }
        }
        Ok(filtration)
    }

    /// Closes a list of simplices under taking faces. A face inherits the
    /// smallest birth among the listed simplices containing it.
    pub fn from_maximal(maximal: &[(Vec<usize>, f64)]) -> Result<Self> {
        let mut births: HashMap<Vec<usize>, f64> = HashMap::new();
        for (simplex, birth) in maximal {
            let mut vertices = simplex.clone();
            vertices.sort_unstable();
            let k = vertices.len();
            if k == 0 || k > 20 {
                return Err(Error::InvalidArgument(format!("unsupported simplex size {k}")));
            }
            for mask in 1u32..(1 << k) {
                let face: Vec<usize> = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| vertices[b]).collect();
                births
                    .entry(face)
                    .and_modify(|b| *b = b.min(*birth))
                    .or_insert(*birth);
            }
        }
        Self::from_simplices(births.into_iter().collect())
    }

    fn assemble(simplices: Vec<Simplex>) -> Result<Self> {
        let n_vertices = simplices.iter().flat_map(|s| s.vertices.iter()).max().map_or(0, |&v| v + 1);
        let max_dim = simplices.iter().map(Simplex::dim).max().unwrap_or(0);
        let binom = Binomials::new(n_vertices, max_dim + 1)?;
        let mut index = HashMap::with_capacity(simplices.len());
        for (i, s) in simplices.iter().enumerate() {
            if index.insert(binom.key(&s.vertices), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate simplex {:?}", s.vertices)));
            }
        }
        Ok(Filtration { simplices, max_dim, n_vertices, index, binom })
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, i: usize) -> &Simplex {
        &self.simplices[i]
    }

    /// Largest simplex dimension present.
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Position of a simplex given by its vertices in any order.
    pub fn index_of(&self, vertices: &[usize]) -> Option<usize> {
        if vertices.is_empty() || vertices.len() > self.max_dim + 1 {
            return None;
        }
        let mut v = vertices.to_vec();
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) || v[v.len() - 1] >= self.n_vertices {
            return None;
        }
        self.index.get(&self.binom.key(&v)).copied()
    }

    pub fn count_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim + 1];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }

    /// Number of simplices with birth at most `radius`.
    pub fn sublevel_len(&self, radius: f64) -> usize {
        self.simplices.partition_point(|s| s.birth <= radius)
    }

    /// The first `len` simplices as a filtration of their own.
    pub fn prefix(&self, len: usize) -> Filtration {
        let len = len.min(self.len());
        let simplices = self.simplices[..len].to_vec();
        let mut index = HashMap::with_capacity(len);
        for (i, s) in simplices.iter().enumerate() {
            index.insert(self.binom.key(&s.vertices), i);
        }
        let max_dim = simplices.iter().map(Simplex::dim).max().unwrap_or(0);
        Filtration { simplices, max_dim, n_vertices: self.n_vertices, index, binom: self.binom.clone() }
    }

    /// Indices of the codimension-one faces of simplex `j` paired with their
    /// incidence signs `(-1)^k`, `k` being the position of the omitted vertex.
    pub fn facets(&self, j: usize) -> Vec<(usize, i8)> {
        let s = &self.simplices[j];
        if s.vertices.len() < 2 {
            return Vec::new();
        }
        faces(&s.vertices)
            .map(|(face, sign)| {
                let i = self.index.get(&self.binom.key(&face)).copied().expect("filtration is closed under faces");
                (i, sign)
            })
            .collect()
    }

    pub fn boundary_matrix(&self) -> BoundaryMatrix {
        let columns = (0..self.len())
            .map(|j| {
                let mut col = self.facets(j);
                col.sort_unstable_by_key(|&(i, _)| i);
                col
            })
            .collect();
        BoundaryMatrix { columns }
    }

    /// Text dump, one simplex per line: `birth dim v0 v1 ...`.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.simplices {
            write!(w, "{} {}", s.birth, s.dim())?;
            for v in &s.vertices {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Prefix of the filtration with birth at most `radius`.
pub fn sublevel_restriction(filtration: &Filtration, radius: f64) -> Result<Filtration> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::InvalidArgument(format!("radius must be non-negative, got {radius}")));
    }
    Ok(filtration.prefix(filtration.sublevel_len(radius)))
}

fn faces(vertices: &[usize]) -> impl Iterator<Item = (Vec<usize>, i8)> + '_ {
    (0..vertices.len()).map(move |k| {
        let mut face = Vec::with_capacity(vertices.len() - 1);
        face.extend_from_slice(&vertices[..k]);
        face.extend_from_slice(&vertices[k + 1..]);
        (face, if k % 2 == 0 { 1 } else { -1 })
    })
}

/// Sparse integer boundary matrix. Column `j` lists `(row, ±1)` for the
/// facets of simplex `j`, sorted by row.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMatrix {
    pub columns: Vec<Vec<(usize, i8)>>,
}

impl BoundaryMatrix {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Exact integer product `∂ ∘ ∂`, returned as its nonzero entries.
    pub fn square_nonzeros(&self) -> Vec<(usize, usize, i64)> {
        let mut out = Vec::new();
        for (j, col) in self.columns.iter().enumerate() {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for &(k, a) in col {
                for &(i, b) in &self.columns[k] {
                    *acc.entry(i).or_insert(0) += a as i64 * b as i64;
                }
            }
            let mut nz: Vec<_> = acc.into_iter().filter(|&(_, v)| v != 0).map(|(i, v)| (i, j, v)).collect();
            nz.sort_unstable();
            out.extend(nz);
        }
        out
    }
}

/// Combinatorial-number-system keys for simplices.
#[derive(Clone, Debug)]
struct Binomials {
    table: Vec<Vec<u64>>,
}

impl Binomials {
    fn new(n: usize, max_k: usize) -> Result<Self> {
        let mut table = vec![vec![0u64; max_k + 2]; n + 1];
        for (v, row) in table.iter_mut().enumerate() {
            row[0] = 1;
            for k in 1..=max_k + 1 {
                row[k] = binomial(v as u64, k as u64)
                    .ok_or_else(|| Error::InvalidArgument(format!("too many vertices ({n}) for dimension {max_k}")))?;
            }
        }
        Ok(Binomials { table })
    }

    /// Ranks are unique only among subsets of equal size, hence the pair.
    fn key(&self, sorted: &[usize]) -> (usize, u64) {
        (sorted.len(), sorted.iter().enumerate().map(|(k, &v)| self.table[v][k + 1]).sum::<u64>())
    }
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 / 64 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Enclosing radius of a distance matrix: `min_i max_j d(i, j)`.
pub fn enclosing_radius(dist: &[Vec<f64>]) -> f64 {
    dist.iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

pub fn build_rips(cloud: &PointCloud, options: &RipsOptions) -> Result<Filtration> {
    build_rips_from_distances(&cloud.distance_matrix(), options)
}

/// Rips filtration of an arbitrary symmetric weight matrix with zero
/// diagonal. Entries may be `+∞` to forbid an edge.
pub fn build_rips_from_distances(dist: &[Vec<f64>], options: &RipsOptions) -> Result<Filtration> {
    let n = dist.len();
    if n == 0 {
        return Err(Error::Empty("distance matrix"));
    }
    if dist.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("distance matrix must be square".into()));
    }
    let radius = match options.max_radius {
        MaxRadius::Auto => enclosing_radius(dist),
        MaxRadius::Finite(r) if r >= 0.0 => r,
        MaxRadius::Finite(r) => return Err(Error::InvalidArgument(format!("negative radius {r}"))),
        MaxRadius::Infinite => f64::INFINITY,
    };
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (i + 1..n).filter(|&j| dist[i][j] <= radius && dist[i][j].is_finite()).collect())
        .collect();
    let max_vertices = options.max_dim + 1;

    let mut count = 0usize;
    enumerate_cliques(dist, &neighbors, max_vertices, &mut |_, _| count += 1);
    if count > options.simplex_cap {
        return Err(Error::SimplexCapExceeded { count, cap: options.simplex_cap });
    }

    let mut simplices = Vec::with_capacity(count);
    enumerate_cliques(dist, &neighbors, max_vertices, &mut |vertices, birth| {
        simplices.push(Simplex { vertices: vertices.to_vec(), birth });
    });
    simplices.sort_by(Simplex::key_cmp);
    Filtration::assemble(simplices)
}

fn enumerate_cliques(
    dist: &[Vec<f64>],
    neighbors: &[Vec<usize>],
    max_vertices: usize,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    let mut stack = Vec::with_capacity(max_vertices);
    for v in 0..dist.len() {
        stack.push(v);
        visit(&stack, 0.0);
        if max_vertices > 1 {
            extend_clique(dist, neighbors, &neighbors[v], 0.0, &mut stack, max_vertices, visit);
        }
        stack.pop();
    }
}

fn extend_clique(
    dist: &[Vec<f64>],
    neighbors: &[Vec<usize>],
    candidates: &[usize],
    birth: f64,
    stack: &mut Vec<usize>,
    max_vertices: usize,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    for (pos, &w) in candidates.iter().enumerate() {
        let b = stack.iter().map(|&u| dist[u][w]).fold(birth, f64::max);
        stack.push(w);
        visit(stack, b);
        if stack.len() < max_vertices {
            let next = intersect_sorted(&candidates[pos + 1..], &neighbors[w]);
            if !next.is_empty() {
                extend_clique(dist, neighbors, &next, b, stack, max_vertices, visit);
            }
        }
        stack.pop();
    }
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
