//! Point clouds, synthetic generators and the transformations applied to them.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_integer::Integer;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Jitter amplitude used to break exact ties between pairwise distances.
pub const TIE_BREAK_JITTER: f64 = 1e-9;

/// A finite set of points in Euclidean space, stored row-major.
///
/// Point order is stable: index `i` names the same point in every cloud
/// derived from this one by an operation that does not add or remove points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudRepr", into = "CloudRepr")]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct CloudRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
}

impl TryFrom<CloudRepr> for PointCloud {
    type Error = Error;

    fn try_from(repr: CloudRepr) -> Result<Self> {
        let cloud = PointCloud::new(repr.dim, repr.points)?;
        match repr.labels {
            Some(labels) => cloud.with_labels(labels),
            None => Ok(cloud),
        }
    }
}

impl From<PointCloud> for CloudRepr {
    fn from(cloud: PointCloud) -> Self {
        CloudRepr {
            dim: cloud.dim,
            points: cloud.points().map(<[f64]>::to_vec).collect(),
            labels: cloud.labels,
        }
    }
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be at least 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::Empty("point cloud"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: coords.len() % dim });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("coordinates must be finite".into()));
        }
        Ok(PointCloud { dim, coords, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Dense symmetric matrix of pairwise Euclidean distances.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.distance(i, j);
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }

    /// Subset of the cloud in the order given by `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let n = self.len();
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            coords.extend_from_slice(self.point(i));
        }
        let mut out = PointCloud::from_flat(self.dim, coords)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i]).collect());
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud {
            dim: self.dim,
            coords: self.coords.iter().map(|c| c * factor).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Adds independent uniform noise of amplitude [`TIE_BREAK_JITTER`] to every
    /// coordinate so that no two pairwise distances coincide exactly.
    pub fn jittered(&self, seed: u64) -> PointCloud {
        let mut rng = rng::seeded(seed);
        let coords = self
            .coords
            .iter()
            .map(|c| c + rng.random_range(-TIE_BREAK_JITTER..TIE_BREAK_JITTER))
            .collect();
        PointCloud { dim: self.dim, coords, labels: self.labels.clone() }
    }

    /// Mean over points of the squared Euclidean displacement to `other`.
    pub fn mean_squared_displacement(&self, other: &PointCloud) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        let total: f64 = self.coords.iter().zip(&other.coords).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(total / self.len() as f64)
    }

    /// Reads the CSV point format: one point per row, comma-separated decimal
    /// coordinates, optional `# dim=<d>` header. Other `#` lines are comments.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<PointCloud> {
        let mut declared = None;
        let mut coords = Vec::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(value) = comment.trim().strip_prefix("dim=") {
                    let d = value
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("line {}: bad dim header: {e}", lineno + 1)))?;
                    declared = Some(d);
                }
                continue;
            }
            let row = trimmed
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            let expected = *dim.get_or_insert(declared.unwrap_or(row.len()));
            if row.len() != expected {
                return Err(Error::DimensionMismatch { expected, found: row.len() });
            }
            coords.extend(row);
        }
        let dim = dim.or(declared).ok_or(Error::Empty("point cloud"))?;
        PointCloud::from_flat(dim, coords)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# dim={}", self.dim)?;
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|c| c.to_string()).collect();
            writeln!(writer, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Parameters of a closed curve that winds around the z-axis several times.
///
/// In every meridian cross-section the strands of the curve lie on a circle
/// of diameter `band_width` centred on the core circle of radius
/// `major_radius`. After each circuit the cross-section pattern rotates by
/// `2π·twist/windings`, so the curve closes after `windings` circuits. With
/// `windings = 2, twist = 1` the curve is the boundary of a Möbius band; with
/// `windings = 3, twist = 1` it is a (3,1) torus curve. Once the Rips scale
/// exceeds the strand spacing the thickened curve retracts onto the core,
/// which the curve covers `windings` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopBand {
    pub windings: usize,
    pub n_points: usize,
    pub major_radius: f64,
    pub band_width: f64,
    pub twist: usize,
    pub seed: u64,
    #[serde(default)]
    pub jitter: bool,
}

impl LoopBand {
    pub fn double(n_points: usize, seed: u64) -> Self {
        LoopBand { windings: 2, n_points, major_radius: 1.0, band_width: 0.2, twist: 1, seed, jitter: false }
    }

    pub fn triple(n_points: usize, seed: u64) -> Self {
        LoopBand { windings: 3, n_points, major_radius: 1.0, band_width: 0.25, twist: 1, seed, jitter: false }
    }

    pub fn generate(&self) -> Result<PointCloud> {
        generate_loop_band(self)
    }
}

/// Samples a [`LoopBand`] curve with stratified random parameters: point `i`
/// sits at curve parameter `(i + u_i)/n` with `u_i` uniform in `[0, 1)`.
pub fn generate_loop_band(spec: &LoopBand) -> Result<PointCloud> {
    let LoopBand { windings, n_points, major_radius, band_width, twist, seed, jitter } = *spec;
    if windings == 0 {
        return Err(Error::InvalidArgument("windings must be positive".into()));
    }
    if n_points < 3 * windings {
        return Err(Error::InvalidArgument(format!(
            "need at least {} points for {windings} windings, got {n_points}",
            3 * windings
        )));
    }
    if !(major_radius > 0.0) || !(band_width > 0.0) {
        return Err(Error::InvalidArgument("radius and band width must be positive".into()));
    }
    if band_width >= major_radius {
        return Err(Error::InvalidArgument(format!(
            "band width {band_width} must be smaller than the major radius {major_radius}"
        )));
    }
    if windings > 1 && twist.gcd(&windings) != 1 {
        return Err(Error::InvalidArgument(format!(
            "twist {twist} must be coprime to windings {windings} for the strands to be distinct"
        )));
    }
    let mut rng = rng::seeded(seed);
    let half = band_width / 2.0;
    let mut coords = Vec::with_capacity(3 * n_points);
    for i in 0..n_points {
        let u = (i as f64 + rng.random::<f64>()) / n_points as f64;
        let t = 2.0 * PI * windings as f64 * u;
        let phi = t * twist as f64 / windings as f64;
        let rho = major_radius + half * phi.cos();
        coords.extend_from_slice(&[rho * t.cos(), rho * t.sin(), half * phi.sin()]);
    }
    let cloud = PointCloud::from_flat(3, coords)?;
    Ok(if jitter { cloud.jittered(seed ^ 0x9e37_79b9_7f4a_7c15) } else { cloud })
}

/// Embedding of the real projective plane in ℝ⁴, evaluated at a point of the
/// unit sphere. Antipodal points have the same image.
pub fn projective_plane_embedding(x: f64, y: f64, z: f64) -> [f64; 4] {
    [x * y, x * z, y * z, x * x - y * y]
}

/// Samples `n_points` uniform points on the unit sphere and maps them into ℝ⁴
/// with [`projective_plane_embedding`].
pub fn generate_projective_plane(n_points: usize, seed: u64) -> Result<PointCloud> {
    if n_points < 20 {
        return Err(Error::InvalidArgument(format!("need at least 20 points, got {n_points}")));
    }
    let mut rng = rng::seeded(seed);
    let mut coords = Vec::with_capacity(4 * n_points);
    for (x, y, z) in sphere_points(&mut rng, n_points) {
        coords.extend_from_slice(&projective_plane_embedding(x, y, z));
    }
    PointCloud::from_flat(4, coords)
}

/// The unit-sphere points a given seed feeds into [`generate_projective_plane`].
pub fn projective_plane_preimages(n_points: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    sphere_points(&mut rng::seeded(seed), n_points)
}

fn sphere_points(rng: &mut rng::Rng, n: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: f64 = StandardNormal.sample(rng);
        let y: f64 = StandardNormal.sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        let norm = (x * x + y * y + z * z).sqrt();
        if norm > 1e-12 {
            out.push((x / norm, y / norm, z / norm));
        }
    }
    out
}

/// I.i.d. uniform points in the unit cube of ℝ^dim.
pub fn generate_random_cloud(n_points: usize, dim: usize, seed: u64) -> Result<PointCloud> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
    }
    if n_points == 0 {
        return Err(Error::Empty("point cloud"));
    }
    let mut rng = rng::seeded(seed);
    let coords = (0..n_points * dim).map(|_| rng.random::<f64>()).collect();
    PointCloud::from_flat(dim, coords)
}

/// Which points a perturbation touches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    All,
    Indices(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub shifted_indices: Vec<usize>,
    pub noise_sigma: f64,
    /// Mean over all points of the squared displacement.
    pub mse: f64,
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` to every
/// coordinate of the selected points. Repeated indices are shifted once.
pub fn perturb_gaussian(
    cloud: &PointCloud,
    selection: &Selection,
    sigma: f64,
    seed: u64,
) -> Result<(PointCloud, PerturbationRecord)> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be a finite non-negative number, got {sigma}")));
    }
    let n = cloud.len();
    let indices: Vec<usize> = match selection {
        Selection::All => (0..n).collect(),
        Selection::Indices(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
            let mut idx = idx.clone();
            idx.sort_unstable();
            idx.dedup();
            idx
        }
    };
    let mut out = cloud.clone();
    if sigma > 0.0 {
        let mut rng = rng::seeded(seed);
        for &i in &indices {
            for c in &mut out.coords[i * cloud.dim..(i + 1) * cloud.dim] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *c += sigma * z;
            }
        }
    }
    let mse = cloud.mean_squared_displacement(&out)?;
    Ok((out, PerturbationRecord { shifted_indices: indices, noise_sigma: sigma, mse }))
}

/// Maps every point through a `d' × d` matrix given as rows.
pub fn apply_linear(cloud: &PointCloud, matrix: &[Vec<f64>]) -> Result<PointCloud> {
    let out_dim = matrix.len();
    if out_dim == 0 {
        return Err(Error::InvalidArgument("matrix has no rows".into()));
    }
    for row in matrix {
        if row.len() != cloud.dim {
            return Err(Error::DimensionMismatch { expected: cloud.dim, found: row.len() });
        }
    }
    let mut coords = Vec::with_capacity(cloud.len() * out_dim);
    for p in cloud.points() {
        coords.extend(matrix.iter().map(|row| row.iter().zip(p).map(|(a, x)| a * x).sum::<f64>()));
    }
    let mut out = PointCloud::from_flat(out_dim, coords)?;
    out.labels = cloud.labels.clone();
    Ok(out)
}

/// Componentwise nonlinearities. Leaky ReLU uses slope 0.01 and ELU uses
/// α = 1 on the negative half-line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Elu,
    Softplus,
    Linear,
}

impl Activation {
    pub const LEAKY_SLOPE: f64 = 0.01;
    pub const ELU_ALPHA: f64 = 1.0;

    pub const NONLINEAR: [Activation; 6] = [
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Elu,
        Activation::Softplus,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    Self::LEAKY_SLOPE * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Elu => {
                if x >= 0.0 {
                    x
                } else {
                    Self::ELU_ALPHA * x.exp_m1()
                }
            }
            // ln(1 + e^x) without overflow for large |x|
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the pre-activation. At the kink of
    /// ReLU-type functions the right derivative is used.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    Self::LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Elu => {
                if x >= 0.0 {
                    1.0
                } else {
                    Self::ELU_ALPHA * x.exp()
                }
            }
            Activation::Softplus => sigmoid(x),
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Elu => "elu",
            Activation::Softplus => "softplus",
            Activation::Linear => "linear",
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "relu" => Activation::Relu,
            "leaky_relu" | "leakyrelu" => Activation::LeakyRelu,
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            "elu" => Activation::Elu,
            "softplus" => Activation::Softplus,
            "linear" | "identity" => Activation::Linear,
            other => return Err(Error::Parse(format!("unknown activation {other:?}"))),
        })
    }
}

pub fn apply_activation(cloud: &PointCloud, kind: Activation) -> PointCloud {
    PointCloud {
        dim: cloud.dim,
        coords: cloud.coords.iter().map(|&c| kind.apply(c)).collect(),
        labels: cloud.labels.clone(),
    }
}
