//! Fixed triangulations and filtrations of explicit complexes.

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::rips::Filtration;

/// Minimal six-vertex triangulation of the real projective plane.
pub const PROJECTIVE_PLANE_TRIANGLES: [[usize; 3]; 10] = [
    [0, 1, 3],
    [0, 1, 5],
    [0, 2, 4],
    [0, 2, 5],
    [0, 3, 4],
    [1, 2, 3],
    [1, 2, 4],
    [1, 4, 5],
    [2, 3, 5],
    [3, 4, 5],
];

/// Five-vertex Möbius strip; its boundary is the pentagon 0-2-4-1-3.
pub const MOBIUS_TRIANGLES: [[usize; 3]; 5] = [[0, 1, 2], [1, 2, 3], [2, 3, 4], [0, 3, 4], [0, 1, 4]];

pub const MOBIUS_BOUNDARY: [[usize; 2]; 5] = [[0, 2], [2, 4], [1, 4], [1, 3], [0, 3]];

fn all_at(triangles: &[[usize; 3]], birth: f64) -> Vec<(Vec<usize>, f64)> {
    triangles.iter().map(|t| (t.to_vec(), birth)).collect()
}

/// The projective plane with every simplex born at zero.
pub fn projective_plane() -> Filtration {
    Filtration::from_maximal(&all_at(&PROJECTIVE_PLANE_TRIANGLES, 0.0)).expect("fixed triangulation")
}

/// The Möbius strip whose boundary circle appears at 0 and the rest at 1.
pub fn mobius_boundary_first() -> Filtration {
    let mut maximal = all_at(&MOBIUS_TRIANGLES, 1.0);
    maximal.extend(MOBIUS_BOUNDARY.iter().map(|e| (e.to_vec(), 0.0)));
    Filtration::from_maximal(&maximal).expect("fixed triangulation")
}

/// Filters an abstract complex by placing its vertices at the points of
/// `cloud`: each simplex is born at the diameter of its vertices.
pub fn embedded_filtration(maximal: &[Vec<usize>], cloud: &PointCloud) -> Result<Filtration> {
    let mut list = Vec::new();
    for simplex in maximal {
        if let Some(&bad) = simplex.iter().find(|&&v| v >= cloud.len()) {
            return Err(Error::IndexOutOfRange { index: bad, len: cloud.len() });
        }
        let k = simplex.len();
        for mask in 1u32..(1 << k) {
            let face: Vec<usize> = (0..k).filter(|b| mask & (1 << b) != 0).map(|b| simplex[b]).collect();
            let mut diam = 0.0f64;
            for (a, &u) in face.iter().enumerate() {
                for &w in &face[a + 1..] {
                    diam = diam.max(cloud.distance(u, w));
                }
            }
            list.push((face, diam));
        }
    }
    list.sort_by(|a, b| a.0.cmp(&b.0));
    list.dedup_by(|a, b| a.0 == b.0);
    Filtration::from_simplices(list)
}
