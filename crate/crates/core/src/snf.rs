//! Smith normal form over the integers with arbitrary-precision entries.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Diagonal `d1 | d2 | ... | dr` of the Smith normal form, all positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    pub diagonal: Vec<BigInt>,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.diagonal.len()
    }

    /// Diagonal entries greater than one.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.diagonal.iter().filter(|d| !d.is_one()).cloned().collect()
    }

    pub fn is_divisibility_chain(&self) -> bool {
        self.diagonal.iter().all(|d| d.is_positive()) && self.diagonal.windows(2).all(|w| (&w[1] % &w[0]).is_zero())
    }
}

/// Smith normal form of a dense integer matrix given as rows.
pub fn smith_normal_form(matrix: &[Vec<i64>]) -> SmithForm {
    let n_rows = matrix.len();
    let n_cols = matrix.first().map_or(0, Vec::len);
    let columns = (0..n_cols)
        .map(|j| (0..n_rows).filter(|&i| matrix[i][j] != 0).map(|i| (i, matrix[i][j])).collect())
        .collect();
    smith_normal_form_sparse(n_rows, columns)
}

/// Smith normal form of a sparse matrix given as columns of `(row, value)`.
///
/// Unit pivots are eliminated first, choosing the one with the smallest
/// fill-in estimate. The remaining block is reduced densely.
pub fn smith_normal_form_sparse(n_rows: usize, columns: Vec<Vec<(usize, i64)>>) -> SmithForm {
    let mut cols: Vec<Vec<(usize, BigInt)>> = columns
        .into_iter()
        .map(|mut c| {
            c.retain(|&(_, v)| v != 0);
            c.sort_unstable_by_key(|&(i, _)| i);
            c.into_iter().map(|(i, v)| (i, BigInt::from(v))).collect()
        })
        .collect();
    let mut units = 0usize;
    let mut row_alive = vec![true; n_rows];

    loop {
        let mut row_count = vec![0usize; n_rows];
        for c in &cols {
            for (i, _) in c {
                row_count[*i] += 1;
            }
        }
        let mut best: Option<(usize, usize, usize)> = None;
        for (j, c) in cols.iter().enumerate() {
            for (i, v) in c {
                if v.abs().is_one() {
                    let cost = (row_count[*i] - 1) * (c.len() - 1);
                    if best.is_none_or(|(b, _, _)| cost < b) {
                        best = Some((cost, *i, j));
                    }
                }
            }
            if matches!(best, Some((0, _, _))) {
                break;
            }
        }
        let Some((_, r, c)) = best else { break };
        let pivot_col = cols.swap_remove(c);
        let pivot = pivot_col.iter().find(|(i, _)| *i == r).map(|(_, v)| v.clone()).unwrap();
        for col in cols.iter_mut() {
            if let Some(v) = col.iter().find(|(i, _)| *i == r).map(|(_, v)| v.clone()) {
                // pivot is ±1, so v / pivot is exact
                let factor = -(v * &pivot);
                *col = add_scaled(col, &factor, &pivot_col);
            }
        }
        row_alive[r] = false;
        units += 1;
    }

    let rows: Vec<usize> = (0..n_rows).filter(|&i| row_alive[i]).collect();
    let mut position = vec![usize::MAX; n_rows];
    for (k, &i) in rows.iter().enumerate() {
        position[i] = k;
    }
    let dense_cols: Vec<&Vec<(usize, BigInt)>> = cols.iter().filter(|c| !c.is_empty()).collect();
    let mut dense = vec![vec![BigInt::zero(); dense_cols.len()]; rows.len()];
    for (j, c) in dense_cols.iter().enumerate() {
        for (i, v) in c.iter() {
            dense[position[*i]][j] = v.clone();
        }
    }
    let mut diagonal = vec![BigInt::one(); units];
    diagonal.extend(dense_smith(dense));
    SmithForm { diagonal }
}

fn add_scaled(a: &[(usize, BigInt)], factor: &BigInt, b: &[(usize, BigInt)]) -> Vec<(usize, BigInt)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, factor * &b[j].1));
            j += 1;
        } else {
            let v = &a[i].1 + factor * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Classic elimination: smallest-magnitude pivot, Euclidean reduction of its
/// row and column, then a divisibility fix-up before moving on.
fn dense_smith(mut a: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let mut diagonal = Vec::new();
    let mut t = 0;
    while t < m.min(n) {
        let Some((pi, pj)) = smallest_entry(&a, t) else { break };
        a.swap(t, pi);
        for row in a.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut done = true;
            for i in t + 1..m {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = a[i][t].div_floor(&a[t][t]);
                for j in t..n {
                    let v = &a[t][j] * &q;
                    a[i][j] -= v;
                }
                if !a[i][t].is_zero() {
                    done = false;
                }
            }
            for j in t + 1..n {
                if a[t][j].is_zero() {
                    continue;
                }
                let q = a[t][j].div_floor(&a[t][t]);
                for i in t..m {
                    let v = &a[i][t] * &q;
                    a[i][j] -= v;
                }
                if !a[t][j].is_zero() {
                    done = false;
                }
            }
            if done {
                let bad = (t + 1..m).find(|&i| (t + 1..n).any(|j| !(&a[i][j] % &a[t][t]).is_zero()));
                match bad {
                    Some(i) => {
                        for j in t..n {
                            let v = a[i][j].clone();
                            a[t][j] += v;
                        }
                    }
                    None => break,
                }
            }
            let (pi, pj) = smallest_entry_in_cross(&a, t);
            a.swap(t, pi);
            for row in a.iter_mut() {
                row.swap(t, pj);
            }
        }
        diagonal.push(a[t][t].abs());
        t += 1;
    }
    diagonal
}

fn smallest_entry(a: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (i, row) in a.iter().enumerate().skip(t) {
        for (j, v) in row.iter().enumerate().skip(t) {
            if !v.is_zero() && best.is_none_or(|(bi, bj)| v.abs() < a[bi][bj].abs()) {
                best = Some((i, j));
                if v.abs().is_one() {
                    return best;
                }
            }
        }
    }
    best
}

/// Smallest nonzero entry in row `t` or column `t`; the pivot itself if the
/// cross is otherwise clear.
fn smallest_entry_in_cross(a: &[Vec<BigInt>], t: usize) -> (usize, usize) {
    let mut best = (t, t);
    let mut best_abs = a[t][t].abs();
    for (i, row) in a.iter().enumerate().skip(t) {
        let v = row[t].abs();
        if !v.is_zero() && (best_abs.is_zero() || v < best_abs) {
            best = (i, t);
            best_abs = v;
        }
    }
    for (j, v) in a[t].iter().enumerate().skip(t) {
        let v = v.abs();
        if !v.is_zero() && (best_abs.is_zero() || v < best_abs) {
            best = (t, j);
            best_abs = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn diag_two_three() {
        assert_eq!(smith_normal_form(&[vec![2, 0], vec![0, 3]]).diagonal, diag(&[1, 6]));
    }

    #[test]
    fn zero_and_identity() {
        let z = smith_normal_form(&[vec![0, 0], vec![0, 0]]);
        assert!(z.diagonal.is_empty());
        assert_eq!(z.rank(), 0);
        let id = smith_normal_form(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(id.diagonal, diag(&[1, 1, 1]));
    }

    #[test]
    fn textbook_example() {
        let m = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        assert_eq!(smith_normal_form(&m).diagonal, diag(&[2, 6, 12]));
    }

    #[test]
    fn no_unit_entries() {
        let m = vec![vec![4, 6], vec![6, 4]];
        // det = -20, gcd of entries = 2
        assert_eq!(smith_normal_form(&m).diagonal, diag(&[2, 10]));
    }

    #[test]
    fn rectangular() {
        let m = vec![vec![1, 1, 0], vec![0, 2, 2]];
        let s = smith_normal_form(&m);
        assert_eq!(s.diagonal, diag(&[1, 2]));
        assert!(s.is_divisibility_chain());
        assert_eq!(s.torsion(), diag(&[2]));
    }
}
