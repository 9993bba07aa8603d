//! Dissimilarities and kernels.
//!
//! A dissimilarity only has to be symmetric, nonnegative and zero on the
//! diagonal. A kernel matrix must also be positive semidefinite; it then
//! induces the feature-space distance
//! `d_K(x, x') = √(K(x,x) + K(x',x') − 2K(x,x'))`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
/// Relative PSD tolerance, scaled by the spectral norm.
pub const PSD_REL_TOL: f64 = 1e-8;
const RADICAND_FLOOR: f64 = -1e-10;

fn square(rows: &[Vec<f64>]) -> Result<usize> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("matrix is empty"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::invalid(format!("matrix row {i} has {} entries, expected {n}", r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("matrix row {i} has a non-finite entry")));
        }
    }
    Ok(n)
}

/// First violation of each dissimilarity axiom, if any.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DissimilarityReport {
    pub asymmetric: Option<(usize, usize)>,
    pub nonzero_diagonal: Option<usize>,
    pub negative: Option<(usize, usize)>,
}

impl DissimilarityReport {
    pub fn is_ok(&self) -> bool {
        *self == DissimilarityReport::default()
    }
}

impl fmt::Display for DissimilarityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some((i, j)) = self.asymmetric {
            parts.push(format!("symmetry violated at ({i},{j})"));
        }
        if let Some(i) = self.nonzero_diagonal {
            parts.push(format!("nonzero diagonal at ({i},{i})"));
        }
        if let Some((i, j)) = self.negative {
            parts.push(format!("negative entry at ({i},{j})"));
        }
        if parts.is_empty() {
            write!(f, "ok")
        } else {
            write!(f, "{}", parts.join("; "))
        }
    }
}

/// Checks symmetry, zero diagonal and nonnegativity. The triangle
/// inequality is not required.
pub fn validate_dissimilarity(rows: &[Vec<f64>]) -> Result<DissimilarityReport> {
    let n = square(rows)?;
    let mut report = DissimilarityReport::default();
    for i in 0..n {
        if report.nonzero_diagonal.is_none() && rows[i][i] != 0.0 {
            report.nonzero_diagonal = Some(i);
        }
        for j in 0..n {
            if report.asymmetric.is_none() && j > i && (rows[i][j] - rows[j][i]).abs() > SYMMETRY_TOL {
                report.asymmetric = Some((i, j));
            }
            if report.negative.is_none() && rows[i][j] < 0.0 {
                report.negative = Some((i, j));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let report = validate_dissimilarity(&rows)?;
        if !report.is_ok() {
            return Err(Error::Dissimilarity(report.to_string()));
        }
        Ok(DissimilarityMatrix {
            n: rows.len(),
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Evaluates `d` on every ordered pair.
    pub fn from_fn(n: usize, d: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| d(i, j)).collect()).collect())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Same matrix with observations reordered: new index `a` is old `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        Self::from_fn(self.n, |a, b| self.get(perm[a], perm[b]))
    }
}

/// Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(s: &[T], t: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=t.len()).collect();
    let mut cur = vec![0; t.len() + 1];
    for (i, a) in s.iter().enumerate() {
        cur[0] = i + 1;
        for (j, b) in t.iter().enumerate() {
            let sub = prev[j] + usize::from(a != b);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[t.len()]
}

pub fn edit_distance_str(s: &str, t: &str) -> usize {
    let a: Vec<char> = s.chars().collect();
    let b: Vec<char> = t.chars().collect();
    edit_distance(&a, &b)
}

fn same_dim(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn linear_kernel(x: &[f64], y: &[f64]) -> Result<f64> {
    same_dim(x, y)?;
    Ok(dot(x, y))
}

pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    same_dim(x, y)?;
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

pub fn poly_kernel(x: &[f64], y: &[f64], degree: u32, offset: f64) -> Result<f64> {
    same_dim(x, y)?;
    Ok((dot(x, y) + offset).powi(degree as i32))
}

/// Kernels on real vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum VectorKernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { degree: u32, offset: f64 },
}

impl VectorKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match *self {
            VectorKernel::Linear => linear_kernel(x, y),
            VectorKernel::Rbf { gamma } => rbf_kernel(x, y, gamma),
            VectorKernel::Poly { degree, offset } => poly_kernel(x, y, degree, offset),
        }
    }
}

impl FromStr for VectorKernel {
    type Err = Error;

    /// `linear`, `rbf:GAMMA` or `poly:DEGREE:OFFSET`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse kernel `{s}` (expected linear, rbf:G or poly:D:C)"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["linear"] => Ok(VectorKernel::Linear),
            ["rbf", g] => {
                let gamma: f64 = g.parse().map_err(|_| bad())?;
                if !(gamma > 0.0) {
                    return Err(Error::invalid(format!("rbf gamma must be positive, got {gamma}")));
                }
                Ok(VectorKernel::Rbf { gamma })
            }
            ["poly", d, c] => Ok(VectorKernel::Poly {
                degree: d.parse().map_err(|_| bad())?,
                offset: c.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for VectorKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorKernel::Linear => write!(f, "linear"),
            VectorKernel::Rbf { gamma } => write!(f, "rbf:{gamma}"),
            VectorKernel::Poly { degree, offset } => write!(f, "poly:{degree}:{offset}"),
        }
    }
}

/// Symmetric positive semidefinite matrix of kernel values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
    psd_tolerance: f64,
    min_eigenvalue: f64,
}

impl KernelMatrix {
    /// Accepts `rows` when symmetric within 1e-12 and its smallest
    /// eigenvalue is at least `−1e-8·‖K‖₂`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = square(&rows)?;
        for i in 0..n {
            for j in (i + 1)..n {
                if (rows[i][j] - rows[j][i]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("kernel matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &data)).eigenvalues;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let psd_tolerance = PSD_REL_TOL * norm;
        if min < -psd_tolerance {
            return Err(Error::NonPositiveKernel { eigenvalue: min });
        }
        Ok(KernelMatrix {
            n,
            data,
            psd_tolerance,
            min_eigenvalue: min,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn psd_tolerance(&self) -> f64 {
        self.psd_tolerance
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// `K[i][j] = kernel(x_i, x_j)`, evaluated once per unordered pair.
pub fn gram_matrix<T: Sync>(objects: &[T], kernel: impl Fn(&T, &T) -> Result<f64> + Sync) -> Result<KernelMatrix> {
    let n = objects.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel(&objects[i], &objects[j])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let rows = (0..n)
        .map(|i| (0..n).map(|j| if j >= i { upper[i][j - i] } else { upper[j][i - j] }).collect())
        .collect();
    KernelMatrix::new(rows)
}

/// Feature-space distance between items `i` and `j`. Radicands down to
/// −1e-10 count as rounding and give 0.
pub fn kernel_distance(k: &KernelMatrix, i: usize, j: usize) -> Result<f64> {
    if i >= k.n || j >= k.n {
        return Err(Error::invalid(format!("kernel index ({i},{j}) out of range for size {}", k.n)));
    }
    if i == j {
        return Ok(0.0);
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let r = k.get(a, a) + k.get(b, b) - 2.0 * k.get(a, b);
    if r < RADICAND_FLOOR {
        return Err(Error::NonPositiveKernel { eigenvalue: r });
    }
    Ok(r.max(0.0).sqrt())
}

/// `exp(−βL)` with `L = D − A` the combinatorial Laplacian.
pub fn heat_kernel_matrix(adjacency: &[Vec<f64>], beta: f64) -> Result<KernelMatrix> {
    let n = square(adjacency)?;
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("heat kernel beta must be finite and nonnegative, got {beta}")));
    }
    for i in 0..n {
        if adjacency[i][i] != 0.0 {
            return Err(Error::invalid(format!("adjacency has a self-loop at {i}")));
        }
        for j in (i + 1)..n {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(Error::invalid(format!("adjacency is not symmetric at ({i},{j})")));
            }
            if adjacency[i][j] < 0.0 {
                return Err(Error::invalid(format!("negative edge weight at ({i},{j})")));
            }
        }
    }
    if beta == 0.0 {
        return KernelMatrix::new((0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect());
    }
    let lap = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            adjacency[i].iter().sum()
        } else {
            -adjacency[i][j]
        }
    });
    let eig = SymmetricEigen::new(lap);
    let v = &eig.eigenvectors;
    let w: Vec<f64> = eig.eigenvalues.iter().map(|l| (-beta * l).exp()).collect();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| v[(i, k)] * w[k] * v[(j, k)]).sum();
            rows[i][j] = s;
            rows[j][i] = s;
        }
    }
    KernelMatrix::new(rows)
}

/// Reads an undirected graph from `u v` lines (0-indexed, `#` comments
/// allowed) into an adjacency matrix. `nodes` fixes the vertex count,
/// otherwise it is one past the largest index.
pub fn parse_edge_list(text: &str, nodes: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut edges = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::invalid(format!("edge list line {}: `{s}` is not a vertex index", line_no + 1)))
        };
        if fields.len() != 2 {
            return Err(Error::invalid(format!("edge list line {}: expected `u v`", line_no + 1)));
        }
        let (u, v) = (parse(fields[0])?, parse(fields[1])?);
        if u == v {
            return Err(Error::invalid(format!("edge list line {}: self-loop on {u}", line_no + 1)));
        }
        edges.push((u, v));
    }
    let max = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = nodes.unwrap_or(max);
    if max > n {
        return Err(Error::invalid(format!("edge list refers to vertex {} but only {n} vertices declared", max - 1)));
    }
    if n == 0 {
        return Err(Error::invalid("edge list has no vertices"));
    }
    let mut adj = vec![vec![0.0; n]; n];
    for (u, v) in edges {
        adj[u][v] = 1.0;
        adj[v][u] = 1.0;
    }
    Ok(adj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dissimilarity_validation_examples() {
        assert!(validate_dissimilarity(&vec![vec![0.0; 3]; 3]).unwrap().is_ok());
        let mut d = vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let r = validate_dissimilarity(&d).unwrap();
        assert_eq!(r.asymmetric, Some((0, 1)));
        d[1][0] = 1.0;
        d[2][2] = 0.1;
        let r = validate_dissimilarity(&d).unwrap();
        assert_eq!(r.nonzero_diagonal, Some(2));
        assert_eq!(r.asymmetric, None);
        d[2][2] = 0.0;
        d[0][2] = -1.0;
        d[2][0] = -1.0;
        assert_eq!(validate_dissimilarity(&d).unwrap().negative, Some((0, 2)));
        let err = DissimilarityMatrix::new(d).unwrap_err();
        assert!(err.to_string().contains("negative entry at (0,2)"));
        assert!(validate_dissimilarity(&[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance_str("abc", "abc"), 0);
        assert_eq!(edit_distance_str("", "abc"), 3);
        assert_eq!(edit_distance_str("kitten", "sitting"), 3);
        assert_eq!(edit_distance(&[1, 2, 3], &[2, 3]), 1);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[0.3, 2.0], &[0.3, 2.0], 4.0).unwrap(), 1.0);
        assert_eq!(poly_kernel(&[1.0, 0.0], &[1.0, 0.0], 2, 0.0).unwrap(), 1.0);
        assert_relative_eq!(rbf_kernel(&[0.0], &[1.0], 1.0).unwrap(), 0.367_879_441_171_442_33, max_relative = 1e-15);
        assert!(rbf_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(linear_kernel(&[0.0], &[1.0, 2.0]).is_err());
        for s in ["linear", "rbf:0.5", "poly:2:1"] {
            assert_eq!(s.parse::<VectorKernel>().unwrap().to_string(), s);
        }
        assert!("rbf:-1".parse::<VectorKernel>().is_err());
    }

    #[test]
    fn gram_examples() {
        let k = gram_matrix(&[vec![2.0, 1.0]], |x, y| linear_kernel(x, y)).unwrap();
        assert_eq!(k.to_rows(), vec![vec![5.0]]);
        let e = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(gram_matrix(&e, |x, y| linear_kernel(x, y)).unwrap().to_rows(), e);
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let k = gram_matrix(&pts, |x, y| rbf_kernel(x, y, 1.0)).unwrap();
        assert!(k.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn non_psd_matrix_is_rejected() {
        let err = KernelMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap_err();
        match err {
            Error::NonPositiveKernel { eigenvalue } => assert_relative_eq!(eigenvalue, -1.0, max_relative = 1e-12),
            other => panic!("unexpected {other}"),
        }
        assert!(KernelMatrix::new(vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
    }

    #[test]
    fn kernel_distance_examples() {
        let k = gram_matrix(&[vec![1.0, 0.0], vec![0.0, 1.0]], |x, y| linear_kernel(x, y)).unwrap();
        assert_eq!(kernel_distance(&k, 1, 1).unwrap(), 0.0);
        assert_relative_eq!(kernel_distance(&k, 0, 1).unwrap(), 2f64.sqrt());
        assert!(kernel_distance(&k, 0, 2).is_err());
    }

    #[test]
    fn heat_kernel_examples() {
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(heat_kernel_matrix(&two, 0.0).unwrap().to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let beta = 0.7;
        let k = heat_kernel_matrix(&two, beta).unwrap();
        let e = (-2.0 * beta).exp();
        assert!((k.get(0, 0) - 0.5 * (1.0 + e)).abs() < 1e-12);
        assert!((k.get(0, 1) - 0.5 * (1.0 - e)).abs() < 1e-12);

        // two disconnected edges: block diagonal
        let adj = parse_edge_list("0 1\n2 3\n", None).unwrap();
        let k = heat_kernel_matrix(&adj, 1.3).unwrap();
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert!(k.get(i, j).abs() < 1e-14);
        }

        // path on 4 vertices: uniform limit
        let path = parse_edge_list("0 1\n1 2\n2 3", None).unwrap();
        let k = heat_kernel_matrix(&path, 50.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((k.get(i, j) - 0.25).abs() < 1e-6);
            }
        }
        assert!(heat_kernel_matrix(&[vec![0.0, 1.0], vec![0.0, 0.0]], 1.0).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let adj = parse_edge_list("# graph\n0 2\n\n1 2 # trailing\n", Some(4)).unwrap();
        assert_eq!(adj.len(), 4);
        assert_eq!(adj[2][0], 1.0);
        assert_eq!(adj[3].iter().sum::<f64>(), 0.0);
        assert!(parse_edge_list("0 5", Some(3)).is_err());
        assert!(parse_edge_list("0 x", None).is_err());
        assert!(parse_edge_list("1 1", None).is_err());
    }

    proptest! {
        #[test]
        fn kernel_distance_symmetric(seed in 0u64..50) {
            let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![((i as u64 + seed) as f64).sin(), (i as f64 * 0.7).cos()]).collect();
            let k = gram_matrix(&pts, |x, y| rbf_kernel(x, y, 0.8)).unwrap();
            for i in 0..6 {
                prop_assert_eq!(kernel_distance(&k, i, i).unwrap(), 0.0);
                for j in 0..6 {
                    prop_assert_eq!(kernel_distance(&k, i, j).unwrap(), kernel_distance(&k, j, i).unwrap());
                    for l in 0..6 {
                        let (a, b, c) = (kernel_distance(&k, i, j).unwrap(), kernel_distance(&k, j, l).unwrap(), kernel_distance(&k, i, l).unwrap());
                        prop_assert!(c <= a + b + 1e-12);
                    }
                }
            }
        }
    }
}
