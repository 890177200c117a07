//! Deterministic quadrature grids for low-dimensional integrals.
//!
//! Two rules are provided: a tensor-product Gauss-Hermite rule whose
//! weights are rescaled to integrate against Lebesgue measure, and a
//! midpoint rule on a rectangular box. Both are exercised as exact
//! oracles by the test suites, so construction is deterministic.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    GaussHermiteTensor,
    UniformGrid,
}

/// Nodes and positive weights for ∫ f(y) dy over ℝ^d (Gauss-Hermite) or a box.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub kind: GridKind,
    dim: usize,
    /// Flattened nodes, `len = count * dim`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        (0..self.len()).map(move |i| (self.node(i), self.weights[i]))
    }

    /// ∫ f dy by direct summation.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }
}

/// One-dimensional Gauss-Hermite nodes/weights for weight e^{-x^2},
/// by Golub-Welsch: eigendecomposition of the Jacobi matrix (zero
/// diagonal, off-diagonal sqrt(k/2)) with a tridiagonal QL sweep.
fn gauss_hermite_1d(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2);
    let n = order;
    let d = vec![0.0f64; n];
    let e: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (nodes, first_components) = tridiag_eigen(&d, &e);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let weights: Vec<f64> = first_components.iter().map(|c| sqrt_pi * c * c).collect();
    (nodes, weights)
}

/// Implicit-shift QL for a symmetric tridiagonal matrix, returning the
/// eigenvalues in ascending order alongside the first component of each
/// normalised eigenvector (all Golub-Welsch needs).
fn tridiag_eigen(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    // Row 0 of the accumulated orthogonal transform.
    let mut z0 = vec![0.0f64; n];
    z0[0] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Accumulate row 0 of the transform only.
                f = z0[i + 1];
                z0[i + 1] = s * z0[i] + c * f;
                z0[i] = c * z0[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    // Sort ascending, carrying the first components along.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let nodes: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let firsts: Vec<f64> = idx.iter().map(|&i| z0[i]).collect();
    (nodes, firsts)
}

/// Tensor-product Gauss-Hermite grid rescaled to Lebesgue measure, with
/// per-axis affine map y = center + scale * x.
///
/// At `scale = sqrt(2)` the standard normal is integrated exactly at any
/// order, which is the default used by [`build_grid`].
pub fn build_gauss_hermite(dimension: usize, order: usize, center: &[f64], scale: f64) -> Result<QuadratureGrid> {
    if dimension == 0 || dimension > 3 {
        return Err(Error::Quadrature(format!(
            "gauss-hermite tensor grid supports d in 1..=3, got {dimension}"
        )));
    }
    if order < 2 {
        return Err(Error::Quadrature("per-dimension order must be >= 2".into()));
    }
    if center.len() != dimension {
        return Err(Error::Quadrature("center length must match dimension".into()));
    }
    let (x, w) = gauss_hermite_1d(order);
    // Lebesgue rescaling: ∫f(y)dy ≈ Σ scale * w_i e^{x_i^2} f(center + scale x_i).
    let w1: Vec<f64> = x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| scale * wi * (xi * xi).exp())
        .collect();
    let mut nodes = Vec::with_capacity(order.pow(dimension as u32) * dimension);
    let mut weights = Vec::with_capacity(order.pow(dimension as u32));
    let mut idx = vec![0usize; dimension];
    loop {
        let mut wt = 1.0;
        for (d, &k) in idx.iter().enumerate() {
            nodes.push(center[d] + scale * x[k]);
            wt *= w1[k];
        }
        weights.push(wt);
        // Odometer increment.
        let mut d = dimension;
        loop {
            if d == 0 {
                let log_weights = weights.iter().map(|w| w.ln()).collect();
                return Ok(QuadratureGrid {
                    kind: GridKind::GaussHermiteTensor,
                    dim: dimension,
                    nodes,
                    weights,
                    log_weights,
                });
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < order {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Midpoint rule on the box `[lo_d, hi_d]` with `points` cells per axis.
pub fn build_uniform(dimension: usize, points: usize, lo: &[f64], hi: &[f64]) -> Result<QuadratureGrid> {
    if dimension == 0 || dimension > 3 {
        return Err(Error::Quadrature(format!(
            "uniform grid supports d in 1..=3, got {dimension}"
        )));
    }
    if points < 2 {
        return Err(Error::Quadrature("points per dimension must be >= 2".into()));
    }
    if lo.len() != dimension || hi.len() != dimension {
        return Err(Error::Quadrature("box bounds must match dimension".into()));
    }
    for d in 0..dimension {
        if !(hi[d] > lo[d]) {
            return Err(Error::Quadrature("box must have positive extent".into()));
        }
    }
    let h: Vec<f64> = (0..dimension).map(|d| (hi[d] - lo[d]) / points as f64).collect();
    let cell: f64 = h.iter().product();
    let count = points.pow(dimension as u32);
    let mut nodes = Vec::with_capacity(count * dimension);
    let weights = vec![cell; count];
    let mut idx = vec![0usize; dimension];
    'outer: loop {
        for (d, &k) in idx.iter().enumerate() {
            nodes.push(lo[d] + (k as f64 + 0.5) * h[d]);
        }
        let mut d = dimension;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
        }
    }
    let log_weights = weights.iter().map(|w| w.ln()).collect();
    Ok(QuadratureGrid {
        kind: GridKind::UniformGrid,
        dim: dimension,
        nodes,
        weights,
        log_weights,
    })
}

/// One-dimensional midpoint rule under the substitution y = scale·sinh(u)
/// with u uniform on [-extent, extent]. Node density stays fine near the
/// origin while the range grows like scale·e^extent, which keeps
/// heavy-tailed (polynomial-decay) integrands accurate with few nodes.
pub fn build_sinh(points: usize, scale: f64, extent: f64) -> Result<QuadratureGrid> {
    if points < 2 {
        return Err(Error::Quadrature("points must be >= 2".into()));
    }
    if !(scale > 0.0) || !(extent > 0.0) {
        return Err(Error::Quadrature("scale and extent must be positive".into()));
    }
    let du = 2.0 * extent / points as f64;
    let mut nodes = Vec::with_capacity(points);
    let mut weights = Vec::with_capacity(points);
    for k in 0..points {
        let u = -extent + (k as f64 + 0.5) * du;
        nodes.push(scale * u.sinh());
        weights.push(du * scale * u.cosh());
    }
    let log_weights = weights.iter().map(|w| w.ln()).collect();
    Ok(QuadratureGrid {
        kind: GridKind::UniformGrid,
        dim: 1,
        nodes,
        weights,
        log_weights,
    })
}

/// Builds a grid with the stock defaults: Gauss-Hermite centred at the
/// origin with scale sqrt(2), or a uniform grid on [-10, 10]^d.
pub fn build_grid(kind: GridKind, dimension: usize, order: usize) -> Result<QuadratureGrid> {
    match kind {
        GridKind::GaussHermiteTensor => {
            build_gauss_hermite(dimension, order, &vec![0.0; dimension], std::f64::consts::SQRT_2)
        }
        GridKind::UniformGrid => {
            build_uniform(dimension, order, &vec![-10.0; dimension], &vec![10.0; dimension])
        }
    }
}
