//! Legendre polynomials on the reference interval `[-1, 1]` and Gauss-Legendre
//! quadrature.
//!
//! DG functions are stored as modal Legendre coefficients. Orthogonality,
//! `∫ P_j P_k = 2/(2k+1) δ_jk`, keeps mass matrices diagonal and makes interval
//! L² projections a single quadrature sweep.

use crate::error::{Error, Result};

fn check_reference_point(xi: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!(
            "reference point {xi} outside [-1, 1]"
        )));
    }
    Ok(())
}

/// `P_k(xi)` by the three-term recurrence.
pub fn legendre_eval(k: usize, xi: f64) -> Result<f64> {
    check_reference_point(xi)?;
    let mut vals = vec![0.0; k + 1];
    legendre_values(xi, &mut vals);
    Ok(vals[k])
}

/// `P_k'(xi)`.
pub fn legendre_deriv(k: usize, xi: f64) -> Result<f64> {
    check_reference_point(xi)?;
    let mut vals = vec![0.0; k + 1];
    let mut ders = vec![0.0; k + 1];
    legendre_values_and_derivs(xi, &mut vals, &mut ders);
    Ok(ders[k])
}

/// Fills `out[k] = P_k(xi)` for `k < out.len()`. No domain check.
pub fn legendre_values(xi: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n == 1 {
        return;
    }
    out[1] = xi;
    for k in 1..n - 1 {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * xi * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Fills values and first derivatives. Uses `P_{k+1}' = P_{k-1}' + (2k+1) P_k`,
/// which stays valid at the endpoints `xi = ±1`.
pub fn legendre_values_and_derivs(xi: f64, vals: &mut [f64], ders: &mut [f64]) {
    legendre_values(xi, vals);
    let n = ders.len();
    if n == 0 {
        return;
    }
    ders[0] = 0.0;
    if n == 1 {
        return;
    }
    ders[1] = 1.0;
    for k in 1..n - 1 {
        ders[k + 1] = ders[k - 1] + (2.0 * k as f64 + 1.0) * vals[k];
    }
}

/// A quadrature rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `q`-point Gauss-Legendre rule, exact for polynomials of degree `2q - 1`.
    pub fn gauss(q: usize) -> Result<Self> {
        gauss_rule(q)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫_{-1}^{1} f(ξ) dξ` approximated by the rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre nodes (strictly increasing, exactly mirror-symmetric) and weights.
pub fn gauss_rule(q: usize) -> Result<QuadratureRule> {
    if q == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one point".into(),
        ));
    }
    let mut points = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let mut vals = vec![0.0; q + 1];
    let mut ders = vec![0.0; q + 1];
    let qf = q as f64;
    // Roots in the upper half, mirrored into the lower half.
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        for _ in 0..100 {
            legendre_values_and_derivs(x, &mut vals, &mut ders);
            let dx = vals[q] / ders[q];
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        legendre_values_and_derivs(x, &mut vals, &mut ders);
        let w = 2.0 / ((1.0 - x * x) * ders[q] * ders[q]);
        let hi = q - 1 - i;
        if hi == i {
            // odd q: middle node
            points[i] = 0.0;
            weights[i] = w;
        } else {
            points[hi] = x;
            points[i] = -x;
            weights[hi] = w;
            weights[i] = w;
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Legendre basis of degree `r` tabulated at the nodes of a quadrature rule.
///
/// This bundles everything the per-interval DG assembly needs: basis values and
/// derivatives at quadrature nodes, endpoint values, and the stiffness matrix
/// `S[j][k] = ∫ P_k' P_j dξ`.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    order: usize,
    quad: QuadratureRule,
    /// `values[q * (r+1) + k] = P_k(ξ_q)`
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// `stiffness[j * (r+1) + k] = ∫ P_k' P_j`
    stiffness: Vec<f64>,
}

impl ReferenceBasis {
    /// Basis of degree `order` with the default rule of `order + 3` Gauss points.
    pub fn new(order: usize) -> Self {
        Self::with_quadrature(order, default_quad_points(order))
            .expect("default quadrature point count is positive")
    }

    pub fn with_quadrature(order: usize, q: usize) -> Result<Self> {
        if q < order + 1 {
            return Err(Error::InvalidArgument(format!(
                "{q} quadrature points cannot integrate degree-{order} mass terms exactly"
            )));
        }
        let quad = gauss_rule(q)?;
        let nb = order + 1;
        let mut values = vec![0.0; q * nb];
        let mut derivs = vec![0.0; q * nb];
        for (i, &x) in quad.points().iter().enumerate() {
            legendre_values_and_derivs(
                x,
                &mut values[i * nb..(i + 1) * nb],
                &mut derivs[i * nb..(i + 1) * nb],
            );
        }
        let mut stiffness = vec![0.0; nb * nb];
        for j in 0..nb {
            for k in 0..nb {
                stiffness[j * nb + k] = (0..q)
                    .map(|i| quad.weights()[i] * derivs[i * nb + k] * values[i * nb + j])
                    .sum();
            }
        }
        Ok(Self {
            order,
            quad,
            values,
            derivs,
            stiffness,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_basis(&self) -> usize {
        self.order + 1
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn n_points(&self) -> usize {
        self.quad.len()
    }

    /// `P_k(ξ_q)`
    #[inline]
    pub fn value(&self, q: usize, k: usize) -> f64 {
        self.values[q * (self.order + 1) + k]
    }

    /// `P_k'(ξ_q)`
    #[inline]
    pub fn deriv(&self, q: usize, k: usize) -> f64 {
        self.derivs[q * (self.order + 1) + k]
    }

    /// `∫ P_k' P_j dξ`
    #[inline]
    pub fn stiffness(&self, j: usize, k: usize) -> f64 {
        self.stiffness[j * (self.order + 1) + k]
    }

    /// `P_k(-1) = (-1)^k`
    #[inline]
    pub fn left_value(k: usize) -> f64 {
        if k % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `∫ P_k² dξ = 2/(2k+1)`
    #[inline]
    pub fn mass(k: usize) -> f64 {
        2.0 / (2.0 * k as f64 + 1.0)
    }
}

pub fn default_quad_points(order: usize) -> usize {
    order + 3
}

/// `r + 1` equidistant points on `[-1, 1]` including both endpoints; the
/// midpoint when `r = 0`.
pub fn equidistant_points(r: usize) -> Vec<f64> {
    if r == 0 {
        return vec![0.0];
    }
    (0..=r).map(|i| -1.0 + 2.0 * i as f64 / r as f64).collect()
}
