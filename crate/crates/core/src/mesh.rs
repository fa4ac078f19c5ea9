//! Time partitions and piecewise-polynomial (DG) functions on them.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::basis::{equidistant_points, legendre_values, legendre_values_and_derivs, QuadratureRule, ReferenceBasis};
use crate::error::{Error, Result};

/// A partition `0 = t_0 < t_1 < ... < t_N = T` of the time horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("partition needs at least one interval".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidArgument("partition must start at t = 0".into()));
        }
        if !nodes.iter().all(|t| t.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("partition nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// `N` equal intervals on `[0, T]`, `t_n = nT/N`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "uniform partition needs T > 0 and N >= 1 (got T = {horizon}, N = {n})"
            )));
        }
        let nodes = (0..=n).map(|i| if i == n { horizon } else { i as f64 * horizon / n as f64 }).collect();
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Bounds of the zero-based interval `n`, i.e. `I_{n+1} = (t_n, t_{n+1})`.
    pub fn interval(&self, n: usize) -> (f64, f64) {
        (self.nodes[n], self.nodes[n + 1])
    }

    pub fn step(&self, n: usize) -> f64 {
        self.nodes[n + 1] - self.nodes[n]
    }

    /// `h = max h_n`
    pub fn max_step(&self) -> f64 {
        (0..self.len()).map(|n| self.step(n)).fold(0.0, f64::max)
    }

    /// Maps reference `ξ ∈ [-1, 1]` to time on interval `n`.
    #[inline]
    pub fn to_time(&self, n: usize, xi: f64) -> f64 {
        let (a, b) = self.interval(n);
        a + 0.5 * (xi + 1.0) * (b - a)
    }

    #[inline]
    pub fn to_reference(&self, n: usize, t: f64) -> f64 {
        let (a, b) = self.interval(n);
        (2.0 * (t - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
    }

    /// Interval containing `t`. At an interior node `side` picks the interval
    /// to the left or right; at `t = 0` and `t = T` the only adjacent interval
    /// is returned regardless of `side`. Times within a few ulps of a node
    /// count as that node.
    pub fn locate(&self, t: f64, side: Side) -> Result<usize> {
        let horizon = self.horizon();
        let tol = 16.0 * f64::EPSILON * horizon;
        if !(t >= -tol && t <= horizon + tol) {
            return Err(Error::Domain(format!("time {t} outside [0, {horizon}]")));
        }
        let n = self.len();
        let idx = match side {
            // last node <= t
            Side::Right => self.nodes.partition_point(|&x| x <= t + tol).saturating_sub(1),
            // first node >= t, minus one
            Side::Left => self.nodes.partition_point(|&x| x < t - tol).saturating_sub(1),
        };
        Ok(idx.min(n - 1))
    }

    /// The partition `s_j = T - t_{N-j}` traversed backwards in time.
    pub fn reversed(&self) -> Self {
        let t = self.horizon();
        let n = self.len();
        let nodes = (0..=n)
            .map(|j| match j {
                0 => 0.0,
                j if j == n => t,
                j => t - self.nodes[n - j],
            })
            .collect();
        Self { nodes }
    }
}

/// Which one-sided limit to take at a partition node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Values of a vector field at every quadrature point of a partition.
///
/// Layout: `data[((n * n_points) + q) * dim + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField {
    n_intervals: usize,
    n_points: usize,
    dim: usize,
    data: Vec<f64>,
}

impl QuadField {
    pub fn zeros(n_intervals: usize, n_points: usize, dim: usize) -> Self {
        Self {
            n_intervals,
            n_points,
            dim,
            data: vec![0.0; n_intervals * n_points * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn at(&self, n: usize, q: usize) -> &[f64] {
        let s = (n * self.n_points + q) * self.dim;
        &self.data[s..s + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, n: usize, q: usize) -> &mut [f64] {
        let s = (n * self.n_points + q) * self.dim;
        &mut self.data[s..s + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ a·b dt` by the quadrature the field was sampled with.
    pub fn inner(&self, other: &QuadField, partition: &Partition, quad: &QuadratureRule) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "field shapes differ");
        let mut total = 0.0;
        for n in 0..self.n_intervals {
            let half = 0.5 * partition.step(n);
            for (q, &w) in quad.weights().iter().enumerate() {
                let dot: f64 = self.at(n, q).iter().zip(other.at(n, q)).map(|(a, b)| a * b).sum();
                total += half * w * dot;
            }
        }
        total
    }
}

/// A vector-valued piecewise polynomial of degree `r` on a [`Partition`],
/// stored as modal Legendre coefficients per interval.
///
/// Coefficient layout: `coeffs[((n * (r+1)) + k) * dim + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DGFunction {
    partition: Arc<Partition>,
    degree: usize,
    dim: usize,
    coeffs: Vec<f64>,
}

impl DGFunction {
    pub fn zeros(partition: Arc<Partition>, degree: usize, dim: usize) -> Self {
        let len = partition.len() * (degree + 1) * dim;
        Self {
            partition,
            degree,
            dim,
            coeffs: vec![0.0; len],
        }
    }

    pub fn from_coeffs(partition: Arc<Partition>, degree: usize, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expect = partition.len() * (degree + 1) * dim;
        if coeffs.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "expected {expect} coefficients for N = {}, r = {degree}, d = {dim}, got {}",
                partition.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            partition,
            degree,
            dim,
            coeffs,
        })
    }

    pub fn constant(partition: Arc<Partition>, degree: usize, value: &[f64]) -> Self {
        let dim = value.len();
        let mut f = Self::zeros(partition, degree, dim);
        for n in 0..f.partition.len() {
            f.interval_coeffs_mut(n)[..dim].copy_from_slice(value);
        }
        f
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// The `(r+1) * d` coefficients of interval `n`.
    pub fn interval_coeffs(&self, n: usize) -> &[f64] {
        let len = (self.degree + 1) * self.dim;
        &self.coeffs[n * len..(n + 1) * len]
    }

    pub fn interval_coeffs_mut(&mut self, n: usize) -> &mut [f64] {
        let len = (self.degree + 1) * self.dim;
        &mut self.coeffs[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn coeff(&self, n: usize, k: usize, i: usize) -> f64 {
        self.coeffs[(n * (self.degree + 1) + k) * self.dim + i]
    }

    /// Value at reference point `xi` of interval `n`.
    pub fn eval_local(&self, n: usize, xi: f64, out: &mut [f64]) {
        let nb = self.degree + 1;
        let mut p = [0.0; 16];
        let mut heap;
        let p: &mut [f64] = if nb <= 16 {
            &mut p[..nb]
        } else {
            heap = vec![0.0; nb];
            &mut heap
        };
        legendre_values(xi, p);
        let c = self.interval_coeffs(n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, pk) in p.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += c[k * self.dim + i] * pk;
            }
        }
    }

    /// One-sided value at time `t`.
    pub fn eval(&self, t: f64, side: Side) -> Result<Vec<f64>> {
        let n = self.partition.locate(t, side)?;
        let mut out = vec![0.0; self.dim];
        self.eval_local(n, self.partition.to_reference(n, t).clamp(-1.0, 1.0), &mut out);
        Ok(out)
    }

    /// `φ_n^-`: left limit at node `t_n`, `1 <= n <= N`.
    pub fn left_trace(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let c = self.interval_coeffs(n - 1);
        for k in 0..=self.degree {
            for i in 0..self.dim {
                out[i] += c[k * self.dim + i];
            }
        }
        out
    }

    /// `φ_n^+`: right limit at node `t_n`, `0 <= n <= N-1`.
    pub fn right_trace(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let c = self.interval_coeffs(n);
        for k in 0..=self.degree {
            let s = ReferenceBasis::left_value(k);
            for i in 0..self.dim {
                out[i] += s * c[k * self.dim + i];
            }
        }
        out
    }

    /// `[φ]_n = φ_n^+ - φ_n^-` at an interior node, `1 <= n <= N-1`.
    pub fn jump(&self, n: usize) -> Vec<f64> {
        assert!(n >= 1 && n < self.partition.len(), "jump is defined at interior nodes only");
        self.right_trace(n)
            .iter()
            .zip(self.left_trace(n))
            .map(|(p, m)| p - m)
            .collect()
    }

    /// Values at every quadrature point of `basis`.
    pub fn sample(&self, basis: &ReferenceBasis) -> QuadField {
        let n_int = self.partition.len();
        let nq = basis.n_points();
        let mut field = QuadField::zeros(n_int, nq, self.dim);
        if basis.order() >= self.degree {
            // tabulated values are reusable
            for n in 0..n_int {
                let c = self.interval_coeffs(n);
                for q in 0..nq {
                    let out = field.at_mut(n, q);
                    for k in 0..=self.degree {
                        let pk = basis.value(q, k);
                        for i in 0..self.dim {
                            out[i] += c[k * self.dim + i] * pk;
                        }
                    }
                }
            }
        } else {
            for n in 0..n_int {
                for (q, &xi) in basis.quadrature().points().iter().enumerate() {
                    self.eval_local(n, xi, field.at_mut(n, q));
                }
            }
        }
        field
    }

    /// `W(s) = φ(T - s)` on the reversed partition.
    pub fn reversed(&self) -> Self {
        let n_int = self.partition.len();
        let mut out = Self::zeros(Arc::new(self.partition.reversed()), self.degree, self.dim);
        for n in 0..n_int {
            let src = self.interval_coeffs(n_int - 1 - n);
            let dst = out.interval_coeffs_mut(n);
            for k in 0..=self.degree {
                let s = ReferenceBasis::left_value(k);
                for i in 0..self.dim {
                    dst[k * self.dim + i] = s * src[k * self.dim + i];
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &Self) {
        assert!(
            self.degree == other.degree && self.dim == other.dim && *self.partition == *other.partition,
            "DG functions live in different spaces"
        );
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        self.check_compatible(other);
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + alpha * b).collect();
        Self {
            partition: self.partition.clone(),
            degree: self.degree,
            dim: self.dim,
            coeffs,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            partition: self.partition.clone(),
            degree: self.degree,
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// Exact `L²(0,T)` inner product from the modal coefficients.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_compatible(other);
        let mut total = 0.0;
        for n in 0..self.partition.len() {
            let half = 0.5 * self.partition.step(n);
            let (a, b) = (self.interval_coeffs(n), other.interval_coeffs(n));
            for k in 0..=self.degree {
                let m = ReferenceBasis::mass(k);
                for i in 0..self.dim {
                    total += half * m * a[k * self.dim + i] * b[k * self.dim + i];
                }
            }
        }
        total
    }

    /// Exact `L²(0,T)` norm.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Interval-wise Gauss approximation of `‖F - ref‖_{L²(0,T)}`.
    pub fn l2_error<R>(&self, reference: R, quad: &QuadratureRule) -> f64
    where
        R: Fn(f64) -> Vec<f64>,
    {
        let mut val = vec![0.0; self.dim];
        let mut total = 0.0;
        for n in 0..self.partition.len() {
            let half = 0.5 * self.partition.step(n);
            for (&xi, &w) in quad.points().iter().zip(quad.weights()) {
                self.eval_local(n, xi, &mut val);
                let exact = reference(self.partition.to_time(n, xi));
                let e2: f64 = val.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum();
                total += half * w * e2;
            }
        }
        total.sqrt()
    }

    /// Discrete L² error on `r + 1` equidistant points per interval:
    /// `sqrt(Σ_n h_n Σ_p |F(t_{n,p}) - ref(t_{n,p})|²)`.
    ///
    /// This is the metric the convergence tables report. Endpoint samples use
    /// the one-sided limit from inside the interval, which is why the reference
    /// receives a [`Side`].
    pub fn nodal_l2_error<R>(&self, reference: R) -> f64
    where
        R: Fn(f64, Side) -> Vec<f64>,
    {
        let pts = equidistant_points(self.degree);
        let last = pts.len() - 1;
        let mut val = vec![0.0; self.dim];
        let mut total = 0.0;
        for n in 0..self.partition.len() {
            let h = self.partition.step(n);
            let mut sum = 0.0;
            for (p, &xi) in pts.iter().enumerate() {
                self.eval_local(n, xi, &mut val);
                let side = if p == last && last > 0 { Side::Left } else { Side::Right };
                let t = if p == 0 && last > 0 {
                    self.partition.interval(n).0
                } else if p == last && last > 0 {
                    self.partition.interval(n).1
                } else {
                    self.partition.to_time(n, xi)
                };
                let exact = reference(t, side);
                sum += val.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            total += h * sum;
        }
        total.sqrt()
    }

    /// Interval-wise L² projection of `f` onto degree `degree`:
    /// `c_k = (2k+1)/2 ∫ f P_k dξ` by `quad`.
    pub fn project_l2<F>(f: F, partition: Arc<Partition>, degree: usize, quad: &QuadratureRule) -> Self
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let nb = degree + 1;
        let mut p = vec![0.0; nb];
        let first = f(partition.to_time(0, quad.points()[0]));
        let dim = first.len();
        let mut out = Self::zeros(partition.clone(), degree, dim);
        for n in 0..partition.len() {
            let dst = out.interval_coeffs_mut(n);
            for (&xi, &w) in quad.points().iter().zip(quad.weights()) {
                let v = f(partition.to_time(n, xi));
                legendre_values(xi, &mut p);
                for k in 0..nb {
                    let s = w * p[k] / ReferenceBasis::mass(k);
                    for i in 0..dim {
                        dst[k * dim + i] += s * v[i];
                    }
                }
            }
        }
        out
    }

    /// Projection of values already sampled at the nodes of `basis`.
    pub fn project_field(field: &QuadField, partition: Arc<Partition>, degree: usize, basis: &ReferenceBasis) -> Self {
        let dim = field.dim();
        let nb = degree + 1;
        let quad = basis.quadrature();
        let mut p = vec![0.0; nb];
        let mut out = Self::zeros(partition, degree, dim);
        for n in 0..field.n_intervals() {
            let dst = out.interval_coeffs_mut(n);
            for (q, (&xi, &w)) in quad.points().iter().zip(quad.weights()).enumerate() {
                legendre_values(xi, &mut p);
                let v = field.at(n, q);
                for k in 0..nb {
                    let s = w * p[k] / ReferenceBasis::mass(k);
                    for i in 0..dim {
                        dst[k * dim + i] += s * v[i];
                    }
                }
            }
        }
        out
    }

    /// Total variation `Σ_n ∫_{I_n} |φ'| + Σ |[φ]_n|`, summed over components.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for i in 0..self.dim {
            for n in 0..self.partition.len() {
                tv += self.interval_variation(n, i);
            }
            for n in 1..self.partition.len() {
                tv += self.jump(n)[i].abs();
            }
        }
        tv
    }

    /// `∫_{-1}^{1} |p'(ξ)| dξ` for component `i` on interval `n`, computed as the
    /// sum of |increments| between sign changes of `p'`.
    fn interval_variation(&self, n: usize, i: usize) -> f64 {
        if self.degree == 0 {
            return 0.0;
        }
        let nb = self.degree + 1;
        let c = self.interval_coeffs(n);
        let mut vals = vec![0.0; nb];
        let mut ders = vec![0.0; nb];
        let mut eval = |xi: f64| -> (f64, f64) {
            legendre_values_and_derivs(xi, &mut vals, &mut ders);
            let v = (0..nb).map(|k| c[k * self.dim + i] * vals[k]).sum();
            let d = (0..nb).map(|k| c[k * self.dim + i] * ders[k]).sum();
            (v, d)
        };
        let samples = 32 * self.degree;
        let mut breaks = vec![-1.0];
        let mut prev_x = -1.0;
        let mut prev_d = eval(-1.0).1;
        for s in 1..=samples {
            let x = -1.0 + 2.0 * s as f64 / samples as f64;
            let d = eval(x).1;
            if prev_d * d < 0.0 {
                // bisection for the root of p'
                let (mut a, mut b, mut da) = (prev_x, x, prev_d);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let dm = eval(m).1;
                    if da * dm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        da = dm;
                    }
                }
                breaks.push(0.5 * (a + b));
            }
            prev_x = x;
            prev_d = d;
        }
        breaks.push(1.0);
        breaks.windows(2).map(|w| (eval(w[1]).0 - eval(w[0]).0).abs()).sum()
    }

    /// Writes the plain-text dump: `N,r,d` header, the node list, then one row
    /// of modal coefficients per interval.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n_int = self.partition.len();
        writeln!(w, "N,r,d")?;
        writeln!(w, "{},{},{}", n_int, self.degree, self.dim)?;
        let mut line = String::from("nodes");
        for t in self.partition.nodes() {
            write!(line, ",{t:e}").unwrap();
        }
        writeln!(w, "{line}")?;
        let mut header = String::from("interval");
        for k in 0..=self.degree {
            for i in 1..=self.dim {
                write!(header, ",c{k}_{i}").unwrap();
            }
        }
        writeln!(w, "{header}")?;
        for n in 0..n_int {
            let mut row = n.to_string();
            for c in self.interval_coeffs(n) {
                write!(row, ",{c:e}").unwrap();
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} line")))?
                .map_err(Error::from)
        };
        let parse_f = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let parse_u = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));

        if next("header")?.trim() != "N,r,d" {
            return Err(Error::Parse("expected `N,r,d` header".into()));
        }
        let dims = next("dimensions")?;
        let dims: Vec<usize> = dims.split(',').map(parse_u).collect::<Result<_>>()?;
        let [n_int, degree, dim] = dims[..] else {
            return Err(Error::Parse("dimension line needs three fields".into()));
        };
        let nodes_line = next("nodes")?;
        let mut fields = nodes_line.split(',');
        if fields.next() != Some("nodes") {
            return Err(Error::Parse("expected node list".into()));
        }
        let nodes: Vec<f64> = fields.map(parse_f).collect::<Result<_>>()?;
        if nodes.len() != n_int + 1 {
            return Err(Error::Parse(format!("expected {} nodes, got {}", n_int + 1, nodes.len())));
        }
        let partition = Arc::new(Partition::new(nodes)?);
        next("coefficient header")?;
        let mut coeffs = Vec::with_capacity(n_int * (degree + 1) * dim);
        for n in 0..n_int {
            let row = next("coefficient row")?;
            let mut fields = row.split(',');
            let idx = parse_u(fields.next().unwrap_or(""))?;
            if idx != n {
                return Err(Error::Parse(format!("row {n} labelled {idx}")));
            }
            for f in fields {
                coeffs.push(parse_f(f)?);
            }
        }
        Self::from_coeffs(partition, degree, dim, coeffs)
    }
}
