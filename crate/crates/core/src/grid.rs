//! Periodic strip `(0, lx) × (0, ly)`: periodic in `x`, with the two flat
//! boundary components `y = 0` and `y = ly`.
//!
//! Nodes are stored row-major (`index = j * nx + i`); rows `j = 0` and
//! `j = ny − 1` are the boundary. All integrals are mass-lumped: a bulk node
//! carries `hx·hy` (half that on a boundary row) and a boundary node carries
//! `hx`. The gradient uses forward differences on edges whose measures make
//! `Σ (Δ_h f) g μ = −Σ ∇f·∇g μ_e` hold exactly.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative residual of the conjugate-gradient solve behind [`StripGrid::neumann_solve`].
pub const CG_TOL: f64 = 1e-12;

/// Mean-value threshold accepted by [`StripGrid::neumann_solve`].
pub const MEAN_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid: {0}")]
    Invalid(String),
    #[error("Neumann datum has mean {mean:e}, expected zero")]
    NonzeroMean { mean: f64 },
    #[error("conjugate gradient stalled at relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("field has {got} values, grid expects {expected}")]
    Shape { got: usize, expected: usize },
}

/// Nodal values on the whole grid (`nx · ny` entries, row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkField(pub Vec<f64>);

/// Nodal values on both boundary components: bottom row first, then top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField(pub Vec<f64>);

macro_rules! field_ops {
    ($t:ident) => {
        impl $t {
            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
                $t(self.0.iter().map(|&v| f(v)).collect())
            }

            pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
                debug_assert_eq!(self.0.len(), other.0.len());
                $t(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.zip_map(other, |a, b| a - b)
            }

            pub fn add(&self, other: &Self) -> Self {
                self.zip_map(other, |a, b| a + b)
            }

            pub fn scale(&self, s: f64) -> Self {
                self.map(|v| s * v)
            }

            /// `α·self + β·other`.
            pub fn lincomb(&self, alpha: f64, other: &Self, beta: f64) -> Self {
                self.zip_map(other, |a, b| alpha * a + beta * b)
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }
        }
    };
}

field_ops!(BulkField);
field_ops!(BoundaryField);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nx: 64,
            ny: 32,
            lx: 1.0,
            ly: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    bulk_measure: Vec<f64>,
}

impl StripGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, GridError> {
        if nx < 4 || ny < 3 {
            return Err(GridError::Invalid(format!("need nx >= 4 and ny >= 3, got {nx} x {ny}")));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(GridError::Invalid(format!("lengths must be positive, got {lx} x {ly}")));
        }
        let hx = lx / nx as f64;
        let hy = ly / (ny - 1) as f64;
        let mut bulk_measure = vec![hx * hy; nx * ny];
        for i in 0..nx {
            bulk_measure[i] *= 0.5;
            bulk_measure[(ny - 1) * nx + i] *= 0.5;
        }
        Ok(StripGrid {
            nx,
            ny,
            lx,
            ly,
            hx,
            hy,
            bulk_measure,
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self, GridError> {
        StripGrid::new(spec.nx, spec.ny, spec.lx, spec.ly)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            lx: self.lx,
            ly: self.ly,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn boundary_count(&self) -> usize {
        2 * self.nx
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn bulk_measure(&self) -> &[f64] {
        &self.bulk_measure
    }

    /// Lumped measure of one boundary node.
    pub fn surface_measure(&self) -> f64 {
        self.hx
    }

    /// Bulk node index of boundary node `k` (bottom row `k < nx`, then top).
    #[inline]
    pub fn boundary_node(&self, k: usize) -> usize {
        if k < self.nx {
            k
        } else {
            (self.ny - 1) * self.nx + (k - self.nx)
        }
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        let j = n / self.nx;
        j == 0 || j == self.ny - 1
    }

    /// Boundary index of bulk node `n`, if it lies on Γ.
    pub fn boundary_index(&self, n: usize) -> Option<usize> {
        let (i, j) = (n % self.nx, n / self.nx);
        if j == 0 {
            Some(i)
        } else if j == self.ny - 1 {
            Some(self.nx + i)
        } else {
            None
        }
    }

    pub fn bulk_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> BulkField {
        let mut v = Vec::with_capacity(self.node_count());
        for j in 0..self.ny {
            for i in 0..self.nx {
                v.push(f(self.x(i), self.y(j)));
            }
        }
        BulkField(v)
    }

    pub fn boundary_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        let mut v = Vec::with_capacity(self.boundary_count());
        for y in [0.0, self.ly] {
            for i in 0..self.nx {
                v.push(f(self.x(i), y));
            }
        }
        BoundaryField(v)
    }

    pub fn bulk_constant(&self, c: f64) -> BulkField {
        BulkField(vec![c; self.node_count()])
    }

    pub fn boundary_constant(&self, c: f64) -> BoundaryField {
        BoundaryField(vec![c; self.boundary_count()])
    }

    pub fn check_bulk(&self, f: &BulkField) -> Result<(), GridError> {
        if f.len() != self.node_count() {
            return Err(GridError::Shape {
                got: f.len(),
                expected: self.node_count(),
            });
        }
        Ok(())
    }

    pub fn check_boundary(&self, b: &BoundaryField) -> Result<(), GridError> {
        if b.len() != self.boundary_count() {
            return Err(GridError::Shape {
                got: b.len(),
                expected: self.boundary_count(),
            });
        }
        Ok(())
    }

    /// Weight of the x-edge leaving a node on row `j`.
    fn x_edge_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hy / self.hx
        } else {
            self.hy / self.hx
        }
    }

    /// Stiffness product `(A f)_n = Σ_e D_e f · ∂D_e/∂f_n · μ_e`, the weak
    /// form of `−Δ` with natural (zero-flux) conditions on Γ.
    pub fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let wy = self.hx / self.hy;
        let mut out = vec![0.0; nx * ny];
        for j in 0..ny {
            let wx = self.x_edge_weight(j);
            for i in 0..nx {
                let n = j * nx + i;
                let e = j * nx + (i + 1) % nx;
                let flux = wx * (f[e] - f[n]);
                out[n] -= flux;
                out[e] += flux;
                if j + 1 < ny {
                    let up = n + nx;
                    let flux = wy * (f[up] - f[n]);
                    out[n] -= flux;
                    out[up] += flux;
                }
            }
        }
        out
    }

    /// Surface stiffness `(A_Γ b)_k`, periodic along each component.
    pub fn surface_stiffness_apply(&self, b: &[f64]) -> Vec<f64> {
        let nx = self.nx;
        let w = 1.0 / self.hx;
        let mut out = vec![0.0; 2 * nx];
        for c in 0..2 {
            for i in 0..nx {
                let k = c * nx + i;
                let e = c * nx + (i + 1) % nx;
                let flux = w * (b[e] - b[k]);
                out[k] -= flux;
                out[e] += flux;
            }
        }
        out
    }

    /// Discrete Laplacian `−M⁻¹ A f`: the 5-point stencil in the interior and
    /// the variationally consistent (zero-flux) stencil on the boundary rows.
    pub fn bulk_laplacian(&self, f: &BulkField) -> BulkField {
        let af = self.stiffness_apply(&f.0);
        BulkField(af.iter().zip(&self.bulk_measure).map(|(a, m)| -a / m).collect())
    }

    /// Periodic second difference along each boundary component.
    pub fn laplace_beltrami(&self, b: &BoundaryField) -> BoundaryField {
        let ab = self.surface_stiffness_apply(&b.0);
        let s = self.surface_measure();
        BoundaryField(ab.iter().map(|a| -a / s).collect())
    }

    pub fn trace(&self, f: &BulkField) -> BoundaryField {
        let nx = self.nx;
        let mut out = Vec::with_capacity(2 * nx);
        out.extend_from_slice(&f.0[..nx]);
        out.extend_from_slice(&f.0[(self.ny - 1) * nx..]);
        BoundaryField(out)
    }

    /// Second-order one-sided outward normal derivative.
    pub fn normal_derivative(&self, f: &BulkField) -> BoundaryField {
        let (nx, ny, hy) = (self.nx, self.ny, self.hy);
        let v = &f.0;
        let mut out = Vec::with_capacity(2 * nx);
        for i in 0..nx {
            let d = -1.5 * v[i] + 2.0 * v[nx + i] - 0.5 * v[2 * nx + i];
            out.push(-d / hy);
        }
        let top = (ny - 1) * nx;
        for i in 0..nx {
            let d = 1.5 * v[top + i] - 2.0 * v[top - nx + i] + 0.5 * v[top - 2 * nx + i];
            out.push(d / hy);
        }
        BoundaryField(out)
    }

    /// `Σ f μ`.
    pub fn integrate(&self, f: &BulkField) -> f64 {
        f.0.iter().zip(&self.bulk_measure).map(|(v, m)| v * m).sum()
    }

    /// `Σ_Γ b s`.
    pub fn integrate_boundary(&self, b: &BoundaryField) -> f64 {
        b.0.iter().sum::<f64>() * self.surface_measure()
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn mean_value(&self, f: &BulkField) -> f64 {
        self.integrate(f) / self.area()
    }

    /// Lumped L² inner product on Ω.
    pub fn inner(&self, f: &BulkField, g: &BulkField) -> f64 {
        f.0.iter()
            .zip(&g.0)
            .zip(&self.bulk_measure)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }

    pub fn inner_boundary(&self, a: &BoundaryField, b: &BoundaryField) -> f64 {
        a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum::<f64>() * self.surface_measure()
    }

    /// `Σ_e D_e f · D_e g · μ_e`.
    pub fn grad_inner(&self, f: &BulkField, g: &BulkField) -> f64 {
        let af = self.stiffness_apply(&f.0);
        af.iter().zip(&g.0).map(|(a, b)| a * b).sum()
    }

    pub fn surface_grad_inner(&self, a: &BoundaryField, b: &BoundaryField) -> f64 {
        let aa = self.surface_stiffness_apply(&a.0);
        aa.iter().zip(&b.0).map(|(x, y)| x * y).sum()
    }

    pub fn l2_norm(&self, f: &BulkField) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    pub fn l2_norm_boundary(&self, b: &BoundaryField) -> f64 {
        self.inner_boundary(b, b).max(0.0).sqrt()
    }

    /// Forward-difference gradient seminorm, summed edge by edge.
    pub fn grad_seminorm(&self, f: &BulkField) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx, self.hy);
        let v = &f.0;
        let mut acc = 0.0;
        for j in 0..ny {
            let row_measure = if j == 0 || j == ny - 1 { 0.5 * hx * hy } else { hx * hy };
            for i in 0..nx {
                let n = j * nx + i;
                let dx = (v[j * nx + (i + 1) % nx] - v[n]) / hx;
                acc += dx * dx * row_measure;
                if j + 1 < ny {
                    let dy = (v[n + nx] - v[n]) / hy;
                    acc += dy * dy * hx * hy;
                }
            }
        }
        acc.sqrt()
    }

    pub fn surface_grad_seminorm(&self, b: &BoundaryField) -> f64 {
        let nx = self.nx;
        let mut acc = 0.0;
        for c in 0..2 {
            for i in 0..nx {
                let d = (b.0[c * nx + (i + 1) % nx] - b.0[c * nx + i]) / self.hx;
                acc += d * d * self.hx;
            }
        }
        acc.sqrt()
    }

    /// `‖f‖_V = (‖f‖² + ‖∇f‖²)^½`.
    pub fn v_norm(&self, f: &BulkField) -> f64 {
        (self.l2_norm(f).powi(2) + self.grad_seminorm(f).powi(2)).sqrt()
    }

    pub fn v_norm_boundary(&self, b: &BoundaryField) -> f64 {
        (self.l2_norm_boundary(b).powi(2) + self.surface_grad_seminorm(b).powi(2)).sqrt()
    }

    pub fn norms(&self, f: &BulkField) -> BulkNorms {
        BulkNorms {
            l2: self.l2_norm(f),
            grad: self.grad_seminorm(f),
            v: self.v_norm(f),
            sup: f.max_abs(),
        }
    }

    pub fn boundary_norms(&self, b: &BoundaryField) -> BoundaryNorms {
        BoundaryNorms {
            l2: self.l2_norm_boundary(b),
            grad: self.surface_grad_seminorm(b),
            v: self.v_norm_boundary(b),
            sup: b.max_abs(),
        }
    }

    /// Solves `Σ ∇u·∇z μ_e = Σ v z μ` for all `z` with `mean(u) = 0`, by
    /// Jacobi-preconditioned conjugate gradients on the singular but
    /// consistent stiffness system.
    pub fn neumann_solve(&self, v: &BulkField) -> Result<BulkField, GridError> {
        self.check_bulk(v)?;
        let mean = self.mean_value(v);
        if mean.abs() > MEAN_ZERO_TOL {
            return Err(GridError::NonzeroMean { mean });
        }
        let n = self.node_count();
        // load vector, projected onto the range of A (Euclidean-orthogonal to constants)
        let mut b: Vec<f64> = v.0.iter().zip(&self.bulk_measure).map(|(a, m)| a * m).collect();
        let shift = b.iter().sum::<f64>() / n as f64;
        b.iter_mut().for_each(|x| *x -= shift);
        let b_norm = norm2(&b);
        let mut u = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(BulkField(u));
        }
        let diag = self.stiffness_diagonal();
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let max_iter = 20 * n + 100;
        let mut converged = false;
        for _ in 0..max_iter {
            let ap = self.stiffness_apply(&p);
            let alpha = rz / dot(&p, &ap);
            for k in 0..n {
                u[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if norm2(&r) / b_norm <= CG_TOL {
                converged = true;
                break;
            }
            for k in 0..n {
                z[k] = r[k] / diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        if !converged {
            // recompute the true residual before giving up
            let au = self.stiffness_apply(&u);
            let true_res: Vec<f64> = b.iter().zip(&au).map(|(b, a)| b - a).collect();
            let residual = norm2(&true_res) / b_norm;
            if residual > 10.0 * CG_TOL {
                return Err(GridError::NotConverged {
                    residual,
                    iterations: max_iter,
                });
            }
        }
        let mut u = BulkField(u);
        let m = self.mean_value(&u);
        u.0.iter_mut().for_each(|x| *x -= m);
        Ok(u)
    }

    fn stiffness_diagonal(&self) -> Vec<f64> {
        let mut diag = Vec::with_capacity(self.node_count());
        let wy = self.hx / self.hy;
        for j in 0..self.ny {
            let y_edges = if j == 0 || j == self.ny - 1 { 1.0 } else { 2.0 };
            let d = 2.0 * self.x_edge_weight(j) + y_edges * wy;
            diag.extend(std::iter::repeat_n(d, self.nx));
        }
        diag
    }

    /// `‖v‖_*² = ‖∇𝒩(v − v_Ω)‖² + |v_Ω|²`.
    pub fn dual_norm(&self, v: &BulkField) -> Result<f64, GridError> {
        let mean = self.mean_value(v);
        let centred = v.map(|x| x - mean);
        let u = self.neumann_solve(&centred)?;
        let grad2 = self.grad_inner(&u, &u);
        Ok((grad2.max(0.0) + mean * mean).sqrt())
    }

    /// Binary snapshot: ASCII header line `nx ny lx ly time`, then the values
    /// as little-endian `f64` in row-major order.
    pub fn write_binary<W: Write>(&self, mut out: W, f: &BulkField, time: f64) -> io::Result<()> {
        writeln!(out, "{} {} {} {} {}", self.nx, self.ny, self.lx, self.ly, time)?;
        for v in &f.0 {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// CSV snapshot with header `x,y,value`.
    pub fn write_csv<W: Write>(&self, mut out: W, f: &BulkField) -> io::Result<()> {
        writeln!(out, "x,y,value")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                writeln!(out, "{},{},{}", self.x(i), self.y(j), f.0[self.index(i, j)])?;
            }
        }
        Ok(())
    }
}

/// Reads a snapshot written by [`StripGrid::write_binary`].
pub fn read_binary(bytes: &[u8]) -> io::Result<(GridSpec, f64, BulkField)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(bad("header must be `nx ny lx ly time`"));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|_| bad("bad header number"));
    let nx: usize = parts[0].parse().map_err(|_| bad("bad nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| bad("bad ny"))?;
    let (lx, ly, time) = (parse(parts[2])?, parse(parts[3])?, parse(parts[4])?);
    let body = &bytes[nl + 1..];
    if body.len() != 8 * nx * ny {
        return Err(bad("payload length does not match header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((GridSpec { nx, ny, lx, ly }, time, BulkField(values)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BulkNorms {
    pub l2: f64,
    pub grad: f64,
    pub v: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryNorms {
    pub l2: f64,
    pub grad: f64,
    pub v: f64,
    pub sup: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> StripGrid {
        StripGrid::new(16, 9, 2.0, 1.0).unwrap()
    }

    fn lambda1(g: &StripGrid, k: f64) -> f64 {
        (2.0 - 2.0 * (2.0 * PI * k * g.hx() / g.lx()).cos()) / g.hx().powi(2)
    }

    #[test]
    fn measures_sum_to_area() {
        let g = StripGrid::new(12, 7, 1.3, 0.7).unwrap();
        let total: f64 = g.bulk_measure().iter().sum();
        assert!((total - 1.3 * 0.7).abs() < 1e-12);
        let bottom = g.integrate_boundary(&BoundaryField([vec![1.0; 12], vec![0.0; 12]].concat()));
        assert!((bottom - 1.3).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(StripGrid::new(3, 5, 1.0, 1.0).is_err());
        assert!(StripGrid::new(4, 2, 1.0, 1.0).is_err());
        assert!(StripGrid::new(4, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn laplacian_of_constant_and_mode() {
        let g = grid();
        assert!(g.bulk_laplacian(&g.bulk_constant(3.0)).max_abs() < 1e-12);
        let f = g.bulk_from_fn(|x, _| (2.0 * PI * x / g.lx()).cos());
        let lf = g.bulk_laplacian(&f);
        let l1 = lambda1(&g, 1.0);
        for (a, b) in lf.0.iter().zip(&f.0) {
            assert!((a + l1 * b).abs() < 1e-10);
        }
        let f2 = g.bulk_from_fn(|x, _| (4.0 * PI * x / g.lx()).sin());
        let sum = g.bulk_laplacian(&f.add(&f2));
        let parts = lf.add(&g.bulk_laplacian(&f2));
        assert!(sum.sub(&parts).max_abs() < 1e-11);
    }

    #[test]
    fn laplace_beltrami_examples() {
        let g = grid();
        assert!(g.laplace_beltrami(&g.boundary_constant(2.0)).max_abs() < 1e-12);
        let b = g.boundary_from_fn(|x, _| (2.0 * PI * x / g.lx()).cos());
        let lb = g.laplace_beltrami(&b);
        let l1 = lambda1(&g, 1.0);
        for (a, v) in lb.0.iter().zip(&b.0) {
            assert!((a + l1 * v).abs() < 1e-10);
        }
        let one_side = BoundaryField((0..32).map(|k| if k < 16 { (k as f64).sin() } else { 0.0 }).collect());
        let out = g.laplace_beltrami(&one_side);
        assert!(out.0[16..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_and_normal_derivative() {
        let g = grid();
        let f = g.bulk_from_fn(|_, y| y);
        let t = g.trace(&f);
        assert!(t.0[..16].iter().all(|v| *v == 0.0));
        assert!(t.0[16..].iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let dn = g.normal_derivative(&f);
        assert!(dn.0[..16].iter().all(|v| (*v + 1.0).abs() < 1e-12));
        assert!(dn.0[16..].iter().all(|v| (*v - 1.0).abs() < 1e-12));
        let q = g.normal_derivative(&g.bulk_from_fn(|_, y| y * y));
        assert!(q.0[..16].iter().all(|v| v.abs() < 1e-12));
        assert!(q.0[16..].iter().all(|v| (*v - 2.0 * g.ly()).abs() < 1e-12));
        assert!(g.normal_derivative(&g.bulk_constant(4.0)).max_abs() < 1e-12);
    }

    #[test]
    fn mean_value_examples() {
        let g = grid();
        assert!((g.mean_value(&g.bulk_constant(0.3)) - 0.3).abs() < 1e-15);
        let f = g.bulk_from_fn(|x, y| (2.0 * PI * x / g.lx()).cos() * (1.0 + y));
        assert!(g.mean_value(&f).abs() < 1e-14);
        assert!((g.mean_value(&f.map(|v| v + 2.0)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn neumann_solve_mode_and_zero() {
        let g = grid();
        assert_eq!(g.neumann_solve(&g.bulk_constant(0.0)).unwrap().max_abs(), 0.0);
        let f = g.bulk_from_fn(|x, _| (2.0 * PI * x / g.lx()).cos());
        let u = g.neumann_solve(&f).unwrap();
        let l1 = lambda1(&g, 1.0);
        assert!(u.sub(&f.scale(1.0 / l1)).max_abs() < 1e-10);
        assert!(matches!(
            g.neumann_solve(&g.bulk_constant(1.0)),
            Err(GridError::NonzeroMean { .. })
        ));
    }

    #[test]
    fn dual_norm_examples() {
        let g = grid();
        assert!((g.dual_norm(&g.bulk_constant(-0.7)).unwrap() - 0.7).abs() < 1e-14);
        let f = g.bulk_from_fn(|x, _| 0.4 * (2.0 * PI * x / g.lx()).cos());
        let expected = g.l2_norm(&f) / lambda1(&g, 1.0).sqrt();
        assert!((g.dual_norm(&f).unwrap() - expected).abs() < 1e-11);
    }

    #[test]
    fn norms_examples() {
        let g = grid();
        let z = g.norms(&g.bulk_constant(0.0));
        assert_eq!((z.l2, z.grad, z.v, z.sup), (0.0, 0.0, 0.0, 0.0));
        assert!((g.l2_norm(&g.bulk_constant(-2.0)) - 2.0 * (g.area()).sqrt()).abs() < 1e-12);
        let f = g.bulk_from_fn(|x, _| (2.0 * PI * x / g.lx()).cos());
        let l1 = lambda1(&g, 1.0);
        assert!((g.grad_seminorm(&f).powi(2) - l1 * g.l2_norm(&f).powi(2)).abs() < 1e-11);
        // the edge-by-edge seminorm agrees with the stiffness form
        let r = g.bulk_from_fn(|x, y| (3.0 * x + 5.0 * y * y).sin());
        assert!((g.grad_seminorm(&r).powi(2) - g.grad_inner(&r, &r)).abs() < 1e-10);
    }

    #[test]
    fn binary_snapshot_round_trip() {
        let g = grid();
        let f = g.bulk_from_fn(|x, y| x - 2.0 * y);
        let mut buf = Vec::new();
        g.write_binary(&mut buf, &f, 0.25).unwrap();
        assert!(buf.starts_with(b"16 9 2 1 0.25\n"));
        let (spec, t, back) = read_binary(&buf).unwrap();
        assert_eq!((spec, t, back), (g.spec(), 0.25, f));
    }
}
