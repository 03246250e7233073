//! Uniform grids on Ω = (0,1)^d with zero boundary, and the discrete W^{1,p}_0 basics:
//! forward-difference gradients, the ‖·‖_{1,p} norm, and truncation.
//!
//! Interior nodes sit at (i+1)·h per axis, i = 0..n, with h = 1/(n+1). Quadrature for
//! measures and local energies lives on the *closed* lattice I·h, I = 0..n+1, with
//! trapezoid weights (h at interior points, h/2 at the two endpoints); grid functions are
//! identically zero on the boundary layer, so the closed-lattice sum of a grid function is
//! the exact trapezoid rule for its piecewise-multilinear interpolant.

use std::sync::Arc;

use crate::error::LabError;
use crate::Result;

/// Hard cap on interior nodes per axis in 1D.
pub const MAX_N_1D: usize = 4096;
/// Hard cap on interior nodes per axis in 2D.
pub const MAX_N_2D: usize = 256;

/// Oriented finite-difference edge. `None` endpoints are implicit boundary nodes (value 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tail: Option<usize>,
    pub head: Option<usize>,
    pub axis: usize,
}

/// Uniform discretization of (0,1)^dim with zero boundary.
///
/// Owns the edge structure (forward differences, boundary-adjacent edges included) and the
/// quadrature cell weight h^dim. Immutable after construction; shared via [`GridRef`].
#[derive(Debug)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    edges: Vec<Edge>,
}

/// Shared handle to a grid; all lab values hold one of these.
pub type GridRef = Arc<Grid>;

impl Grid {
    /// Builds a grid with `n` interior nodes per axis. See [`make_grid`].
    pub fn new(dim: usize, n: usize) -> Result<GridRef> {
        if dim != 1 && dim != 2 {
            return Err(LabError::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 1 {
            return Err(LabError::InvalidGrid("need at least one interior node".into()));
        }
        let cap = if dim == 1 { MAX_N_1D } else { MAX_N_2D };
        if n > cap {
            return Err(LabError::InvalidGrid(format!("n = {n} exceeds cap {cap} for dim {dim}")));
        }
        let h = 1.0 / (n as f64 + 1.0);
        let mut edges = Vec::new();
        match dim {
            1 => {
                for j in 0..=n {
                    edges.push(Edge {
                        tail: if j == 0 { None } else { Some(j - 1) },
                        head: if j == n { None } else { Some(j) },
                        axis: 0,
                    });
                }
            }
            2 => {
                let idx = |a: usize, b: usize| a * n + b;
                // axis 0: vary the first coordinate along each interior node line
                for j2 in 0..n {
                    for j1 in 0..=n {
                        edges.push(Edge {
                            tail: if j1 == 0 { None } else { Some(idx(j1 - 1, j2)) },
                            head: if j1 == n { None } else { Some(idx(j1, j2)) },
                            axis: 0,
                        });
                    }
                }
                // axis 1
                for j1 in 0..n {
                    for j2 in 0..=n {
                        edges.push(Edge {
                            tail: if j2 == 0 { None } else { Some(idx(j1, j2 - 1)) },
                            head: if j2 == n { None } else { Some(idx(j1, j2)) },
                            axis: 1,
                        });
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(Arc::new(Grid { dim, n, h, edges }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid spacing h = 1/(n+1).
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of interior nodes, n^dim.
    pub fn num_nodes(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Quadrature cell weight h^dim.
    pub fn cell_weight(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Coordinates of interior node `i` (second component 0 in 1D).
    pub fn node_coord(&self, i: usize) -> [f64; 2] {
        match self.dim {
            1 => [(i as f64 + 1.0) * self.h, 0.0],
            _ => {
                let (i1, i2) = (i / self.n, i % self.n);
                [(i1 as f64 + 1.0) * self.h, (i2 as f64 + 1.0) * self.h]
            }
        }
    }

    /// Interior node nearest to a point of Ω.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let clamp = |v: f64| -> usize {
            let j = (v / self.h).round() as isize - 1;
            j.clamp(0, self.n as isize - 1) as usize
        };
        match self.dim {
            1 => clamp(x[0]),
            _ => clamp(x[0]) * self.n + clamp(x[1]),
        }
    }

    /// Closed-lattice points per axis (n+2).
    pub fn closed_per_axis(&self) -> usize {
        self.n + 2
    }

    /// Total closed-lattice points, (n+2)^dim.
    pub fn num_closed(&self) -> usize {
        self.closed_per_axis().pow(self.dim as u32)
    }

    /// Trapezoid weight of one closed-lattice axis index.
    fn axis_weight(&self, idx: usize) -> f64 {
        if idx == 0 || idx == self.n + 1 {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Trapezoid quadrature weight of closed-lattice point `i`.
    pub fn closed_weight(&self, i: usize) -> f64 {
        match self.dim {
            1 => self.axis_weight(i),
            _ => {
                let l = self.closed_per_axis();
                self.axis_weight(i / l) * self.axis_weight(i % l)
            }
        }
    }

    /// Coordinates of closed-lattice point `i`.
    pub fn closed_coord(&self, i: usize) -> [f64; 2] {
        match self.dim {
            1 => [i as f64 * self.h, 0.0],
            _ => {
                let l = self.closed_per_axis();
                [(i / l) as f64 * self.h, (i % l) as f64 * self.h]
            }
        }
    }

    /// Interior node index of closed-lattice point `i`, or `None` on the boundary layer.
    pub fn closed_to_interior(&self, i: usize) -> Option<usize> {
        let int = |a: usize| -> Option<usize> {
            if a >= 1 && a <= self.n {
                Some(a - 1)
            } else {
                None
            }
        };
        match self.dim {
            1 => int(i),
            _ => {
                let l = self.closed_per_axis();
                Some(int(i / l)? * self.n + int(i % l)?)
            }
        }
    }

    /// Closed-lattice index of interior node `i`.
    pub fn interior_to_closed(&self, i: usize) -> usize {
        match self.dim {
            1 => i + 1,
            _ => {
                let l = self.closed_per_axis();
                (i / self.n + 1) * l + (i % self.n + 1)
            }
        }
    }

    /// Number of quadrature cells for local integrands, (n+1)^dim.
    pub fn num_cells(&self) -> usize {
        (self.n + 1).pow(self.dim as u32)
    }

    /// Midpoint of quadrature cell `c`.
    pub fn cell_midpoint(&self, c: usize) -> [f64; 2] {
        match self.dim {
            1 => [(c as f64 + 0.5) * self.h, 0.0],
            _ => {
                let m = self.n + 1;
                [((c / m) as f64 + 0.5) * self.h, ((c % m) as f64 + 0.5) * self.h]
            }
        }
    }
}

/// Builds the uniform grid on (0,1)^dim with `n` interior nodes per axis.
///
/// Rejects dim ∉ {1,2}, n < 1, and sizes over the per-dimension caps.
pub fn make_grid(dim: usize, n: usize) -> Result<GridRef> {
    Grid::new(dim, n)
}

/// Member of the discrete W^{1,p}_0 analog: one value per interior node, zero on the boundary.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: GridRef,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps nodal values; rejects non-finite entries and length mismatches.
    pub fn new(grid: &GridRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(LabError::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                grid.num_nodes(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(LabError::non_finite(format!("nodal value {v}")));
        }
        Ok(GridFunction { grid: grid.clone(), values })
    }

    /// The zero function.
    pub fn zeros(grid: &GridRef) -> Self {
        GridFunction { grid: grid.clone(), values: vec![0.0; grid.num_nodes()] }
    }

    /// Samples `f` at the interior nodes.
    pub fn from_fn(grid: &GridRef, f: impl Fn(&[f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes()).map(|i| f(&grid.node_coord(i))).collect();
        GridFunction::new(grid, values)
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at interior node `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Value at closed-lattice point `i` (0 on the boundary layer).
    pub fn value_closed(&self, i: usize) -> f64 {
        self.grid.closed_to_interior(i).map_or(0.0, |j| self.values[j])
    }

    /// Piecewise-multilinear interpolation on the closed lattice (0 outside [0,1]^dim).
    pub fn interp(&self, x: &[f64; 2]) -> f64 {
        let n = self.grid.n();
        let h = self.grid.h();
        // per-axis: closed cell index and barycentric weight
        let locate = |v: f64| -> Option<(usize, f64)> {
            if !(0.0..=1.0).contains(&v) {
                return None;
            }
            let mut c = (v / h).floor() as usize;
            if c > n {
                c = n;
            }
            Some((c, v / h - c as f64))
        };
        // closed-axis value lookup: index a in 0..n+2
        let val1 = |a: usize, b: usize| -> f64 {
            let inner = |q: usize| -> Option<usize> { (q >= 1 && q <= n).then(|| q - 1) };
            match self.grid.dim() {
                1 => inner(a).map_or(0.0, |i| self.values[i]),
                _ => match (inner(a), inner(b)) {
                    (Some(i), Some(j)) => self.values[i * n + j],
                    _ => 0.0,
                },
            }
        };
        match self.grid.dim() {
            1 => {
                let Some((c, t)) = locate(x[0]) else { return 0.0 };
                (1.0 - t) * val1(c, 0) + t * val1(c + 1, 0)
            }
            _ => {
                let (Some((c1, t1)), Some((c2, t2))) = (locate(x[0]), locate(x[1])) else {
                    return 0.0;
                };
                (1.0 - t1) * (1.0 - t2) * val1(c1, c2)
                    + (1.0 - t1) * t2 * val1(c1, c2 + 1)
                    + t1 * (1.0 - t2) * val1(c1 + 1, c2)
                    + t1 * t2 * val1(c1 + 1, c2 + 1)
            }
        }
    }

    /// Nodal interpolation weights of a point: pairs (interior node, weight).
    ///
    /// Adjoint of [`GridFunction::interp`]: for any grid function u,
    /// u.interp(x) = Σ w_i · u(node_i) over the returned pairs.
    pub fn interp_weights(grid: &GridRef, x: &[f64; 2]) -> Vec<(usize, f64)> {
        let n = grid.n();
        let h = grid.h();
        let locate = |v: f64| -> Option<(usize, f64)> {
            if !(0.0..=1.0).contains(&v) {
                return None;
            }
            let mut c = (v / h).floor() as usize;
            if c > n {
                c = n;
            }
            Some((c, v / h - c as f64))
        };
        let mut out = Vec::with_capacity(4);
        match grid.dim() {
            1 => {
                if let Some((c, t)) = locate(x[0]) {
                    if c >= 1 && c <= n {
                        out.push((c - 1, 1.0 - t));
                    }
                    if c + 1 >= 1 && c + 1 <= n {
                        out.push((c, t));
                    }
                }
            }
            _ => {
                if let (Some((c1, t1)), Some((c2, t2))) = (locate(x[0]), locate(x[1])) {
                    for (a, wa) in [(c1, 1.0 - t1), (c1 + 1, t1)] {
                        for (b, wb) in [(c2, 1.0 - t2), (c2 + 1, t2)] {
                            if a >= 1 && a <= n && b >= 1 && b <= n {
                                let w = wa * wb;
                                if w != 0.0 {
                                    out.push(((a - 1) * n + (b - 1), w));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Componentwise linear combination self + alpha * other.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<GridFunction> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.num_nodes() != other.grid.num_nodes()
        {
            return Err(LabError::GridMismatch);
        }
        let values =
            self.values.iter().zip(&other.values).map(|(a, b)| a + alpha * b).collect::<Vec<_>>();
        GridFunction::new(&self.grid, values)
    }

    pub fn scale(&self, alpha: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Max-norm of the nodal values.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One gradient component per edge of the grid.
#[derive(Clone, Debug)]
pub struct EdgeField {
    grid: GridRef,
    values: Vec<f64>,
}

impl EdgeField {
    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Forward-difference gradient: per edge, (head − tail)/h with boundary values 0.
pub fn gradient(u: &GridFunction) -> EdgeField {
    let grid = u.grid().clone();
    let h = grid.h();
    let values = grid
        .edges()
        .iter()
        .map(|e| {
            let t = e.tail.map_or(0.0, |i| u.value(i));
            let hd = e.head.map_or(0.0, |i| u.value(i));
            (hd - t) / h
        })
        .collect();
    EdgeField { grid, values }
}

/// Discrete W^{1,p}_0 norm: (Σ_edges h^dim · |grad_e|^p)^{1/p}.
pub fn sobolev_norm(u: &GridFunction, p: f64) -> Result<f64> {
    validate_p(p)?;
    Ok(sobolev_norm_unchecked(u, p))
}

/// Norm without exponent validation, for inner loops that validated p at entry.
pub(crate) fn sobolev_norm_unchecked(u: &GridFunction, p: f64) -> f64 {
    let g = gradient(u);
    let w = u.grid().cell_weight();
    let sum: f64 = g.values().iter().map(|d| w * d.abs().powf(p)).sum();
    sum.powf(1.0 / p)
}

/// p-th power of the norm, Σ_edges h^dim |grad_e|^p.
pub(crate) fn sobolev_norm_pow(u: &GridFunction, p: f64) -> f64 {
    let g = gradient(u);
    let w = u.grid().cell_weight();
    g.values().iter().map(|d| w * d.abs().powf(p)).sum()
}

/// Nodewise truncation τ^λ(s) = (s ∨ −λ) ∧ λ; rejects λ ≤ 0.
pub fn truncate(u: &GridFunction, lambda: f64) -> Result<GridFunction> {
    if !(lambda > 0.0) {
        return Err(LabError::InvalidArgument(format!("truncation level must be positive, got {lambda}")));
    }
    Ok(GridFunction {
        grid: u.grid().clone(),
        values: u.values().iter().map(|&s| s.clamp(-lambda, lambda)).collect(),
    })
}

/// Validates 1 < p < ∞.
pub fn validate_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(LabError::InvalidExponent(p))
    }
}

/// True for exponents the reports flag as ill-conditioned (p ∈ (1,1.1] or p ≥ 10).
pub fn p_is_ill_conditioned(p: f64) -> bool {
    p <= 1.1 || p >= 10.0
}

/// Gradient vector of `u` on quadrature cell `c` (second component 0 in 1D).
pub(crate) fn cell_gradient(u: &GridFunction, c: usize) -> [f64; 2] {
    let grid = u.grid();
    let n = grid.n();
    let h = grid.h();
    let val = |a: isize, b: isize| -> f64 {
        if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
            0.0
        } else {
            u.value(a as usize * n + b as usize)
        }
    };
    match grid.dim() {
        1 => {
            let c = c as isize;
            let v = |j: isize| if j < 0 || j >= n as isize { 0.0 } else { u.value(j as usize) };
            [(v(c) - v(c - 1)) / h, 0.0]
        }
        _ => {
            let m = (n + 1) as isize;
            let (c1, c2) = ((c as isize) / m, (c as isize) % m);
            [(val(c1, c2) - val(c1 - 1, c2)) / h, (val(c1, c2) - val(c1, c2 - 1)) / h]
        }
    }
}
