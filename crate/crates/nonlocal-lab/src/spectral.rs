//! Stiffness-matrix machinery behind the p = 2 closed forms.
//!
//! The discrete Dirichlet Laplacian on the interior lattice has the explicit sine
//! eigenbasis, so K-solves, K^{-1/2} whitening, and dense assembly are all exact up to
//! rounding. K is normalized so that u^T K u = ‖u‖²_{1,2} (edge sum with weight h^dim):
//! K = h^{dim−2}·A, with A the combinatorial Laplacian (2·dim on the diagonal).

use nalgebra::{DMatrix, DVector};

use crate::grid::GridRef;

/// Eigenvalues of the 1D combinatorial Laplacian A = tridiag(−1,2,−1), size n.
pub fn laplacian_eigvals_1d(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|k| 4.0 * ((k as f64 + 1.0) * std::f64::consts::PI * h / 2.0).sin().powi(2)).collect()
}

/// Orthonormal sine eigenbasis of A: column k is √(2h)·sin((i+1)(k+1)πh).
pub fn sine_basis(n: usize, h: f64) -> DMatrix<f64> {
    let scale = (2.0 * h).sqrt();
    DMatrix::from_fn(n, n, |i, k| {
        scale * ((i as f64 + 1.0) * (k as f64 + 1.0) * std::f64::consts::PI * h).sin()
    })
}

/// Eigenvalues of the stiffness form K = h^{dim−2}·A (1D) or A⊗I + I⊗A (2D),
/// in interior-node order.
pub fn stiffness_eigvals(grid: &GridRef) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let lam = laplacian_eigvals_1d(n, h);
    match grid.dim() {
        1 => lam.iter().map(|l| l / h).collect(),
        _ => {
            let mut out = Vec::with_capacity(n * n);
            for l1 in &lam {
                for l2 in &lam {
                    out.push(l1 + l2);
                }
            }
            out
        }
    }
}

/// Applies the stiffness form: (K u)_i, matrix-free over edges.
pub fn stiffness_apply(grid: &GridRef, u: &[f64]) -> Vec<f64> {
    let c = grid.h().powi(grid.dim() as i32 - 2);
    let mut out = vec![0.0; grid.num_nodes()];
    for e in grid.edges() {
        let ut = e.tail.map_or(0.0, |i| u[i]);
        let uh = e.head.map_or(0.0, |i| u[i]);
        let d = uh - ut;
        if let Some(t) = e.tail {
            out[t] -= c * d;
        }
        if let Some(h) = e.head {
            out[h] += c * d;
        }
    }
    out
}

/// Solves K w = b exactly (Thomas algorithm in 1D, sine transform in 2D).
pub fn stiffness_solve(grid: &GridRef, b: &[f64]) -> Vec<f64> {
    match grid.dim() {
        1 => {
            // K = A/h, so A w = h b
            let rhs: Vec<f64> = b.iter().map(|v| v * grid.h()).collect();
            tridiag_solve(&rhs)
        }
        _ => sine_solve_2d(grid, b),
    }
}

/// Solves tridiag(−1,2,−1) w = rhs.
fn tridiag_solve(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n]; // superdiagonal multipliers
    let mut d = vec![0.0; n];
    let mut w = vec![0.0; n];
    c[0] = -0.5;
    d[0] = rhs[0] / 2.0;
    for i in 1..n {
        let m = 2.0 + c[i - 1];
        c[i] = -1.0 / m;
        d[i] = (rhs[i] + d[i - 1]) / m;
    }
    w[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        w[i] = d[i] - c[i] * w[i + 1];
    }
    w
}

/// 2D stiffness solve via the Kronecker sine basis: K = A⊗I + I⊗A.
fn sine_solve_2d(grid: &GridRef, b: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let s = sine_basis(n, h);
    let lam = laplacian_eigvals_1d(n, h);
    // The orthonormal basis makes b ↦ SᵀBS the coefficient map; remember S is symmetric
    // only up to scaling, so keep transposes explicit.
    let bm = DMatrix::from_fn(n, n, |i, j| b[i * n + j]);
    let mut y = s.transpose() * bm * &s;
    for k1 in 0..n {
        for k2 in 0..n {
            y[(k1, k2)] /= lam[k1] + lam[k2];
        }
    }
    let wm = &s * y * s.transpose();
    (0..n * n).map(|i| wm[(i / n, i % n)]).collect()
}

/// b^T K^{-1} b, the squared p=2 dual norm of the linear functional with vector b.
pub fn stiffness_energy_dual(grid: &GridRef, b: &[f64]) -> f64 {
    let w = stiffness_solve(grid, b);
    b.iter().zip(&w).map(|(x, y)| x * y).sum()
}

/// Solves the edge-weighted stiffness system (K_w u)_i = h^{dim−2} Σ_e ±w_e (u_head − u_tail).
///
/// 1D uses a general Thomas sweep; 2D assembles densely and factors (sizes are capped by
/// the grid constructor, and general-p callers stay small).
pub fn weighted_stiffness_solve(grid: &GridRef, w_edges: &[f64], b: &[f64]) -> Vec<f64> {
    let c = grid.h().powi(grid.dim() as i32 - 2);
    match grid.dim() {
        1 => {
            // tridiagonal: diag_i = c(w_i + w_{i+1}), off_i = −c·w_{i+1}
            let n = grid.num_nodes();
            let mut diag: Vec<f64> = (0..n).map(|i| c * (w_edges[i] + w_edges[i + 1])).collect();
            let mut rhs = b.to_vec();
            let off = |i: usize| -c * w_edges[i + 1]; // edge between node i and i+1
            for i in 1..n {
                let m = off(i - 1) / diag[i - 1];
                diag[i] -= m * off(i - 1);
                rhs[i] -= m * rhs[i - 1];
            }
            let mut u = vec![0.0; n];
            u[n - 1] = rhs[n - 1] / diag[n - 1];
            for i in (0..n - 1).rev() {
                u[i] = (rhs[i] - off(i) * u[i + 1]) / diag[i];
            }
            u
        }
        _ => {
            let nn = grid.num_nodes();
            let mut k = DMatrix::zeros(nn, nn);
            for (e, &w) in grid.edges().iter().zip(w_edges) {
                let cw = c * w;
                match (e.tail, e.head) {
                    (Some(t), Some(hd)) => {
                        k[(t, t)] += cw;
                        k[(hd, hd)] += cw;
                        k[(t, hd)] -= cw;
                        k[(hd, t)] -= cw;
                    }
                    (Some(t), None) => k[(t, t)] += cw,
                    (None, Some(hd)) => k[(hd, hd)] += cw,
                    (None, None) => {}
                }
            }
            let rhs = DVector::from_column_slice(b);
            let sol = match k.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => k.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(nn)),
            };
            sol.iter().copied().collect()
        }
    }
}

/// Dense stiffness matrix, for constrained solves on small grids.
pub fn stiffness_dense(grid: &GridRef) -> DMatrix<f64> {
    let nn = grid.num_nodes();
    let c = grid.h().powi(grid.dim() as i32 - 2);
    let mut k = DMatrix::zeros(nn, nn);
    for e in grid.edges() {
        match (e.tail, e.head) {
            (Some(t), Some(hd)) => {
                k[(t, t)] += c;
                k[(hd, hd)] += c;
                k[(t, hd)] -= c;
                k[(hd, t)] -= c;
            }
            (Some(t), None) => k[(t, t)] += c,
            (None, Some(hd)) => k[(hd, hd)] += c,
            (None, None) => {}
        }
    }
    k
}

/// Conjugates a bilinear pairing matrix into whitened coordinates:
/// C = Λ^{-1/2} Qᵀ B Q Λ^{-1/2}, so that sup over stiffness unit balls of φᵀBψ
/// equals the largest singular value of C.
pub fn whiten_pairing(grid: &GridRef, b: &DMatrix<f64>) -> DMatrix<f64> {
    let lam = stiffness_eigvals(grid);
    let mut c = basis_conjugate(grid, b);
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            c[(i, j)] /= (lam[i] * lam[j]).sqrt();
        }
    }
    c
}

/// Qᵀ B Q where Q is the orthonormal stiffness eigenbasis.
fn basis_conjugate(grid: &GridRef, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = grid.n();
    let h = grid.h();
    let s = sine_basis(n, h);
    match grid.dim() {
        1 => s.transpose() * b * &s,
        _ => {
            // Q = S⊗S; contract each index through the 1D basis via reshapes.
            let nn = n * n;
            let mut t1 = DMatrix::zeros(nn, nn);
            for j in 0..nn {
                let col = DMatrix::from_fn(n, n, |a, c| b[(a * n + c, j)]);
                let m = s.transpose() * col * &s;
                for k in 0..nn {
                    t1[(k, j)] = m[(k / n, k % n)];
                }
            }
            let mut out = DMatrix::zeros(nn, nn);
            for i in 0..nn {
                let row = DMatrix::from_fn(n, n, |a, c| t1[(i, a * n + c)]);
                let m = s.transpose() * row * &s;
                for k in 0..nn {
                    out[(i, k)] = m[(k / n, k % n)];
                }
            }
            out
        }
    }
}

/// Maps a whitened coefficient vector back to nodal values: φ = Q Λ^{-1/2} v.
pub fn unwhiten_vector(grid: &GridRef, v: &DVector<f64>) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let lam = stiffness_eigvals(grid);
    let s = sine_basis(n, h);
    let scaled = DVector::from_fn(v.len(), |i, _| v[i] / lam[i].sqrt());
    match grid.dim() {
        1 => (&s * scaled).iter().copied().collect(),
        _ => {
            let coeff = DMatrix::from_fn(n, n, |a, c| scaled[a * n + c]);
            let m = &s * coeff * s.transpose();
            (0..n * n).map(|i| m[(i / n, i % n)]).collect()
        }
    }
}

/// Top singular pair of a dense matrix by power iteration on BᵀB; used only to seed
/// alternating maximization, so moderate accuracy is fine.
pub fn top_singular_pair(b: &DMatrix<f64>, init: &DVector<f64>, iters: usize) -> (DVector<f64>, DVector<f64>) {
    let mut v = init.clone();
    let nv = v.norm();
    if nv == 0.0 {
        v = DVector::from_element(b.ncols(), 1.0);
    }
    v /= v.norm();
    let mut u = DVector::from_element(b.nrows(), 1.0 / (b.nrows() as f64).sqrt());
    for _ in 0..iters {
        let bu = b * &v;
        let nu = bu.norm();
        if nu == 0.0 {
            break;
        }
        u = bu / nu;
        let btv = b.transpose() * &u;
        let nb = btv.norm();
        if nb == 0.0 {
            break;
        }
        v = btv / nb;
    }
    (u, v)
}
