//! Dual norms of nodal linear functionals, variational capacity, and the scripted
//! weakly-convergent test sequences.
//!
//! A nodal coefficient vector c pairs with grid functions through
//! ℓ(φ) = Σ c_i φ_i · h^dim. The dual norm sup{ℓ(φ) : ‖φ‖_{1,p} ≤ 1} is computed in
//! closed form through the stiffness system for p = 2, and by normalized ascent on the
//! scale-invariant quotient ℓ(φ)/‖φ‖_{1,p} for general p (the ball is smooth and strictly
//! convex, so the maximizing direction is unique and ascent from the p = 2 maximizer is
//! deterministic).

use crate::error::LabError;
use crate::grid::{
    gradient, sobolev_norm_pow, sobolev_norm_unchecked, validate_p, GridFunction, GridRef,
};
use crate::spectral::{stiffness_dense, stiffness_solve};
use crate::Result;

/// Gradient-norm tolerance for the iterative solvers in this module.
pub const SOLVER_TOL: f64 = 1e-8;
/// Iteration cap shared by the iterative solvers.
pub const SOLVER_MAX_ITER: usize = 100_000;

/// Result of a dual-norm evaluation.
#[derive(Clone, Debug)]
pub struct DualNorm {
    /// The supremum value.
    pub value: f64,
    /// A maximizer with unit ‖·‖_{1,p} norm (zero function for the zero functional).
    pub maximizer: GridFunction,
    /// False when the ascent hit its iteration cap before reaching stationarity.
    pub converged: bool,
    /// Ascent iterations used (0 for the p = 2 closed form).
    pub iterations: usize,
}

/// Discrete ‖·‖_{−1,q} norm of the functional φ ↦ Σ c_i φ_i h^dim, with maximizer.
pub fn dual_norm(grid: &GridRef, coeffs: &[f64], p: f64) -> Result<DualNorm> {
    validate_p(p)?;
    if coeffs.len() != grid.num_nodes() {
        return Err(LabError::InvalidArgument(format!(
            "expected {} coefficients, got {}",
            grid.num_nodes(),
            coeffs.len()
        )));
    }
    if let Some(v) = coeffs.iter().find(|v| !v.is_finite()) {
        return Err(LabError::non_finite(format!("dual-norm coefficient {v}")));
    }
    let hd = grid.cell_weight();
    let b: Vec<f64> = coeffs.iter().map(|c| c * hd).collect();
    if b.iter().all(|&v| v == 0.0) {
        return Ok(DualNorm {
            value: 0.0,
            maximizer: GridFunction::zeros(grid),
            converged: true,
            iterations: 0,
        });
    }
    let exact = dual_norm_p2(grid, &b)?;
    if p == 2.0 {
        return Ok(exact);
    }
    let init = exact.maximizer.scale(exact.value);
    dual_via_plaplace(grid, &b, p, init)
}

/// Like [`dual_norm`] but warm-started from a previous maximizer scaled by a previous
/// value; used by alternating maximization where successive functionals are close.
pub(crate) fn dual_norm_warm(
    grid: &GridRef,
    coeffs: &[f64],
    p: f64,
    warm: Option<&GridFunction>,
) -> Result<DualNorm> {
    if p == 2.0 || warm.is_none() {
        return dual_norm(grid, coeffs, p);
    }
    let hd = grid.cell_weight();
    let b: Vec<f64> = coeffs.iter().map(|c| c * hd).collect();
    if b.iter().all(|&v| v == 0.0) {
        return dual_norm(grid, coeffs, p);
    }
    dual_via_plaplace(grid, &b, p, warm.unwrap().clone())
}

/// Closed-form p = 2 evaluation via the stiffness system: value = √(bᵀK⁻¹b).
fn dual_norm_p2(grid: &GridRef, b: &[f64]) -> Result<DualNorm> {
    let w = stiffness_solve(grid, b);
    let val2: f64 = b.iter().zip(&w).map(|(x, y)| x * y).sum();
    if !(val2 >= 0.0) || !val2.is_finite() {
        return Err(LabError::non_finite(format!("stiffness dual energy {val2}")));
    }
    let value = val2.sqrt();
    let maximizer = GridFunction::new(grid, w.iter().map(|v| v / value).collect::<Vec<_>>())?;
    Ok(DualNorm { value, maximizer, converged: true, iterations: 0 })
}

/// Gradient of ‖φ‖_{1,p}^p / p with respect to nodal values:
/// h^{dim−1} Σ_{edges at i} ±|D_e φ|^{p−1} sgn(D_e φ).
fn pnorm_pow_gradient(u: &GridFunction, p: f64) -> Vec<f64> {
    let grid = u.grid();
    let c = grid.cell_weight() / grid.h();
    let g = gradient(u);
    let mut out = vec![0.0; grid.num_nodes()];
    for (e, d) in grid.edges().iter().zip(g.values()) {
        let flux = c * d.abs().powf(p - 1.0) * d.signum();
        if let Some(t) = e.tail {
            out[t] -= flux;
        }
        if let Some(h) = e.head {
            out[h] += flux;
        }
    }
    out
}

/// General-p evaluation through the discrete p-Laplace problem.
///
/// The unconstrained convex energy E(φ) = (1/p)‖φ‖_{1,p}^p − ⟨b,φ⟩ has the unique
/// minimizer φ̂ with J(φ̂) = b (J the p-Laplacian flux map). Euler homogeneity gives
/// ⟨b,φ̂⟩ = ‖φ̂‖^p, so the dual norm is ‖φ̂‖^{p−1} with maximizer φ̂/‖φ̂‖. Minimization
/// runs stiffness-preconditioned descent with Armijo backtracking; the stationarity
/// certificate is ‖J(φ) − b‖ ≤ 1e−8·max(1,‖b‖).
fn dual_via_plaplace(grid: &GridRef, b: &[f64], p: f64, init: GridFunction) -> Result<DualNorm> {
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, c)| a * c).sum() };
    let bscale = dot(b, b).sqrt().max(1.0);
    let energy = |u: &GridFunction| -> f64 { sobolev_norm_pow(u, p) / p - dot(b, u.values()) };

    // scale the warm start to the optimal point along its own ray
    let mut phi = {
        let n0 = sobolev_norm_unchecked(&init, p);
        let l0 = dot(b, init.values());
        if n0 > 0.0 && l0 > 0.0 {
            init.scale((l0 / n0.powf(p)).powf(1.0 / (p - 1.0)))
        } else {
            init
        }
    };
    let mut e = energy(&phi);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < SOLVER_MAX_ITER {
        iterations += 1;
        let flux = pnorm_pow_gradient(&phi, p); // = J(φ)
        let grad: Vec<f64> = flux.iter().zip(b).map(|(j, bi)| j - bi).collect();
        if dot(&grad, &grad).sqrt() <= SOLVER_TOL * bscale {
            converged = true;
            break;
        }
        // damped IRLS step: solve the |Dφ|^{p−2}-weighted stiffness system for the
        // fixed-point target, fall back to a preconditioned gradient step if the
        // reweighted direction fails to descend (degenerate weights).
        let g = gradient(&phi);
        let dmax = g.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let floor = 1e-6 * dmax;
        let w: Vec<f64> =
            g.values().iter().map(|d| d.abs().max(floor).powf(p - 2.0)).collect();
        let target = crate::spectral::weighted_stiffness_solve(grid, &w, b);
        let mut dir: Vec<f64> =
            phi.values().iter().zip(&target).map(|(u, t)| u - t).collect();
        let mut slope = dot(&grad, &dir);
        if !(slope > 0.0) || !slope.is_finite() {
            dir = stiffness_solve(grid, &grad);
            slope = dot(&grad, &dir);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = GridFunction::new(
                grid,
                phi.values().iter().zip(&dir).map(|(u, d)| u - step * d).collect(),
            )?;
            let te = energy(&trial);
            if te <= e - 1e-4 * step * slope {
                phi = trial;
                e = te;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // step underflowed against rounding noise near the minimizer
            let g2 = dot(&grad, &grad).sqrt();
            converged = g2 <= 1e-6 * bscale;
            break;
        }
    }
    let nrm = sobolev_norm_unchecked(&phi, p);
    if nrm == 0.0 {
        return Ok(DualNorm {
            value: 0.0,
            maximizer: GridFunction::zeros(grid),
            converged,
            iterations,
        });
    }
    let maximizer = phi.scale(1.0 / nrm);
    let value = dot(b, maximizer.values());
    Ok(DualNorm { value, maximizer, converged, iterations })
}

/// Variational capacity of a node set A: inf{‖u‖_{1,p}^p : u = 1 on A}.
///
/// For p = 2 the reduced problem is linear (discrete-harmonic extension of the constraint)
/// and solved by a dense Cholesky factorization; general p runs preconditioned descent on
/// the free nodes with the same stopping rule as the other solvers.
pub fn capacity(grid: &GridRef, a: &[usize], p: f64) -> Result<f64> {
    validate_p(p)?;
    let nn = grid.num_nodes();
    if a.is_empty() {
        return Err(LabError::InvalidArgument("capacity of the empty set".into()));
    }
    if let Some(&bad) = a.iter().find(|&&i| i >= nn) {
        return Err(LabError::InvalidArgument(format!("node {bad} outside grid ({nn} nodes)")));
    }
    let mut constrained = vec![false; nn];
    for &i in a {
        constrained[i] = true;
    }
    let free: Vec<usize> = (0..nn).filter(|&i| !constrained[i]).collect();

    let assemble = |free_vals: &[f64]| -> GridFunction {
        let mut vals = vec![1.0; nn];
        for (slot, &i) in free.iter().enumerate() {
            vals[i] = free_vals[slot];
        }
        GridFunction::new(grid, vals).expect("finite capacity iterate")
    };

    if free.is_empty() {
        return Ok(sobolev_norm_pow(&assemble(&[]), p));
    }

    let k = stiffness_dense(grid);
    let kff = k.select_rows(free.iter()).select_columns(free.iter());
    let chol = nalgebra::Cholesky::new(kff)
        .ok_or_else(|| LabError::InvalidArgument("stiffness block not SPD".into()))?;

    // p = 2: u_F solves K_FF u_F = −K_FA·1 exactly.
    let mut rhs = nalgebra::DVector::zeros(free.len());
    for (slot, &i) in free.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..nn {
            if constrained[j] {
                s -= k[(i, j)];
            }
        }
        rhs[slot] = s;
    }
    let harmonic = chol.solve(&rhs);
    if p == 2.0 {
        return Ok(sobolev_norm_pow(&assemble(harmonic.as_slice()), p));
    }

    // general p: preconditioned descent on the free nodes from the harmonic extension
    let mut uf: Vec<f64> = harmonic.as_slice().to_vec();
    let mut energy = sobolev_norm_pow(&assemble(&uf), p);
    let mut step = 1.0;
    for _ in 0..SOLVER_MAX_ITER {
        let full_grad = pnorm_pow_gradient(&assemble(&uf), p);
        let gf =
            nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&i| p * full_grad[i]));
        if gf.norm() <= SOLVER_TOL {
            return Ok(energy);
        }
        let dir = chol.solve(&gf);
        let slope: f64 = gf.dot(&dir);
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = uf.iter().zip(dir.iter()).map(|(u, d)| u - step * d).collect();
            let e = sobolev_norm_pow(&assemble(&trial), p);
            if e <= energy - 1e-4 * step * slope {
                uf = trial;
                energy = e;
                accepted = true;
                step = (step * 1.5).min(4.0);
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(energy);
        }
    }
    Ok(energy)
}

/// Kinds of weakly-but-not-strongly convergent test sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakKind {
    /// base + (1/k)·sin(kπx) profile: sup-norm 1/k, Sobolev norm bounded below.
    Oscillation,
    /// base + a unit-‖·‖_{1,p} bump of width 1/k.
    Concentration,
}

impl std::str::FromStr for WeakKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscillation" => Ok(WeakKind::Oscillation),
            "concentration" => Ok(WeakKind::Concentration),
            other => {
                Err(LabError::InvalidArgument(format!("unknown weak-sequence kind `{other}`")))
            }
        }
    }
}

/// k-th member of a weakly convergent sequence around `base`.
///
/// Rejects frequencies the grid cannot resolve (requires n+1 ≥ 8k). The concentration
/// bump is normalized to exact unit ‖·‖_{1,p}.
pub fn weak_test_sequence(
    kind: WeakKind,
    k: u32,
    base: &GridFunction,
    p: f64,
) -> Result<GridFunction> {
    validate_p(p)?;
    if k < 1 {
        return Err(LabError::InvalidArgument("need k >= 1".into()));
    }
    let grid = base.grid();
    let m = grid.n() + 1;
    if m < 8 * k as usize {
        return Err(LabError::UnderResolved { k, m });
    }
    let kf = k as f64;
    match kind {
        WeakKind::Oscillation => {
            let pi = std::f64::consts::PI;
            let profile = GridFunction::from_fn(grid, |x| match grid.dim() {
                1 => (kf * pi * x[0]).sin() / kf,
                _ => (kf * pi * x[0]).sin() * (pi * x[1]).sin() / kf,
            })?;
            base.axpy(1.0, &profile)
        }
        WeakKind::Concentration => {
            let w = 1.0 / (2.0 * kf);
            let hat = |v: f64| (1.0 - (v - 0.5).abs() / w).max(0.0);
            let bump = GridFunction::from_fn(grid, |x| match grid.dim() {
                1 => hat(x[0]),
                _ => hat(x[0]) * hat(x[1]),
            })?;
            let nrm = sobolev_norm_unchecked(&bump, p);
            base.axpy(1.0 / nrm, &bump)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, sobolev_norm};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dirac_coeffs(grid: &GridRef, x0: f64) -> Vec<f64> {
        let mut c = vec![0.0; grid.num_nodes()];
        c[grid.nearest_node(&[x0, 0.0])] = 1.0 / grid.cell_weight();
        c
    }

    #[test]
    fn dual_dirac_matches_green_function() {
        // continuum oracle: sup u(x0)/||u'||_2 = sqrt(x0(1-x0)); exact at nodes
        let grid = make_grid(1, 63).unwrap();
        let d = dual_norm(&grid, &dirac_coeffs(&grid, 0.5), 2.0).unwrap();
        assert_relative_eq!(d.value, 0.5, epsilon = 1e-12);

        let grid = make_grid(1, 100).unwrap();
        let d = dual_norm(&grid, &dirac_coeffs(&grid, 0.5), 2.0).unwrap();
        assert!((d.value - 0.5).abs() <= grid.h());
    }

    #[test]
    fn dual_zero_is_zero() {
        let grid = make_grid(1, 16).unwrap();
        let d = dual_norm(&grid, &vec![0.0; 16], 2.0).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.maximizer.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dual_sine_matches_antiderivative_oracle() {
        // ||sin(pi x) dx||_{-1,2} = ||cos(pi x)/pi||_2 = 1/(pi sqrt(2))
        let target = 1.0 / (std::f64::consts::PI * 2.0_f64.sqrt());
        let mut prev = f64::INFINITY;
        for n in [16, 32, 64] {
            let grid = make_grid(1, n).unwrap();
            let c: Vec<f64> = (0..n)
                .map(|i| (std::f64::consts::PI * grid.node_coord(i)[0]).sin())
                .collect();
            let d = dual_norm(&grid, &c, 2.0).unwrap();
            let err = (d.value - target).abs();
            assert!(err < prev, "error not decreasing at n={n}");
            assert!(err <= 2.0 * grid.h() * grid.h(), "rate worse than O(h^2) at n={n}");
            prev = err;
        }
    }

    #[test]
    fn duality_certificate_holds_for_random_functionals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = make_grid(1, 24).unwrap();
        let hd = grid.cell_weight();
        for p in [1.5, 2.0, 3.0] {
            for _ in 0..20 {
                let c: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d = dual_norm(&grid, &c, p).unwrap();
                assert!(d.converged);
                let pairing: f64 =
                    c.iter().zip(d.maximizer.values()).map(|(a, b)| a * b * hd).sum();
                assert_relative_eq!(pairing, d.value, epsilon = 1e-8);
                assert_relative_eq!(sobolev_norm(&d.maximizer, p).unwrap(), 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ascent_agrees_with_closed_form_at_p2() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = make_grid(1, 16).unwrap();
        for _ in 0..10 {
            let c: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hd = grid.cell_weight();
            let b: Vec<f64> = c.iter().map(|v| v * hd).collect();
            let exact = super::dual_norm_p2(&grid, &b).unwrap();
            let init = GridFunction::from_fn(&grid, |x| x[0] * (1.0 - x[0])).unwrap();
            let asc = super::dual_via_plaplace(&grid, &b, 2.0, init).unwrap();
            assert_relative_eq!(asc.value, exact.value, epsilon = 1e-6);
        }
    }

    /// Independent 1D oracle for any p: by the zero-sum slope substitution, the dual norm
    /// equals min over scalars m of the weighted ℓ^q distance from the reverse cumulative
    /// sums of b to the constant m.
    fn dual_norm_1d_oracle(grid: &GridRef, coeffs: &[f64], p: f64) -> f64 {
        let n = grid.n();
        let h = grid.h();
        let q = p / (p - 1.0);
        let b: Vec<f64> = coeffs.iter().map(|c| c * h).collect();
        let mut tail = vec![0.0; n + 1];
        for j in (0..n).rev() {
            tail[j] = tail[j + 1] + b[j];
        }
        let f = |m: f64| -> f64 {
            tail.iter().map(|t| h * (t - m).abs().powf(q)).sum::<f64>().powf(1.0 / q)
        };
        let (mut lo, mut hi) = (-10.0_f64, 10.0_f64);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi))
    }

    #[test]
    fn ascent_matches_independent_1d_oracle_for_general_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = make_grid(1, 12).unwrap();
        for p in [1.5, 3.0] {
            for _ in 0..8 {
                let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d = dual_norm(&grid, &c, p).unwrap();
                let oracle = dual_norm_1d_oracle(&grid, &c, p);
                assert_relative_eq!(d.value, oracle, epsilon = 1e-6, max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn capacity_ramp_values() {
        let grid = make_grid(1, 63).unwrap(); // node exactly at 0.5
        let a = vec![grid.nearest_node(&[0.5, 0.0])];
        assert_relative_eq!(capacity(&grid, &a, 2.0).unwrap(), 4.0, epsilon = 1e-10);
        // linear ramps are exactly p-harmonic in 1D: value = x0^{1-p} + (1-x0)^{1-p}
        assert_relative_eq!(capacity(&grid, &a, 3.0).unwrap(), 8.0, epsilon = 1e-6);

        let grid = make_grid(1, 127).unwrap(); // node exactly at 0.25
        let a = vec![grid.nearest_node(&[0.25, 0.0])];
        assert_relative_eq!(capacity(&grid, &a, 2.0).unwrap(), 16.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn capacity_full_domain_and_errors() {
        let grid = make_grid(1, 15).unwrap();
        let all: Vec<usize> = (0..grid.num_nodes()).collect();
        let single = vec![grid.nearest_node(&[0.5, 0.0])];
        let cap_all = capacity(&grid, &all, 2.0).unwrap();
        let cap_one = capacity(&grid, &single, 2.0).unwrap();
        assert!(cap_all >= cap_one);
        // u ≡ 1 leaves only the two boundary edges: 2 h^{1-p}
        assert_relative_eq!(cap_all, 2.0 / grid.h(), epsilon = 1e-10);
        assert!(capacity(&grid, &[], 2.0).is_err());
        assert!(capacity(&grid, &[999], 2.0).is_err());
    }

    #[test]
    fn weak_sequences_have_spec_shape() {
        let grid = make_grid(1, 63).unwrap();
        let zero = GridFunction::zeros(&grid);
        let u1 = weak_test_sequence(WeakKind::Oscillation, 1, &zero, 2.0).unwrap();
        for i in 0..grid.num_nodes() {
            let x = grid.node_coord(i)[0];
            assert_relative_eq!(u1.value(i), (std::f64::consts::PI * x).sin(), epsilon = 1e-14);
        }
        let target = std::f64::consts::PI / 2.0_f64.sqrt();
        for k in [1u32, 2, 4, 8] {
            let u = weak_test_sequence(WeakKind::Oscillation, k, &zero, 2.0).unwrap();
            assert_relative_eq!(u.max_abs(), 1.0 / k as f64, epsilon = 1e-9);
            let nrm = sobolev_norm(&u, 2.0).unwrap();
            assert!((nrm - target).abs() / target <= 0.0065, "k={k} norm={nrm}");
        }
        let coarse = make_grid(1, 31).unwrap();
        assert!(
            weak_test_sequence(WeakKind::Oscillation, 8, &GridFunction::zeros(&coarse), 2.0)
                .is_err()
        );
        for p in [1.5, 2.0, 3.0] {
            let c = weak_test_sequence(WeakKind::Concentration, 4, &zero, p).unwrap();
            assert_relative_eq!(sobolev_norm(&c, p).unwrap(), 1.0, epsilon = 1e-12);
        }
    }
}
