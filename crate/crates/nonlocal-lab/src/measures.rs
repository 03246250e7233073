//! Finite measures on Ω×Ω and their quadrature: masses, bilinear pairings, double
//! integrals, and the weighted marginals used by the pairing-duality arguments.
//!
//! A measure is a sum of components in three representations:
//! cell densities sampled on the closed lattice (trapezoid weights), atom lists
//! (evaluated by multilinear interpolation), and products of one-variable marginals.
//! Signed measures arise only as differences for cut-norm evaluation; double integrals
//! of general integrands require the nonnegative cone.

use nalgebra::{DMatrix, DVector};

use crate::error::LabError;
use crate::grid::{GridFunction, GridRef};
use crate::Result;

/// Cap on closed-lattice points per axis factor for dense cell-density storage.
const MAX_DENSITY_POINTS: usize = 4200;

/// Point mass at (x, y) ∈ Ω×Ω.
#[derive(Clone, Copy, Debug)]
pub struct Atom {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub mass: f64,
}

/// One-variable measure as nodal weights on the closed lattice (masses, not densities).
#[derive(Clone, Debug)]
pub struct MarginalMeasure {
    grid: GridRef,
    weights: Vec<f64>,
}

impl MarginalMeasure {
    /// Wraps closed-lattice weights (length `grid.num_closed()`).
    pub fn new(grid: &GridRef, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.num_closed() {
            return Err(LabError::InvalidArgument(format!(
                "expected {} closed-lattice weights, got {}",
                grid.num_closed(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(LabError::non_finite(format!("marginal weight {w}")));
        }
        Ok(MarginalMeasure { grid: grid.clone(), weights })
    }

    /// Samples a density against the trapezoid quadrature: weight_I = w_I · ρ(x_I).
    pub fn from_density_fn(grid: &GridRef, rho: impl Fn(&[f64; 2]) -> f64) -> Result<Self> {
        let weights = (0..grid.num_closed())
            .map(|i| grid.closed_weight(i) * rho(&grid.closed_coord(i)))
            .collect();
        MarginalMeasure::new(grid, weights)
    }

    /// The 1D Lebesgue marginal (density 1).
    pub fn lebesgue(grid: &GridRef) -> Self {
        let weights = (0..grid.num_closed()).map(|i| grid.closed_weight(i)).collect();
        MarginalMeasure { grid: grid.clone(), weights }
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// ∫ φ dm for a grid function φ (zero on the boundary layer).
    pub fn integrate(&self, phi: &GridFunction) -> Result<f64> {
        check_same_grid(&self.grid, phi.grid())?;
        Ok(self.weights.iter().enumerate().map(|(i, w)| w * phi.value_closed(i)).sum())
    }

    /// Interior nodal coefficients c_i with Σ c_i φ_i h^dim = ∫ φ dm, for dual norms.
    pub fn dual_coefficients(&self) -> Vec<f64> {
        let hd = self.grid.cell_weight();
        (0..self.grid.num_nodes())
            .map(|i| self.weights[self.grid.interior_to_closed(i)] / hd)
            .collect()
    }

    pub fn scale(&self, c: f64) -> Self {
        MarginalMeasure {
            grid: self.grid.clone(),
            weights: self.weights.iter().map(|w| c * w).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Component {
    /// Densities at closed-lattice point pairs; quadrature weight ρ_IJ · w_I · w_J.
    Density(DMatrix<f64>),
    Atoms(Vec<Atom>),
    /// Product of marginal weight vectors: pairing factorizes.
    Product(Vec<f64>, Vec<f64>),
}

/// Finite (possibly signed) measure on Ω×Ω.
#[derive(Clone, Debug)]
pub struct PairMeasure {
    grid: GridRef,
    comps: Vec<Component>,
    signed: bool,
}

fn check_same_grid(a: &GridRef, b: &GridRef) -> Result<()> {
    if std::sync::Arc::ptr_eq(a, b) || (a.dim() == b.dim() && a.n() == b.n()) {
        Ok(())
    } else {
        Err(LabError::GridMismatch)
    }
}

impl PairMeasure {
    fn check_density_size(grid: &GridRef) -> Result<()> {
        if grid.num_closed() > MAX_DENSITY_POINTS {
            return Err(LabError::SizeCap(format!(
                "cell-density storage needs {} closed points per factor (cap {})",
                grid.num_closed(),
                MAX_DENSITY_POINTS
            )));
        }
        Ok(())
    }

    /// Cell-density measure from a density matrix over closed-lattice pairs.
    pub fn from_density(grid: &GridRef, rho: DMatrix<f64>, signed: bool) -> Result<Self> {
        Self::check_density_size(grid)?;
        let m = grid.num_closed();
        if rho.nrows() != m || rho.ncols() != m {
            return Err(LabError::InvalidArgument(format!(
                "density must be {m}x{m}, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(LabError::non_finite("cell density".into()));
        }
        if !signed && rho.iter().any(|&v| v < 0.0) {
            return Err(LabError::SignedMeasure(
                "negative density in a measure not flagged signed".into(),
            ));
        }
        Ok(PairMeasure { grid: grid.clone(), comps: vec![Component::Density(rho)], signed })
    }

    /// Samples ρ(x, y) at closed-lattice point pairs.
    pub fn from_density_fn(
        grid: &GridRef,
        rho: impl Fn(&[f64; 2], &[f64; 2]) -> f64,
        signed: bool,
    ) -> Result<Self> {
        Self::check_density_size(grid)?;
        let m = grid.num_closed();
        let mat = DMatrix::from_fn(m, m, |i, j| rho(&grid.closed_coord(i), &grid.closed_coord(j)));
        Self::from_density(grid, mat, signed)
    }

    /// Lebesgue measure on Ω×Ω (density ≡ 1); total mass exactly 1.
    pub fn lebesgue(grid: &GridRef) -> Result<Self> {
        Self::from_density_fn(grid, |_, _| 1.0, false)
    }

    /// Atomic measure; atoms must lie strictly inside Ω×Ω.
    pub fn from_atoms(grid: &GridRef, atoms: Vec<Atom>, signed: bool) -> Result<Self> {
        for a in &atoms {
            if !a.mass.is_finite() {
                return Err(LabError::non_finite(format!("atom mass {}", a.mass)));
            }
            if !signed && a.mass < 0.0 {
                return Err(LabError::SignedMeasure("negative atom mass".into()));
            }
            for c in 0..grid.dim() {
                for v in [a.x[c], a.y[c]] {
                    if !(v > 0.0 && v < 1.0) {
                        return Err(LabError::InvalidArgument(format!(
                            "atom coordinate {v} not strictly inside (0,1)"
                        )));
                    }
                }
            }
        }
        Ok(PairMeasure { grid: grid.clone(), comps: vec![Component::Atoms(atoms)], signed })
    }

    /// Unit Dirac mass at (x, y).
    pub fn dirac(grid: &GridRef, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        Self::from_atoms(grid, vec![Atom { x, y, mass: 1.0 }], false)
    }

    /// Product measure m1 ⊗ m2.
    pub fn from_marginals(m1: &MarginalMeasure, m2: &MarginalMeasure) -> Result<Self> {
        check_same_grid(m1.grid(), m2.grid())?;
        let signed = m1.weights.iter().any(|&w| w < 0.0) || m2.weights.iter().any(|&w| w < 0.0);
        Ok(PairMeasure {
            grid: m1.grid.clone(),
            comps: vec![Component::Product(m1.weights.clone(), m2.weights.clone())],
            signed,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.comps
    }

    /// μ(Ω×Ω).
    pub fn total_mass(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| match c {
                Component::Density(rho) => {
                    let m = self.grid.num_closed();
                    let mut s = 0.0;
                    for i in 0..m {
                        let wi = self.grid.closed_weight(i);
                        for j in 0..m {
                            s += rho[(i, j)] * wi * self.grid.closed_weight(j);
                        }
                    }
                    s
                }
                Component::Atoms(atoms) => atoms.iter().map(|a| a.mass).sum(),
                Component::Product(m1, m2) => m1.iter().sum::<f64>() * m2.iter().sum::<f64>(),
            })
            .sum()
    }

    /// ∬ φ(x) ψ(y) dμ(x, y).
    pub fn pair_integral(&self, phi: &GridFunction, psi: &GridFunction) -> Result<f64> {
        check_same_grid(&self.grid, phi.grid())?;
        check_same_grid(&self.grid, psi.grid())?;
        let m = self.grid.num_closed();
        let mut total = 0.0;
        for c in &self.comps {
            total += match c {
                Component::Density(rho) => {
                    let pw = DVector::from_fn(m, |i, _| {
                        self.grid.closed_weight(i) * phi.value_closed(i)
                    });
                    let qw = DVector::from_fn(m, |j, _| {
                        self.grid.closed_weight(j) * psi.value_closed(j)
                    });
                    (rho * qw).dot(&pw)
                }
                Component::Atoms(atoms) => {
                    atoms.iter().map(|a| a.mass * phi.interp(&a.x) * psi.interp(&a.y)).sum()
                }
                Component::Product(m1, m2) => {
                    let s1: f64 =
                        m1.iter().enumerate().map(|(i, w)| w * phi.value_closed(i)).sum();
                    let s2: f64 =
                        m2.iter().enumerate().map(|(j, w)| w * psi.value_closed(j)).sum();
                    s1 * s2
                }
            };
        }
        Ok(total)
    }

    /// ∬ f(u(x), v(y)) dμ(x, y). Requires a nonnegative measure; errors name the first
    /// (s, t) on which f fails to be finite.
    pub fn double_integral(
        &self,
        f: &dyn Fn(f64, f64) -> f64,
        u: &GridFunction,
        v: &GridFunction,
    ) -> Result<f64> {
        if self.signed {
            return Err(LabError::SignedMeasure(
                "double integrals of general integrands need the nonnegative cone".into(),
            ));
        }
        check_same_grid(&self.grid, u.grid())?;
        check_same_grid(&self.grid, v.grid())?;
        let m = self.grid.num_closed();
        let eval = |s: f64, t: f64| -> Result<f64> {
            let val = f(s, t);
            if !val.is_finite() {
                return Err(LabError::non_finite(format!("integrand at (s,t)=({s},{t})")));
            }
            Ok(val)
        };
        let uc: Vec<f64> = (0..m).map(|i| u.value_closed(i)).collect();
        let vc: Vec<f64> = (0..m).map(|j| v.value_closed(j)).collect();
        let mut total = 0.0;
        for c in &self.comps {
            match c {
                Component::Density(rho) => {
                    for i in 0..m {
                        let wi = self.grid.closed_weight(i);
                        for j in 0..m {
                            let w = rho[(i, j)] * wi * self.grid.closed_weight(j);
                            if w != 0.0 {
                                total += w * eval(uc[i], vc[j])?;
                            }
                        }
                    }
                }
                Component::Atoms(atoms) => {
                    for a in atoms {
                        total += a.mass * eval(u.interp(&a.x), v.interp(&a.y))?;
                    }
                }
                Component::Product(m1, m2) => {
                    for (i, wi) in m1.iter().enumerate() {
                        if *wi == 0.0 {
                            continue;
                        }
                        for (j, wj) in m2.iter().enumerate() {
                            let w = wi * wj;
                            if w != 0.0 {
                                total += w * eval(uc[i], vc[j])?;
                            }
                        }
                    }
                }
            }
        }
        Ok(total)
    }

    /// Weighted marginal μ_ψ(B) = ∫_{B×Ω} ψ(y) dμ(x, y), as closed-lattice weights.
    ///
    /// Satisfies ∫ φ dμ_ψ = pair_integral(μ, φ, ψ) exactly for every grid function φ.
    pub fn marginal_weighted_by(&self, psi: &GridFunction) -> Result<MarginalMeasure> {
        check_same_grid(&self.grid, psi.grid())?;
        let m = self.grid.num_closed();
        let mut weights = vec![0.0; m];
        for c in &self.comps {
            match c {
                Component::Density(rho) => {
                    for i in 0..m {
                        let wi = self.grid.closed_weight(i);
                        let mut s = 0.0;
                        for j in 0..m {
                            s += rho[(i, j)] * self.grid.closed_weight(j) * psi.value_closed(j);
                        }
                        weights[i] += wi * s;
                    }
                }
                Component::Atoms(atoms) => {
                    for a in atoms {
                        let mass = a.mass * psi.interp(&a.y);
                        for (idx, w) in closed_interp_weights(&self.grid, &a.x) {
                            weights[idx] += mass * w;
                        }
                    }
                }
                Component::Product(m1, m2) => {
                    let s2: f64 =
                        m2.iter().enumerate().map(|(j, w)| w * psi.value_closed(j)).sum();
                    for (i, w) in m1.iter().enumerate() {
                        weights[i] += w * s2;
                    }
                }
            }
        }
        MarginalMeasure::new(&self.grid, weights)
    }

    /// Weighted comarginal μ^u(B) = ∫_{Ω×B} u(x) dμ(x, y); mirror of
    /// [`PairMeasure::marginal_weighted_by`] in the second variable.
    pub fn comarginal_weighted_by(&self, u: &GridFunction) -> Result<MarginalMeasure> {
        self.transpose().marginal_weighted_by(u)
    }

    /// The measure with the two variables swapped.
    pub fn transpose(&self) -> PairMeasure {
        let comps = self
            .comps
            .iter()
            .map(|c| match c {
                Component::Density(rho) => Component::Density(rho.transpose()),
                Component::Atoms(atoms) => Component::Atoms(
                    atoms.iter().map(|a| Atom { x: a.y, y: a.x, mass: a.mass }).collect(),
                ),
                Component::Product(m1, m2) => Component::Product(m2.clone(), m1.clone()),
            })
            .collect();
        PairMeasure { grid: self.grid.clone(), comps, signed: self.signed }
    }

    /// Scales all component weights; negative factors produce a signed measure.
    pub fn scale(&self, c: f64) -> PairMeasure {
        let comps = self
            .comps
            .iter()
            .map(|comp| match comp {
                Component::Density(rho) => Component::Density(rho.scale(c)),
                Component::Atoms(atoms) => Component::Atoms(
                    atoms.iter().map(|a| Atom { mass: c * a.mass, ..*a }).collect(),
                ),
                Component::Product(m1, m2) => {
                    Component::Product(m1.iter().map(|w| c * w).collect(), m2.clone())
                }
            })
            .collect();
        PairMeasure { grid: self.grid.clone(), comps, signed: self.signed || c < 0.0 }
    }

    /// μ + ν (components concatenated; densities merged when both are single densities).
    pub fn add(&self, other: &PairMeasure) -> Result<PairMeasure> {
        check_same_grid(&self.grid, &other.grid)?;
        let mut out = self.clone();
        out.signed = self.signed || other.signed;
        if let (1, 1, Some(Component::Density(a)), Some(Component::Density(b))) =
            (self.comps.len(), other.comps.len(), self.comps.first(), other.comps.first())
        {
            out.comps = vec![Component::Density(a + b)];
            return Ok(out);
        }
        out.comps.extend(other.comps.iter().cloned());
        Ok(out)
    }

    /// Signed difference μ − ν for cut-norm evaluation.
    pub fn sub(&self, other: &PairMeasure) -> Result<PairMeasure> {
        let mut diff = self.add(&other.scale(-1.0))?;
        diff.signed = true;
        Ok(diff)
    }

    /// Dense interior pairing matrix B with pair_integral(μ, φ, ψ) = φᵀ B ψ.
    pub fn pairing_matrix(&self) -> DMatrix<f64> {
        let nn = self.grid.num_nodes();
        let mut b = DMatrix::zeros(nn, nn);
        for c in &self.comps {
            match c {
                Component::Density(rho) => {
                    for i in 0..nn {
                        let ci = self.grid.interior_to_closed(i);
                        let wi = self.grid.closed_weight(ci);
                        for j in 0..nn {
                            let cj = self.grid.interior_to_closed(j);
                            b[(i, j)] += rho[(ci, cj)] * wi * self.grid.closed_weight(cj);
                        }
                    }
                }
                Component::Atoms(atoms) => {
                    for a in atoms {
                        let wx = GridFunction::interp_weights(&self.grid, &a.x);
                        let wy = GridFunction::interp_weights(&self.grid, &a.y);
                        for &(i, wi) in &wx {
                            for &(j, wj) in &wy {
                                b[(i, j)] += a.mass * wi * wj;
                            }
                        }
                    }
                }
                Component::Product(m1, m2) => {
                    for i in 0..nn {
                        let wi = m1[self.grid.interior_to_closed(i)];
                        if wi == 0.0 {
                            continue;
                        }
                        for j in 0..nn {
                            b[(i, j)] += wi * m2[self.grid.interior_to_closed(j)];
                        }
                    }
                }
            }
        }
        b
    }
}

/// Multilinear interpolation weights over the closed lattice (boundary points included),
/// the adjoint of evaluation at `x`. Weights sum to 1 for x ∈ [0,1]^dim.
pub(crate) fn closed_interp_weights(grid: &GridRef, x: &[f64; 2]) -> Vec<(usize, f64)> {
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
                out.push((c, 1.0 - t));
                out.push((c + 1, t));
            }
        }
        _ => {
            let l = grid.closed_per_axis();
            if let (Some((c1, t1)), Some((c2, t2))) = (locate(x[0]), locate(x[1])) {
                for (a, wa) in [(c1, 1.0 - t1), (c1 + 1, t1)] {
                    for (b, wb) in [(c2, 1.0 - t2), (c2 + 1, t2)] {
                        out.push((a * l + b, wa * wb));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sin_fn(grid: &GridRef) -> GridFunction {
        GridFunction::from_fn(grid, |x| (std::f64::consts::PI * x[0]).sin()).unwrap()
    }

    #[test]
    fn total_mass_examples() {
        let grid = make_grid(1, 15).unwrap();
        let atoms = PairMeasure::from_atoms(
            &grid,
            vec![
                Atom { x: [0.25, 0.0], y: [0.75, 0.0], mass: 2.0 },
                Atom { x: [0.5, 0.0], y: [0.5, 0.0], mass: 1.5 },
            ],
            false,
        )
        .unwrap();
        assert_eq!(atoms.total_mass(), 3.5);

        let leb = PairMeasure::lebesgue(&grid).unwrap();
        assert_relative_eq!(leb.total_mass(), 1.0, epsilon = 1e-12);

        let m = MarginalMeasure::from_density_fn(&grid, |x| 1.0 + x[0]).unwrap();
        let prod = PairMeasure::from_marginals(&m, &m).unwrap();
        assert_relative_eq!(prod.total_mass(), m.total_mass().powi(2), epsilon = 1e-13);
    }

    #[test]
    fn pair_integral_examples() {
        // atom snapped to a node
        let grid = make_grid(1, 63).unwrap();
        let node = grid.nearest_node(&[0.5, 0.0]);
        let x0 = grid.node_coord(node);
        let mu = PairMeasure::dirac(&grid, x0, x0).unwrap();
        let phi = sin_fn(&grid);
        let v = phi.value(node);
        assert_relative_eq!(mu.pair_integral(&phi, &phi).unwrap(), v * v, epsilon = 1e-14);

        // product Fubini identity
        let m1 = MarginalMeasure::from_density_fn(&grid, |x| 1.0 + x[0]).unwrap();
        let m2 = MarginalMeasure::from_density_fn(&grid, |x| 2.0 - x[0]).unwrap();
        let prod = PairMeasure::from_marginals(&m1, &m2).unwrap();
        let psi = GridFunction::from_fn(&grid, |x| x[0] * (1.0 - x[0])).unwrap();
        assert_relative_eq!(
            prod.pair_integral(&phi, &psi).unwrap(),
            m1.integrate(&phi).unwrap() * m2.integrate(&psi).unwrap(),
            epsilon = 1e-14
        );

        // Lebesgue against sin(pi x): (∫ sin)² = (2/π)², O(h²)
        for n in [32usize, 64] {
            let grid = make_grid(1, n).unwrap();
            let leb = PairMeasure::lebesgue(&grid).unwrap();
            let s = sin_fn(&grid);
            let target = (2.0 / std::f64::consts::PI).powi(2);
            let got = leb.pair_integral(&s, &s).unwrap();
            assert!((got - target).abs() <= 2.0 * grid.h() * grid.h(), "n={n}: {got}");
        }
    }

    #[test]
    fn double_integral_examples() {
        let grid = make_grid(1, 64).unwrap();
        let leb = PairMeasure::lebesgue(&grid).unwrap();
        let u = GridFunction::from_fn(&grid, |x| x[0]).unwrap();
        let f = |s: f64, t: f64| (s - t) * (s - t);
        let got = leb.double_integral(&f, &u, &u).unwrap();
        let h = grid.h();
        // exact closed-lattice value is 1/6 − h²/6
        assert_relative_eq!(got, 1.0 / 6.0 - h * h / 6.0, epsilon = 1e-13);
        assert!((got - 1.0 / 6.0).abs() <= h * h);

        // constant integrand reproduces the mass
        let one = |_: f64, _: f64| 1.0;
        assert_relative_eq!(
            leb.double_integral(&one, &u, &u).unwrap(),
            leb.total_mass(),
            epsilon = 1e-12
        );

        // atom evaluation
        let node = grid.nearest_node(&[0.25, 0.0]);
        let xa = grid.node_coord(node);
        let node2 = grid.nearest_node(&[0.75, 0.0]);
        let ya = grid.node_coord(node2);
        let mu =
            PairMeasure::from_atoms(&grid, vec![Atom { x: xa, y: ya, mass: 2.5 }], false).unwrap();
        let g = |s: f64, t: f64| s * s + t;
        assert_relative_eq!(
            mu.double_integral(&g, &u, &u).unwrap(),
            2.5 * g(u.value(node), u.value(node2)),
            epsilon = 1e-14
        );

        // non-finite integrand is reported, signed measures rejected
        let bad = |_: f64, _: f64| f64::NAN;
        assert!(leb.double_integral(&bad, &u, &u).is_err());
        let diff = leb.sub(&leb).unwrap();
        assert!(diff.double_integral(&one, &u, &u).is_err());
    }

    #[test]
    fn marginal_examples_and_adjunction() {
        let grid = make_grid(1, 24).unwrap();
        let m = grid.num_closed();

        // ψ ≡ 1 (nodal) gives the first marginal against the interior indicator
        let leb = PairMeasure::lebesgue(&grid).unwrap();
        let one = GridFunction::new(&grid, vec![1.0; grid.num_nodes()]).unwrap();
        let marg = leb.marginal_weighted_by(&one).unwrap();
        let phi = sin_fn(&grid);
        assert_relative_eq!(
            marg.integrate(&phi).unwrap(),
            leb.pair_integral(&phi, &one).unwrap(),
            epsilon = 1e-14
        );

        // ψ = 0 gives the zero measure
        let zero = GridFunction::zeros(&grid);
        let mz = leb.marginal_weighted_by(&zero).unwrap();
        assert!(mz.weights().iter().all(|&w| w == 0.0));

        // product: m1 scaled by ∫ψ dm2
        let m1 = MarginalMeasure::from_density_fn(&grid, |x| 1.0 + x[0]).unwrap();
        let m2 = MarginalMeasure::from_density_fn(&grid, |x| 2.0 - x[0]).unwrap();
        let prod = PairMeasure::from_marginals(&m1, &m2).unwrap();
        let psi = GridFunction::from_fn(&grid, |x| x[0]).unwrap();
        let mw = prod.marginal_weighted_by(&psi).unwrap();
        let s2 = m2.integrate(&psi).unwrap();
        for i in 0..m {
            assert_relative_eq!(mw.weights()[i], m1.weights()[i] * s2, epsilon = 1e-14);
        }

        // adjunction on random mixed measures, both variables (100 trials)
        for trial in 0..100 {
            let mu = crate::sampling::random_pair_measure(&grid, 1000 + trial, false).unwrap();
            let phi = crate::sampling::random_grid_function(&grid, 2000 + trial);
            let psi = crate::sampling::random_grid_function(&grid, 3000 + trial);
            let lhs = mu.marginal_weighted_by(&psi).unwrap().integrate(&phi).unwrap();
            let rhs = mu.pair_integral(&phi, &psi).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
            let lhs2 = mu.comarginal_weighted_by(&phi).unwrap().integrate(&psi).unwrap();
            assert_relative_eq!(lhs2, rhs, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn comarginal_is_marginal_of_transpose() {
        let grid = make_grid(1, 16).unwrap();
        let mu = crate::sampling::random_pair_measure(&grid, 42, false).unwrap();
        let u = sin_fn(&grid);
        let a = mu.comarginal_weighted_by(&u).unwrap();
        let b = mu.transpose().marginal_weighted_by(&u).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert_relative_eq!(x, y, epsilon = 1e-14);
        }
        // u ≡ 1 gives the second marginal
        let one = GridFunction::new(&grid, vec![1.0; grid.num_nodes()]).unwrap();
        let sec = mu.comarginal_weighted_by(&one).unwrap();
        let phi = sin_fn(&grid);
        assert_relative_eq!(
            sec.integrate(&phi).unwrap(),
            mu.pair_integral(&one, &phi).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn cut_distance_inputs_behave_linearly() {
        let grid = make_grid(1, 12).unwrap();
        let leb = PairMeasure::lebesgue(&grid).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let osc = PairMeasure::from_density_fn(
            &grid,
            |x, y| 1.0 + (tau * x[0]).sin() * (tau * y[0]).sin(),
            false,
        )
        .unwrap();

        let zero = leb.sub(&leb).unwrap();
        assert!(zero.is_signed());
        assert!(zero.total_mass().abs() < 1e-14);

        let diff = leb.sub(&osc).unwrap();
        assert_relative_eq!(
            diff.total_mass(),
            leb.total_mass() - osc.total_mass(),
            epsilon = 1e-13
        );

        // difference equals the density −sin⊗sin as a measure (via pairings)
        let pure = PairMeasure::from_density_fn(
            &grid,
            |x, y| -(tau * x[0]).sin() * (tau * y[0]).sin(),
            true,
        )
        .unwrap();
        let phi = sin_fn(&grid);
        let psi = GridFunction::from_fn(&grid, |x| x[0] * (1.0 - x[0])).unwrap();
        assert_relative_eq!(
            diff.pair_integral(&phi, &psi).unwrap(),
            pure.pair_integral(&phi, &psi).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn pair_integral_is_bilinear_and_measure_linear() {
        let grid = make_grid(1, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..50 {
            let mu = crate::sampling::random_pair_measure(&grid, 500 + trial, false).unwrap();
            let nu = crate::sampling::random_pair_measure(&grid, 700 + trial, false).unwrap();
            let phi = crate::sampling::random_grid_function(&grid, 800 + trial);
            let phi2 = crate::sampling::random_grid_function(&grid, 900 + trial);
            let psi = crate::sampling::random_grid_function(&grid, 1000 + trial);
            let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let comb = phi.scale(a).axpy(b, &phi2).unwrap();
            let lhs = mu.pair_integral(&comb, &psi).unwrap();
            let rhs = a * mu.pair_integral(&phi, &psi).unwrap()
                + b * mu.pair_integral(&phi2, &psi).unwrap();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-11);

            let summ = mu.add(&nu).unwrap();
            assert_relative_eq!(
                summ.pair_integral(&phi, &psi).unwrap(),
                mu.pair_integral(&phi, &psi).unwrap() + nu.pair_integral(&phi, &psi).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn nonnegative_double_integrals_are_nonnegative() {
        let grid = make_grid(1, 10).unwrap();
        let f = |s: f64, t: f64| (s - t) * (s - t);
        for trial in 0..50 {
            let mu = crate::sampling::random_pair_measure(&grid, 4200 + trial, false).unwrap();
            let u = crate::sampling::random_grid_function(&grid, 4300 + trial);
            let v = crate::sampling::random_grid_function(&grid, 4400 + trial);
            assert!(mu.double_integral(&f, &u, &v).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn pairing_matrix_matches_pair_integral() {
        let grid = make_grid(1, 9).unwrap();
        for trial in 0..20 {
            let mu = crate::sampling::random_pair_measure(&grid, 6000 + trial, true).unwrap();
            let phi = crate::sampling::random_grid_function(&grid, 6100 + trial);
            let psi = crate::sampling::random_grid_function(&grid, 6200 + trial);
            let b = mu.pairing_matrix();
            let pv = DVector::from_column_slice(phi.values());
            let qv = DVector::from_column_slice(psi.values());
            let via_matrix = (b * qv).dot(&pv);
            assert_relative_eq!(
                via_matrix,
                mu.pair_integral(&phi, &psi).unwrap(),
                epsilon = 1e-12,
                max_relative = 1e-11
            );
        }
    }
}
