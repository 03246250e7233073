//! Seeded random generators for grid functions and pair measures.
//!
//! Everything here is deterministic given the seed (ChaCha8); the test suites and the
//! randomized brute-force oracle are built on these.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{GridFunction, GridRef};
use crate::measures::{Atom, MarginalMeasure, PairMeasure};
use crate::spectral::stiffness_solve;
use crate::Result;

/// Standard normal via Box–Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gaussian nodal values.
pub fn random_grid_function(grid: &GridRef, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.num_nodes()).map(|_| normal(&mut rng)).collect();
    GridFunction::new(grid, values).expect("finite random values")
}

/// Smooth random function: stiffness-filtered Gaussian noise (a draw that concentrates
/// on low frequencies, where dual-norm maximizers of finite-mass measures live).
pub fn random_smooth_function(grid: &GridRef, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..grid.num_nodes()).map(|_| normal(&mut rng)).collect();
    let smooth = stiffness_solve(grid, &noise);
    GridFunction::new(grid, smooth).expect("finite smooth values")
}

/// Random cell-density measure with uniform densities in [0,1) (signed: [−1,1)).
pub fn random_cell_density(grid: &GridRef, seed: u64, signed: bool) -> Result<PairMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.num_closed();
    let lo = if signed { -1.0 } else { 0.0 };
    let rho = DMatrix::from_fn(m, m, |_, _| rng.gen_range(lo..1.0));
    PairMeasure::from_density(grid, rho, signed)
}

/// Random atomic measure with up to 6 atoms strictly inside Ω×Ω.
pub fn random_atom_measure(grid: &GridRef, seed: u64, signed: bool) -> Result<PairMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(1..=6);
    let mut point = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        [rng.gen_range(0.05..0.95), if grid.dim() == 2 { rng.gen_range(0.05..0.95) } else { 0.0 }]
    };
    let atoms = (0..count)
        .map(|_| Atom {
            x: point(&mut rng),
            y: point(&mut rng),
            mass: if signed { rng.gen_range(-1.0..1.0) } else { rng.gen_range(0.1..1.0) },
        })
        .collect();
    PairMeasure::from_atoms(grid, atoms, signed)
}

/// Random product-of-marginals measure with affine densities.
pub fn random_product_measure(grid: &GridRef, seed: u64, signed: bool) -> Result<PairMeasure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut marginal = |rng: &mut ChaCha8Rng| -> Result<MarginalMeasure> {
        let (a, b): (f64, f64) = if signed {
            (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        } else {
            (rng.gen_range(0.1..1.0), rng.gen_range(0.0..1.0))
        };
        MarginalMeasure::from_density_fn(grid, move |x| a + b * x[0])
    };
    let m1 = marginal(&mut rng)?;
    let m2 = marginal(&mut rng)?;
    PairMeasure::from_marginals(&m1, &m2)
}

/// Random measure of mixed representation. Cycles density / atoms / product / sums by seed.
pub fn random_pair_measure(grid: &GridRef, seed: u64, signed: bool) -> Result<PairMeasure> {
    match seed % 4 {
        0 => random_cell_density(grid, seed, signed),
        1 => random_atom_measure(grid, seed, signed),
        2 => random_product_measure(grid, seed, signed),
        _ => {
            let a = random_cell_density(grid, seed.wrapping_add(13), signed)?;
            let b = random_atom_measure(grid, seed.wrapping_add(29), signed)?;
            a.add(&b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn generators_are_deterministic() {
        let grid = make_grid(1, 8).unwrap();
        let a = random_grid_function(&grid, 5);
        let b = random_grid_function(&grid, 5);
        assert_eq!(a.values(), b.values());
        let m1 = random_pair_measure(&grid, 17, false).unwrap();
        let m2 = random_pair_measure(&grid, 17, false).unwrap();
        assert_eq!(m1.total_mass(), m2.total_mass());
        assert!(!m1.is_signed());
    }
}
