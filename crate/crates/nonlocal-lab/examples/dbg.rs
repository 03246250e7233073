use nonlocal_lab::duality::dual_norm;
use nonlocal_lab::grid::make_grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = make_grid(1, 24).unwrap();
    for p in [1.5, 2.0, 3.0] {
        for t in 0..20 {
            let c: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = dual_norm(&grid, &c, p).unwrap();
            if !d.converged || d.iterations > 2000 {
                println!("p={p} trial={t} value={:.10} converged={} iters={}", d.value, d.converged, d.iterations);
            }
        }
    }
    println!("done");
}
