use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spike_pca::eigencore::{sample_cov, sym_eigen, SymMatrix};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(600);
    let n: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2 * d);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((d, n), |_| {
        let u: f64 = rng.random();
        (2.0 * u - 1.0) * 3f64.sqrt()
    });
    let t0 = Instant::now();
    let cov = sample_cov(&x.view()).unwrap();
    let t_cov = t0.elapsed();
    let t1 = Instant::now();
    let e = sym_eigen(&cov).unwrap();
    let t_eig = t1.elapsed();
    println!(
        "d={d} n={n} cov={:?} eig={:?} top={:.4} bottom={:.4}",
        t_cov, t_eig, e.values[0], e.values[d - 1]
    );
    let m = SymMatrix::new(cov.as_array().clone()).unwrap();
    println!("resid_rel={:.3e} orth={:.3e}",
        e.reconstruction_residual(&m) / m.frobenius_norm(), e.orthonormality_error());
}
