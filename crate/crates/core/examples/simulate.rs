//! Draw one dataset from a simulation condition and print it as wide CSV.
//!
//! cargo run --example simulate -- 42 > data.csv

use bilinear_lgm::cli::write_wide_csv;
use bilinear_lgm::simgen::{gen_dataset, rng_from_seed, SimCondition};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let cond = SimCondition {
        n: 20,
        j: 6,
        knot_mean: 2.5,
        knot_sd: 0.3,
        slope_diff: -2.4,
        explained_share: 0.13,
        theta_eps: 1.0,
        delta: 0.25,
    };
    let mut rng = rng_from_seed(seed);
    let (data, truth) = gen_dataset(&cond, &mut rng).expect("valid condition");
    eprintln!("population means {:?}", truth.alpha.as_slice());
    eprintln!("paths to the factors:\n{:.4}", truth.b);
    write_wide_csv(std::io::stdout().lock(), &data, None).expect("stdout");
}
