//! Chaos-game ergodicity: mean W_1 error of empirical measures against a
//! certified solver reference.

use ifslab::chaos::{ergodicity_experiment, ErgodicityOptions};
use ifslab::response::bernoulli_ifs;
use ifslab::{certify_contraction, solve_stationary, Error, SolverOptions};

fn main() -> ifslab::Result<()> {
    let ifs = bernoulli_ifs(0.5)?;
    let cert = certify_contraction(&ifs, 1.0, 0.0)?;
    let reference = match solve_stationary(&ifs, &cert, &SolverOptions::new(8192, 2e-5)) {
        Ok(r) => r,
        Err(Error::TargetUnreachable(r)) => *r,
        Err(e) => return Err(e),
    };
    let opts = ErgodicityOptions { n_grid: vec![100, 1000, 10_000], chains: 50, seed: 1, x_start: 0.0, burn_in: 0 };
    let table = ergodicity_experiment(&ifs, &reference, &opts)?;
    print!("{}", table.to_csv_string());
    println!("slope {:.3} (reference ledger {:.1e})", table.slope, table.reference_ledger);
    Ok(())
}
