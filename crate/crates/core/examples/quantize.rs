//! Support compression with exactly measured error.

use ifslab::measures::quantize;
use ifslab::{DiscreteMeasure, MomentSpec};

fn main() -> ifslab::Result<()> {
    let m = DiscreteMeasure::uniform_grid(0.0, 1.0, 1000)?;
    let spec = MomentSpec::new(1.0, 0.0)?;
    for k in [1, 2, 4, 8, 16, 32, 64] {
        let (c, err) = quantize(&m, k, &spec)?;
        println!("{k:>3} atoms: W_1 error {err:.3e} ({} atoms kept)", c.len());
    }
    Ok(())
}
