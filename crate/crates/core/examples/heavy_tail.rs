//! Resets with heavy-tailed translations: which moments survive.

use ifslab::certify_contraction;
use ifslab::ifs::{find_exponent, heavy_tail_ifs, TailLaw};

fn main() -> ifslab::Result<()> {
    for s in [1.5, 2.5, 4.0] {
        let ifs = heavy_tail_ifs(0.5, 0.5, &TailLaw::Power { exponent: s }, 2000)?;
        let lumped = ifs.truncation().map(|t| t.lumped_mass).unwrap_or(0.0);
        let q = find_exponent(&ifs).map(|(q, _)| q);
        let first = certify_contraction(&ifs, 1.0, 0.0).map(|c| c.moment_bound());
        println!("p_n ∝ n^-{s}: lumped mass {lumped:.2e}, contraction exponent {q:?}, first moment bound {first:?}");
    }
    Ok(())
}
