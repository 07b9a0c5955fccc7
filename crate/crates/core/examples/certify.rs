//! Contraction certificates and exponent search for a model that expands
//! on one branch but contracts on average.

use ifslab::ifs::{find_exponent, reduce_exponent};
use ifslab::{certify_contraction, IfsModel};

fn main() -> ifslab::Result<()> {
    let ifs = IfsModel::affine("mix", &[(0.5, 0.0, 0.5), (1.5, 1.0, 0.5)], 0.0)?;

    match certify_contraction(&ifs, 1.0, 0.0) {
        Ok(c) => println!("q = 1 certifies: {c:?}"),
        Err(e) => println!("q = 1: {e}"),
    }

    let (q, f) = find_exponent(&ifs).expect("log-average of slopes is negative");
    println!("exponent search stops at q = {q:.4} (Σ p Lip^q = {f:.6})");

    let cert = certify_contraction(&ifs, 0.5, 0.0)?;
    println!("q = 0.5: rho = {:.5}, A = {:.3}, moment bound {:.3}", cert.rho, cert.displacement, cert.moment_bound());
    let reduced = reduce_exponent(&cert, 0.25)?;
    println!("passed down to q = 0.25: rho = {:.5}", reduced.rho);
    Ok(())
}
