//! Exponential moments and tail bounds of the (a, p) model.

use ifslab::certify_contraction;
use ifslab::chaos::{mixing_depth, rao_blackwell_survival, sample_stationary};
use ifslab::ifs::ap_model;
use ifslab::stationary::{exp_moment_product, tail_upper_bound};

fn main() -> ifslab::Result<()> {
    let (a, p) = (0.5f64, 0.5f64);
    let limit = (1.0 / (1.0 - p)).ln();
    for b in [-0.5, 0.1, 0.3] {
        let r = exp_moment_product(a, p, b, 64)?;
        println!("E[e^({b} X)] = {:.10} ± {:.1e} (needs b < {limit:.4})", r.product_value, r.truncation_bound);
    }

    let ifs = ap_model(a, p)?;
    let cert = certify_contraction(&ifs, 1.0, 0.0)?;
    let s = sample_stationary(&ifs, &cert, 200_000, mixing_depth(&cert, 1e-12)?, 3)?;
    for t in [1.0, 5.0, 10.0, 20.0] {
        let (surv, se) = rao_blackwell_survival(&s.samples, a, p, t);
        println!("P(X >= {t}) = {surv:.3e} ± {se:.1e}, bound {:.3e}", tail_upper_bound(a, p, t)?);
    }
    Ok(())
}
