//! Distance between the stationary measures of two nearby models against
//! the perturbation bound.

use ifslab::response::closeness_check;
use ifslab::transport::ifs_distance;
use ifslab::{IfsModel, SolverOptions};

fn main() -> ifslab::Result<()> {
    let ifs0 = IfsModel::affine("base", &[(0.4, 0.0, 0.5), (-0.3, 1.0, 0.5)], 0.0)?;
    let ifs1 = IfsModel::affine("shifted", &[(0.4, 0.0, 0.5), (-0.3, 1.02, 0.5)], 0.0)?;
    println!("W_2 distance between the models: {:.4}", ifs_distance(&ifs0, &ifs1, 2.0, 0.0)?.distance);
    let r = closeness_check(&ifs0, &ifs1, 2.0, 0.0, &SolverOptions::new(16384, 1e-3))?;
    println!(
        "W_2(μ0, μ1) = {:.4e} <= {:.4e} (constant {:.3}, slack {:.1e}): {}",
        r.measured_wq, r.bound, r.constant, r.ledger_slack, r.verdict
    );
    Ok(())
}
