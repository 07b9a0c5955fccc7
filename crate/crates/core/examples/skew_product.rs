//! A skew product over the golden rotation: certificate, convergence table
//! and the fiberwise estimate.

use ifslab::skew::{
    certify_skew, skew_convergence_experiment, SkewExperimentOptions, SkewModel, TrigPoly, GOLDEN_ALPHA,
};

fn main() -> ifslab::Result<()> {
    // ψ_y(x) = x/2 + cos 2πy
    let b = TrigPoly { cos: vec![1.0], ..TrigPoly::default() };
    let model = SkewModel::rotation("cosine", GOLDEN_ALPHA, TrigPoly::constant(0.5), b, 0.0)?;
    let cert = certify_skew(&model)?;
    println!("rho = {}, A = {}, support radius {}", cert.rho, cert.displacement, cert.support_radius);

    let opts = SkewExperimentOptions::new(1.0, (1..=10).collect(), 20_000, 7);
    let t = skew_convergence_experiment(&model, &opts)?;
    print!("{}", t.to_csv_string());
    println!(
        "{} slope {:.4} (bound {:.4}), marginal {:.4}: {}",
        t.slope_source, t.slope, t.slope_bound, t.marginal_slope, t.verdict
    );
    Ok(())
}
