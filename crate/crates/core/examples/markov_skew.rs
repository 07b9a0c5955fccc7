//! A skew product over a two-state Markov shift, loaded from JSON.

use ifslab::skew::{certify_skew, fiber_wasserstein_estimate, simulate_skew, SkewModel};

fn main() -> ifslab::Result<()> {
    let text = r#"{
        "base": {"kind": "markov-shift", "transition": [[0.9, 0.1], [0.3, 0.7]]},
        "fiber": {"kind": "symbolic", "maps": [{"a": 0.5, "b": 0.0}, {"a": -0.6, "b": 1.0}]}
    }"#;
    let mut model: SkewModel = serde_json::from_str(text)?;
    model.validate()?;
    let cert = certify_skew(&model)?;
    println!("rho = {}, A = {}", cert.rho, cert.displacement);

    let near = simulate_skew(&model, 0.0, 5, 20_000, 1)?;
    let far = simulate_skew(&model, 0.0, 40, 20_000, 2)?;
    let w = fiber_wasserstein_estimate(&near, &far, 1.0, None)?;
    println!("fiberwise W_1 between steps 5 and 40: {w:.3e}");
    Ok(())
}
