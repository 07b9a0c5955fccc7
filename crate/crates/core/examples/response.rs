//! Parameter dependence of Bernoulli convolutions: the Lipschitz bound and a
//! finite-difference derivative of the second moment.

use ifslab::response::{
    bernoulli_second_moment_derivative, finite_difference_response, lipschitz_experiment, response_rows_csv,
    TestFunction,
};
use ifslab::SolverOptions;

fn main() -> ifslab::Result<()> {
    let opts = SolverOptions::new(16384, 1e-3);
    let rows = lipschitz_experiment(&[0.6, 0.75], 0.01, 1.0, &opts)?;
    print!("{}", response_rows_csv(&rows));

    let r =
        finite_difference_response(&TestFunction::square(), 0.6, &[0.04, 0.02], 1.0, &SolverOptions::new(16384, 1e-4))?;
    println!(
        "d/dλ ∫x² dμ_λ at 0.6: {:.5} ± {:.1e} ({:?}); closed form {:.5}",
        r.estimate,
        r.error_bar,
        r.status,
        bernoulli_second_moment_derivative(0.6)
    );
    Ok(())
}
