//! Exact 1D optimal transport: the monotone coupling against the min-cost
//! flow solver, with its dual certificate.

use ifslab::transport::{wq_1d_monotone, wq_exact_flow};
use ifslab::DiscreteMeasure;

fn main() -> ifslab::Result<()> {
    let m0 = DiscreteMeasure::new([(0.0, 0.2), (1.0, 0.5), (3.0, 0.3)])?;
    let m1 = DiscreteMeasure::new([(0.5, 0.6), (2.0, 0.4)])?;

    for q in [1.0, 2.0] {
        let mono = wq_1d_monotone(&m0, &m1, q)?;
        let flow = wq_exact_flow(&m0, &m1, q)?;
        println!("q = {q}: W_q monotone {:.6}, flow {:.6}", mono.wasserstein(), flow.wasserstein());
    }

    // below q = 1 only the flow solver applies
    let plan = wq_exact_flow(&m0, &m1, 0.5)?;
    println!("q = 0.5: W_q = {:.6}", plan.wasserstein());
    print!("{}", plan.to_csv_string());
    if let Some(d) = &plan.duals {
        println!("dual potentials: {:?} / {:?}", d.source, d.target);
    }
    Ok(())
}
