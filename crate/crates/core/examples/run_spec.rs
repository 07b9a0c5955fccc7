//! Running an experiment spec from code, as the `ifslab run` command does.

use ifslab::cli::{run_spec, ExperimentSpec, RunOverrides};

fn main() {
    let spec = ExperimentSpec::from_json_str(
        r#"{"kind": "solve", "model": {"family": "bernoulli", "lambda": 0.6}, "solver": {"atoms": 2048, "target_error": 1e-3}}"#,
    )
    .expect("spec parses");
    let out_dir = std::env::temp_dir().join("ifslab-example-run");
    let overrides = RunOverrides { seed: Some(1), out_dir: Some(out_dir), ..Default::default() };
    match run_spec(spec, std::path::Path::new("."), &overrides) {
        Ok(out) => {
            for c in &out.summary.checks {
                println!("{} {}: {:.3e} <= {:.3e}", c.verdict, c.name, c.measured, c.bound);
            }
            println!("files in {}: {:?}", out.out_dir.display(), out.summary.files);
        }
        Err(e) => println!("{}", e.to_json_string()),
    }
}
