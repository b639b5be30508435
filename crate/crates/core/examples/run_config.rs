//! The `solve` pipeline driven by a TOML file, as the CLI runs it.
//!
//! cargo run --release --example run_config -- experiment.toml out/

use std::path::PathBuf;

use diffplan::commands::cmd_solve;
use diffplan::ExperimentConfig;

const SAMPLE: &str = r#"
seed = 3
field.strength = 1.0
field.noise_kmh = [1.0, 1.0]
grid.obstacles = [[9, 6], [9, 7], [9, 8]]
api.k = 2
api.points = [[12.5, 30.0]]
"#;

fn main() -> diffplan::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::from_toml_str(SAMPLE)?,
    };
    let out = args.next().map_or_else(|| std::env::temp_dir().join("diffplan-run"), PathBuf::from);
    std::fs::create_dir_all(&out)?;

    let s = cmd_solve(&cfg, &out)?;
    println!("classic PI: {} iterations", s.classic_iterations);
    println!("approximate PI (k={}): {} iterations, converged {}, {} unknowns", cfg.api.k, s.api_iterations, s.api_converged, s.unknowns);
    println!("rmse {:.4} against max |v| {:.4}; same action in {} cells", s.rmse, s.max_abs_value, s.policy_agreement);
    println!("artifacts in {}", out.display());
    println!("\neffective config:\n{}", cfg.to_toml_string()?);
    Ok(())
}
