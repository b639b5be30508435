//! Value error of approximate PI as the grid is refined.

use diffplan::commands::cmd_mse;
use diffplan::ExperimentConfig;

fn main() -> diffplan::Result<()> {
    let cfg = ExperimentConfig::from_toml_str("mse.grid_sizes = [10, 15, 20, 30]")?;
    let dir = tempfile::tempdir()?;
    let rows = cmd_mse(&cfg, dir.path())?;
    println!("{:>4} {:>3} {:>12} {:>10}", "n", "k", "mse", "max |v|");
    for r in rows {
        println!("{:4} {:3} {:12.3e} {:10.4}", r.grid_n, r.k, r.mse, r.max_abs_value);
    }
    Ok(())
}
