//! Sweep p upward with f = 1 on the Grushin plane and watch u_p approach the
//! distance to the boundary.

use subelliptic::grid::ScalarField;
use subelliptic::limits::{limit_compare, monotonicity_check, p_sweep, SweepConfig, SweepData};
use subelliptic::{Frame, Grid};

fn main() -> subelliptic::Result<()> {
    let g = Grid::uniform(Frame::grushin(), 33)?;
    let rep = p_sweep(&g, &SweepData::Source(ScalarField::constant(&g, 1.0)), &[4.0, 8.0, 16.0, 32.0], &SweepConfig::default())?;
    for e in &rep.entries {
        println!("p {:>4}: E_p {:.6e}  N_p {:.6e}  sup|u_p - d| {:.4}  ({} iterations)", e.p, e.e_p, e.n_p, e.sup_gap, e.iterations);
    }
    let mono = monotonicity_check(&rep)?;
    let cmp = limit_compare(&g, &rep, &rep.limit)?;
    println!("N_p non-increasing: {}", mono.passed);
    println!("0 <= u_p <= d up to {:.3}: {} (excess {:.1e})", cmp.tol_limit, cmp.bounds_hold, cmp.upper_violation.max(0.0));
    Ok(())
}
