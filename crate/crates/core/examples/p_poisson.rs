//! One p-Poisson solve against the 1-d closed form, then a Heisenberg solve
//! with its energy identities.

use subelliptic::grid::ScalarField;
use subelliptic::ppoisson::{ep_identities, exact_1d, solve_p_poisson, SolveConfig};
use subelliptic::{Frame, Grid};

fn main() -> subelliptic::Result<()> {
    let p = 4.0;
    for nodes in [33, 65, 129] {
        let g = Grid::uniform(Frame::euclidean(1).with_box(vec![0.0], vec![1.0])?, nodes)?;
        let one = ScalarField::constant(&g, 1.0);
        let rep = solve_p_poisson(&g, &one, &ScalarField::zeros(&g), &SolveConfig::new(p))?;
        let exact = ScalarField::from_fn(&g, |x| exact_1d(p, x[0]));
        println!("1-d, {nodes:>3} nodes: max error {:.3e}, {} Newton steps", rep.u.max_abs_diff(&exact), rep.iterations);
    }

    let g = Grid::uniform(Frame::heisenberg1(), 17)?;
    let f = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * x[2]);
    let rep = solve_p_poisson(&g, &f, &ScalarField::zeros(&g), &SolveConfig::new(p))?;
    let ids = ep_identities(&g, &rep, &f);
    println!(
        "heisenberg 17^3: E_p {:.6e}, duality gap {:.1e}, identity gaps {:.1e} / {:.1e}",
        rep.e_p, rep.duality_gap, ids.gap_weak, ids.gap_thompson
    );
    Ok(())
}
