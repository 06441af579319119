//! The X-differential of a smooth field on the Heisenberg group and its
//! remainder profile in shrinking distance annuli.

use subelliptic::differential::{profile_log_slope, remainder_profile, x_differential};
use subelliptic::eikonal::{solve_eikonal, Source};
use subelliptic::grid::ScalarField;
use subelliptic::{Frame, Grid};

fn main() -> subelliptic::Result<()> {
    let g = Grid::uniform(Frame::heisenberg1().with_box(vec![0.0, -1.0, -1.0], vec![2.0, 1.0, 1.0])?, 33)?;
    let u = ScalarField::from_fn(&g, |x| (x[0] - 1.0).powi(2) + x[1].sin() + 0.5 * x[2]);
    let node = g.nearest_node(&[1.0, 0.0, 0.0]).unwrap();
    let diff = x_differential(&g, &u, node)?;
    println!("Xu {:?}\nL  {:?}", diff.xu, diff.l);
    let dist = solve_eikonal(&g, &Source::Nodes(vec![node]))?;
    let prof = remainder_profile(&g, &u, node, &[0.8, 0.4, 0.2], &dist)?;
    for s in &prof {
        println!("r {:.2}: worst ratio {:?} over {} nodes ({:?})", s.r, s.worst_ratio, s.nodes, s.status);
    }
    println!("log-log slope {:?}", profile_log_slope(&prof));
    Ok(())
}
