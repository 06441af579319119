//! Probe the viscosity sign conditions of the infinity Laplacian: Aronsson's
//! function passes, a cone tip fails from one side.

use subelliptic::grid::ScalarField;
use subelliptic::viscosity::{probe_viscosity, Equation, ProbeOptions, Side};
use subelliptic::{Frame, Grid};

fn main() -> subelliptic::Result<()> {
    let g = Grid::uniform(Frame::euclidean(2).with_box(vec![0.5, 0.5], vec![1.5, 1.5])?, 65)?;
    let aronsson = ScalarField::from_fn(&g, |x| x[0].powf(4.0 / 3.0) - x[1].powf(4.0 / 3.0));
    let cone = ScalarField::from_fn(&g, |x| ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).sqrt());
    let node = g.nearest_node(&[1.0, 1.0]).unwrap();
    let opts = ProbeOptions::default();
    for (name, u) in [("aronsson", &aronsson), ("cone", &cone)] {
        for side in [Side::Sub, Side::Super] {
            let v = probe_viscosity(&g, u, node, &Equation::InfLaplace, side, &opts)?;
            println!(
                "{name:<9} {side:?}: {:?}, {} of {} candidates admissible, worst violation {:.3e} (tol {:.3})",
                v.status, v.admissible, v.sampled, v.worst_violation, v.tol
            );
        }
    }
    Ok(())
}
