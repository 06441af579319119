//! Distance to the boundary and to a point, semi-Lagrangian against Lax-Friedrichs.

use subelliptic::eikonal::{residual_maps, solve_eikonal_with, EikonalOptions, Scheme, Source};
use subelliptic::{Frame, Grid};

fn main() -> subelliptic::Result<()> {
    for frame in [Frame::euclidean(2), Frame::grushin()] {
        let g = Grid::uniform(frame, 65)?;
        for source in [Source::Boundary, Source::Point(vec![0.0, 0.0])] {
            for scheme in [Scheme::SemiLagrangian, Scheme::LaxFriedrichs] {
                let opts = EikonalOptions { scheme, ..EikonalOptions::default() };
                let field = solve_eikonal_with(&g, &source, &opts)?;
                let maps = residual_maps(&g, &field.d, &field.source_nodes);
                let centre = g.nearest_node(&[0.5, 0.5]).unwrap();
                println!(
                    "{:<10} {:<14} {:?}: d(0.5, 0.5) {:.4}, {} sweeps, | |Xd| - 1 | max {:.3e}, ridge nodes {}",
                    g.frame().name(),
                    format!("{:?}", source),
                    scheme,
                    field.d[centre],
                    field.sweeps,
                    field.residual.max_abs,
                    maps.ridge.iter().filter(|r| **r).count()
                );
            }
        }
    }
    Ok(())
}
