//! Quick invariant suites behind `subelliptic verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::differential::remainder_profile;
use crate::eikonal::{solve_eikonal, Source};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::grid::{x_gradient, Grid, ScalarField};
use crate::limits::{monotonicity_check, p_sweep, SweepConfig, SweepData};
use crate::ppoisson::{comparison_check, default_comparison_tol, ep_identities, exact_1d, solve_p_poisson, SolveConfig};
use crate::viscosity::{infinity_laplacian, operator_nodes};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub const SUITES: [&str; 1] = ["core"];

pub fn run_suite(name: &str) -> Result<Vec<CheckResult>> {
    match name {
        "core" => core_suite(),
        _ => Err(Error::param("suite", format!("unknown suite `{name}`, expected one of {SUITES:?}"))),
    }
}

fn core_suite() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for f in [Frame::euclidean(3), Frame::heisenberg1(), Frame::grushin(), Frame::flat_phi()] {
        let (lo, hi) = (f.bounds().lower().to_vec(), f.bounds().upper().to_vec());
        let mut k = 0;
        while k < 200 {
            let x: Vec<f64> = (0..f.n()).map(|i| rng.random_range(lo[i]..=hi[i])).collect();
            let Ok(ct) = f.left_inverse(&x) else { continue };
            if f.name() == "grushin" && x[0].abs() <= 0.1 {
                continue;
            }
            let prod = ct * f.eval_coeff(&x)?.transpose();
            worst = worst.max((prod - nalgebra::DMatrix::<f64>::identity(f.m(), f.m())).amax());
            k += 1;
        }
    }
    out.push(check("frames.left_inverse", worst <= 1e-10, format!("max |C~ C^T - I| = {worst:.2e}")));

    let g = Grid::uniform(Frame::heisenberg1(), 9)?;
    let u = ScalarField::from_fn(&g, |x| 2.0 * x[0] - 1.0);
    let xu = x_gradient(&g, &u);
    let err = (0..g.len()).map(|v| (xu.at(v)[0] - 2.0).abs() + xu.at(v)[1].abs()).fold(0.0, f64::max);
    out.push(check("grid.horizontal_gradient", err < 1e-12, format!("max error {err:.2e}")));

    let line = Grid::uniform(Frame::euclidean(1), 257)?;
    let one = ScalarField::constant(&line, 1.0);
    let zero = ScalarField::zeros(&line);
    let rep = solve_p_poisson(&line, &one, &zero, &SolveConfig::new(4.0))?;
    let exact = ScalarField::from_fn(&line, |x| exact_1d(4.0, x[0]));
    let err = rep.u.max_abs_diff(&exact);
    out.push(check("ppoisson.closed_form_1d", err <= 1e-3, format!("p = 4 sup error {err:.2e}")));

    let sq = Grid::uniform(Frame::euclidean(2), 17)?;
    let f = ScalarField::constant(&sq, 1.0);
    let z = ScalarField::zeros(&sq);
    let a = solve_p_poisson(&sq, &f, &z, &SolveConfig::new(4.0))?;
    let ids = ep_identities(&sq, &a, &f);
    out.push(check(
        "ppoisson.energy_identities",
        ids.gap_weak <= 1e-6 && ids.gap_thompson.abs() <= 1e-6 * (1.0 + a.e_p),
        format!("weak {:.2e}, thompson {:.2e}", ids.gap_weak, ids.gap_thompson),
    ));

    let f2 = ScalarField::from_fn(&sq, |x| 1.0 + x[0]);
    let g2 = ScalarField::from_fn(&sq, |x| 0.1 * x[1]);
    let b = solve_p_poisson(&sq, &f2, &g2, &SolveConfig::new(4.0))?;
    let cmp = comparison_check(&sq, &a, &b, default_comparison_tol(&sq))?;
    out.push(check("ppoisson.comparison", cmp.passed, format!("worst violation {:.2e}", cmp.worst_violation)));

    let g33 = Grid::uniform(Frame::euclidean(2), 33)?;
    let d = solve_eikonal(&g33, &Source::Boundary)?;
    let exact = ScalarField::from_fn(&g33, |x| x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]));
    let err = d.d.max_abs_diff(&exact);
    out.push(check("eikonal.euclidean_square", err <= 3.0 * g33.h(), format!("sup error {err:.2e}")));

    let aff = ScalarField::from_fn(&g33, |x| 0.3 - x[0] + 2.0 * x[1]);
    let il = infinity_laplacian(&g33, &aff);
    let m = operator_nodes(&g33).map(|v| il[v].abs()).fold(0.0, f64::max);
    out.push(check("viscosity.affine_infinity_laplacian", m < 1e-9, format!("max {m:.2e}")));

    let node = g33.nearest_node(&[0.5, 0.5]).expect("inside");
    let dist = solve_eikonal(&g33, &Source::Nodes(vec![node]))?;
    let prof = remainder_profile(&g33, &aff, node, &[0.2, 0.1], &dist)?;
    let m = prof.iter().filter_map(|s| s.worst_ratio).fold(0.0, f64::max);
    out.push(check("differential.affine_remainder", m < 1e-10, format!("max ratio {m:.2e}")));

    let rep = p_sweep(&line, &SweepData::Source(one), &[4.0, 8.0, 16.0], &SweepConfig::default())?;
    let mono = monotonicity_check(&rep)?;
    out.push(check("limits.monotone_energy_1d", mono.passed, format!("N_p {:?}", mono.n_p)));

    Ok(out)
}
