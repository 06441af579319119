//! Built-in and user-defined frames: rank, left inverse and bracket spans.

use subelliptic::Frame;

const HEIS: &str = "\
name twisted
n 3
m 2
box -1 1 -1 1 -1 1
row 1, 0, -2*x2
row 0, 1, 2*x1
";

fn main() -> subelliptic::Result<()> {
    let custom = Frame::from_definition(HEIS)?;
    for frame in [Frame::euclidean(2), Frame::heisenberg1(), Frame::grushin(), Frame::flat_phi(), custom] {
        let x: Vec<f64> = frame.bounds().lower().iter().zip(frame.bounds().upper()).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let lic = frame.lic_check(&x)?;
        let c = frame.eval_coeff(&x)?;
        let ct = frame.left_inverse(&x)?;
        let err = (&ct * c.transpose() - nalgebra::DMatrix::identity(frame.m(), frame.m())).abs().max();
        let ranks = frame.hormander_probe(&x, 3)?;
        println!(
            "{:<12} n={} m={}  rank {}  sigma_min {:.3}  |C~ C^T - I| {:.1e}  bracket ranks {:?}",
            frame.name(),
            frame.n(),
            frame.m(),
            lic.rank,
            lic.smallest_singular_value,
            err,
            ranks
        );
    }
    Ok(())
}
