// debug scratch: per-theta dilation pair vs dense sin(theta(A-m))
use ndarray::Array1;
use num_complex::Complex64;
use propwave::calculus::dense::dense_dilation;
use propwave::calculus::apply_dilation;
use propwave::grid::{Grid, Representation, WaveFunction};

fn main() {
    let grid = Grid::shared(1, 50.0, 512).unwrap();
    let psi = WaveFunction::gaussian_packet(grid.clone(), &[1.5], &[0.6], 1.4);
    let dense = dense_dilation(&grid).unwrap();
    let pos = psi.transform(Representation::Position);
    let flat = Array1::from_iter(pos.values().iter().cloned());
    let coeffs = dense.to_eigenbasis(&flat);
    let m = 0.0;

    for theta in [0.05f64, 0.2, 0.5, 0.9, 1.2] {
        // dense: sin(theta (A - m)) psi
        let mut scaled = coeffs.clone();
        for (c, a) in scaled.iter_mut().zip(dense.eigenvalues.iter()) {
            *c *= Complex64::new((theta * (a - m)).sin(), 0.0);
        }
        let want = dense.from_eigenbasis(&scaled);
        // dilations: (e^{-i theta m} U_{-theta} - e^{i theta m} U_theta) / 2i
        let um = apply_dilation(&pos, -theta, 0).unwrap();
        let up = apply_dilation(&pos, theta, 0).unwrap();
        let half_i = Complex64::new(0.0, -0.5);
        let combo = um
            .map_values(|v| v * half_i * Complex64::from_polar(1.0, -theta * m))
            .add_scaled(&up, -half_i * Complex64::from_polar(1.0, theta * m));
        let mut err2 = 0.0;
        for (a, b) in combo.values().iter().zip(want.iter()) {
            err2 += (a - b).norm_sqr();
        }
        let err = (err2 * grid.spacing()).sqrt();
        // also unitarity of each dilation
        println!(
            "theta {theta}: sin-synthesis err {err:.3e}, |U+|-1 {:.2e}, |U-|-1 {:.2e}",
            up.norm_l2() - 1.0,
            um.norm_l2() - 1.0
        );
    }
}
