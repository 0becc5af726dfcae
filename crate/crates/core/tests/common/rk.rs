//! Adaptive Cash–Karp 4(5) integration of `Ḧ + (a + εk²)Ḣ + k²H = 0`.

const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0],
];
const B5: [f64; 6] = [37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0];
const B4: [f64; 6] = [2825.0 / 27648.0, 0.0, 18575.0 / 48384.0, 13525.0 / 55296.0, 277.0 / 14336.0, 1.0 / 4.0];

/// `(H(t), Ḣ(t))` from `(H, Ḣ)(0) = (0, 1)`; the local error is controlled
/// relative to `max(k|H|, |Ḣ|)` with `k ≥ 1`.
pub fn kernel_by_rk(a: f64, eps: f64, k: f64, t_end: f64, rtol: f64) -> [f64; 2] {
    let damp = a + eps * k * k;
    let k2 = k * k;
    let f = |y: [f64; 2]| [y[1], -damp * y[1] - k2 * y[0]];
    let s = k.max(1.0);
    let size = |y: [f64; 2]| (s * y[0].abs()).max(y[1].abs());

    let mut y = [0.0, 1.0];
    let mut t = 0.0;
    let mut h = 1e-3 / (1.0 + damp);
    while t < t_end {
        h = h.min(t_end - t);
        let mut ks = [[0.0; 2]; 6];
        for i in 0..6 {
            let mut yi = y;
            for j in 0..i {
                for c in 0..2 {
                    yi[c] += h * A[i][j] * ks[j][c];
                }
            }
            ks[i] = f(yi);
        }
        let mut y5 = y;
        let mut y4 = y;
        for i in 0..6 {
            for c in 0..2 {
                y5[c] += h * B5[i] * ks[i][c];
                y4[c] += h * B4[i] * ks[i][c];
            }
        }
        let err = size([y5[0] - y4[0], y5[1] - y4[1]]);
        let tol = rtol * size(y).max(size(y5));
        if err <= tol {
            t += h;
            y = y5;
        }
        let q = if err == 0.0 { 4.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.1, 4.0) };
        h *= q;
    }
    y
}
