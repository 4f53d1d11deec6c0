use ndarray::Array2;
use num_complex::Complex64 as C64;

fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let norm = one_norm(a);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings as i32));
    let d = a.nrows();
    let mut result = Array2::<C64>::eye(d);
    let mut term = Array2::<C64>::eye(d);
    // ‖scaled‖ ≤ 1/4: 18 terms reach double precision.
    for k in 1..=18 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result += &term;
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}
