//! Sequential observations: each draw adds fresh noise and the running mean
//! tightens around the noise-free data like 1/sqrt(n).

use irgn::observation::ObservationStream;

fn main() -> irgn::Result<()> {
    let truth = vec![100.0, 120.0, 140.0, 160.0];
    let mut s = ObservationStream::new(truth.clone(), 0.1, 7, 0)?;
    for n in 1..=10_000u64 {
        let (_, z) = s.draw();
        if n.is_power_of_two() || n == 10_000 {
            let err = z.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            println!(
                "n = {n:>5}  |Z_n - y| = {err:.2e}  (sigma sqrt(m/n) = {:.2e})",
                0.1 * (4.0 / n as f64).sqrt()
            );
        }
    }
    Ok(())
}
