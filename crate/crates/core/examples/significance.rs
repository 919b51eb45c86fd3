//! Mann-Whitney U, Spearman correlation and density exports.

use scentspace::stats;

fn main() -> scentspace::Result<()> {
    let u = stats::mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0])?;
    println!("U = {}, p = {:.4} ({:?})", u.u, u.p_two_sided, u.method);

    let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 0.4).collect();
    let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.53).cos()).collect();
    let u = stats::mann_whitney_u(&a, &b)?;
    println!(
        "U = {}, z = {:.3}, p = {:.4} ({:?})",
        u.u, u.z, u.p_two_sided, u.method
    );

    let r = stats::spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0])?;
    println!("rho = {:.3}, p = {:.4}", r.rho, r.p_two_sided);

    let bins = stats::histogram(&a, 8);
    let density = stats::kde(&a, 50)?;
    let mut out = Vec::new();
    stats::write_histogram_csv(&bins, &mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    let peak = density
        .iter()
        .max_by(|x, y| x.density.total_cmp(&y.density))
        .unwrap();
    println!(
        "KDE peak at {:.3} (bandwidth {:.3})",
        peak.x,
        stats::scott_bandwidth(&a)
    );
    Ok(())
}
