//! Probe: quadrature convergence on an absolute-difference integrand.
use phidelta_core::dist::Density;
use phidelta_core::quad::{integrate_tol, Domain};

fn main() {
    let p = Density::exponential(2.0366539549270732).unwrap();
    let q = Density::exponential(4.270101002240168).unwrap();
    let rho: f64 = 2.0366539549270732 / 4.270101002240168;
    let closed = (1.0 - rho) * rho.powf(rho / (1.0 - rho));
    println!("closed = {closed:.15}");
    for tol in [1e-8, 1e-10, 1e-12, 1e-14] {
        let r = integrate_tol(
            |x| (p.density(x) - q.density(x)).abs(),
            Domain::HalfLine,
            tol,
            tol,
        );
        match r {
            Ok(r) => println!(
                "tol {tol:.0e}: value {:.15} est_err {:.3e} true_err {:.3e} subdiv {}",
                0.5 * r.value,
                r.abs_error,
                (0.5 * r.value - closed).abs(),
                r.subdivisions
            ),
            Err(e) => println!("tol {tol:.0e}: {e}"),
        }
    }
    // Same integral split at the crossing point (smooth pieces).
    let x0 = (4.270101002240168f64 / 2.0366539549270732).ln()
        / (4.270101002240168 - 2.0366539549270732);
    let a = integrate_tol(
        |x| q.density(x) - p.density(x),
        Domain::Finite(0.0, x0),
        1e-13,
        1e-12,
    )
    .unwrap();
    let b = integrate_tol(
        |x| (p.density(x) - q.density(x)).abs(),
        Domain::HalfLine,
        1e-13,
        1e-12,
    );
    let _ = b;
    println!("piece [0,x0] = {:.15} (×2 checks: {:.15})", a.value, a.value);
}
