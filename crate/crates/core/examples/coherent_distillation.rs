//! Heralding probability, single-photon fidelity and multi-photon content of
//! the odd-heralded state as the input coherent pulse gets brighter.
//!
//! cargo run --example coherent_distillation

use photon_distill::distillation::{sweep, DistillationConfig};

fn main() {
    let config = DistillationConfig::paper().corrected();
    let grid: Vec<f64> = (1..=25).map(|i| 0.1 * i as f64).collect();

    println!("alpha^2   P(up)    F1     coherent   p0      p2      p3");
    for row in sweep(&config, &grid) {
        let (Some(p_up), Some(f1)) = (row.p_up, row.f1) else {
            println!("{:5.2}    {}", row.alpha_sq, row.status);
            continue;
        };
        println!(
            "{:5.2}    {:.3}   {:.3}   {:.3}      {:.3}   {:.4}  {:.4}",
            row.alpha_sq,
            p_up,
            f1,
            row.alpha_sq * (-row.alpha_sq).exp(),
            row.p0.unwrap(),
            row.p2.unwrap(),
            row.p3.unwrap()
        );
    }
}
