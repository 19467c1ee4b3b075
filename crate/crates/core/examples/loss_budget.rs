//! Combines the bundled propagation/detection loss budget and splits a
//! fitted total loss into its corrected and uncorrected parts.
//!
//! cargo run --example loss_budget

use photon_distill::calibration::{residual_loss, LossBudget};

fn main() -> photon_distill::Result<()> {
    let budget = LossBudget::experiment();
    for item in &budget.items {
        println!("{:>5.1}%  {}", 100.0 * item.loss, item.label);
    }
    let total = budget.total();
    println!("{:>5.1}%  total", 100.0 * total);
    println!("fitted 35.2% leaves {:.1}% uncorrected", 100.0 * residual_loss(0.352, total)?);
    Ok(())
}
