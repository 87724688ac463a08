//! Certainty equivalents of one lottery under several utilities, and the
//! cost of delaying a noisy reward.

use exec_sim::cerl::{ce, delayed_reward_ce, OutcomeDist, UtilityFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lottery = OutcomeDist::new(vec![(10.0, 0.5), (2.0, 0.3), (0.5, 0.2)])?;
    println!("lottery mean {:.4}  variance {:.4}", lottery.mean(), lottery.variance());
    let utilities = [
        UtilityFn::Identity,
        UtilityFn::Exponential { lambda: 0.1 },
        UtilityFn::Exponential { lambda: 1.0 },
        UtilityFn::Power { eta: 0.5 },
    ];
    for u in &utilities {
        println!("  {:<40} CE {:.4}", format!("{u:?}"), ce(&lottery, u)?);
    }

    let shifted = lottery.shifted(5.0);
    let u = UtilityFn::Exponential { lambda: 1.0 };
    println!("CARA CE moves with a shift of 5: {:.4} -> {:.4}", ce(&lottery, &u)?, ce(&shifted, &u)?);

    println!("\nreward N(1, 0.25 d) delayed d steps:");
    for d in [0, 1, 2, 4, 8] {
        println!(
            "  d={d}  identity {:.3}  exponential(λ=2) {:.3}",
            delayed_reward_ce(1.0, 0.25, d, &UtilityFn::Identity)?,
            delayed_reward_ce(1.0, 0.25, d, &UtilityFn::Exponential { lambda: 2.0 })?
        );
    }
    Ok(())
}
