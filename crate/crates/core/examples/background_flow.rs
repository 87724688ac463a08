//! Run the zero-intelligence background flow for a while and print the mid
//! price path, then show that the same seed reproduces it exactly.

use exec_sim::flow::{init_sim, FlowConfig};

fn mid_path(seed: u64, steps: usize) -> Vec<Option<f64>> {
    let mut sim = init_sim(FlowConfig::default(), seed).expect("default flow is valid");
    (0..steps)
        .map(|_| {
            sim.step_background();
            sim.book.mid()
        })
        .collect()
}

fn main() {
    let path = mid_path(7, 200);
    for (t, mid) in path.iter().enumerate().step_by(20) {
        match mid {
            Some(m) => println!("step {t:>3}  mid {m:>9.1}"),
            None => println!("step {t:>3}  one-sided book"),
        }
    }
    let sim = {
        let mut s = init_sim(FlowConfig::default(), 7).unwrap();
        for _ in 0..200 {
            s.step_background();
        }
        s
    };
    let prices: Vec<_> = sim.book.trades().iter().map(|t| t.price).collect();
    println!(
        "{} events, {} trades between {:?} and {:?}, {} resting orders",
        sim.book.events().len(),
        prices.len(),
        prices.iter().min(),
        prices.iter().max(),
        sim.book.resting_count()
    );
    println!("same seed, same path: {}", mid_path(7, 200) == path);
    println!("other seed, same path: {}", mid_path(8, 200) == path);
}
