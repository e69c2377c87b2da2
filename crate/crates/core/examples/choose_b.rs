//! How many projections per group are needed so that, with probability at
//! least 1/2, some projection in the group sees `t` signal coordinates.

use spcavrp::evaluation::{choose_b, HypergeomParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (k, p) = (10, 100);
    println!("p={p}, k={k}");
    println!("{:>3} {:>8} {:>8} {:>8}", "t", "d=10", "d=20", "d=30");
    for t in 1..=5 {
        let row: Vec<String> = [10, 20, 30]
            .iter()
            .map(|&d| choose_b(t, d, k, p).map_or("-".into(), |b| b.to_string()))
            .collect();
        println!("{t:>3} {:>8} {:>8} {:>8}", row[0], row[1], row[2]);
    }
    let h = HypergeomParams::new(10, k, p)?;
    println!("P(overlap >= 3) with d=10: {:.4}", h.survival(2));
    Ok(())
}
