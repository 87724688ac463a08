//! Build a small book by hand, sweep it with a market order and print the
//! resulting trades and depth.

use exec_sim::book::{LimitOrderBook, Owner, Side};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut book = LimitOrderBook::new();
    book.submit_limit(Side::Sell, 101, 30, Owner::Background)?;
    book.submit_limit(Side::Sell, 101, 20, Owner::Background)?;
    book.submit_limit(Side::Sell, 102, 50, Owner::Background)?;
    book.submit_limit(Side::Buy, 99, 40, Owner::Background)?;
    let resting = book.submit_limit(Side::Buy, 98, 25, Owner::Agent)?;

    println!("best bid {:?}  best ask {:?}  spread {:?}", book.best_bid(), book.best_ask(), book.spread());

    let sweep = book.submit_market(Side::Buy, 70, Owner::Agent)?;
    println!("market buy 70 filled {}", sweep.filled());
    for t in &sweep.trades {
        println!("  trade ts={} price={} qty={} maker={}", t.ts, t.price, t.qty, t.maker_owner);
    }

    // The agent sell fills the background bid at 99, then reaches the
    // agent's own bid at 98, which is cancelled rather than traded.
    let cross = book.submit_limit(Side::Sell, 98, 60, Owner::Agent)?;
    println!("limit sell 60 @ 98 filled {}", cross.filled());
    for (id, qty) in &cross.self_match_cancels {
        println!("  cancelled own order {} ({qty} left) instead of self-matching", id.0);
    }
    println!("order {} still resting: {}", resting.order_id.0, book.order(resting.order_id).is_some());

    let depth = book.depth(3);
    println!("depth: bids {:?}", depth.side(Side::Buy));
    println!("       asks {:?}", depth.side(Side::Sell));
    book.validate()?;
    Ok(())
}
