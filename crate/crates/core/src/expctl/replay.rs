use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::book::Price;
use crate::env::{read_trace_csv, TraceRow};

pub const REPLAY_HEADER: [&str; 7] = ["step", "best_bid", "best_ask", "mid", "passive_price", "fill_price", "fill_qty"];

/// One point of the plot-ready series. Steps with several fills repeat
/// the quote columns once per fill; steps without fills have empty fill
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub step: usize,
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub mid: Option<f64>,
    pub passive_price: Option<Price>,
    pub fill_price: Option<Price>,
    pub fill_qty: Option<u64>,
}

pub fn replay_rows(trace: &[TraceRow]) -> Vec<ReplayRow> {
    let mut out = Vec::new();
    for r in trace {
        let row = |fill: Option<(Price, u64)>| ReplayRow {
            step: r.step,
            best_bid: r.best_bid,
            best_ask: r.best_ask,
            mid: r.mid,
            passive_price: r.passive_price,
            fill_price: fill.map(|f| f.0),
            fill_qty: fill.map(|f| f.1),
        };
        if r.fills.is_empty() {
            out.push(row(None));
        } else {
            out.extend(r.fills.iter().map(|&f| row(Some(f))));
        }
    }
    out
}

/// Parse a trace written by an evaluation run.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, String> {
    let rows = read_trace_csv(input).map_err(|e| e.to_string())?;
    for (i, r) in rows.iter().enumerate() {
        if r.step != i {
            return Err(format!("row {} has step {}, expected {i}", i + 1, r.step));
        }
        if r.fills.iter().map(|f| f.1).sum::<u64>() != r.filled {
            return Err(format!("step {}: fills do not add up to filled", r.step));
        }
    }
    Ok(rows)
}

pub fn write_replay_csv<W: Write>(rows: &[ReplayRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPLAY_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width text table of the trace for terminal display.
pub fn render_table(trace: &[TraceRow]) -> String {
    let opt = |v: Option<u64>| v.map_or("-".to_string(), |x| x.to_string());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>6} {:>8} {:>8} {:>8} {:>7} {:>10} {:>6}  fills",
        "step", "action", "bid", "ask", "passive", "filled", "reward", "option"
    );
    for r in trace {
        let fills: Vec<String> = r.fills.iter().map(|(p, q)| format!("{q}@{p}")).collect();
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>8} {:>8} {:>8} {:>7} {:>10.5} {:>6}  {}",
            r.step,
            r.action_index,
            opt(r.best_bid),
            opt(r.best_ask),
            opt(r.passive_price),
            r.filled,
            r.reward,
            r.option.map_or("-".to_string(), |o| o.to_string()),
            fills.join(" ")
        );
    }
    s
}
