use std::io::{self, BufRead, Write};

use super::{BookEvent, Trade};

/// One JSON object per line: `ts, kind, side, price, qty, order_id, owner`.
pub fn write_events_jsonl<W: Write>(events: &[BookEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut out, ev)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events_jsonl<R: BufRead>(input: R) -> io::Result<Vec<BookEvent>> {
    let mut events = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", lineno + 1))
        })?;
        events.push(ev);
    }
    Ok(events)
}

/// Header `ts,price,qty,aggressor_side,maker_owner,taker_owner`.
pub fn write_trades_csv<W: Write>(trades: &[Trade], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ts", "price", "qty", "aggressor_side", "maker_owner", "taker_owner"])?;
    for t in trades {
        w.write_record([
            t.ts.to_string(),
            t.price.to_string(),
            t.qty.to_string(),
            t.aggressor_side.to_string(),
            t.maker_owner.to_string(),
            t.taker_owner.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::{LimitOrderBook, Owner, Side};

    #[test]
    fn event_lines_have_the_documented_fields() {
        let mut b = LimitOrderBook::new();
        b.submit_limit(Side::Sell, 101, 5, Owner::Background).unwrap();
        b.submit_market(Side::Buy, 3, Owner::Agent).unwrap();
        let mut buf = Vec::new();
        write_events_jsonl(b.events(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"ts":0,"kind":"limit","side":"sell","price":101,"qty":5,"order_id":0,"owner":"background"}"#
        );
        assert_eq!(
            lines[1],
            r#"{"ts":1,"kind":"market","side":"buy","price":null,"qty":3,"order_id":1,"owner":"agent"}"#
        );
        assert_eq!(read_events_jsonl(&buf[..]).unwrap(), b.events());
    }

    #[test]
    fn trade_csv_header_and_row() {
        let mut b = LimitOrderBook::new();
        b.submit_limit(Side::Sell, 101, 5, Owner::Background).unwrap();
        b.submit_market(Side::Buy, 3, Owner::Agent).unwrap();
        let mut buf = Vec::new();
        write_trades_csv(b.trades(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "ts,price,qty,aggressor_side,maker_owner,taker_owner\n1,101,3,buy,background,agent\n"
        );
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = read_events_jsonl(&b"{\"ts\":0}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
