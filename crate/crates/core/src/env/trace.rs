use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::book::Price;

/// Per-step episode trace columns. The first seven are the core step
/// record; the rest carry what replay needs (quotes at decision time, the
/// agent's resting price and its fills as `price:qty` pairs joined by `;`).
pub const TRACE_HEADER: [&str; 13] = [
    "step",
    "action_index",
    "filled",
    "reward",
    "mid",
    "spread",
    "participation",
    "option",
    "best_bid",
    "best_ask",
    "passive_price",
    "fills",
    "market_vwap",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub action_index: usize,
    pub filled: u64,
    pub reward: f64,
    /// Mid at decision time, if both sides were quoted.
    pub mid: Option<f64>,
    pub spread: Option<u64>,
    pub participation: f64,
    /// Active option for hierarchical agents.
    pub option: Option<usize>,
    pub best_bid: Option<Price>,
    pub best_ask: Option<Price>,
    pub passive_price: Option<Price>,
    #[serde(with = "fills_field")]
    pub fills: Vec<(Price, u64)>,
    pub market_vwap: Option<f64>,
}

mod fills_field {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::book::Price;

    pub fn serialize<S: Serializer>(fills: &[(Price, u64)], s: S) -> Result<S::Ok, S::Error> {
        let text: Vec<String> = fills.iter().map(|(p, q)| format!("{p}:{q}")).collect();
        s.serialize_str(&text.join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Price, u64)>, D::Error> {
        let text = String::deserialize(d)?;
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(';')
            .map(|pair| {
                let (p, q) = pair.split_once(':').ok_or_else(|| D::Error::custom(format!("bad fill {pair:?}")))?;
                Ok((p.parse().map_err(D::Error::custom)?, q.parse().map_err(D::Error::custom)?))
            })
            .collect()
    }
}

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected trace header {header:?}"),
        )));
    }
    rdr.deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let rows = vec![
            TraceRow {
                step: 0,
                action_index: 3,
                filled: 0,
                reward: 0.0,
                mid: Some(1000.5),
                spread: Some(1),
                participation: 0.0,
                option: None,
                best_bid: Some(1000),
                best_ask: Some(1001),
                passive_price: Some(1000),
                fills: vec![],
                market_vwap: None,
            },
            TraceRow {
                step: 1,
                action_index: 9,
                filled: 25,
                reward: -0.125,
                mid: None,
                spread: None,
                participation: 0.5,
                option: Some(1),
                best_bid: None,
                best_ask: Some(1001),
                passive_price: None,
                fills: vec![(1001, 20), (1002, 5)],
                market_vwap: Some(1001.2),
            },
        ];
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "step,action_index,filled,reward,mid,spread,participation,option,best_bid,best_ask,passive_price,fills,market_vwap\n"
        ));
        assert!(text.contains("1001:20;1002:5"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_trace_csv(&b"a,b\n1,2\n"[..]).is_err());
    }
}
