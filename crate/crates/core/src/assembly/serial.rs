//! JSON form of a [`Construction`]. Extended-precision values are stored as
//! decimal strings with enough digits to round-trip at the stored precision.

use rug::Float;
use serde::{Deserialize, Serialize};

use super::{Construction, Level};
use crate::blocks::Block;
use crate::error::{Error, Result};

const FORMAT: &str = "harmzero-construction/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub k: u32,
    pub c: u32,
    pub cap: String,
    pub amplitude: String,
    pub margin: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionRecord {
    pub format: String,
    pub n: Vec<u32>,
    pub epsilon: String,
    pub depth: usize,
    pub precision: u32,
    pub levels: Vec<LevelRecord>,
}

fn decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

fn parse(s: &str, prec: u32, what: &str) -> Result<Float> {
    let parsed = Float::parse(s).map_err(|e| Error::Format(format!("{what}: {e}")))?;
    let v = Float::with_val(prec, parsed);
    if !v.is_finite() {
        return Err(Error::Format(format!("{what}: not finite")));
    }
    Ok(v)
}

impl Construction {
    pub fn to_record(&self) -> ConstructionRecord {
        ConstructionRecord {
            format: FORMAT.into(),
            n: self.n.clone(),
            epsilon: decimal(&self.epsilon),
            depth: self.depth,
            precision: self.precision,
            levels: self
                .levels
                .iter()
                .map(|l| LevelRecord {
                    k: l.k,
                    c: l.c,
                    cap: decimal(&l.cap),
                    amplitude: decimal(&l.amplitude),
                    margin: decimal(&l.margin),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &ConstructionRecord) -> Result<Self> {
        if rec.format != FORMAT {
            return Err(Error::Format(format!("unknown format tag {:?}", rec.format)));
        }
        let p = rec.precision;
        let epsilon = parse(&rec.epsilon, p, "epsilon")?;
        let levels = rec
            .levels
            .iter()
            .map(|l| {
                let what = |f: &str| format!("level {} {f}", l.k);
                Ok(Level {
                    k: l.k,
                    c: l.c,
                    cap: parse(&l.cap, p, &what("cap"))?,
                    amplitude: parse(&l.amplitude, p, &what("amplitude"))?,
                    margin: parse(&l.margin, p, &what("margin"))?,
                    block: Block::for_level(l.k, l.c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(rec.n.clone(), epsilon, rec.depth, p, levels)
    }

    /// Canonical single-line JSON; the construction hash is taken over it.
    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: ConstructionRecord = serde_json::from_str(s)?;
        Self::from_record(&rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::build_construction;

    #[test]
    fn json_round_trip_is_lossless() {
        let eps = Float::with_val(64, 0.5);
        let c = build_construction(&[1, 2], &eps, 2, 200).unwrap();
        let back = Construction::from_json(&c.to_json_pretty()).unwrap();
        assert_eq!(back.levels(), c.levels());
        assert_eq!(back.epsilon(), c.epsilon());
        assert_eq!(back.hash_hex(), c.hash_hex());
    }

    #[test]
    fn inconsistent_records_are_rejected() {
        let eps = Float::with_val(64, 0.5);
        let c = build_construction(&[1, 2], &eps, 2, 128).unwrap();
        let mut rec = c.to_record();
        rec.levels[1].c = 7;
        assert!(Construction::from_record(&rec).is_err());
        let mut rec = c.to_record();
        rec.levels[0].amplitude = "nan".into();
        assert!(Construction::from_record(&rec).is_err());
        let mut rec = c.to_record();
        rec.format = "other".into();
        assert!(Construction::from_record(&rec).is_err());
    }
}
