//! JSON instance files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{line_admittance, Block, Bus, Buyer, InstanceError, Line, MarketInstance, Network, Seller};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
    pub ref_bus: String,
    pub periods: usize,
    pub buyers: Vec<BuyerRecord>,
    pub sellers: Vec<SellerRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub params: LineParams,
    pub i_max: f64,
}

/// Lines may be given either by impedance or by admittance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LineParams {
    Impedance { r: f64, x: f64 },
    Admittance { g: f64, b: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRecord {
    pub size: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuyerRecord {
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub blocks: Vec<Vec<BlockRecord>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SellerRecord {
    pub bus: String,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub blocks: Vec<Vec<BlockRecord>>,
    pub no_load_cost: f64,
    pub min_uptime: usize,
}

fn blocks_from(records: &[Vec<BlockRecord>]) -> Vec<Vec<Block>> {
    records
        .iter()
        .map(|period| period.iter().map(|b| Block { size: b.size, price: b.price }).collect())
        .collect()
}

fn blocks_to(blocks: &[Vec<Block>]) -> Vec<Vec<BlockRecord>> {
    blocks
        .iter()
        .map(|period| period.iter().map(|b| BlockRecord { size: b.size, price: b.price }).collect())
        .collect()
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<MarketInstance, InstanceError> {
        let buses: Vec<Bus> = self
            .buses
            .into_iter()
            .map(|b| Bus { id: b.id, v_min: b.v_min, v_max: b.v_max })
            .collect();
        let lookup = |id: &str, what: &str| {
            buses
                .iter()
                .position(|b| b.id == id)
                .ok_or_else(|| InstanceError::Invalid(format!("{what} references unknown bus {id}")))
        };
        let mut lines = Vec::with_capacity(self.lines.len());
        for rec in &self.lines {
            let id = rec.id.clone().unwrap_or_else(|| format!("{}-{}", rec.from, rec.to));
            let from = lookup(&rec.from, &format!("line {id}"))?;
            let to = lookup(&rec.to, &format!("line {id}"))?;
            let (g, b) = match rec.params {
                LineParams::Impedance { r, x } => line_admittance(r, x)?,
                LineParams::Admittance { g, b } => (g, b),
            };
            lines.push(Line { id, from, to, g, b, i_max: rec.i_max });
        }
        let ref_bus = lookup(&self.ref_bus, "ref_bus")?;
        let mut buyers = Vec::with_capacity(self.buyers.len());
        for (k, b) in self.buyers.iter().enumerate() {
            buyers.push(Buyer {
                bus: lookup(&b.bus, &format!("buyer {k}"))?,
                p_min: b.p_min,
                p_max: b.p_max,
                q_min: b.q_min,
                q_max: b.q_max,
                blocks: blocks_from(&b.blocks),
            });
        }
        let mut sellers = Vec::with_capacity(self.sellers.len());
        for (k, s) in self.sellers.iter().enumerate() {
            sellers.push(Seller {
                bus: lookup(&s.bus, &format!("seller {k}"))?,
                p_min: s.p_min,
                p_max: s.p_max,
                q_min: s.q_min,
                q_max: s.q_max,
                blocks: blocks_from(&s.blocks),
                no_load_cost: s.no_load_cost,
                min_uptime: s.min_uptime,
            });
        }
        let network = Network::new(buses, lines, ref_bus)?;
        MarketInstance::new(network, buyers, sellers, self.periods)
    }

    /// File representation of an instance. Lines are written by admittance so that
    /// reading the file back reproduces the same numbers.
    pub fn from_instance(inst: &MarketInstance) -> Self {
        let net = &inst.network;
        let bus_id = |i: usize| net.buses[i].id.clone();
        InstanceFile {
            buses: net
                .buses
                .iter()
                .map(|b| BusRecord { id: b.id.clone(), v_min: b.v_min, v_max: b.v_max })
                .collect(),
            lines: net
                .lines
                .iter()
                .map(|l| LineRecord {
                    id: Some(l.id.clone()),
                    from: bus_id(l.from),
                    to: bus_id(l.to),
                    params: LineParams::Admittance { g: l.g, b: l.b },
                    i_max: l.i_max,
                })
                .collect(),
            ref_bus: bus_id(net.ref_bus),
            periods: inst.periods,
            buyers: inst
                .buyers
                .iter()
                .map(|b| BuyerRecord {
                    bus: bus_id(b.bus),
                    p_min: b.p_min,
                    p_max: b.p_max,
                    q_min: b.q_min,
                    q_max: b.q_max,
                    blocks: blocks_to(&b.blocks),
                })
                .collect(),
            sellers: inst
                .sellers
                .iter()
                .map(|s| SellerRecord {
                    bus: bus_id(s.bus),
                    p_min: s.p_min,
                    p_max: s.p_max,
                    q_min: s.q_min,
                    q_max: s.q_max,
                    blocks: blocks_to(&s.blocks),
                    no_load_cost: s.no_load_cost,
                    min_uptime: s.min_uptime,
                })
                .collect(),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<MarketInstance, InstanceError> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<MarketInstance, InstanceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
    parse_instance(&text)
}

pub fn to_json(inst: &MarketInstance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"{
        "buses": [{"id": "1", "v_min": 0.95, "v_max": 1.05}, {"id": "2", "v_min": 0.95, "v_max": 1.05}],
        "lines": [{"from": "1", "to": "2", "r": 0.01, "x": 0.1, "i_max": 2.0}],
        "ref_bus": "1",
        "periods": 1,
        "buyers": [{"bus": "2", "p_min": 0, "p_max": 1, "q_min": 0, "q_max": 0.2,
                    "blocks": [[{"size": 1.0, "price": 30}]]}],
        "sellers": [{"bus": "1", "p_min": 0, "p_max": 1, "q_min": -1, "q_max": 1,
                     "blocks": [[{"size": 1.0, "price": 10}]], "no_load_cost": 2, "min_uptime": 1}]
    }"#;

    #[test]
    fn parses_minimal_instance() {
        let inst = parse_instance(TWO_BUS).unwrap();
        assert_eq!(inst.network.n_buses(), 2);
        assert_eq!(inst.network.lines[0].id, "1-2");
        assert!((inst.network.lines[0].g - 0.990099).abs() < 1e-6);
    }

    #[test]
    fn rejects_unknown_bus() {
        let text = TWO_BUS.replace(r#""to": "2""#, r#""to": "9""#);
        let err = parse_instance(&text).unwrap_err();
        assert!(err.to_string().contains("unknown bus 9"), "{err}");
    }

    #[test]
    fn rejects_negative_block() {
        let text = TWO_BUS.replace(r#""size": 1.0, "price": 30"#, r#""size": -1.0, "price": 30"#);
        assert!(matches!(parse_instance(&text), Err(InstanceError::Invalid(_))));
    }

    #[test]
    fn admittance_lines_accepted() {
        let text = TWO_BUS.replace(r#""r": 0.01, "x": 0.1"#, r#""g": 0.0, "b": -10.0"#);
        let inst = parse_instance(&text).unwrap();
        assert_eq!(inst.network.lines[0].b, -10.0);
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse_instance("{"), Err(InstanceError::Parse(_))));
    }

    #[test]
    fn round_trip() {
        let inst = parse_instance(TWO_BUS).unwrap();
        assert_eq!(parse_instance(&to_json(&inst)).unwrap(), inst);
    }
}
