//! Network and market data model.
//!
//! Everything is stored in per-unit. Buses are addressed by their position in
//! [`Network::buses`]; string identifiers only matter at the file boundary.

mod io;
mod synthetic;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

pub use io::{load_instance, parse_instance, to_json, InstanceFile};
pub use synthetic::{generate_synthetic_instance, synthetic_line_count};

/// Complex per-unit quantity.
pub type Complex = nalgebra::Complex<f64>;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, InstanceError> {
    Err(InstanceError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: String,
    pub v_min: f64,
    pub v_max: f64,
}

/// An undirected line with its series admittance `g + jb`.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub g: f64,
    pub b: f64,
    pub i_max: f64,
}

impl Line {
    pub fn admittance(&self) -> Complex {
        Complex::new(self.g, self.b)
    }
}

/// One direction of a line. Arc `2 * line` runs `from -> to`, arc `2 * line + 1` runs back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub index: usize,
    pub line: usize,
    pub from: usize,
    pub to: usize,
}

impl Arc {
    pub fn is_forward(&self) -> bool {
        self.index % 2 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub ref_bus: usize,
    /// `neighbors[v]` lists `(w, line index)` sorted by `w`.
    pub neighbors: Vec<Vec<(usize, usize)>>,
    index: HashMap<String, usize>,
}

impl Network {
    /// Builds and validates a network.
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, ref_bus: usize) -> Result<Self, InstanceError> {
        if buses.is_empty() {
            return invalid("network has no buses");
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if !(bus.v_min > 0.0 && bus.v_min <= bus.v_max && bus.v_max.is_finite()) {
                return invalid(format!("bus {} has invalid voltage bounds", bus.id));
            }
            if index.insert(bus.id.clone(), i).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
        }
        if ref_bus >= buses.len() {
            return invalid("reference bus out of range");
        }
        let mut neighbors = vec![Vec::new(); buses.len()];
        let mut seen = HashMap::new();
        for (l, line) in lines.iter().enumerate() {
            if line.from >= buses.len() || line.to >= buses.len() {
                return invalid(format!("line {} references an unknown bus", line.id));
            }
            if line.from == line.to {
                return invalid(format!("line {} is a self loop", line.id));
            }
            if !(line.i_max > 0.0) {
                return invalid(format!("line {} has non-positive thermal rating", line.id));
            }
            if line.g == 0.0 && line.b == 0.0 || !line.g.is_finite() || !line.b.is_finite() {
                return invalid(format!("line {} has zero or non-finite admittance", line.id));
            }
            let key = (line.from.min(line.to), line.from.max(line.to));
            if seen.insert(key, l).is_some() {
                return invalid(format!("line {} duplicates an existing bus pair", line.id));
            }
            neighbors[line.from].push((line.to, l));
            neighbors[line.to].push((line.from, l));
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let net = Network { buses, lines, ref_bus, neighbors, index };
        if !net.is_connected() {
            return invalid("network is not connected");
        }
        Ok(net)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_arcs(&self) -> usize {
        2 * self.lines.len()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn arc(&self, index: usize) -> Arc {
        let line = &self.lines[index / 2];
        let (from, to) = if index % 2 == 0 { (line.from, line.to) } else { (line.to, line.from) };
        Arc { index, line: index / 2, from, to }
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        (0..self.n_arcs()).map(|a| self.arc(a))
    }

    /// Arcs leaving `bus`.
    pub fn out_arcs(&self, bus: usize) -> impl Iterator<Item = Arc> + '_ {
        self.neighbors[bus].iter().map(move |&(_, l)| {
            let forward = self.lines[l].from == bus;
            self.arc(2 * l + usize::from(!forward))
        })
    }

    /// Breadth-first order from `root`, returning `(order, parent arc)` where the
    /// parent arc of a non-root bus points from its parent towards it.
    pub fn bfs_tree(&self, root: usize) -> (Vec<usize>, Vec<Option<Arc>>) {
        let mut parent = vec![None; self.n_buses()];
        let mut seen = vec![false; self.n_buses()];
        let mut order = Vec::with_capacity(self.n_buses());
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for arc in self.out_arcs(v) {
                if !seen[arc.to] {
                    seen[arc.to] = true;
                    parent[arc.to] = Some(arc);
                    queue.push_back(arc.to);
                }
            }
        }
        (order, parent)
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_tree(0).0.len() == self.n_buses()
    }

    /// Apparent-power limit of an arc: the current rating times the sending-end minimum voltage.
    pub fn arc_power_limit(&self, arc: Arc) -> f64 {
        self.lines[arc.line].i_max * self.buses[arc.from].v_min
    }
}

/// Series admittance `1 / (r + jx)`.
pub fn line_admittance(r: f64, x: f64) -> Result<(f64, f64), InstanceError> {
    let d = r * r + x * x;
    if d == 0.0 || !d.is_finite() {
        return invalid("zero or non-finite impedance");
    }
    Ok((r / d, -x / d))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub size: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Buyer {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Bid blocks, one list per period.
    pub blocks: Vec<Vec<Block>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seller {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Offer blocks, one list per period.
    pub blocks: Vec<Vec<Block>>,
    pub no_load_cost: f64,
    pub min_uptime: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    pub network: Network,
    pub buyers: Vec<Buyer>,
    pub sellers: Vec<Seller>,
    pub periods: usize,
}

impl MarketInstance {
    pub fn new(
        network: Network,
        buyers: Vec<Buyer>,
        sellers: Vec<Seller>,
        periods: usize,
    ) -> Result<Self, InstanceError> {
        let inst = MarketInstance { network, buyers, sellers, periods };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let n = self.network.n_buses();
        if self.periods == 0 {
            return invalid("periods must be at least 1");
        }
        if self.buyers.is_empty() || self.sellers.is_empty() {
            return invalid("instance needs at least one buyer and one seller");
        }
        let check = |who: &str, k: usize, bus: usize, bounds: [f64; 4], blocks: &[Vec<Block>]| {
            if bus >= n {
                return invalid(format!("{who} {k} sits on an unknown bus"));
            }
            if !(bounds[0] <= bounds[1] && bounds[2] <= bounds[3]) {
                return invalid(format!("{who} {k} has inverted bounds"));
            }
            if blocks.len() != self.periods {
                return invalid(format!("{who} {k} needs one block list per period"));
            }
            for block in blocks.iter().flatten() {
                if !(block.size >= 0.0) || !block.price.is_finite() {
                    return invalid(format!("{who} {k} has a negative or non-finite block"));
                }
            }
            Ok(())
        };
        for (k, b) in self.buyers.iter().enumerate() {
            check("buyer", k, b.bus, [b.p_min, b.p_max, b.q_min, b.q_max], &b.blocks)?;
        }
        for (k, s) in self.sellers.iter().enumerate() {
            check("seller", k, s.bus, [s.p_min, s.p_max, s.q_min, s.q_max], &s.blocks)?;
            if s.min_uptime == 0 {
                return invalid(format!("seller {k} has zero minimum uptime"));
            }
            if !(s.no_load_cost >= 0.0) {
                return invalid(format!("seller {k} has a negative no-load cost"));
            }
        }
        Ok(())
    }

    pub fn buyers_at(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.buyers.iter().enumerate().filter(move |(_, b)| b.bus == bus).map(|(k, _)| k)
    }

    pub fn sellers_at(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.sellers.iter().enumerate().filter(move |(_, s)| s.bus == bus).map(|(k, _)| k)
    }
}
