//! Ring topology with long-range links and the three-outcome pair rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{RandomSource, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("long-range weight q = {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("ring needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("{requested} long-range offsets do not fit a ring of {n_nodes} nodes (at most {capacity})")]
    TooManyOffsets {
        requested: usize,
        n_nodes: usize,
        capacity: usize,
    },
    #[error("offset {offset} is outside [2, {max}]")]
    OffsetOutOfRange { offset: usize, max: usize },
    #[error("offsets must be strictly increasing: {0:?}")]
    OffsetsNotIncreasing(Vec<usize>),
    #[error("node index {index} out of range for {n_nodes} nodes")]
    IndexOutOfRange { index: usize, n_nodes: usize },
}

/// Trading state of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(i8)]
pub enum Spin {
    Buyer = 1,
    Seller = -1,
}

impl Spin {
    pub fn value(self) -> i8 {
        self as i8
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Buyer => Spin::Seller,
            Spin::Seller => Spin::Buyer,
        }
    }

    /// Coin convention: `true` is a buyer.
    pub fn from_coin(heads: bool) -> Spin {
        if heads {
            Spin::Buyer
        } else {
            Spin::Seller
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    pub spin: Spin,
    /// Log-price in integer units.
    pub price: i64,
}

/// `1 + q * m / 2`.
pub fn effective_dimension(m: usize, q: f64) -> Result<f64, ModelError> {
    check_weight(q)?;
    Ok(1.0 + q * m as f64 / 2.0)
}

fn check_weight(q: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(ModelError::WeightOutOfRange(q))
    }
}

/// Periodic ring of `n_nodes` with nearest neighbors at weight 1 and
/// `±offset` neighbors at weight `q`.
///
/// Because the ring is translation invariant, the candidate list is stored
/// once as forward shifts with cumulative weights and reused for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_nodes: usize,
    offsets: Vec<usize>,
    weight: f64,
    // (forward shift in 0..n, cumulative weight), in candidate order
    stencil: Vec<(usize, f64)>,
}

impl Topology {
    /// Topology with explicitly chosen offsets.
    pub fn with_offsets(n_nodes: usize, offsets: Vec<usize>, q: f64) -> Result<Self, ModelError> {
        if n_nodes < 3 {
            return Err(ModelError::TooFewNodes(n_nodes));
        }
        check_weight(q)?;
        let max = n_nodes / 2;
        if let Some(&bad) = offsets.iter().find(|&&o| o < 2 || o > max) {
            return Err(ModelError::OffsetOutOfRange { offset: bad, max });
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::OffsetsNotIncreasing(offsets));
        }

        let n = n_nodes;
        let mut shifts: Vec<(usize, f64)> = Vec::with_capacity(2 + 2 * offsets.len());
        let mut push = |shift: usize, w: f64| match shifts.iter_mut().find(|(s, _)| *s == shift) {
            Some(entry) => entry.1 += w,
            None => shifts.push((shift, w)),
        };
        push(n - 1, 1.0);
        push(1, 1.0);
        for &o in &offsets {
            push(n - o, q);
            push(o, q);
        }
        let mut total = 0.0;
        let stencil = shifts
            .into_iter()
            .map(|(s, w)| {
                total += w;
                (s, total)
            })
            .collect();

        Ok(Self {
            n_nodes,
            offsets,
            weight: q,
            stencil,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn long_range_weight(&self) -> f64 {
        self.weight
    }

    pub fn effective_dimension(&self) -> f64 {
        1.0 + self.weight * self.offsets.len() as f64 / 2.0
    }

    fn total_weight(&self) -> f64 {
        self.stencil.last().map_or(0.0, |&(_, c)| c)
    }

    #[inline]
    fn shift(&self, i: usize, shift: usize) -> usize {
        let j = i + shift;
        if j >= self.n_nodes {
            j - self.n_nodes
        } else {
            j
        }
    }
}

/// Number of distinct valid offsets for a ring of `n` nodes.
pub fn offset_capacity(n: usize) -> usize {
    (n / 2).saturating_sub(1)
}

/// Builds a ring with `m` long-range offsets on a geometric hierarchy.
///
/// With `c = (n/2)^(1/(m+1))` the k-th offset is
/// `max(g[k-1] + 1, floor(c^k))` starting from `g[0] = 1`, so offsets start at
/// 2 or more and each is roughly `c` times the previous one.
pub fn build_topology(n: usize, m: usize, q: f64) -> Result<Topology, ModelError> {
    if n < 3 {
        return Err(ModelError::TooFewNodes(n));
    }
    check_weight(q)?;
    let capacity = offset_capacity(n);
    let too_many = || ModelError::TooManyOffsets {
        requested: m,
        n_nodes: n,
        capacity,
    };
    if m > capacity {
        return Err(too_many());
    }
    let half = n / 2;
    let ratio = (half as f64).powf(1.0 / (m as f64 + 1.0));
    let mut offsets = Vec::with_capacity(m);
    let mut prev = 1usize;
    for k in 1..=m {
        // the epsilon keeps exact powers such as 512^(1/3) from flooring one low
        let geometric = (ratio.powi(k as i32) + 1e-9).floor() as usize;
        let g = (prev + 1).max(geometric).max(2);
        if g > half {
            return Err(too_many());
        }
        offsets.push(g);
        prev = g;
    }
    Topology::with_offsets(n, offsets, q)
}

/// Candidate partners of node `i` with their selection weights.
///
/// Order is `i-1, i+1`, then `i-o, i+o` for each offset. Indices that
/// coincide on the ring are merged into the first occurrence.
pub fn neighbor_weights(topology: &Topology, i: usize) -> Result<Vec<(usize, f64)>, ModelError> {
    if i >= topology.n_nodes {
        return Err(ModelError::IndexOutOfRange {
            index: i,
            n_nodes: topology.n_nodes,
        });
    }
    let mut prev = 0.0;
    Ok(topology
        .stencil
        .iter()
        .map(|&(s, cum)| {
            let w = cum - prev;
            prev = cum;
            (topology.shift(i, s), w)
        })
        .collect())
}

/// Price change and post-interaction spins of a selected pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteractionOutcome {
    pub dprice_first: i8,
    pub dprice_second: i8,
    pub new_spin_first: Spin,
    pub new_spin_second: Spin,
}

/// Two buyers both raise their price, two sellers both lower it, and a mixed
/// pair deals: prices stay and each spin is redrawn with a fair coin, first
/// node first. Like pairs do not touch the generator.
#[inline]
pub fn interact<R: RandomSource>(first: Spin, second: Spin, rng: &mut R) -> InteractionOutcome {
    if first == second {
        let d = first.value();
        InteractionOutcome {
            dprice_first: d,
            dprice_second: d,
            new_spin_first: first,
            new_spin_second: second,
        }
    } else {
        let a = Spin::from_coin(rng.coin());
        let b = Spin::from_coin(rng.coin());
        InteractionOutcome {
            dprice_first: 0,
            dprice_second: 0,
            new_spin_first: a,
            new_spin_second: b,
        }
    }
}

/// Complete simulation state. Owned by one thread at a time.
#[derive(Debug, Clone)]
pub struct ModelState<R = SimRng> {
    nodes: Vec<NodeState>,
    topology: Topology,
    rng: R,
    interactions_done: u64,
}

impl ModelState<SimRng> {
    /// Fresh state: every price 0, spins drawn with one coin per node.
    pub fn new(topology: Topology, seed: u64) -> Self {
        Self::with_random_spins(topology, SimRng::from_seed(seed))
    }
}

impl<R: RandomSource> ModelState<R> {
    pub fn with_random_spins(topology: Topology, mut rng: R) -> Self {
        let nodes = (0..topology.n_nodes())
            .map(|_| NodeState {
                spin: Spin::from_coin(rng.coin()),
                price: 0,
            })
            .collect();
        Self {
            nodes,
            topology,
            rng,
            interactions_done: 0,
        }
    }

    /// State with prescribed spins and zero prices.
    ///
    /// # Panics
    ///
    /// If `spins` does not have one entry per node.
    pub fn from_spins(topology: Topology, spins: &[Spin], rng: R) -> Self {
        assert_eq!(spins.len(), topology.n_nodes(), "one spin per node");
        let nodes = spins.iter().map(|&spin| NodeState { spin, price: 0 }).collect();
        Self {
            nodes,
            topology,
            rng,
            interactions_done: 0,
        }
    }
}

impl<R> ModelState<R> {
    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn interactions_done(&self) -> u64 {
        self.interactions_done
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn prices(&self) -> Vec<i64> {
        self.nodes.iter().map(|n| n.price).collect()
    }

    pub fn spins(&self) -> Vec<Spin> {
        self.nodes.iter().map(|n| n.spin).collect()
    }
}

impl<R: RandomSource> ModelState<R> {
    /// Draws the interacting pair: `i` uniform over nodes, then a partner
    /// from `neighbor_weights(i)` with probability proportional to weight.
    #[inline]
    pub fn select_pair(&mut self) -> (usize, usize) {
        let topo = &self.topology;
        let i = self.rng.index(topo.n_nodes);
        let target = self.rng.unit() * topo.total_weight();
        let shift = topo
            .stencil
            .iter()
            .find(|&&(_, cum)| target < cum)
            .or(topo.stencil.last())
            .map(|&(s, _)| s)
            .expect("nearest neighbors always carry weight");
        let j = topo.shift(i, shift);
        debug_assert_ne!(i, j);
        (i, j)
    }

    /// One asynchronous pair interaction.
    #[inline]
    pub fn apply_step(&mut self) {
        let (i, j) = self.select_pair();
        let out = interact(self.nodes[i].spin, self.nodes[j].spin, &mut self.rng);
        let a = &mut self.nodes[i];
        a.price += i64::from(out.dprice_first);
        a.spin = out.new_spin_first;
        let b = &mut self.nodes[j];
        b.price += i64::from(out.dprice_second);
        b.spin = out.new_spin_second;
        self.interactions_done += 1;
    }
}
