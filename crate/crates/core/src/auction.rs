//! Sealed-bid second-price auction as a comparison tournament.

use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, WireId};
use crate::field::Fp;
use crate::sharing::PartyId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuctionError {
    #[error("an auction needs at least two bids")]
    TooFewBids,
    #[error("bid {value} does not fit in {bits} bits")]
    BidTooLarge { value: u64, bits: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub winner: usize,
    pub price: u64,
}

/// Highest bid wins and pays the second-highest bid; ties go to the
/// lowest index.
pub fn vickrey_plain(bids: &[u64]) -> Result<AuctionOutcome, AuctionError> {
    if bids.len() < 2 {
        return Err(AuctionError::TooFewBids);
    }
    let winner = (0..bids.len()).fold(0, |w, i| if bids[i] > bids[w] { i } else { w });
    let price = bids.iter().enumerate().filter(|&(i, _)| i != winner).map(|(_, &b)| b).max().expect("two bids");
    Ok(AuctionOutcome { winner, price })
}

/// Party that submits bid `i` when `n` parties run the auction.
pub fn bidder_party(i: usize, n: usize) -> PartyId {
    i % n
}

struct Node {
    best: WireId,
    second: WireId,
    index: WireId,
}

/// Circuit whose outputs are `[winner index, price]`. Bid `i` is an input
/// of party `i mod n`. Each combine costs two comparisons and four
/// multiplications; `bidders - 1` combines in total.
pub fn vickrey_circuit<const P: u64>(bidders: usize, n: usize, bitwidth: u32) -> Result<Circuit<P>, AuctionError> {
    if bidders < 2 {
        return Err(AuctionError::TooFewBids);
    }
    let mut b = CircuitBuilder::<P>::new().bitwidth(bitwidth);
    let bids: Vec<WireId> = (0..bidders).map(|i| b.input(bidder_party(i, n))).collect();
    let zero = b.constant(Fp::ZERO);
    let mut level: Vec<Node> = bids
        .iter()
        .enumerate()
        .map(|(i, &w)| Node { best: w, second: zero, index: b.constant(Fp::new(i as u64)) })
        .collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(l) = it.next() {
            match it.next() {
                Some(r) => next.push(combine(&mut b, l, r)),
                None => next.push(l),
            }
        }
        level = next;
    }
    let root = &level[0];
    b.output(root.index);
    b.output(root.second);
    Ok(b.build())
}

/// `c = [bl < br]` picks the right side only on a strict win, so ties keep
/// the left (lower-index) side.
fn combine<const P: u64>(b: &mut CircuitBuilder<P>, l: Node, r: Node) -> Node {
    let c = b.cmp(l.best, r.best);
    let select = |b: &mut CircuitBuilder<P>, x: WireId, y: WireId| {
        let d = b.sub(y, x);
        let cd = b.mul(c, d);
        b.add(x, cd)
    };
    let best = select(b, l.best, r.best);
    let index = select(b, l.index, r.index);
    let winner_second = select(b, l.second, r.second);
    let sum = b.add(l.best, r.best);
    let loser_best = b.sub(sum, best);
    let d = b.cmp(winner_second, loser_best);
    let second = {
        let diff = b.sub(loser_best, winner_second);
        let dd = b.mul(d, diff);
        b.add(winner_second, dd)
    };
    Node { best, second, index }
}

/// Per-party input lists for `bids` under [`bidder_party`].
pub fn auction_inputs<const P: u64>(bids: &[u64], n: usize, bitwidth: u32) -> Result<Vec<Vec<Fp<P>>>, AuctionError> {
    let mut inputs = vec![Vec::new(); n];
    for (i, &v) in bids.iter().enumerate() {
        if bitwidth < 64 && v >> bitwidth != 0 {
            return Err(AuctionError::BidTooLarge { value: v, bits: bitwidth });
        }
        inputs[bidder_party(i, n)].push(Fp::new(v));
    }
    Ok(inputs)
}

pub fn decode_outcome<const P: u64>(outputs: &[Fp<P>]) -> AuctionOutcome {
    AuctionOutcome { winner: outputs[0].value() as usize, price: outputs[1].value() }
}
