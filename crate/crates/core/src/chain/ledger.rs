use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{verify_proof, CreditRecord, Rejection};
use crate::engine::{ComputationProof, Roster};
use crate::quorum::NodeId;

pub type TaskId = u64;
pub type DatasetId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Account {
    Node(NodeId),
    Client(u64),
    Escrow(TaskId),
    /// Funds set aside for the group that reruns a failed task.
    RetryPool,
    /// Markup collected on a dataset's sales, owed to its backers.
    BackerPool(DatasetId),
}

impl fmt::Display for Account {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Account::Node(n) => write!(f, "node:{n}"),
            Account::Client(c) => write!(f, "client:{c}"),
            Account::Escrow(t) => write!(f, "escrow:{t}"),
            Account::RetryPool => write!(f, "retry-pool"),
            Account::BackerPool(d) => write!(f, "backer-pool:{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TaskState {
    Created,
    Funded,
    Bidding,
    QuorumSelected,
    Computing,
    Verified,
    Failed,
    Settled,
}

impl TaskState {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskState::Created => "created",
            TaskState::Funded => "funded",
            TaskState::Bidding => "bidding",
            TaskState::QuorumSelected => "quorum-selected",
            TaskState::Computing => "computing",
            TaskState::Verified => "verified",
            TaskState::Failed => "failed",
            TaskState::Settled => "settled",
        }
    }

    fn can_move_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Created, Funded)
                | (Funded, Bidding)
                | (Bidding, QuorumSelected)
                | (QuorumSelected, Computing)
                | (Computing, Verified)
                | (Computing, Failed)
                | (Verified, Settled)
                | (Failed, Settled)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Verified,
    /// `spent` is the cost each honest member had already incurred.
    Failed { blamed: Option<NodeId>, spent: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: TaskId,
    pub circuit_hash: [u8; 32],
    pub client: u64,
    pub fee: u64,
    pub min_deposit: u64,
    pub state: TaskState,
    pub bids: BTreeMap<NodeId, u64>,
    pub quorum: Vec<NodeId>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Mint { account: Account, amount: u64 },
    Transfer { from: Account, to: Account, amount: u64, memo: &'static str },
    TaskState { task: TaskId, state: TaskState },
    Credit { node: NodeId, kind: &'static str },
}

impl Event {
    fn kind(&self) -> &'static str {
        match self {
            Event::Mint { .. } => "mint",
            Event::Transfer { .. } => "transfer",
            Event::TaskState { .. } => "task",
            Event::Credit { .. } => "credit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("no task {0}")]
    UnknownTask(TaskId),
    #[error("task {task} cannot go from {from:?} to {to:?}")]
    IllegalTransition { task: TaskId, from: TaskState, to: TaskState },
    #[error("task {0} is already settled")]
    AlreadySettled(TaskId),
    #[error("{account} holds {have}, needs {need}")]
    InsufficientFunds { account: Account, need: u64, have: u64 },
    #[error("deposit {got} below the required {need}")]
    DepositTooSmall { need: u64, got: u64 },
    #[error("node {0} already bid")]
    DuplicateBid(NodeId),
    #[error("node {0} has no bid on this task")]
    NotBidder(NodeId),
    #[error("node {0} is not in the quorum")]
    NotInQuorum(NodeId),
    #[error("quorum is empty")]
    EmptyQuorum,
    #[error("no dataset {0}")]
    UnknownDataset(DatasetId),
    #[error("{0} holds no backing position")]
    NotBacker(Account),
}

#[derive(Debug, Clone)]
struct Dataset {
    owner: Account,
    backers: Vec<Account>,
}

/// Event-sourced balances, tasks, credit and datasets. Every balance change
/// is a transfer except minting, so the total only grows by minted amounts.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    balances: BTreeMap<Account, u64>,
    tasks: BTreeMap<TaskId, Task>,
    credit: BTreeMap<NodeId, CreditRecord>,
    datasets: BTreeMap<DatasetId, Dataset>,
    events: Vec<Event>,
    minted: u128,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn balance(&self, a: Account) -> u64 {
        self.balances.get(&a).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<Account, u64> {
        &self.balances
    }

    pub fn total(&self) -> u128 {
        self.balances.values().map(|&b| b as u128).sum()
    }

    pub fn minted(&self) -> u128 {
        self.minted
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn task(&self, id: TaskId) -> Result<&Task, LedgerError> {
        self.tasks.get(&id).ok_or(LedgerError::UnknownTask(id))
    }

    pub fn credit(&self, node: NodeId) -> CreditRecord {
        self.credit.get(&node).copied().unwrap_or_default()
    }

    pub fn mint(&mut self, account: Account, amount: u64) {
        *self.balances.entry(account).or_insert(0) += amount;
        self.minted += amount as u128;
        self.events.push(Event::Mint { account, amount });
    }

    fn transfer(&mut self, from: Account, to: Account, amount: u64, memo: &'static str) -> Result<(), LedgerError> {
        if amount == 0 {
            return Ok(());
        }
        let have = self.balance(from);
        if have < amount {
            return Err(LedgerError::InsufficientFunds { account: from, need: amount, have });
        }
        *self.balances.entry(from).or_insert(0) -= amount;
        *self.balances.entry(to).or_insert(0) += amount;
        self.events.push(Event::Transfer { from, to, amount, memo });
        Ok(())
    }

    fn note_credit(&mut self, node: NodeId, kind: &'static str) {
        let r = self.credit.entry(node).or_default();
        match kind {
            "completed" => r.completed += 1,
            "abort" => r.aborts += 1,
            _ => r.slashes += 1,
        }
        self.events.push(Event::Credit { node, kind });
    }

    fn task_mut(&mut self, id: TaskId) -> Result<&mut Task, LedgerError> {
        self.tasks.get_mut(&id).ok_or(LedgerError::UnknownTask(id))
    }

    fn advance(&mut self, id: TaskId, to: TaskState) -> Result<(), LedgerError> {
        let t = self.task_mut(id)?;
        if t.state == TaskState::Settled {
            return Err(LedgerError::AlreadySettled(id));
        }
        if !t.state.can_move_to(to) {
            return Err(LedgerError::IllegalTransition { task: id, from: t.state, to });
        }
        t.state = to;
        self.events.push(Event::TaskState { task: id, state: to });
        Ok(())
    }

    fn expect_state(&self, id: TaskId, s: TaskState) -> Result<&Task, LedgerError> {
        let t = self.task(id)?;
        if t.state == TaskState::Settled && s != TaskState::Settled {
            return Err(LedgerError::AlreadySettled(id));
        }
        if t.state != s {
            return Err(LedgerError::IllegalTransition { task: id, from: t.state, to: s });
        }
        Ok(t)
    }

    pub fn create_task(&mut self, client: u64, circuit_hash: [u8; 32], fee: u64, min_deposit: u64) -> TaskId {
        let id = self.tasks.len() as TaskId;
        let task = Task {
            id,
            circuit_hash,
            client,
            fee,
            min_deposit,
            state: TaskState::Created,
            bids: BTreeMap::new(),
            quorum: Vec::new(),
            outcome: None,
        };
        self.tasks.insert(id, task);
        self.events.push(Event::TaskState { task: id, state: TaskState::Created });
        id
    }

    /// Moves the client's fee into escrow.
    pub fn fund(&mut self, id: TaskId) -> Result<(), LedgerError> {
        let t = self.expect_state(id, TaskState::Created)?;
        let (client, fee) = (t.client, t.fee);
        self.transfer(Account::Client(client), Account::Escrow(id), fee, "fee")?;
        self.advance(id, TaskState::Funded)
    }

    pub fn open_bidding(&mut self, id: TaskId) -> Result<(), LedgerError> {
        self.advance(id, TaskState::Bidding)
    }

    pub fn bid(&mut self, id: TaskId, node: NodeId, deposit: u64) -> Result<(), LedgerError> {
        let t = self.expect_state(id, TaskState::Bidding)?;
        if deposit < t.min_deposit {
            return Err(LedgerError::DepositTooSmall { need: t.min_deposit, got: deposit });
        }
        if t.bids.contains_key(&node) {
            return Err(LedgerError::DuplicateBid(node));
        }
        self.transfer(Account::Node(node), Account::Escrow(id), deposit, "deposit")?;
        self.task_mut(id)?.bids.insert(node, deposit);
        Ok(())
    }

    /// A bidder whose DRF reveal did not match its commitment loses its
    /// deposit to the retry pool and is excluded.
    pub fn slash_bidder(&mut self, id: TaskId, node: NodeId) -> Result<(), LedgerError> {
        let t = self.expect_state(id, TaskState::Bidding)?;
        let deposit = *t.bids.get(&node).ok_or(LedgerError::NotBidder(node))?;
        self.transfer(Account::Escrow(id), Account::RetryPool, deposit, "slash")?;
        self.task_mut(id)?.bids.remove(&node);
        self.note_credit(node, "slash");
        Ok(())
    }

    /// Fixes the quorum and refunds every other bidder.
    pub fn select(&mut self, id: TaskId, quorum: &[NodeId]) -> Result<(), LedgerError> {
        let t = self.expect_state(id, TaskState::Bidding)?;
        if quorum.is_empty() {
            return Err(LedgerError::EmptyQuorum);
        }
        if let Some(&n) = quorum.iter().find(|n| !t.bids.contains_key(n)) {
            return Err(LedgerError::NotBidder(n));
        }
        let refunds: Vec<(NodeId, u64)> = t.bids.iter().filter(|(n, _)| !quorum.contains(n)).map(|(&n, &d)| (n, d)).collect();
        for (n, d) in refunds {
            self.transfer(Account::Escrow(id), Account::Node(n), d, "refund")?;
            self.task_mut(id)?.bids.remove(&n);
        }
        self.task_mut(id)?.quorum = quorum.to_vec();
        self.advance(id, TaskState::QuorumSelected)
    }

    pub fn start(&mut self, id: TaskId) -> Result<(), LedgerError> {
        self.advance(id, TaskState::Computing)
    }

    /// Verifies the proof against the roster of the quorum. A rejected
    /// proof fails the task; a bad signature blames its signer.
    pub fn submit_proof<const P: u64>(
        &mut self,
        id: TaskId,
        proof: &ComputationProof<P>,
        roster: &Roster,
    ) -> Result<Result<(), Rejection>, LedgerError> {
        let t = self.expect_state(id, TaskState::Computing)?;
        let quorum = t.quorum.clone();
        let verdict = verify_proof(proof, roster);
        let outcome = match verdict {
            Ok(()) => Outcome::Verified,
            Err(Rejection::BadSignature(p)) => Outcome::Failed { blamed: quorum.get(p).copied(), spent: 0 },
            Err(_) => Outcome::Failed { blamed: None, spent: 0 },
        };
        self.finish(id, outcome)?;
        Ok(verdict)
    }

    #[cfg(test)]
    pub(crate) fn finish_for_test(&mut self, id: TaskId) {
        self.finish(id, Outcome::Verified).unwrap()
    }

    pub fn report_failure(&mut self, id: TaskId, blamed: Option<NodeId>, spent: u64) -> Result<(), LedgerError> {
        let t = self.expect_state(id, TaskState::Computing)?;
        if let Some(b) = blamed.filter(|b| !t.quorum.contains(b)) {
            return Err(LedgerError::NotInQuorum(b));
        }
        self.finish(id, Outcome::Failed { blamed, spent })
    }

    fn finish(&mut self, id: TaskId, outcome: Outcome) -> Result<(), LedgerError> {
        let to = if outcome == Outcome::Verified { TaskState::Verified } else { TaskState::Failed };
        self.advance(id, to)?;
        self.task_mut(id)?.outcome = Some(outcome);
        Ok(())
    }

    /// Pays out a finished task and returns each account's net change.
    ///
    /// Verified: the fee is split evenly over the quorum (the remainder goes
    /// one token each to the first members) and deposits are returned.
    /// Failed with blame: the client is refunded, the blamed member's
    /// deposit pays every other member its spent cost and the rest goes to
    /// the retry pool. Failed without blame: everything is refunded.
    pub fn settle(&mut self, id: TaskId) -> Result<BTreeMap<Account, i128>, LedgerError> {
        let t = self.task(id)?;
        match t.state {
            TaskState::Settled => return Err(LedgerError::AlreadySettled(id)),
            TaskState::Verified | TaskState::Failed => {}
            from => return Err(LedgerError::IllegalTransition { task: id, from, to: TaskState::Settled }),
        }
        let before = self.balances.clone();
        let t = t.clone();
        let escrow = Account::Escrow(id);
        match t.outcome.expect("finished tasks have an outcome") {
            Outcome::Verified => {
                let q = t.quorum.len() as u64;
                for (i, &n) in t.quorum.iter().enumerate() {
                    let share = t.fee / q + u64::from((i as u64) < t.fee % q);
                    self.transfer(escrow, Account::Node(n), share, "reward")?;
                    self.transfer(escrow, Account::Node(n), t.bids[&n], "deposit-return")?;
                    self.note_credit(n, "completed");
                }
            }
            Outcome::Failed { blamed, spent } => {
                self.transfer(escrow, Account::Client(t.client), t.fee, "fee-refund")?;
                for &n in &t.quorum {
                    if Some(n) != blamed {
                        self.transfer(escrow, Account::Node(n), t.bids[&n], "deposit-return")?;
                    }
                }
                if let Some(b) = blamed {
                    let mut left = t.bids[&b];
                    for &n in t.quorum.iter().filter(|&&n| n != b) {
                        let pay = spent.min(left);
                        self.transfer(escrow, Account::Node(n), pay, "compensation")?;
                        left -= pay;
                    }
                    self.transfer(escrow, Account::RetryPool, left, "retry-subsidy")?;
                    self.note_credit(b, "abort");
                }
            }
        }
        self.advance(id, TaskState::Settled)?;
        let mut deltas = BTreeMap::new();
        let keys: Vec<Account> = before.keys().chain(self.balances.keys()).copied().collect();
        for a in keys {
            let d = self.balance(a) as i128 - before.get(&a).copied().unwrap_or(0) as i128;
            if d != 0 {
                deltas.insert(a, d);
            }
        }
        Ok(deltas)
    }

    pub fn register_dataset(&mut self, owner: Account) -> DatasetId {
        let id = self.datasets.len() as DatasetId;
        self.datasets.insert(id, Dataset { owner, backers: Vec::new() });
        id
    }

    fn dataset(&self, id: DatasetId) -> Result<&Dataset, LedgerError> {
        self.datasets.get(&id).ok_or(LedgerError::UnknownDataset(id))
    }

    pub fn backers(&self, id: DatasetId) -> Result<&[Account], LedgerError> {
        Ok(&self.dataset(id)?.backers)
    }

    /// The n-th backer pays n tokens to the dataset owner. Returns n.
    pub fn abs_back(&mut self, id: DatasetId, backer: Account) -> Result<u64, LedgerError> {
        let ds = self.dataset(id)?;
        let price = ds.backers.len() as u64 + 1;
        let owner = ds.owner;
        self.transfer(backer, owner, price, "backing")?;
        self.datasets.get_mut(&id).expect("checked").backers.push(backer);
        Ok(price)
    }

    /// With n backers a position sells for n + 1; the buyer takes the seller's place.
    pub fn abs_sell_position(&mut self, id: DatasetId, seller: Account, buyer: Account) -> Result<u64, LedgerError> {
        let ds = self.dataset(id)?;
        let pos = ds.backers.iter().position(|b| *b == seller).ok_or(LedgerError::NotBacker(seller))?;
        let price = ds.backers.len() as u64 + 1;
        self.transfer(buyer, seller, price, "position-sale")?;
        self.datasets.get_mut(&id).expect("checked").backers[pos] = buyer;
        Ok(price)
    }

    /// A sale at `price` plus a 20% markup; the markup goes to the backer pool.
    pub fn abs_sale(&mut self, id: DatasetId, buyer: Account, price: u64) -> Result<u64, LedgerError> {
        let owner = self.dataset(id)?.owner;
        let markup = price / 5;
        self.transfer(buyer, owner, price, "dataset-sale")?;
        self.transfer(buyer, Account::BackerPool(id), markup, "markup")?;
        Ok(markup)
    }

    /// Splits the backer pool evenly; any remainder stays in the pool.
    /// Returns each backer's share.
    pub fn abs_distribute(&mut self, id: DatasetId) -> Result<u64, LedgerError> {
        let backers = self.dataset(id)?.backers.clone();
        if backers.is_empty() {
            return Ok(0);
        }
        let share = self.balance(Account::BackerPool(id)) / backers.len() as u64;
        for b in backers {
            self.transfer(Account::BackerPool(id), b, share, "revenue-share")?;
        }
        Ok(share)
    }

    /// One line per event: `event <seq> <type> <fields...>`.
    pub fn export_events(&self) -> String {
        let mut out = String::new();
        for (seq, e) in self.events.iter().enumerate() {
            let fields = match e {
                Event::Mint { account, amount } => format!("{account} {amount}"),
                Event::Transfer { from, to, amount, memo } => format!("{from} {to} {amount} {memo}"),
                Event::TaskState { task, state } => format!("{task} {}", state.as_str()),
                Event::Credit { node, kind } => format!("node:{node} {kind}"),
            };
            out.push_str(&format!("event {seq} {} {fields}\n", e.kind()));
        }
        out
    }
}
