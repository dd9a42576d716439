//! Event-sourced registry of municipal guarantee notes and the fund's cash
//! account.
//!
//! The event log is the only source of truth. [`LedgerState`] is a fold of
//! the log and is rebuilt bit-for-bit by [`replay`]. Every event is checked
//! against the current state before it is applied, and the note tallies are
//! reconciled against the account after every event.
//!
//! Note lifecycle: `Issued -> Pledged(loan) -> Returned | Presented`.
//! Returned notes are retired; guarantee capacity comes back through
//! re-issuance against the unchanged program allocation.
//!
//! On-disk format: one event per line, `\n` terminated, single spaces
//! between fields, amounts in integer kopecks:
//!
//! ```text
//! 1 Allocate 100000000
//! 2 IssueSeries 5000000 5000000 1
//! 3 Pledge L-001 50000000 7500000 1
//! 4 Repay L-001 57500000 7500000
//! ```
//!
//! Other kinds: `Disburse <loan> <principal> <interest>` for unguaranteed
//! loans and `Default <loan> <recovered>`. Pledge note ids are
//! comma-separated. Only the canonical rendering is accepted, so
//! parse followed by serialize is the identity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::deal::{guarantee_face, interest_due, DealOutcome, LoanTerms, ScenarioKind};
use crate::money::{Money, MoneyError};

pub type NoteId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("amount must be positive")]
    NonPositiveAmount,
    #[error("issuance of {requested} exceeds remaining allocation {available}")]
    OverIssuance { requested: Money, available: Money },
    #[error("total {total} is not a whole number of {denomination} notes")]
    NonDivisible { total: Money, denomination: Money },
    #[error("series must start at note {expected}, event says {found}")]
    NoteIdMismatch { expected: NoteId, found: NoteId },
    #[error("unknown note {0}")]
    UnknownNote(NoteId),
    #[error("note {0} is not available for pledging")]
    NoteNotIssued(NoteId),
    #[error("note {0} listed twice")]
    DuplicateNote(NoteId),
    #[error("pledge lists no notes")]
    EmptyPledge,
    #[error("insufficient notes: need {needed}, {available} available")]
    InsufficientNotes { needed: Money, available: Money },
    #[error("no exact cover of {needed} with available notes")]
    NoExactCover { needed: Money },
    #[error("insufficient cash: need {needed}, have {available}")]
    InsufficientCash { needed: Money, available: Money },
    #[error("loan {0} already exists")]
    DuplicateLoan(String),
    #[error("unknown loan {0}")]
    UnknownLoan(String),
    #[error("loan {0} already settled")]
    AlreadySettled(String),
    #[error("repayment does not match loan {loan}: expected {expected_cash} with interest {expected_interest}")]
    RepaymentMismatch {
        loan: String,
        expected_cash: Money,
        expected_interest: Money,
    },
    #[error("recovered {recovered} exceeds the secured claim {claim}")]
    RecoveryExceedsClaim { recovered: Money, claim: Money },
    #[error("invalid loan terms: {0}")]
    InvalidTerms(String),
    #[error("outcome does not belong to loan {0}")]
    OutcomeMismatch(String),
    #[error("conservation violated: {0}")]
    Conservation(String),
    #[error(transparent)]
    Money(#[from] MoneyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("sequence gap: expected seq {expected}, found {found}")]
    Gap { expected: u64, found: u64 },
    #[error("event {seq} rejected: {reason}")]
    Rejected { seq: u64, reason: Rejection },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl LedgerError {
    /// Sequence number of the offending event, when known.
    pub fn seq(&self) -> Option<u64> {
        match self {
            LedgerError::Gap { found, .. } => Some(*found),
            LedgerError::Rejected { seq, .. } => Some(*seq),
            LedgerError::Parse { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NoteState {
    Issued,
    Pledged(String),
    Returned,
    Presented,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VekselNote {
    pub note_id: NoteId,
    pub face_value: Money,
    pub state: NoteState,
    pub issued_at: u64,
    pub transitioned_at: u64,
}

/// Fund balances derived from the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FundAccount {
    pub program_allocation: Money,
    pub cash: Money,
    /// Face value of notes Issued or Pledged.
    pub notes_outstanding: Money,
    pub interest_income: Money,
    /// Face value of notes Presented.
    pub guarantee_losses: Money,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Allocate {
        amount: Money,
    },
    IssueSeries {
        total: Money,
        denomination: Money,
        first_note_id: NoteId,
    },
    /// Disbursement of a loan without guarantee notes.
    Disburse {
        loan_id: String,
        principal: Money,
        interest: Money,
    },
    /// Pledge of notes against a loan together with its disbursement.
    Pledge {
        loan_id: String,
        principal: Money,
        interest: Money,
        note_ids: Vec<NoteId>,
    },
    Repay {
        loan_id: String,
        cash_in: Money,
        interest: Money,
    },
    Default {
        loan_id: String,
        recovered: Money,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Allocate { .. } => "Allocate",
            EventKind::IssueSeries { .. } => "IssueSeries",
            EventKind::Disburse { .. } => "Disburse",
            EventKind::Pledge { .. } => "Pledge",
            EventKind::Repay { .. } => "Repay",
            EventKind::Default { .. } => "Default",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEvent {
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoanRecord {
    pub loan_id: String,
    pub principal: Money,
    pub interest: Money,
    pub note_ids: Vec<NoteId>,
    pub guarantee_face: Money,
    pub opened_at: u64,
    pub settled: Option<ScenarioKind>,
}

/// Result of pledging notes for a new loan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PledgeRecord {
    pub seq: u64,
    pub loan_id: String,
    pub note_ids: Vec<NoteId>,
    pub guarantee_face: Money,
    pub disbursed: Money,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub count: u64,
    pub face: Money,
}

/// Count and face totals of notes per lifecycle state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoteTallies {
    pub issued: Tally,
    pub pledged: Tally,
    pub returned: Tally,
    pub presented: Tally,
    /// Everything ever issued.
    pub total: Tally,
    /// Face value ever moved into Pledged.
    pub ever_pledged: Money,
}

impl NoteTallies {
    fn slot(&mut self, state: &NoteState) -> &mut Tally {
        match state {
            NoteState::Issued => &mut self.issued,
            NoteState::Pledged(_) => &mut self.pledged,
            NoteState::Returned => &mut self.returned,
            NoteState::Presented => &mut self.presented,
        }
    }
}

/// State folded from the event log.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LedgerState {
    pub last_seq: u64,
    pub account: FundAccount,
    pub notes: BTreeMap<NoteId, VekselNote>,
    pub loans: BTreeMap<String, LoanRecord>,
    pub tallies: NoteTallies,
    pub total_disbursed: Money,
}

fn add(a: Money, b: Money) -> Result<Money, Rejection> {
    Ok(a.checked_add(b)?)
}

fn sub(a: Money, b: Money) -> Result<Money, Rejection> {
    Ok(a.checked_sub(b)?)
}

impl LedgerState {
    pub fn account(&self) -> FundAccount {
        self.account
    }

    pub fn next_note_id(&self) -> NoteId {
        self.tallies.total.count + 1
    }

    /// Face value the municipality can still put behind new loans: notes
    /// on hand plus what it may still issue against the allocation.
    pub fn guarantee_capacity(&self) -> Money {
        let headroom = self
            .account
            .program_allocation
            .checked_sub(self.account.notes_outstanding)
            .expect("balances are range-checked");
        self.tallies
            .issued
            .face
            .checked_add(headroom)
            .expect("balances are range-checked")
    }

    fn issuance_headroom(&self) -> Result<Money, Rejection> {
        sub(self.account.program_allocation, self.account.notes_outstanding)
    }

    /// Validates and applies one event. The state is untouched on error.
    pub fn apply(&mut self, event: &LedgerEvent) -> Result<(), LedgerError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(LedgerError::Gap {
                expected,
                found: event.seq,
            });
        }
        let mut next = self.clone_for(event)?;
        next.last_seq = event.seq;
        next.reconcile().map_err(|reason| LedgerError::Rejected {
            seq: event.seq,
            reason,
        })?;
        *self = next;
        Ok(())
    }

    fn clone_for(&self, event: &LedgerEvent) -> Result<LedgerState, LedgerError> {
        self.check(event).map_err(|reason| LedgerError::Rejected {
            seq: event.seq,
            reason,
        })?;
        let mut next = self.clone();
        next.mutate(event).map_err(|reason| LedgerError::Rejected {
            seq: event.seq,
            reason,
        })?;
        Ok(next)
    }

    /// Preconditions that depend only on the current state.
    fn check(&self, event: &LedgerEvent) -> Result<(), Rejection> {
        match &event.kind {
            EventKind::Allocate { amount } => {
                if !amount.is_positive() {
                    return Err(Rejection::NonPositiveAmount);
                }
            }
            EventKind::IssueSeries {
                total,
                denomination,
                first_note_id,
            } => {
                if !denomination.is_positive() || total.is_negative() {
                    return Err(Rejection::NonPositiveAmount);
                }
                if total.minor() % denomination.minor() != 0 {
                    return Err(Rejection::NonDivisible {
                        total: *total,
                        denomination: *denomination,
                    });
                }
                let available = self.issuance_headroom()?;
                if *total > available {
                    return Err(Rejection::OverIssuance {
                        requested: *total,
                        available,
                    });
                }
                if *first_note_id != self.next_note_id() {
                    return Err(Rejection::NoteIdMismatch {
                        expected: self.next_note_id(),
                        found: *first_note_id,
                    });
                }
            }
            EventKind::Disburse {
                loan_id,
                principal,
                interest,
            }
            | EventKind::Pledge {
                loan_id,
                principal,
                interest,
                ..
            } => {
                if !principal.is_positive() || interest.is_negative() {
                    return Err(Rejection::NonPositiveAmount);
                }
                if self.loans.contains_key(loan_id) {
                    return Err(Rejection::DuplicateLoan(loan_id.clone()));
                }
                if self.account.cash < *principal {
                    return Err(Rejection::InsufficientCash {
                        needed: *principal,
                        available: self.account.cash,
                    });
                }
                if let EventKind::Pledge { note_ids, .. } = &event.kind {
                    if note_ids.is_empty() {
                        return Err(Rejection::EmptyPledge);
                    }
                    let mut seen = std::collections::BTreeSet::new();
                    for id in note_ids {
                        if !seen.insert(*id) {
                            return Err(Rejection::DuplicateNote(*id));
                        }
                        let note = self.notes.get(id).ok_or(Rejection::UnknownNote(*id))?;
                        if note.state != NoteState::Issued {
                            return Err(Rejection::NoteNotIssued(*id));
                        }
                    }
                }
            }
            EventKind::Repay {
                loan_id,
                cash_in,
                interest,
            } => {
                let loan = self.open_loan(loan_id)?;
                let expected_cash = add(loan.principal, loan.interest)?;
                if *interest != loan.interest || *cash_in != expected_cash {
                    return Err(Rejection::RepaymentMismatch {
                        loan: loan_id.clone(),
                        expected_cash,
                        expected_interest: loan.interest,
                    });
                }
            }
            EventKind::Default { loan_id, recovered } => {
                let loan = self.open_loan(loan_id)?;
                if recovered.is_negative() {
                    return Err(Rejection::NonPositiveAmount);
                }
                let claim = add(sub(loan.principal, loan.guarantee_face)?, loan.interest)?;
                if *recovered > claim {
                    return Err(Rejection::RecoveryExceedsClaim {
                        recovered: *recovered,
                        claim,
                    });
                }
            }
        }
        Ok(())
    }

    fn open_loan(&self, loan_id: &str) -> Result<&LoanRecord, Rejection> {
        let loan = self
            .loans
            .get(loan_id)
            .ok_or_else(|| Rejection::UnknownLoan(loan_id.to_string()))?;
        if loan.settled.is_some() {
            return Err(Rejection::AlreadySettled(loan_id.to_string()));
        }
        Ok(loan)
    }

    fn transition(&mut self, id: NoteId, to: NoteState, seq: u64) -> Result<Money, Rejection> {
        let note = self.notes.get_mut(&id).ok_or(Rejection::UnknownNote(id))?;
        let face = note.face_value;
        let from = std::mem::replace(&mut note.state, to.clone());
        note.transitioned_at = seq;
        let old = self.tallies.slot(&from);
        old.count -= 1;
        old.face = sub(old.face, face)?;
        let new = self.tallies.slot(&to);
        new.count += 1;
        new.face = add(new.face, face)?;
        Ok(face)
    }

    fn mutate(&mut self, event: &LedgerEvent) -> Result<(), Rejection> {
        let seq = event.seq;
        let acct = &mut self.account;
        match &event.kind {
            EventKind::Allocate { amount } => {
                acct.program_allocation = add(acct.program_allocation, *amount)?;
                acct.cash = add(acct.cash, *amount)?;
            }
            EventKind::IssueSeries {
                total,
                denomination,
                first_note_id,
            } => {
                acct.notes_outstanding = add(acct.notes_outstanding, *total)?;
                let count = (total.minor() / denomination.minor()) as u64;
                for i in 0..count {
                    let id = first_note_id + i;
                    self.notes.insert(
                        id,
                        VekselNote {
                            note_id: id,
                            face_value: *denomination,
                            state: NoteState::Issued,
                            issued_at: seq,
                            transitioned_at: seq,
                        },
                    );
                }
                self.tallies.issued.count += count;
                self.tallies.issued.face = add(self.tallies.issued.face, *total)?;
                self.tallies.total.count += count;
                self.tallies.total.face = add(self.tallies.total.face, *total)?;
            }
            EventKind::Disburse {
                loan_id,
                principal,
                interest,
            } => {
                acct.cash = sub(acct.cash, *principal)?;
                self.total_disbursed = add(self.total_disbursed, *principal)?;
                self.loans.insert(
                    loan_id.clone(),
                    LoanRecord {
                        loan_id: loan_id.clone(),
                        principal: *principal,
                        interest: *interest,
                        note_ids: Vec::new(),
                        guarantee_face: Money::ZERO,
                        opened_at: seq,
                        settled: None,
                    },
                );
            }
            EventKind::Pledge {
                loan_id,
                principal,
                interest,
                note_ids,
            } => {
                acct.cash = sub(acct.cash, *principal)?;
                self.total_disbursed = add(self.total_disbursed, *principal)?;
                let mut face = Money::ZERO;
                for id in note_ids {
                    face = add(face, self.transition(*id, NoteState::Pledged(loan_id.clone()), seq)?)?;
                }
                self.tallies.ever_pledged = add(self.tallies.ever_pledged, face)?;
                self.loans.insert(
                    loan_id.clone(),
                    LoanRecord {
                        loan_id: loan_id.clone(),
                        principal: *principal,
                        interest: *interest,
                        note_ids: note_ids.clone(),
                        guarantee_face: face,
                        opened_at: seq,
                        settled: None,
                    },
                );
            }
            EventKind::Repay {
                loan_id,
                cash_in,
                interest,
            } => {
                acct.cash = add(acct.cash, *cash_in)?;
                acct.interest_income = add(acct.interest_income, *interest)?;
                let loan = self.loans.get_mut(loan_id).ok_or_else(|| Rejection::UnknownLoan(loan_id.clone()))?;
                loan.settled = Some(ScenarioKind::FullRepayment);
                let (ids, face) = (loan.note_ids.clone(), loan.guarantee_face);
                for id in ids {
                    self.transition(id, NoteState::Returned, seq)?;
                }
                self.account.notes_outstanding = sub(self.account.notes_outstanding, face)?;
            }
            EventKind::Default { loan_id, recovered } => {
                acct.cash = add(acct.cash, *recovered)?;
                let loan = self.loans.get_mut(loan_id).ok_or_else(|| Rejection::UnknownLoan(loan_id.clone()))?;
                loan.settled = Some(ScenarioKind::Default);
                let (ids, face) = (loan.note_ids.clone(), loan.guarantee_face);
                for id in ids {
                    self.transition(id, NoteState::Presented, seq)?;
                }
                self.account.notes_outstanding = sub(self.account.notes_outstanding, face)?;
                self.account.guarantee_losses = add(self.account.guarantee_losses, face)?;
            }
        }
        Ok(())
    }

    /// Cross-checks the account against the per-state note tallies.
    fn reconcile(&self) -> Result<(), Rejection> {
        let t = &self.tallies;
        let a = &self.account;
        let fail = |what: &str| Err(Rejection::Conservation(what.to_string()));
        if t.issued.count + t.pledged.count + t.returned.count + t.presented.count != t.total.count {
            return fail("note counts do not sum to issued count");
        }
        let faces = add(add(t.issued.face, t.pledged.face)?, add(t.returned.face, t.presented.face)?)?;
        if faces != t.total.face {
            return fail("note faces do not sum to issued face");
        }
        if a.notes_outstanding != add(t.issued.face, t.pledged.face)? {
            return fail("notes outstanding disagree with issued + pledged notes");
        }
        if a.guarantee_losses != t.presented.face {
            return fail("guarantee losses disagree with presented notes");
        }
        if a.guarantee_losses > t.ever_pledged {
            return fail("guarantee losses exceed notes ever pledged");
        }
        if a.notes_outstanding > a.program_allocation {
            return fail("notes outstanding exceed program allocation");
        }
        if a.cash.is_negative() {
            return fail("negative cash");
        }
        Ok(())
    }

    /// Recomputes the tallies from the note table and compares them with the
    /// incrementally maintained ones.
    pub fn audit(&self) -> Result<(), Rejection> {
        let mut fresh = NoteTallies {
            ever_pledged: self.tallies.ever_pledged,
            ..NoteTallies::default()
        };
        for note in self.notes.values() {
            let slot = fresh.slot(&note.state);
            slot.count += 1;
            slot.face = add(slot.face, note.face_value)?;
            fresh.total.count += 1;
            fresh.total.face = add(fresh.total.face, note.face_value)?;
        }
        if fresh != self.tallies {
            return Err(Rejection::Conservation("note table disagrees with tallies".into()));
        }
        self.reconcile()
    }
}

/// Rebuilds the state from a complete log.
pub fn replay(events: &[LedgerEvent]) -> Result<LedgerState, LedgerError> {
    let mut state = LedgerState::default();
    for e in events {
        state.apply(e)?;
    }
    Ok(state)
}

/// Append-only log plus its derived state. Single writer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    events: Vec<LedgerEvent>,
    state: LedgerState,
}

impl Ledger {
    pub fn new() -> Ledger {
        Ledger::default()
    }

    pub fn from_events(events: Vec<LedgerEvent>) -> Result<Ledger, LedgerError> {
        let state = replay(&events)?;
        Ok(Ledger { events, state })
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    pub fn state(&self) -> &LedgerState {
        &self.state
    }

    pub fn account(&self) -> FundAccount {
        self.state.account
    }

    pub fn append(&mut self, kind: EventKind) -> Result<&LedgerEvent, LedgerError> {
        let event = LedgerEvent {
            seq: self.state.last_seq + 1,
            kind,
        };
        self.state.apply(&event)?;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    fn rejected(&self, reason: Rejection) -> LedgerError {
        LedgerError::Rejected {
            seq: self.state.last_seq + 1,
            reason,
        }
    }

    pub fn allocate(&mut self, amount: Money) -> Result<FundAccount, LedgerError> {
        self.append(EventKind::Allocate { amount })?;
        Ok(self.account())
    }

    /// Issues `total / denomination` notes. A zero total issues nothing and
    /// records nothing.
    pub fn issue_series(&mut self, total: Money, denomination: Money) -> Result<Vec<VekselNote>, LedgerError> {
        if total.is_zero() {
            return Ok(Vec::new());
        }
        let first_note_id = self.state.next_note_id();
        self.append(EventKind::IssueSeries {
            total,
            denomination,
            first_note_id,
        })?;
        Ok(self
            .state
            .notes
            .range(first_note_id..)
            .map(|(_, n)| n.clone())
            .collect())
    }

    /// Disburses a loan and pledges Issued notes covering its guarantee face
    /// exactly, lowest note id first.
    pub fn pledge(&mut self, loan_id: &str, terms: &LoanTerms) -> Result<PledgeRecord, LedgerError> {
        if !valid_loan_id(loan_id) {
            return Err(self.rejected(Rejection::InvalidTerms(format!("bad loan id {loan_id:?}"))));
        }
        let map = |e: crate::deal::DealError| match e {
            crate::deal::DealError::Money(m) => self.rejected(Rejection::Money(m)),
            other => self.rejected(Rejection::InvalidTerms(other.to_string())),
        };
        terms.validate().map_err(map)?;
        let face = guarantee_face(terms).map_err(map)?;
        let interest = interest_due(terms).map_err(map)?;
        let note_ids = if face.is_zero() {
            Vec::new()
        } else {
            self.select_cover(face)?
        };
        let kind = if note_ids.is_empty() {
            EventKind::Disburse {
                loan_id: loan_id.to_string(),
                principal: terms.principal,
                interest,
            }
        } else {
            EventKind::Pledge {
                loan_id: loan_id.to_string(),
                principal: terms.principal,
                interest,
                note_ids: note_ids.clone(),
            }
        };
        let seq = self.append(kind)?.seq;
        Ok(PledgeRecord {
            seq,
            loan_id: loan_id.to_string(),
            note_ids,
            guarantee_face: face,
            disbursed: terms.principal,
        })
    }

    fn select_cover(&self, needed: Money) -> Result<Vec<NoteId>, LedgerError> {
        let available = self.state.tallies.issued.face;
        if available < needed {
            return Err(self.rejected(Rejection::InsufficientNotes { needed, available }));
        }
        let mut picked = Vec::new();
        let mut sum = Money::ZERO;
        for note in self.state.notes.values().filter(|n| n.state == NoteState::Issued) {
            let next = sum.checked_add(note.face_value).map_err(|e| self.rejected(e.into()))?;
            if next <= needed {
                picked.push(note.note_id);
                sum = next;
                if sum == needed {
                    return Ok(picked);
                }
            }
        }
        Err(self.rejected(Rejection::NoExactCover { needed }))
    }

    /// Closes a loan with the outcome computed by the deal engine.
    pub fn settle(&mut self, loan_id: &str, outcome: &DealOutcome) -> Result<FundAccount, LedgerError> {
        let loan = self
            .state
            .loans
            .get(loan_id)
            .ok_or_else(|| self.rejected(Rejection::UnknownLoan(loan_id.to_string())))?;
        if loan.settled.is_some() {
            return Err(self.rejected(Rejection::AlreadySettled(loan_id.to_string())));
        }
        if loan.principal != outcome.principal || loan.interest != outcome.interest {
            return Err(self.rejected(Rejection::OutcomeMismatch(loan_id.to_string())));
        }
        let kind = match outcome.kind {
            ScenarioKind::FullRepayment => EventKind::Repay {
                loan_id: loan_id.to_string(),
                cash_in: outcome.fund_cash_in,
                interest: outcome.interest,
            },
            ScenarioKind::Default => EventKind::Default {
                loan_id: loan_id.to_string(),
                recovered: outcome.recovered,
            },
        };
        self.append(kind)?;
        Ok(self.account())
    }
}

impl fmt::Display for LedgerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.seq, self.kind.name())?;
        match &self.kind {
            EventKind::Allocate { amount } => write!(f, " {}", amount.minor()),
            EventKind::IssueSeries {
                total,
                denomination,
                first_note_id,
            } => write!(f, " {} {} {}", total.minor(), denomination.minor(), first_note_id),
            EventKind::Disburse {
                loan_id,
                principal,
                interest,
            } => write!(f, " {} {} {}", loan_id, principal.minor(), interest.minor()),
            EventKind::Pledge {
                loan_id,
                principal,
                interest,
                note_ids,
            } => {
                let ids: Vec<String> = note_ids.iter().map(|i| i.to_string()).collect();
                write!(f, " {} {} {} {}", loan_id, principal.minor(), interest.minor(), ids.join(","))
            }
            EventKind::Repay {
                loan_id,
                cash_in,
                interest,
            } => write!(f, " {} {} {}", loan_id, cash_in.minor(), interest.minor()),
            EventKind::Default { loan_id, recovered } => write!(f, " {} {}", loan_id, recovered.minor()),
        }
    }
}

pub fn valid_loan_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | ':' | '/'))
}

impl FromStr for LedgerEvent {
    type Err = String;

    fn from_str(line: &str) -> Result<LedgerEvent, String> {
        let fields: Vec<&str> = line.split(' ').collect();
        let seq: u64 = fields[0].parse().map_err(|_| format!("bad seq {:?}", fields[0]))?;
        let kind_name = *fields.get(1).ok_or("missing event kind")?;
        let args = &fields[2..];
        let want = |n: usize| -> Result<(), String> {
            if args.len() != n {
                Err(format!("{kind_name} takes {n} fields, got {}", args.len()))
            } else {
                Ok(())
            }
        };
        let money = |s: &str| -> Result<Money, String> {
            let v: i64 = s.parse().map_err(|_| format!("bad amount {s:?}"))?;
            Money::from_minor(v).map_err(|e| e.to_string())
        };
        let loan = |s: &str| -> Result<String, String> {
            if valid_loan_id(s) {
                Ok(s.to_string())
            } else {
                Err(format!("bad loan id {s:?}"))
            }
        };
        let kind = match kind_name {
            "Allocate" => {
                want(1)?;
                EventKind::Allocate { amount: money(args[0])? }
            }
            "IssueSeries" => {
                want(3)?;
                EventKind::IssueSeries {
                    total: money(args[0])?,
                    denomination: money(args[1])?,
                    first_note_id: args[2].parse().map_err(|_| format!("bad note id {:?}", args[2]))?,
                }
            }
            "Disburse" => {
                want(3)?;
                EventKind::Disburse {
                    loan_id: loan(args[0])?,
                    principal: money(args[1])?,
                    interest: money(args[2])?,
                }
            }
            "Pledge" => {
                want(4)?;
                let note_ids = args[3]
                    .split(',')
                    .map(|s| s.parse::<NoteId>().map_err(|_| format!("bad note id {s:?}")))
                    .collect::<Result<Vec<_>, _>>()?;
                EventKind::Pledge {
                    loan_id: loan(args[0])?,
                    principal: money(args[1])?,
                    interest: money(args[2])?,
                    note_ids,
                }
            }
            "Repay" => {
                want(3)?;
                EventKind::Repay {
                    loan_id: loan(args[0])?,
                    cash_in: money(args[1])?,
                    interest: money(args[2])?,
                }
            }
            "Default" => {
                want(2)?;
                EventKind::Default {
                    loan_id: loan(args[0])?,
                    recovered: money(args[1])?,
                }
            }
            other => return Err(format!("unknown event kind {other:?}")),
        };
        let event = LedgerEvent { seq, kind };
        if event.to_string() != line {
            return Err("non-canonical rendering".into());
        }
        Ok(event)
    }
}

/// Parses a ledger file. Every line, including the last, must end in `\n`.
pub fn parse_ledger(text: &str) -> Result<Vec<LedgerEvent>, LedgerError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if !text.ends_with('\n') {
        return Err(LedgerError::Parse {
            line: text.lines().count(),
            reason: "missing trailing newline".into(),
        });
    }
    text[..text.len() - 1]
        .split('\n')
        .enumerate()
        .map(|(i, line)| line.parse().map_err(|reason| LedgerError::Parse { line: i + 1, reason }))
        .collect()
}

pub fn serialize_ledger(events: &[LedgerEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deal::{evaluate_outcome, DealScenario};
    use crate::money::{Fraction, Rate};

    fn rub(v: i64) -> Money {
        Money::from_rubles(v).unwrap()
    }

    fn paper_terms() -> LoanTerms {
        LoanTerms::new(rub(500_000), Rate::from_bp(1500), Fraction::from_bp(1000).unwrap()).unwrap()
    }

    fn funded(allocation: i64) -> Ledger {
        let mut l = Ledger::new();
        l.allocate(rub(allocation)).unwrap();
        l
    }

    #[test]
    fn issue_series_examples() {
        let mut l = funded(1_000_000);
        let notes = l.issue_series(rub(50_000), rub(50_000)).unwrap();
        assert_eq!(notes.len(), 1);
        assert_eq!(notes[0].face_value, rub(50_000));
        assert_eq!(notes[0].state, NoteState::Issued);
        assert!(l.issue_series(Money::ZERO, rub(50_000)).unwrap().is_empty());
        let three = l.issue_series(rub(150_000), rub(50_000)).unwrap();
        assert_eq!(three.iter().map(|n| n.note_id).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(l.account().notes_outstanding, rub(200_000));
    }

    #[test]
    fn issue_series_errors() {
        let mut l = funded(100_000);
        let err = l.issue_series(rub(150_000), rub(50_000)).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::OverIssuance { .. }, .. }));
        let err = l.issue_series(rub(70_000), rub(50_000)).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::NonDivisible { .. }, .. }));
        assert_eq!(l.events().len(), 1);
    }

    #[test]
    fn pledge_examples() {
        let mut l = funded(1_000_000);
        l.issue_series(rub(50_000), rub(50_000)).unwrap();
        let rec = l.pledge("L1", &paper_terms()).unwrap();
        assert_eq!(rec.note_ids, vec![1]);
        assert_eq!(l.account().cash, rub(500_000));
        assert_eq!(l.state().notes[&1].state, NoteState::Pledged("L1".into()));

        let plain = LoanTerms::new(rub(100_000), Rate::from_bp(1500), Fraction::ZERO).unwrap();
        let rec = l.pledge("L2", &plain).unwrap();
        assert!(rec.note_ids.is_empty());
        assert_eq!(l.events().last().unwrap().kind.name(), "Disburse");

        let mut l = funded(2_000_000);
        l.issue_series(rub(100_000), rub(50_000)).unwrap();
        let big = LoanTerms::new(rub(1_000_000), Rate::from_bp(1500), Fraction::from_bp(1000).unwrap()).unwrap();
        assert_eq!(l.pledge("L1", &big).unwrap().note_ids, vec![1, 2]);
    }

    #[test]
    fn pledge_errors() {
        let mut l = funded(1_000_000);
        l.issue_series(rub(30_000), rub(30_000)).unwrap();
        let err = l.pledge("L1", &paper_terms()).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::InsufficientNotes { .. }, .. }));

        l.issue_series(rub(30_000), rub(30_000)).unwrap();
        let err = l.pledge("L1", &paper_terms()).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::NoExactCover { .. }, .. }));

        let mut l = funded(100_000);
        l.issue_series(rub(50_000), rub(50_000)).unwrap();
        let err = l.pledge("L1", &paper_terms()).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::InsufficientCash { .. }, .. }));
    }

    #[test]
    fn settle_repayment_and_default() {
        let mut l = funded(1_000_000);
        l.issue_series(rub(100_000), rub(50_000)).unwrap();
        let before = l.state().guarantee_capacity();
        l.pledge("L1", &paper_terms()).unwrap();
        let cash_after_disburse = l.account().cash;
        let repaid = evaluate_outcome(&paper_terms(), &DealScenario::FullRepayment).unwrap();
        let acct = l.settle("L1", &repaid).unwrap();
        assert_eq!(acct.cash.checked_sub(cash_after_disburse).unwrap(), rub(575_000));
        assert_eq!(acct.interest_income, rub(75_000));
        assert_eq!(l.state().notes[&1].state, NoteState::Returned);
        assert_eq!(l.state().guarantee_capacity(), before);

        let err = l.settle("L1", &repaid).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::AlreadySettled(_), .. }));

        l.pledge("L2", &paper_terms()).unwrap();
        let cash = l.account().cash;
        let defaulted = evaluate_outcome(&paper_terms(), &DealScenario::default_with_collateral(rub(525_000))).unwrap();
        let acct = l.settle("L2", &defaulted).unwrap();
        assert_eq!(l.state().notes[&2].state, NoteState::Presented);
        assert_eq!(acct.guarantee_losses, rub(50_000));
        assert_eq!(acct.cash.checked_sub(cash).unwrap(), rub(525_000));
        l.state().audit().unwrap();

        let err = l.settle("L9", &defaulted).unwrap_err();
        assert!(matches!(err, LedgerError::Rejected { reason: Rejection::UnknownLoan(_), .. }));
    }

    #[test]
    fn replay_examples() {
        assert_eq!(replay(&[]).unwrap().account, FundAccount::default());

        let mut l = funded(1_000_000);
        l.issue_series(rub(50_000), rub(50_000)).unwrap();
        l.pledge("L1", &paper_terms()).unwrap();
        let repaid = evaluate_outcome(&paper_terms(), &DealScenario::FullRepayment).unwrap();
        l.settle("L1", &repaid).unwrap();
        assert_eq!(l.events().len(), 4);
        let state = replay(l.events()).unwrap();
        assert_eq!(&state, l.state());
        assert_eq!(state.account.interest_income, rub(75_000));

        let mut gapped = l.events().to_vec();
        gapped.remove(1);
        assert_eq!(replay(&gapped), Err(LedgerError::Gap { expected: 2, found: 3 }));
    }

    #[test]
    fn file_format() {
        let text = "1 Allocate 100000000\n2 IssueSeries 5000000 5000000 1\n3 Pledge L-001 50000000 7500000 1\n4 Repay L-001 57500000 7500000\n";
        let events = parse_ledger(text).unwrap();
        assert_eq!(events.len(), 4);
        assert_eq!(serialize_ledger(&events), text);
        assert_eq!(replay(&events).unwrap().account.interest_income, rub(75_000));

        assert!(parse_ledger("1 Allocate 100\n2 Allocate 0100\n").is_err());
        assert!(parse_ledger("1 Allocate +100\n").is_err());
        assert!(parse_ledger("1  Allocate 100\n").is_err());
        assert!(parse_ledger("1 Allocate 100").is_err());
        assert!(parse_ledger("1 Bogus 100\n").is_err());
        assert!(parse_ledger("1 Pledge L1 10 1 \n").is_err());
        assert_eq!(parse_ledger("").unwrap(), vec![]);
    }

    #[test]
    fn double_settlement_in_file_reports_seq() {
        let text = "1 Allocate 100000000\n2 IssueSeries 5000000 5000000 1\n3 Pledge L-001 50000000 7500000 1\n4 Repay L-001 57500000 7500000\n5 Repay L-001 57500000 7500000\n";
        let err = replay(&parse_ledger(text).unwrap()).unwrap_err();
        assert_eq!(err.seq(), Some(5));
    }
}
