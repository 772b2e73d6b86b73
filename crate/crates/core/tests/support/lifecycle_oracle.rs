//! Exhaustive comparison of the command registry against a literal
//! transition-table model.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, UNIX_EPOCH};

use aas_core::lifecycle::{
    CapabilityCatalog, CommandId, CommandRegistry, CommandState, Details, LifecycleError, ManualClock, Outcome,
};
use aas_core::model::{CapabilityDecl, ParamSpec, ValueType};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum St {
    Pending,
    Executing,
    Success,
    Error,
    Deleted,
}

impl St {
    fn word(self) -> &'static str {
        match self {
            St::Pending => "pending",
            St::Executing => "executing",
            St::Success => "success",
            St::Error => "error",
            St::Deleted => "deleted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Take,
    Succeed,
    Fail,
    Delete,
}

/// The legal transitions, written out by hand.
const TABLE: [(St, Ev, St); 6] = [
    (St::Pending, Ev::Take, St::Executing),
    (St::Executing, Ev::Succeed, St::Success),
    (St::Executing, Ev::Fail, St::Error),
    (St::Pending, Ev::Delete, St::Deleted),
    (St::Success, Ev::Delete, St::Deleted),
    (St::Error, Ev::Delete, St::Deleted),
];

fn step(from: St, ev: Ev) -> Option<St> {
    TABLE.iter().find(|(f, e, _)| *f == from && *e == ev).map(|t| t.2)
}

fn legal_pair(from: &str, to: &str) -> bool {
    TABLE.iter().any(|(f, _, t)| f.word() == from && t.word() == to)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    PushValid,
    PushInvalid,
    TakeNext,
    Complete(u64, bool),
    Delete(u64),
    GetStatus(u64),
    GetOutput(u64),
}

impl Op {
    fn is_push(self) -> bool {
        matches!(self, Op::PushValid | Op::PushInvalid)
    }
}

/// Command slots 1 and 2; slot 3 is never issued within two pushes.
pub const ALPHABET: [Op; 13] = [
    Op::PushValid,
    Op::PushInvalid,
    Op::TakeNext,
    Op::Complete(1, true),
    Op::Complete(1, false),
    Op::Complete(2, true),
    Op::Complete(2, false),
    Op::Delete(1),
    Op::Delete(2),
    Op::GetStatus(1),
    Op::GetStatus(2),
    Op::GetOutput(1),
    Op::GetOutput(2),
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Obs {
    Pushed(u64),
    Taken(Option<u64>),
    Unit(Result<(), String>),
    State(Result<&'static str, String>),
    Output(Result<&'static str, String>),
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Default)]
struct Model {
    last: u64,
    live: BTreeMap<u64, (St, Option<bool>)>,
}

impl Model {
    fn state(&self, id: u64) -> St {
        self.live.get(&id).map_or(St::Deleted, |c| c.0)
    }

    fn apply(&mut self, op: Op) -> Obs {
        match op {
            Op::PushValid | Op::PushInvalid => {
                self.last += 1;
                let entry = if op == Op::PushValid {
                    (St::Pending, None)
                } else {
                    (St::Error, Some(false))
                };
                self.live.insert(self.last, entry);
                Obs::Pushed(self.last)
            }
            Op::TakeNext => {
                let next = self.live.iter().find(|(_, c)| c.0 == St::Pending).map(|(id, _)| *id);
                if let Some(id) = next {
                    self.live.get_mut(&id).unwrap().0 = step(St::Pending, Ev::Take).unwrap();
                }
                Obs::Taken(next)
            }
            Op::Complete(id, ok) => {
                let from = self.state(id);
                match step(from, if ok { Ev::Succeed } else { Ev::Fail }) {
                    Some(to) => {
                        self.live.insert(id, (to, Some(ok)));
                        Obs::Unit(Ok(()))
                    }
                    None => Obs::Unit(Err(format!("IllegalTransition({})", from.word()))),
                }
            }
            Op::Delete(id) => {
                let from = self.state(id);
                if from == St::Deleted {
                    return Obs::State(Ok("deleted"));
                }
                match step(from, Ev::Delete) {
                    Some(_) => {
                        self.live.remove(&id);
                        Obs::State(Ok("deleted"))
                    }
                    None => Obs::State(Err("CannotDeleteExecuting".into())),
                }
            }
            Op::GetStatus(id) => Obs::State(Ok(self.state(id).word())),
            Op::GetOutput(id) => match self.live.get(&id) {
                None => Obs::Output(Err("CommandUnknown".into())),
                Some((_, Some(ok))) => Obs::Output(Ok(if *ok { "success" } else { "error" })),
                Some((st, None)) => Obs::Output(Err(format!("OutputNotAvailable({})", st.word()))),
            },
        }
    }
}

fn catalog() -> CapabilityCatalog {
    CapabilityCatalog::from_decls(&[CapabilityDecl {
        id_short: "goto".into(),
        description: String::new(),
        params: vec![ParamSpec::new("x", ValueType::Decimal)],
    }])
}

fn err_word(e: &LifecycleError) -> String {
    match e {
        LifecycleError::OutputNotAvailable(s) | LifecycleError::IllegalTransition(s) => {
            format!("{}({})", e.code(), s.as_str())
        }
        _ => e.code().to_string(),
    }
}

struct Real {
    reg: CommandRegistry,
    valid: Details,
    ok: Details,
    fail: Details,
}

impl Real {
    fn new(catalog: &CapabilityCatalog) -> Self {
        let clock = Arc::new(ManualClock::new(UNIX_EPOCH + Duration::from_secs(1)));
        let map = |v: serde_json::Value| serde_json::from_value::<Details>(v).unwrap();
        Real {
            reg: CommandRegistry::with_clock(catalog.clone(), clock, None),
            valid: map(json!({"x": 1.0})),
            ok: map(json!({"distanceMeters": 1.0})),
            fail: map(json!({"reason": "blocked"})),
        }
    }

    fn apply(&mut self, op: Op) -> Obs {
        let reg = &self.reg;
        match op {
            Op::PushValid => Obs::Pushed(reg.push("goto", self.valid.clone()).counter()),
            Op::PushInvalid => Obs::Pushed(reg.push("fly", Details::new()).counter()),
            Op::TakeNext => Obs::Taken(reg.take_next().map(|c| c.id.counter())),
            Op::Complete(id, ok) => {
                let (outcome, details) = if ok {
                    (Outcome::Success, self.ok.clone())
                } else {
                    (Outcome::Error, self.fail.clone())
                };
                Obs::Unit(reg.complete(CommandId::new(id), outcome, details).map_err(|e| err_word(&e)))
            }
            Op::Delete(id) => Obs::State(
                reg.delete(CommandId::new(id))
                    .map(CommandState::as_str)
                    .map_err(|e| err_word(&e)),
            ),
            Op::GetStatus(id) => Obs::State(Ok(reg.get_status(CommandId::new(id)).as_str())),
            Op::GetOutput(id) => Obs::Output(
                reg.get_output(CommandId::new(id))
                    .map(|r| r.outcome.as_str())
                    .map_err(|e| err_word(&e)),
            ),
        }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub sequences: u64,
    pub divergences: u64,
    pub first_divergence: Option<String>,
}

fn run_one(seq: &[Op], catalog: &CapabilityCatalog) -> Option<String> {
    let mut model = Model::default();
    let mut real = Real::new(catalog);
    for (i, op) in seq.iter().enumerate() {
        let expected = model.apply(*op);
        let actual = real.apply(*op);
        if expected != actual {
            return Some(format!("{seq:?} step {i}: expected {expected}, got {actual}"));
        }
        for id in 1..=3 {
            let want = model.state(id).word();
            let got = real.reg.get_status(CommandId::new(id)).as_str();
            if want != got {
                return Some(format!("{seq:?} step {i}: id {id} expected {want}, got {got}"));
            }
        }
    }
    for t in real.reg.transitions() {
        let ok = match t.from {
            None => matches!(t.to, CommandState::Pending | CommandState::Error),
            Some(from) => legal_pair(from.as_str(), t.to.as_str()),
        };
        if !ok {
            return Some(format!("{seq:?}: illegal transition {t:?}"));
        }
    }
    None
}

/// Runs every sequence of exactly `len` operations containing at most two
/// pushes. Shorter sequences are prefixes of these and are checked step by step.
pub fn exhaustive(len: usize) -> Report {
    let catalog = catalog();
    let mut report = Report::default();
    let mut seq = Vec::with_capacity(len);
    fn rec(seq: &mut Vec<Op>, len: usize, pushes: usize, catalog: &CapabilityCatalog, report: &mut Report) {
        if seq.len() == len {
            report.sequences += 1;
            if let Some(d) = run_one(seq, catalog) {
                report.divergences += 1;
                report.first_divergence.get_or_insert(d);
            }
            return;
        }
        for op in ALPHABET {
            let p = pushes + usize::from(op.is_push());
            if p > 2 {
                continue;
            }
            seq.push(op);
            rec(seq, len, p, catalog, report);
            seq.pop();
        }
    }
    rec(&mut seq, len, 0, &catalog, &mut report);
    report
}

/// Number of sequences `exhaustive(len)` visits, counted combinatorially.
pub fn expected_sequence_count(len: usize) -> u64 {
    let binom = |n: u64, k: u64| (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1));
    (0..=2u64.min(len as u64))
        .map(|k| binom(len as u64, k) * 2u64.pow(k as u32) * 11u64.pow((len as u64 - k) as u32))
        .sum()
}
