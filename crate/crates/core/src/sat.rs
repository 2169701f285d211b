//! A small CDCL SAT solver: two watched literals, first-UIP learning,
//! activity-based branching with phase saving, Luby restarts and solving under
//! assumptions. Used to decide bounded-model questions.

use std::ops::Not;

use crate::budget::Budget;
use crate::error::Result;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, negative: bool) -> Lit {
        Lit(var << 1 | negative as u32)
    }
    pub fn pos(var: u32) -> Lit {
        Lit::new(var, false)
    }
    pub fn neg(var: u32) -> Lit {
        Lit::new(var, true)
    }
    pub fn var(self) -> u32 {
        self.0 >> 1
    }
    pub fn is_negative(self) -> bool {
        self.0 & 1 == 1
    }
    fn index(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

struct Clause {
    lits: Vec<Lit>,
}

#[derive(Default)]
pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<u32>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    heap: Vec<u32>,
    heap_pos: Vec<usize>,
    polarity: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    model: Vec<bool>,
    conflicts: u64,
}

const NO_REASON: u32 = u32::MAX;
const NOT_IN_HEAP: usize = usize::MAX;

fn luby(mut x: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            var_inc: 1.0,
            ok: true,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn new_var(&mut self) -> u32 {
        let v = self.assigns.len() as u32;
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(NO_REASON);
        self.activity.push(0.0);
        self.polarity.push(true);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap_pos.push(NOT_IN_HEAP);
        self.heap_insert(v);
        v
    }

    fn lit_value(&self, l: Lit) -> i8 {
        let a = self.assigns[l.var() as usize];
        if l.is_negative() {
            -a
        } else {
            a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Add a clause at decision level 0. Returns false once the formula is
    /// known to be unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut ls: Vec<Lit> = lits.to_vec();
        ls.sort();
        ls.dedup();
        for w in ls.windows(2) {
            if w[0] == !w[1] {
                return true;
            }
        }
        let mut kept = Vec::with_capacity(ls.len());
        for l in ls {
            match self.lit_value(l) {
                TRUE => return true,
                FALSE => {}
                _ => kept.push(l),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(kept[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(kept);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> u32 {
        let ci = self.clauses.len() as u32;
        self.watches[lits[0].index()].push(ci);
        self.watches[lits[1].index()].push(ci);
        self.clauses.push(Clause { lits });
        ci
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = l.var() as usize;
        self.assigns[v] = if l.is_negative() { FALSE } else { TRUE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns a conflicting clause if any.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.index()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let lits = &mut self.clauses[ci as usize].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let first_val = {
                    let a = self.assigns[first.var() as usize];
                    if first.is_negative() {
                        -a
                    } else {
                        a
                    }
                };
                if first_val == TRUE {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    let l = lits[k];
                    let a = self.assigns[l.var() as usize];
                    let val = if l.is_negative() { -a } else { a };
                    if val != FALSE {
                        lits.swap(1, k);
                        let new_watch = lits[1];
                        self.watches[new_watch.index()].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                if first_val == FALSE {
                    conflict = Some(ci);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, ci);
                }
            }
            ws.truncate(j);
            // Watches added to this list during the loop belong to other literals,
            // so the taken list can be restored directly.
            let slot = &mut self.watches[false_lit.index()];
            if slot.is_empty() {
                *slot = ws;
            } else {
                slot.extend(ws);
            }
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit(0)];
        let mut path = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level();
        loop {
            let lits = self.clauses[confl as usize].lits.clone();
            let start = if p.is_some() { 1 } else { 0 };
            for &q in &lits[start..] {
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump(q.var());
                    self.seen[v] = true;
                    if self.level[v] >= dl {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[pl.var() as usize] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[pl.var() as usize];
        }
        learnt[0] = !p.expect("uip");
        // Clause minimization: drop literals implied by others in the clause.
        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                i == 0 || {
                    let r = self.reason[l.var() as usize];
                    r == NO_REASON
                        || self.clauses[r as usize].lits[1..].iter().any(|q| {
                            let v = q.var() as usize;
                            !self.seen[v] && self.level[v] > 0
                        })
                }
            })
            .collect();
        for l in &learnt {
            self.seen[l.var() as usize] = false;
        }
        let mut out: Vec<Lit> = learnt
            .into_iter()
            .zip(keep)
            .filter_map(|(l, k)| k.then_some(l))
            .collect();
        let bt = if out.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..out.len() {
                if self.level[out[i].var() as usize] > self.level[out[max_i].var() as usize] {
                    max_i = i;
                }
            }
            out.swap(1, max_i);
            self.level[out[1].var() as usize]
        };
        (out, bt)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() > lvl {
            let lim = self.trail_lim[lvl as usize];
            for i in (lim..self.trail.len()).rev() {
                let v = self.trail[i].var();
                self.assigns[v as usize] = UNDEF;
                self.reason[v as usize] = NO_REASON;
                self.polarity[v as usize] = self.trail[i].is_negative();
                if self.heap_pos[v as usize] == NOT_IN_HEAP {
                    self.heap_insert(v);
                }
            }
            self.trail.truncate(lim);
            self.trail_lim.truncate(lvl as usize);
            self.qhead = lim;
        }
    }

    fn bump(&mut self, v: u32) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        let pos = self.heap_pos[v as usize];
        if pos != NOT_IN_HEAP {
            self.sift_up(pos);
        }
    }

    fn heap_less(&self, a: u32, b: u32) -> bool {
        let (x, y) = (self.activity[a as usize], self.activity[b as usize]);
        x > y || (x == y && a < b)
    }

    fn heap_insert(&mut self, v: u32) {
        self.heap_pos[v as usize] = self.heap.len();
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1);
    }

    fn sift_up(&mut self, mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.heap_less(v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.heap_pos[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.heap_pos[v as usize] = i;
    }

    fn heap_pop(&mut self) -> Option<u32> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0];
        let last = self.heap.pop().expect("non-empty");
        self.heap_pos[top as usize] = NOT_IN_HEAP;
        if !self.heap.is_empty() {
            let mut i = 0;
            let n = self.heap.len();
            loop {
                let l = 2 * i + 1;
                if l >= n {
                    break;
                }
                let r = l + 1;
                let c = if r < n && self.heap_less(self.heap[r], self.heap[l]) { r } else { l };
                if !self.heap_less(self.heap[c], last) {
                    break;
                }
                self.heap[i] = self.heap[c];
                self.heap_pos[self.heap[i] as usize] = i;
                i = c;
            }
            self.heap[i] = last;
            self.heap_pos[last as usize] = i;
        }
        Some(top)
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap_pop() {
            if self.assigns[v as usize] == UNDEF {
                return Some(Lit::new(v, self.polarity[v as usize]));
            }
        }
        None
    }

    /// Solve under assumptions. `Ok(true)` leaves a model readable through
    /// [`Solver::model_value`].
    pub fn solve(&mut self, assumptions: &[Lit], budget: &Budget) -> Result<bool> {
        if !self.ok {
            return Ok(false);
        }
        self.cancel_until(0);
        if self.propagate().is_some() {
            self.ok = false;
            return Ok(false);
        }
        let mut restart = 0u64;
        loop {
            let limit = luby(restart) * 100;
            restart += 1;
            match self.search(limit, assumptions, budget)? {
                Some(r) => {
                    if r {
                        self.model = self.assigns.iter().map(|&a| a == TRUE).collect();
                    }
                    self.cancel_until(0);
                    return Ok(r);
                }
                None => self.cancel_until(0),
            }
        }
    }

    fn search(&mut self, limit: u64, assumptions: &[Lit], budget: &Budget) -> Result<Option<bool>> {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if self.conflicts % 256 == 0 {
                    budget.check_time()?;
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(Some(false));
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let ci = self.attach(learnt);
                    self.enqueue(first, ci);
                }
                self.var_inc *= 1.0 / 0.95;
            } else {
                if local >= limit {
                    return Ok(None);
                }
                let dl = self.decision_level() as usize;
                let next = if dl < assumptions.len() {
                    let a = assumptions[dl];
                    match self.lit_value(a) {
                        TRUE => {
                            self.trail_lim.push(self.trail.len());
                            continue;
                        }
                        FALSE => return Ok(Some(false)),
                        _ => a,
                    }
                } else {
                    match self.pick_branch() {
                        Some(l) => l,
                        None => return Ok(Some(true)),
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, NO_REASON);
            }
        }
    }

    /// Value of a variable in the last model found.
    pub fn model_value(&self, v: u32) -> bool {
        self.model.get(v as usize).copied().unwrap_or(false)
    }

    /// Whether the clause set is already known to be unsatisfiable.
    pub fn is_unsat(&self) -> bool {
        !self.ok
    }
}
