// SPDX-License-Identifier: Apache-2.0

//! A small CDCL SAT solver and Tseitin encoding of AIG cones.
//!
//! Two watched literals, VSIDS with phase saving, Luby restarts, learnt
//! clause reduction by activity. `solve` takes assumptions and an optional
//! conflict budget; running out of budget yields [`SolveResult::Unknown`].

use std::ops::Not;

use crate::netlist::{Aig, Lit as AigLit, Node};

pub type Var = u32;

/// Default conflict budget per SAT query.
pub const DEFAULT_CONFLICT_BUDGET: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, neg: bool) -> Lit {
        Lit(v << 1 | neg as u32)
    }

    pub fn pos(v: Var) -> Lit {
        Lit::new(v, false)
    }

    pub fn var(self) -> Var {
        self.0 >> 1
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    fn idx(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
    Unknown,
}

const UNDEF: u8 = 2;

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

#[derive(Default)]
struct Heap {
    heap: Vec<Var>,
    pos: Vec<Option<usize>>,
}

impl Heap {
    fn contains(&self, v: Var) -> bool {
        self.pos.get(v as usize).is_some_and(|p| p.is_some())
    }

    fn insert(&mut self, v: Var, act: &[f64]) {
        if self.pos.len() <= v as usize {
            self.pos.resize(v as usize + 1, None);
        }
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        self.pos[v as usize] = Some(self.heap.len() - 1);
        self.up(self.heap.len() - 1, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<Var> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap.swap_remove(0);
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.pos[self.heap[0] as usize] = Some(0);
            self.down(0, act);
        }
        Some(top)
    }

    fn bumped(&mut self, v: Var, act: &[f64]) {
        if let Some(Some(p)) = self.pos.get(v as usize) {
            self.up(*p, act);
        }
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[i] as usize] <= act[self.heap[parent] as usize] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut best = i;
            if l < self.heap.len() && act[self.heap[l] as usize] > act[self.heap[best] as usize] {
                best = l;
            }
            if r < self.heap.len() && act[self.heap[r] as usize] > act[self.heap[best] as usize] {
                best = r;
            }
            if best == i {
                return;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a] as usize] = Some(a);
        self.pos[self.heap[b] as usize] = Some(b);
    }
}

pub struct Solver {
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watch>>,
    values: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    heap: Heap,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    var_inc: f64,
    cla_inc: f64,
    ok: bool,
    model: Vec<bool>,
    conflicts: u64,
    num_learnts: usize,
    const_true: Option<Lit>,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

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
    1 << seq
}

enum Search {
    Sat,
    Unsat,
    Restart,
    Budget,
}

impl Solver {
    pub fn new() -> Self {
        Self {
            clauses: Vec::new(),
            watches: Vec::new(),
            values: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            heap: Heap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            var_inc: 1.0,
            cla_inc: 1.0,
            ok: true,
            model: Vec::new(),
            conflicts: 0,
            num_learnts: 0,
            const_true: None,
        }
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.values.len() as Var;
        self.values.push(UNDEF);
        self.level.push(0);
        self.reason.push(None);
        self.phase.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.insert(v, &self.activity);
        v
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len() - self.num_learnts
    }

    /// Total conflicts over the solver's lifetime.
    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    /// A literal fixed to true.
    pub fn const_true(&mut self) -> Lit {
        if let Some(l) = self.const_true {
            return l;
        }
        let l = Lit::pos(self.new_var());
        self.add_clause(&[l]);
        self.const_true = Some(l);
        l
    }

    fn value(&self, l: Lit) -> Option<bool> {
        match self.values[l.var() as usize] {
            UNDEF => None,
            v => Some((v == 1) ^ l.is_neg()),
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a clause; returns false once the formula is known unsatisfiable.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.cancel_until(0);
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == !w[1]) {
            return true;
        }
        if c.iter().any(|l| self.value(*l) == Some(true)) {
            return true;
        }
        c.retain(|l| self.value(*l) != Some(false));
        match c.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(c[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach(c, false);
            }
        }
        self.ok
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[lits[0].idx()].push(Watch { cref, blocker: lits[1] });
        self.watches[lits[1].idx()].push(Watch { cref, blocker: lits[0] });
        self.clauses.push(Clause {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.num_learnts += 1;
        }
        cref
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        let v = l.var() as usize;
        self.values[v] = !l.is_neg() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let fl = !p;
            let mut ws = std::mem::take(&mut self.watches[fl.idx()]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let values = &self.values;
                let val = |l: Lit| match values[l.var() as usize] {
                    UNDEF => None,
                    v => Some((v == 1) ^ l.is_neg()),
                };
                let c = &mut self.clauses[w.cref as usize];
                if c.deleted {
                    continue;
                }
                if c.lits[0] == fl {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                if first != w.blocker && val(first) == Some(true) {
                    ws[j] = Watch { cref: w.cref, blocker: first };
                    j += 1;
                    continue;
                }
                let mut moved = None;
                for k in 2..c.lits.len() {
                    if val(c.lits[k]) != Some(false) {
                        c.lits.swap(1, k);
                        moved = Some(c.lits[1]);
                        break;
                    }
                }
                if let Some(nl) = moved {
                    self.watches[nl.idx()].push(Watch { cref: w.cref, blocker: first });
                    continue;
                }
                ws[j] = w;
                j += 1;
                if val(first) == Some(false) {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            self.watches[fl.idx()] = ws;
        }
        if conflict.is_some() {
            self.qhead = self.trail.len();
        }
        conflict
    }

    fn bump_var(&mut self, v: Var) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in &mut self.clauses {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit(0)];
        let mut pathc = 0;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let dl = self.decision_level() as u32;
        loop {
            self.bump_clause(confl);
            let lits = self.clauses[confl as usize].lits.clone();
            for (k, q) in lits.iter().enumerate() {
                if p.is_some() && k == 0 {
                    continue;
                }
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(q.var());
                    if self.level[v] >= dl {
                        pathc += 1;
                    } else {
                        learnt.push(*q);
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
            pathc -= 1;
            if pathc == 0 {
                break;
            }
            confl = self.reason[pl.var() as usize].expect("implied literal has a reason");
        }
        learnt[0] = !p.expect("at least one literal");

        // Drop literals implied by the rest of the clause.
        let marked: Vec<Lit> = learnt[1..].to_vec();
        let mut keep = vec![learnt[0]];
        for &q in &marked {
            let redundant = match self.reason[q.var() as usize] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..]
                    .iter()
                    .all(|x| self.seen[x.var() as usize] || self.level[x.var() as usize] == 0),
            };
            if !redundant {
                keep.push(q);
            }
        }
        for q in &marked {
            self.seen[q.var() as usize] = false;
        }
        let mut learnt = keep;
        let mut bt = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[max_i].var() as usize] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            bt = self.level[learnt[1].var() as usize] as usize;
        }
        (learnt, bt)
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var() as usize;
            self.values[v] = UNDEF;
            self.reason[v] = None;
            self.phase[v] = !l.is_neg();
            self.heap.insert(l.var(), &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl);
        self.qhead = start;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.values[v as usize] == UNDEF {
                return Some(Lit::new(v, !self.phase[v as usize]));
            }
        }
        None
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<u32> = (0..self.clauses.len() as u32)
            .filter(|&i| {
                let c = &self.clauses[i as usize];
                if !c.learnt || c.deleted || c.lits.len() <= 2 {
                    return false;
                }
                let l0 = c.lits[0];
                let locked = self.reason[l0.var() as usize] == Some(i) && self.value(l0) == Some(true);
                !locked
            })
            .collect();
        cands.sort_by(|a, b| {
            self.clauses[*a as usize]
                .activity
                .total_cmp(&self.clauses[*b as usize].activity)
        });
        for &i in &cands[..cands.len() / 2] {
            let c = &mut self.clauses[i as usize];
            c.deleted = true;
            c.lits = Vec::new();
            self.num_learnts -= 1;
        }
    }

    fn search(&mut self, nof_conflicts: u64, assumptions: &[Lit], budget: &mut Option<u64>, max_learnts: f64) -> Search {
        let mut local = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                local += 1;
                if let Some(b) = budget.as_mut() {
                    *b = b.saturating_sub(1);
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Search::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let l0 = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(l0, Some(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
            } else {
                if *budget == Some(0) {
                    return Search::Budget;
                }
                if local >= nof_conflicts {
                    self.cancel_until(0);
                    return Search::Restart;
                }
                if self.num_learnts as f64 - self.trail.len() as f64 >= max_learnts {
                    self.reduce_db();
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let p = assumptions[self.decision_level()];
                    match self.value(p) {
                        Some(true) => self.trail_lim.push(self.trail.len()),
                        Some(false) => return Search::Unsat,
                        None => {
                            next = Some(p);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(p) => p,
                    None => match self.pick_branch() {
                        Some(p) => p,
                        None => return Search::Sat,
                    },
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
        }
    }

    /// Solves under `assumptions`, giving up after `budget` conflicts.
    pub fn solve(&mut self, assumptions: &[Lit], budget: Option<u64>) -> SolveResult {
        if !self.ok {
            return SolveResult::Unsat;
        }
        self.cancel_until(0);
        let mut budget = budget;
        let mut max_learnts = (self.num_clauses() as f64 / 3.0).max(2000.0);
        let mut restart = 0u64;
        let result = loop {
            let n = luby(restart) * 100;
            match self.search(n, assumptions, &mut budget, max_learnts) {
                Search::Sat => {
                    self.model = self.values.iter().map(|v| *v == 1).collect();
                    break SolveResult::Sat;
                }
                Search::Unsat => break SolveResult::Unsat,
                Search::Budget => break SolveResult::Unknown,
                Search::Restart => {
                    restart += 1;
                    max_learnts *= 1.05;
                }
            }
        };
        self.cancel_until(0);
        result
    }

    /// Value of `v` in the last satisfying assignment.
    pub fn model_value(&self, v: Var) -> bool {
        self.model.get(v as usize).copied().unwrap_or(false)
    }

    pub fn model_lit(&self, l: Lit) -> bool {
        self.model_value(l.var()) ^ l.is_neg()
    }
}

/// Tseitin encoding of AIG cones into a solver.
///
/// `map[v]` caches the solver literal of AIG variable `v`; `leaf` supplies
/// literals for inputs and latches.
pub struct AigEncoder {
    map: Vec<Option<Lit>>,
}

impl AigEncoder {
    pub fn new(aig: &Aig) -> Self {
        Self {
            map: vec![None; aig.len()],
        }
    }

    /// Pre-binds AIG variable `v` (an input or latch) to `l`.
    pub fn bind(&mut self, v: u32, l: Lit) {
        self.map[v as usize] = Some(l);
    }

    pub fn encode(
        &mut self,
        solver: &mut Solver,
        aig: &Aig,
        root: AigLit,
        leaf: &mut dyn FnMut(&mut Solver, u32, &Node) -> Lit,
    ) -> Lit {
        let mut stack = vec![(root.var(), false)];
        while let Some((v, expanded)) = stack.pop() {
            if self.map[v as usize].is_some() {
                continue;
            }
            let node = aig.node(v);
            match node {
                Node::Const => {
                    let t = solver.const_true();
                    self.map[v as usize] = Some(!t);
                }
                Node::And(a, b) => {
                    if expanded {
                        let la = self.get(a);
                        let lb = self.get(b);
                        let o = Lit::pos(solver.new_var());
                        solver.add_clause(&[!o, la]);
                        solver.add_clause(&[!o, lb]);
                        solver.add_clause(&[o, !la, !lb]);
                        self.map[v as usize] = Some(o);
                    } else {
                        stack.push((v, true));
                        stack.push((b.var(), false));
                        stack.push((a.var(), false));
                    }
                }
                _ => {
                    let l = leaf(solver, v, &node);
                    self.map[v as usize] = Some(l);
                }
            }
        }
        self.get(root)
    }

    fn get(&self, l: AigLit) -> Lit {
        let s = self.map[l.var() as usize].expect("encoded");
        if l.is_neg() {
            !s
        } else {
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lit(x: i32) -> Lit {
        Lit::new(x.unsigned_abs() - 1, x < 0)
    }

    fn solver_with(n: u32, clauses: &[Vec<i32>]) -> Solver {
        let mut s = Solver::new();
        for _ in 0..n {
            s.new_var();
        }
        for c in clauses {
            let ls: Vec<Lit> = c.iter().map(|x| lit(*x)).collect();
            s.add_clause(&ls);
        }
        s
    }

    #[test]
    fn trivial_instances() {
        let mut s = solver_with(1, &[vec![1], vec![-1]]);
        assert_eq!(s.solve(&[], None), SolveResult::Unsat);
        let mut s = solver_with(2, &[vec![1, 2], vec![-1]]);
        assert_eq!(s.solve(&[], None), SolveResult::Sat);
        assert!(s.model_value(1));
        assert!(!s.model_value(0));
    }

    #[test]
    fn assumptions_do_not_stick() {
        let mut s = solver_with(2, &[vec![1, 2]]);
        assert_eq!(s.solve(&[lit(-1), lit(-2)], None), SolveResult::Unsat);
        assert_eq!(s.solve(&[lit(-1)], None), SolveResult::Sat);
        assert!(s.model_value(1));
        assert_eq!(s.solve(&[], None), SolveResult::Sat);
    }

    fn brute(n: u32, clauses: &[Vec<i32>]) -> bool {
        (0u32..1 << n).any(|m| {
            clauses
                .iter()
                .all(|c| c.iter().any(|x| ((m >> (x.unsigned_abs() - 1)) & 1 == 1) == (*x > 0)))
        })
    }

    #[test]
    fn random_3cnf_matches_brute_force() {
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 12;
            let m = rng.gen_range(30..70);
            let clauses: Vec<Vec<i32>> = (0..m)
                .map(|_| {
                    (0..3)
                        .map(|_| {
                            let v = rng.gen_range(1..=n as i32);
                            if rng.gen() {
                                v
                            } else {
                                -v
                            }
                        })
                        .collect()
                })
                .collect();
            let mut s = solver_with(n, &clauses);
            let r = s.solve(&[], None);
            let expect = brute(n, &clauses);
            assert_eq!(r == SolveResult::Sat, expect, "seed {seed}");
            if expect {
                for c in &clauses {
                    assert!(c.iter().any(|x| s.model_lit(lit(*x))), "seed {seed}: model violates a clause");
                }
            }
        }
    }

    fn pigeonhole(p: i32, h: i32) -> (u32, Vec<Vec<i32>>) {
        let var = |i: i32, j: i32| i * h + j + 1;
        let mut cs = Vec::new();
        for i in 0..p {
            cs.push((0..h).map(|j| var(i, j)).collect());
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    cs.push(vec![-var(a, j), -var(b, j)]);
                }
            }
        }
        ((p * h) as u32, cs)
    }

    #[test]
    fn budget_yields_unknown() {
        let (n, cs) = pigeonhole(9, 8);
        let mut s = solver_with(n, &cs);
        assert_eq!(s.solve(&[], Some(10)), SolveResult::Unknown);
        let (n, cs) = pigeonhole(6, 5);
        let mut s = solver_with(n, &cs);
        assert_eq!(s.solve(&[], None), SolveResult::Unsat);
    }

    #[test]
    fn luby_sequence() {
        let v: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(v, [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn aig_encoding_respects_and_semantics() {
        let mut g = Aig::new();
        let a = g.add_source(Node::Input(0));
        let b = g.add_source(Node::Input(1));
        let x = g.xor(a, b);
        let mut s = Solver::new();
        let mut enc = AigEncoder::new(&g);
        let out = enc.encode(&mut s, &g, x, &mut |s, _, _| Lit::pos(s.new_var()));
        let la = enc.get(a);
        let lb = enc.get(b);
        for (va, vb) in [(false, false), (false, true), (true, false), (true, true)] {
            let asm = [Lit::new(la.var(), !va), Lit::new(lb.var(), !vb)];
            assert_eq!(s.solve(&asm, None), SolveResult::Sat);
            assert_eq!(s.model_lit(out), va ^ vb);
        }
    }
}
