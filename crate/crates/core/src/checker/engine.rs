use std::collections::HashMap;

use indexmap::IndexMap;

use super::{initial_values, CheckError, EdgeRef, InitialValues, Trace, TraceStep};
use crate::model::{BinOp, ContextInfo};
use crate::tagen::apply;
use crate::tagen::{Bindings, Network, SyncDir, TaExpr};

/// Configuration of the whole network. Locations are indices into each
/// process's template, clocks are global indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkState {
    pub locations: Vec<usize>,
    pub clocks: Vec<i64>,
    pub vars: Vec<i64>,
    pub fields: Vec<i64>,
}

#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Const(i64),
    Var(usize),
    Clock(usize),
    Field(usize),
    At(usize, usize),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub(crate) fn eval(&self, s: &NetworkState) -> Result<i64, String> {
        match self {
            CExpr::Const(c) => Ok(*c),
            CExpr::Var(i) => Ok(s.vars[*i]),
            CExpr::Clock(i) => Ok(s.clocks[*i]),
            CExpr::Field(i) => Ok(s.fields[*i]),
            CExpr::At(p, l) => Ok((s.locations[*p] == *l) as i64),
            CExpr::Not(e) => Ok((e.eval(s)? == 0) as i64),
            CExpr::Bin(op, l, r) => {
                let a = l.eval(s)?;
                match op {
                    BinOp::And if a == 0 => return Ok(0),
                    BinOp::Or if a != 0 => return Ok(1),
                    BinOp::Implies if a == 0 => return Ok(1),
                    _ => {}
                }
                apply(*op, a, r.eval(s)?)
            }
        }
    }

    fn reads_clock(&self) -> bool {
        match self {
            CExpr::Clock(_) => true,
            CExpr::Not(e) => e.reads_clock(),
            CExpr::Bin(_, l, r) => l.reads_clock() || r.reads_clock(),
            _ => false,
        }
    }

    fn clocks(&self, out: &mut Vec<usize>) {
        match self {
            CExpr::Clock(c) => out.push(*c),
            CExpr::Not(e) => e.clocks(out),
            CExpr::Bin(_, l, r) => {
                l.clocks(out);
                r.clocks(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Target {
    Var(usize),
    Clock(usize),
}

#[derive(Debug, Clone)]
struct CEdge {
    source: usize,
    target: usize,
    guard: Vec<CExpr>,
    sync: Option<(usize, SyncDir)>,
    updates: Vec<(Target, CExpr)>,
    label: String,
}

#[derive(Debug, Clone)]
struct CLocation {
    committed: bool,
    invariant: Option<(usize, i64)>,
}

#[derive(Debug, Clone)]
struct Process {
    locations: Vec<CLocation>,
    initial: usize,
    edges: Vec<CEdge>,
    /// Edge indices grouped by source location.
    outgoing: Vec<Vec<usize>>,
    /// Clocks of this process that may be read before being reset, per location.
    live: Vec<Vec<usize>>,
    clocks: Vec<usize>,
}

/// Internal transition label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Delay,
    Fire((usize, usize), Option<(usize, usize)>),
}

/// A network compiled for exploration. Immutable and shareable between
/// threads.
#[derive(Debug, Clone)]
pub struct Checker {
    processes: Vec<Process>,
    instances: Vec<String>,
    location_names: Vec<Vec<String>>,
    vars: IndexMap<String, usize>,
    bool_vars: Vec<bool>,
    consts: HashMap<String, i64>,
    fields: IndexMap<String, usize>,
    /// `(process, name)` of each clock.
    clock_names: Vec<(usize, String)>,
    cap: i64,
    reduce_clocks: bool,
}

impl Checker {
    pub fn new(net: &Network) -> Result<Self, CheckError> {
        let vars: IndexMap<String, usize> =
            net.decls.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        let bool_vars = net.decls.vars.iter().map(|v| v.is_bool()).collect();
        let consts = net.decls.consts.iter().map(|c| (c.name.clone(), c.value)).collect();
        let fields = net.decls.requester.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();
        let channels: HashMap<&str, usize> =
            net.decls.channels.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

        let mut c = Checker {
            processes: Vec::new(),
            instances: Vec::new(),
            location_names: Vec::new(),
            vars,
            bool_vars,
            consts,
            fields,
            clock_names: Vec::new(),
            cap: net.max_clock_constant() + 1,
            reduce_clocks: true,
        };
        for (inst, tname) in &net.system {
            let t = net
                .template(tname)
                .ok_or_else(|| CheckError::UnknownReference(tname.clone()))?;
            let p = c.processes.len();
            let local: HashMap<&str, usize> = t
                .clocks
                .iter()
                .map(|name| {
                    c.clock_names.push((p, name.clone()));
                    (name.as_str(), c.clock_names.len() - 1)
                })
                .collect();
            let loc_index: HashMap<&str, usize> =
                t.locations.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();
            let loc = |id: &str| {
                loc_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| CheckError::UnknownReference(format!("{inst}.{id}")))
            };
            let clock = |name: &str| {
                local
                    .get(name)
                    .copied()
                    .ok_or_else(|| CheckError::UnknownReference(format!("{inst}.{name}")))
            };

            let mut locations = Vec::new();
            for l in &t.locations {
                let invariant = match &l.invariant {
                    Some(b) => Some((clock(&b.clock)?, b.bound)),
                    None => None,
                };
                locations.push(CLocation {
                    committed: l.committed,
                    invariant,
                });
            }
            let mut edges = Vec::new();
            let mut outgoing = vec![Vec::new(); locations.len()];
            for e in &t.edges {
                let source = loc(&e.source)?;
                let guard = e
                    .guard
                    .0
                    .iter()
                    .map(|g| c.compile_in(g, &local))
                    .collect::<Result<_, _>>()?;
                let sync = match &e.sync {
                    Some(s) => Some((
                        *channels
                            .get(s.channel.as_str())
                            .ok_or_else(|| CheckError::UnknownReference(s.channel.clone()))?,
                        s.dir,
                    )),
                    None => None,
                };
                let mut updates = Vec::new();
                for u in &e.updates {
                    let target = match (local.get(u.target.as_str()), c.vars.get(&u.target)) {
                        (Some(&k), _) => Target::Clock(k),
                        (None, Some(&v)) => Target::Var(v),
                        _ => return Err(CheckError::UnknownReference(u.target.clone())),
                    };
                    updates.push((target, c.compile_in(&u.value, &local)?));
                }
                outgoing[source].push(edges.len());
                edges.push(CEdge {
                    source,
                    target: loc(&e.target)?,
                    guard,
                    sync,
                    updates,
                    label: match &e.sync {
                        Some(sy) => format!("{inst}: {} -> {} ({sy})", e.source, e.target),
                        None => format!("{inst}: {} -> {}", e.source, e.target),
                    },
                });
            }
            let clocks: Vec<usize> = t.clocks.iter().map(|n| local[n.as_str()]).collect();
            let mut proc = Process {
                initial: loc(&t.initial)?,
                locations,
                edges,
                outgoing,
                live: Vec::new(),
                clocks,
            };
            proc.live = liveness(&proc);
            c.processes.push(proc);
            c.instances.push(inst.clone());
            c.location_names.push(t.locations.iter().map(|l| l.id.clone()).collect());
        }
        Ok(c)
    }

    /// Turns the reset of dead clocks on or off. With it on, clocks that
    /// cannot be read before their next reset are kept at zero.
    pub fn with_clock_reduction(mut self, on: bool) -> Self {
        self.reduce_clocks = on;
        self
    }

    pub fn instances(&self) -> &[String] {
        &self.instances
    }

    pub fn location_name(&self, process: usize, location: usize) -> &str {
        &self.location_names[process][location]
    }

    pub fn clock_cap(&self) -> i64 {
        self.cap
    }

    fn compile_in(&self, e: &TaExpr, clocks: &HashMap<&str, usize>) -> Result<CExpr, CheckError> {
        let bad = |n: String| CheckError::UnknownReference(n);
        Ok(match e {
            TaExpr::Bool(b) => CExpr::Const(*b as i64),
            TaExpr::Int(i) => CExpr::Const(*i),
            TaExpr::Var(n) => {
                if let Some(&k) = clocks.get(n.as_str()) {
                    CExpr::Clock(k)
                } else if let Some(&v) = self.vars.get(n) {
                    CExpr::Var(v)
                } else if let Some(&c) = self.consts.get(n) {
                    CExpr::Const(c)
                } else {
                    return Err(bad(n.clone()));
                }
            }
            TaExpr::Field(f) => CExpr::Field(
                *self
                    .fields
                    .get(f)
                    .ok_or_else(|| bad(format!("{}.{f}", crate::tagen::REQUESTER)))?,
            ),
            TaExpr::Loc { process, location } => {
                let p = self
                    .instances
                    .iter()
                    .position(|i| i == process)
                    .ok_or_else(|| bad(process.clone()))?;
                let l = self.location_names[p]
                    .iter()
                    .position(|l| l == location)
                    .ok_or_else(|| bad(format!("{process}.{location}")))?;
                CExpr::At(p, l)
            }
            TaExpr::Not(x) => CExpr::Not(Box::new(self.compile_in(x, clocks)?)),
            TaExpr::Bin(op, l, r) => CExpr::Bin(
                *op,
                Box::new(self.compile_in(l, clocks)?),
                Box::new(self.compile_in(r, clocks)?),
            ),
        })
    }

    /// Compiles a query formula. Clocks are addressed as `process.clock`.
    pub(crate) fn compile_query(&self, e: &TaExpr) -> Result<CExpr, CheckError> {
        if let TaExpr::Loc { process, location } = e {
            if let Some(k) = self
                .clock_names
                .iter()
                .position(|(p, n)| &self.instances[*p] == process && n == location)
            {
                return Ok(CExpr::Clock(k));
            }
        }
        match e {
            TaExpr::Not(x) => Ok(CExpr::Not(Box::new(self.compile_query(x)?))),
            TaExpr::Bin(op, l, r) => Ok(CExpr::Bin(
                *op,
                Box::new(self.compile_query(l)?),
                Box::new(self.compile_query(r)?),
            )),
            e => self.compile_in(e, &HashMap::new()),
        }
    }

    pub(crate) fn query_reads_clocks(&self, e: &CExpr) -> bool {
        e.reads_clock()
    }

    pub fn init_state(&self, requester: &ContextInfo, bindings: &Bindings, net: &Network) -> Result<NetworkState, CheckError> {
        let iv = initial_values(net, requester, bindings)?;
        Ok(self.state_from(&iv))
    }

    pub(crate) fn state_from(&self, iv: &InitialValues) -> NetworkState {
        NetworkState {
            locations: self.processes.iter().map(|p| p.initial).collect(),
            clocks: vec![0; self.clock_names.len()],
            vars: iv.vars.values().copied().collect(),
            fields: iv.fields.values().copied().collect(),
        }
    }

    fn committed(&self, s: &NetworkState) -> bool {
        self.processes
            .iter()
            .zip(&s.locations)
            .any(|(p, &l)| p.locations[l].committed)
    }

    fn invariants_hold(&self, s: &NetworkState) -> bool {
        self.processes.iter().zip(&s.locations).all(|(p, &l)| match p.locations[l].invariant {
            Some((c, b)) => s.clocks[c] <= b,
            None => true,
        })
    }

    fn guard_holds(&self, e: &CEdge, s: &NetworkState) -> Result<bool, CheckError> {
        for g in &e.guard {
            if g.eval(s).map_err(CheckError::Eval)? == 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn apply_edge(&self, p: usize, e: &CEdge, s: &mut NetworkState) -> Result<(), CheckError> {
        for (t, v) in &e.updates {
            let x = v.eval(s).map_err(CheckError::Eval)?;
            match *t {
                Target::Var(i) => s.vars[i] = if self.bool_vars[i] { (x != 0) as i64 } else { x },
                Target::Clock(i) => s.clocks[i] = x.clamp(0, self.cap),
            }
        }
        s.locations[p] = e.target;
        Ok(())
    }

    fn reduce(&self, s: &mut NetworkState, keep_clocks: bool) {
        if !self.reduce_clocks || keep_clocks {
            return;
        }
        for (p, &l) in self.processes.iter().zip(&s.locations) {
            for &c in &p.clocks {
                if !p.live[l].contains(&c) {
                    s.clocks[c] = 0;
                }
            }
        }
    }

    /// Successors of `s` in canonical order: the unit delay first, then
    /// edges by sender process and edge, then receiver process and edge.
    pub(crate) fn successors_with(
        &self,
        s: &NetworkState,
        keep_clocks: bool,
    ) -> Result<Vec<(Step, NetworkState)>, CheckError> {
        let mut out = Vec::new();
        let committed = self.committed(s);
        if !committed {
            let mut t = s.clone();
            for c in t.clocks.iter_mut() {
                *c = (*c + 1).min(self.cap);
            }
            if self.invariants_hold(&t) {
                self.reduce(&mut t, keep_clocks);
                out.push((Step::Delay, t));
            }
        }
        let in_committed = |p: usize| self.processes[p].locations[s.locations[p]].committed;
        for (p, proc) in self.processes.iter().enumerate() {
            for &ei in &proc.outgoing[s.locations[p]] {
                let e = &proc.edges[ei];
                match e.sync {
                    Some((_, SyncDir::Receive)) => continue,
                    None => {
                        if (committed && !in_committed(p)) || !self.guard_holds(e, s)? {
                            continue;
                        }
                        let mut t = s.clone();
                        self.apply_edge(p, e, &mut t)?;
                        if self.invariants_hold(&t) {
                            self.reduce(&mut t, keep_clocks);
                            out.push((Step::Fire((p, ei), None), t));
                        }
                    }
                    Some((ch, SyncDir::Send)) => {
                        if !self.guard_holds(e, s)? {
                            continue;
                        }
                        for (q, qproc) in self.processes.iter().enumerate() {
                            if q == p || (committed && !in_committed(p) && !in_committed(q)) {
                                continue;
                            }
                            for &fi in &qproc.outgoing[s.locations[q]] {
                                let f = &qproc.edges[fi];
                                if f.sync != Some((ch, SyncDir::Receive)) || !self.guard_holds(f, s)? {
                                    continue;
                                }
                                let mut t = s.clone();
                                self.apply_edge(p, e, &mut t)?;
                                self.apply_edge(q, f, &mut t)?;
                                if self.invariants_hold(&t) {
                                    self.reduce(&mut t, keep_clocks);
                                    out.push((Step::Fire((p, ei), Some((q, fi))), t));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// All one-step successors of `s` with their trace labels.
    pub fn successors(&self, s: &NetworkState) -> Result<Vec<(TraceStep, NetworkState)>, CheckError> {
        Ok(self
            .successors_with(s, false)?
            .into_iter()
            .map(|(st, t)| (self.trace_step(st), t))
            .collect())
    }

    fn edge_ref(&self, (p, e): (usize, usize)) -> EdgeRef {
        let edge = &self.processes[p].edges[e];
        EdgeRef {
            process: p,
            edge: e,
            label: edge.label.clone(),
        }
    }

    pub(crate) fn trace_step(&self, st: Step) -> TraceStep {
        match st {
            Step::Delay => TraceStep::Delay(1),
            Step::Fire(a, b) => TraceStep::Fire {
                sender: self.edge_ref(a),
                receiver: b.map(|b| self.edge_ref(b)),
            },
        }
    }

    /// Builds a trace from internal steps, merging consecutive delays.
    pub(crate) fn trace(&self, steps: &[Step], end: NetworkState, keep_clocks: bool) -> Trace {
        let mut out: Vec<TraceStep> = Vec::new();
        for &st in steps {
            match (out.last_mut(), st) {
                (Some(TraceStep::Delay(d)), Step::Delay) => *d += 1,
                _ => out.push(self.trace_step(st)),
            }
        }
        Trace {
            steps: out,
            end,
            clocks_reduced: self.reduce_clocks && !keep_clocks,
        }
    }

    /// Re-executes `trace` from `init`, failing on the first step that is
    /// not enabled. Returns the reached state.
    pub fn replay(&self, init: &NetworkState, trace: &Trace) -> Result<NetworkState, CheckError> {
        let keep = !trace.clocks_reduced;
        let mut s = init.clone();
        for (i, step) in trace.steps.iter().enumerate() {
            let units = match step {
                TraceStep::Delay(d) => *d,
                TraceStep::Fire { .. } => 1,
            };
            for _ in 0..units {
                let next = self
                    .successors_with(&s, keep)?
                    .into_iter()
                    .find(|(st, _)| match (st, step) {
                        (Step::Delay, TraceStep::Delay(_)) => true,
                        (Step::Fire(a, b), TraceStep::Fire { sender, receiver }) => {
                            *a == (sender.process, sender.edge)
                                && *b == receiver.as_ref().map(|r| (r.process, r.edge))
                        }
                        _ => false,
                    })
                    .ok_or(CheckError::Replay(i))?;
                s = next.1;
            }
        }
        Ok(s)
    }
}

/// Per location, the clocks that some path reads before resetting them.
fn liveness(p: &Process) -> Vec<Vec<usize>> {
    let n = p.locations.len();
    let mut live: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (l, loc) in p.locations.iter().enumerate() {
        if let Some((c, _)) = loc.invariant {
            live[l].push(c);
        }
        for &e in &p.outgoing[l] {
            for g in &p.edges[e].guard {
                g.clocks(&mut live[l]);
            }
        }
    }
    loop {
        let mut changed = false;
        for e in &p.edges {
            let mut read = Vec::new();
            let mut reset = Vec::new();
            for (t, v) in &e.updates {
                v.clocks(&mut read);
                if let Target::Clock(c) = t {
                    reset.push(*c);
                }
            }
            let carried: Vec<usize> = live[e.target]
                .iter()
                .copied()
                .filter(|c| !reset.contains(c))
                .chain(read)
                .collect();
            for c in carried {
                if !live[e.source].contains(&c) {
                    live[e.source].push(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return live;
        }
    }
}
