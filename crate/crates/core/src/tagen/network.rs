use std::collections::BTreeSet;

use indexmap::{IndexMap, IndexSet};

use super::expr::TaExpr;
use super::lower::{Encoding, Lower};
use super::{
    Bindings, ClockBound, ConstDecl, ContextField, Edge, GlobalDecls, Location, Network, Sync,
    SyncDir, TaGenError, Template, Update, VarDecl, VarRole, IDLE, MAIN, MAIN_TEMPLATE, REQUESTER,
};
use crate::composition::{one_time_amount, CompositionResult};
use crate::flatten::Flow;
use crate::model::{
    BinOp, Catalog, ConfiguredService, ContextInfo, DataType, Direction, Expr, LegalRule,
    Parameter, Value,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenOptions {
    /// Initial values written into the declarations.
    pub bindings: Bindings,
    pub requester: ContextInfo,
}

const ORDINALS: [&str; 20] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
    "eighteenth", "nineteenth", "twentieth",
];

/// `first`, `second`, ... for flow `j` (1-based); `flow21` and so on past twenty.
pub fn ordinal(j: usize) -> String {
    match ORDINALS.get(j.wrapping_sub(1)) {
        Some(s) => s.to_string(),
        None => format!("flow{j}"),
    }
}

/// Path accumulator of flow `j`, e.g. `path_var(1, "Price") == "firstPathPrice"`.
pub fn path_var(j: usize, what: &str) -> String {
    format!("{}Path{what}", ordinal(j))
}

fn legal_flag(service: &str, k: usize) -> String {
    format!("{service}Legal{k}")
}

fn checks(s: &ConfiguredService) -> impl Iterator<Item = &Expr> {
    s.contract.legal.iter().filter_map(|r| match r {
        LegalRule::Check(e) => Some(e),
        LegalRule::Effect { .. } => None,
    })
}

/// Shared state of one generation run.
struct Gen {
    params: IndexMap<String, Parameter>,
    dims: IndexMap<String, DataType>,
    consts: IndexMap<String, i64>,
    enc: Encoding,
}

impl Gen {
    fn lower(&mut self) -> Lower<'_> {
        Lower {
            params: &self.params,
            dims: &self.dims,
            consts: &self.consts,
            enc: &mut self.enc,
        }
    }

    fn encode(&mut self, name: &str, v: &Value, t: &DataType) -> Result<i64, TaGenError> {
        let v = t
            .coerce(v.clone())
            .ok_or_else(|| TaGenError::Unrepresentable(name.to_string()))?;
        self.enc.encode(name, &v, t)
    }

    fn service_template(&mut self, s: &ConfiguredService) -> Result<Template, TaGenError> {
        let f = s.function();
        let processing = format!("{}Processing", s.name);

        let mut e1 = Edge::new("idle", processing.clone());
        for r in &s.context.rules {
            e1.guard.push(self.lower().expr(r)?);
        }
        for c in &f.pre {
            e1.guard.push(self.lower().expr(c)?);
        }
        for c in checks(s) {
            e1.guard.push(self.lower().expr(c)?);
        }
        for i in &f.inputs {
            e1.guard.push(TaExpr::var(format!("{i}B")));
        }
        e1.sync = Some(Sync {
            channel: f.request_channel(),
            dir: SyncDir::Receive,
        });

        let mut e2 = Edge::new(processing.clone(), "idle");
        for c in &f.post {
            if let Some(flag) = c.as_flag() {
                e2.updates.push(Update {
                    target: flag.to_string(),
                    value: TaExpr::Bool(true),
                });
            }
        }
        for o in &f.outputs {
            e2.updates.push(Update {
                target: format!("{o}B"),
                value: TaExpr::Bool(true),
            });
        }
        for r in &s.contract.legal {
            if let LegalRule::Effect { target, value } = r {
                let fixed = self.params.get(target).is_some_and(|p| p.dtype == DataType::Double);
                let value = if fixed {
                    self.lower().scaled(value)?
                } else {
                    self.lower().expr(value)?
                };
                e2.updates.push(Update {
                    target: target.clone(),
                    value,
                });
            }
        }
        e2.sync = Some(Sync {
            channel: f.response_channel(),
            dir: SyncDir::Send,
        });

        Ok(Template {
            name: s.name.clone(),
            locations: vec![Location::new("idle"), Location::new(processing)],
            initial: "idle".into(),
            clocks: Vec::new(),
            edges: vec![e1, e2],
        })
    }

    fn main_template(&mut self, flows: &[Flow], catalog: &Catalog) -> Result<Template, TaGenError> {
        let mut t = Template {
            name: MAIN_TEMPLATE.into(),
            locations: vec![Location::new(IDLE)],
            initial: IDLE.into(),
            clocks: Vec::new(),
            edges: Vec::new(),
        };
        for (j0, flow) in flows.iter().enumerate() {
            let j = j0 + 1;
            let services: Vec<&ConfiguredService> = flow
                .steps
                .iter()
                .map(|s| {
                    catalog
                        .get(&s.service)
                        .ok_or_else(|| TaGenError::UnknownService(s.service.clone()))
                })
                .collect::<Result<_, _>>()?;

            // Runs of steps joined by parallel-tail marks.
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for (k, step) in flow.steps.iter().enumerate() {
                match groups.last_mut() {
                    Some(g) if step.parallel_tail => g.push(k),
                    _ => groups.push(vec![k]),
                }
            }
            let n = flow.steps.len();
            let mut timed = vec![false; n];
            let mut committed = vec![false; n];
            let mut counts_reliability = vec![false; n];
            for g in &groups {
                let nf = |k: usize| services[k].nonfunctional();
                let best_time = g
                    .iter()
                    .filter(|&&k| nf(k).safety_time.is_some())
                    .fold(None, |best: Option<usize>, &k| match best {
                        Some(b) if nf(b).safety_time >= nf(k).safety_time => Some(b),
                        _ => Some(k),
                    });
                if let Some(b) = best_time {
                    timed[b] = true;
                    if g.len() > 1 {
                        for &k in g.iter().filter(|&&k| k != b) {
                            committed[k] = true;
                        }
                    }
                }
                let best_rel = g
                    .iter()
                    .filter(|&&k| nf(k).reliability.is_some())
                    .fold(None, |best: Option<usize>, &k| match best {
                        Some(b) if nf(b).reliability >= nf(k).reliability => Some(b),
                        _ => Some(k),
                    });
                if let Some(b) = best_rel {
                    counts_reliability[b] = true;
                }
            }

            let mut prev = IDLE.to_string();
            for (k0, (step, s)) in flow.steps.iter().zip(&services).enumerate() {
                let k = k0 + 1;
                let f = s.function();
                let nf = s.nonfunctional();
                let req = format!("F{j}_{k}_{}_req", s.name);
                let done = if k == n {
                    format!("Final_{j}")
                } else {
                    format!("F{j}_{k}_{}_done", s.name)
                };

                let mut req_loc = Location::new(req.clone());
                let mut enter = Edge::new(prev.clone(), req.clone());
                if timed[k0] {
                    let clock = format!("x_{j}_{k}");
                    req_loc.invariant = Some(ClockBound {
                        clock: clock.clone(),
                        bound: nf.safety_time.unwrap_or(0) as i64,
                    });
                    enter.updates.push(Update {
                        target: clock.clone(),
                        value: TaExpr::Int(0),
                    });
                    t.clocks.push(clock);
                }
                req_loc.committed = committed[k0];

                for g in &step.guards {
                    enter.guard.push(self.lower().expr(g)?);
                }
                if k == n {
                    for g in &flow.exit_guards {
                        enter.guard.push(self.lower().expr(g)?);
                    }
                }
                for c in nf.safety_data.iter().flatten() {
                    enter.guard.push(self.lower().expr(c)?);
                }
                enter.sync = Some(Sync {
                    channel: f.request_channel(),
                    dir: SyncDir::Send,
                });
                for (m, _) in checks(s).enumerate() {
                    enter.updates.push(Update {
                        target: legal_flag(&s.name, m + 1),
                        value: TaExpr::Bool(true),
                    });
                }

                let mut finish = Edge::new(req.clone(), done.clone());
                finish.sync = Some(Sync {
                    channel: f.response_channel(),
                    dir: SyncDir::Receive,
                });
                let mut add = |what: &str, amount: TaExpr| {
                    let v = path_var(j, what);
                    finish.updates.push(Update {
                        target: v.clone(),
                        value: TaExpr::bin(BinOp::Add, TaExpr::Var(v), amount),
                    });
                };
                if let Some(p) = &nf.price {
                    let amount = one_time_amount(p).map_err(|_| TaGenError::PriceUnit(p.unit.clone()))?;
                    add("Price", self.lower().scaled(&amount)?);
                }
                if let Some(a) = nf.availability {
                    add("Availability", TaExpr::Int(a as i64));
                }
                if let (Some(r), true) = (nf.reliability, counts_reliability[k0]) {
                    add("Reliability", TaExpr::Int(r as i64));
                }
                if let Some(time) = nf.safety_time {
                    add("Time", TaExpr::Int(time as i64));
                }

                t.locations.push(req_loc);
                t.locations.push(Location::new(done.clone()));
                t.edges.push(enter);
                t.edges.push(finish);
                prev = done;
            }
        }
        Ok(t)
    }
}

fn participants<'a>(flows: &[Flow], catalog: &'a Catalog) -> Result<Vec<&'a ConfiguredService>, TaGenError> {
    let names: BTreeSet<&str> = flows.iter().flat_map(|f| f.services()).collect();
    names
        .into_iter()
        .map(|n| catalog.get(n).ok_or_else(|| TaGenError::UnknownService(n.to_string())))
        .collect()
}

fn reals(e: &Expr, out: &mut Vec<f64>) {
    e.walk(&mut |n| {
        if let Expr::Lit(Value::Real(r)) = n {
            out.push(r.0);
        }
    });
}

fn gen_state(
    composite: &ConfiguredService,
    services: &[&ConfiguredService],
    flows: &[Flow],
    opts: &GenOptions,
) -> Result<Gen, TaGenError> {
    let mut params = composite.params.clone();
    let mut dims = composite.context.info.typing.clone();
    for s in services {
        for (n, p) in &s.params {
            params.entry(n.clone()).or_insert_with(|| p.clone());
        }
        for (d, t) in &s.context.info.typing {
            dims.entry(d.clone()).or_insert_with(|| t.clone());
        }
    }

    let mut consts: IndexMap<String, i64> = IndexMap::new();
    for p in params.values() {
        if let Some(values) = p.dtype.enum_values() {
            for (i, v) in values.iter().enumerate() {
                match consts.get(v) {
                    Some(&c) if c != i as i64 + 1 => return Err(TaGenError::SymbolClash(v.clone())),
                    _ => {
                        consts.insert(v.clone(), i as i64 + 1);
                    }
                }
            }
        }
    }

    let mut fractions = Vec::new();
    for s in services {
        let f = s.function();
        let nf = s.nonfunctional();
        let exprs = s
            .context
            .rules
            .iter()
            .chain(&f.pre)
            .chain(&f.post)
            .chain(nf.safety_data.iter().flatten())
            .chain(nf.price.iter().map(|p| &p.amount));
        for e in exprs {
            reals(e, &mut fractions);
        }
        for r in &s.contract.legal {
            match r {
                LegalRule::Check(e) | LegalRule::Effect { value: e, .. } => reals(e, &mut fractions),
            }
        }
    }
    for g in flows.iter().flat_map(|f| f.all_guards()) {
        reals(&g, &mut fractions);
    }
    for v in opts.bindings.values().chain(opts.requester.entries.values()) {
        if let Value::Real(r) = v {
            fractions.push(r.0);
        }
    }
    let scale = Encoding::scale_for(fractions).map_err(|v| TaGenError::Precision {
        name: "model".into(),
        value: v.to_string(),
    })?;

    Ok(Gen {
        params,
        dims,
        consts,
        enc: Encoding {
            scale,
            ..Encoding::default()
        },
    })
}

/// Template of one service: `idle` and `<name>Processing`, entered on the
/// request channel and left on the response channel.
pub fn gen_service_template(s: &ConfiguredService) -> Result<Template, TaGenError> {
    let flows = [Flow {
        steps: vec![crate::flatten::FlowStep::new(s.name.clone())],
        exit_guards: Vec::new(),
    }];
    let mut g = gen_state(s, &[s], &flows, &GenOptions::default())?;
    g.service_template(s)
}

/// The main automaton: one path from `i` per flow, ending in `Final_<j>`.
pub fn gen_main_ta(flows: &[Flow], catalog: &Catalog) -> Result<Template, TaGenError> {
    let services = participants(flows, catalog)?;
    let composite = ConfiguredService::new("", crate::model::ServiceFunction::new("", ""));
    let mut g = gen_state(&composite, &services, flows, &GenOptions::default())?;
    for guard in flows.iter().flat_map(|f| f.all_guards()) {
        for v in guard.vars() {
            g.params
                .entry(v.clone())
                .or_insert_with(|| Parameter::new(v, DataType::Bool, Direction::Input));
        }
    }
    g.main_template(flows, catalog)
}

/// Network for a composition: one template per participating service plus
/// the main automaton, with all global declarations.
pub fn gen_network(
    res: &CompositionResult,
    catalog: &Catalog,
    opts: &GenOptions,
) -> Result<Network, TaGenError> {
    let flows: Vec<Flow> = res.per_flow.iter().map(|(f, _)| f.clone()).collect();
    let services = participants(&flows, catalog)?;
    let mut g = gen_state(&res.composite, &services, &flows, opts)?;

    let mut templates = Vec::new();
    for s in &services {
        templates.push(g.service_template(s)?);
    }
    templates.push(g.main_template(&flows, catalog)?);

    let mut decls = GlobalDecls::default();
    for s in &services {
        decls.channels.push(s.function().request_channel());
        decls.channels.push(s.function().response_channel());
    }
    for (name, value) in &g.consts {
        let ty = g
            .params
            .values()
            .find_map(|p| match &p.dtype {
                DataType::Enum { name: tn, values } if values.contains(name) => Some(tn.clone()),
                _ => None,
            })
            .unwrap_or_default();
        decls.consts.push(ConstDecl {
            name: name.clone(),
            value: *value,
            comment: ty,
        });
    }

    let produced: IndexSet<&String> = services.iter().flat_map(|s| &s.function().outputs).collect();
    let consumed: IndexSet<&String> = services.iter().flat_map(|s| &s.function().inputs).collect();
    let mut vars: Vec<VarDecl> = Vec::new();
    for n in &consumed {
        let out = produced.contains(n);
        vars.push(VarDecl {
            name: format!("{n}B"),
            dtype: DataType::Bool,
            role: if out { VarRole::OutputAvailability } else { VarRole::InputAvailability },
            default: Some(!out as i64),
            init: Some(!out as i64),
        });
    }
    for n in produced.iter().filter(|n| !consumed.contains(*n)) {
        vars.push(VarDecl {
            name: format!("{n}B"),
            dtype: DataType::Bool,
            role: VarRole::OutputAvailability,
            default: Some(0),
            init: Some(0),
        });
    }

    let post_flags: IndexSet<&str> = services
        .iter()
        .flat_map(|s| s.function().post.iter().filter_map(|c| c.as_flag()))
        .collect();
    let pre_flags: IndexSet<&str> = services
        .iter()
        .flat_map(|s| s.function().pre.iter().filter_map(|c| c.as_flag()))
        .collect();
    let params: Vec<Parameter> = g.params.values().cloned().collect();
    for p in &params {
        if matches!(p.dtype, DataType::Tuple(_)) {
            continue;
        }
        let default = if p.dtype == DataType::Bool {
            if post_flags.contains(p.name.as_str()) {
                Some(0)
            } else if pre_flags.contains(p.name.as_str()) {
                Some(1)
            } else if p.direction == Direction::Input {
                None
            } else {
                Some(0)
            }
        } else if p.direction == Direction::Input {
            None
        } else {
            Some(0)
        };
        let init = match opts.bindings.get(&p.name) {
            Some(v) => Some(g.encode(&p.name, v, &p.dtype)?),
            None => default,
        };
        vars.push(VarDecl {
            name: p.name.clone(),
            dtype: p.dtype.clone(),
            role: VarRole::Parameter,
            default,
            init,
        });
    }
    for j in 1..=flows.len() {
        for what in ["Price", "Availability", "Reliability", "Time"] {
            let dtype = if what == "Price" { DataType::Double } else { DataType::Int };
            vars.push(VarDecl {
                name: path_var(j, what),
                dtype,
                role: VarRole::Path,
                default: Some(0),
                init: Some(0),
            });
        }
    }
    for s in &services {
        for (m, _) in checks(s).enumerate() {
            vars.push(VarDecl {
                name: legal_flag(&s.name, m + 1),
                dtype: DataType::Bool,
                role: VarRole::Legal,
                default: Some(0),
                init: Some(0),
            });
        }
    }
    decls.vars = vars;

    let mut fields: IndexSet<String> = IndexSet::new();
    for s in &services {
        for r in &s.context.rules {
            fields.extend(r.ctx_dims());
        }
    }
    for d in fields {
        let dtype = g
            .dims
            .get(&d)
            .cloned()
            .ok_or_else(|| TaGenError::UnknownName(format!("ctx.{d}")))?;
        if matches!(dtype, DataType::Tuple(_)) {
            return Err(TaGenError::Unrepresentable(format!("ctx.{d}")));
        }
        let init = match opts.requester.entries.get(&d) {
            Some(v) => Some(g.encode(&d, v, &dtype)?),
            None => None,
        };
        decls.requester.push(ContextField { name: d, dtype, init });
    }
    decls.encoding = g.enc.clone();

    let mut system = vec![(MAIN.to_string(), MAIN_TEMPLATE.to_string())];
    system.extend(services.iter().map(|s| (s.name.clone(), s.name.clone())));

    let net = Network {
        decls,
        templates,
        system,
    };
    check_names(&net)?;
    Ok(net)
}

fn check_names(net: &Network) -> Result<(), TaGenError> {
    let mut seen: IndexSet<&str> = IndexSet::new();
    let d = &net.decls;
    let names = d
        .channels
        .iter()
        .chain(d.consts.iter().map(|c| &c.name))
        .chain(d.vars.iter().map(|v| &v.name))
        .chain(net.templates.iter().map(|t| &t.name))
        .chain(net.templates.iter().flat_map(|t| &t.clocks))
        .map(String::as_str)
        .chain([REQUESTER, MAIN]);
    for n in names {
        if !seen.insert(n) {
            return Err(TaGenError::NameCollision(n.to_string()));
        }
    }
    Ok(())
}
