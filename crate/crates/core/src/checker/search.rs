use std::collections::HashMap;

use rayon::prelude::*;

use super::engine::{CExpr, Checker, NetworkState, Step};
use super::{initial_values, CheckError, Outcome, Verdict};
use crate::model::ContextInfo;
use crate::tagen::{Bindings, Network, Query, QueryForm, TaExpr};

/// Frontier layers smaller than this are expanded on the calling thread.
const PARALLEL_LAYER: usize = 256;

struct Node {
    state: NetworkState,
    parent: usize,
    step: Step,
}

struct Found {
    path: Option<Vec<Step>>,
    end: NetworkState,
    states: usize,
    truncated: bool,
}

impl Checker {
    /// Breadth-first search for a state satisfying `goal`, visiting at most
    /// `bound` states. Returns the index path of the first hit.
    fn search(
        &self,
        init: NetworkState,
        goal: &CExpr,
        bound: usize,
        keep_clocks: bool,
    ) -> Result<Found, CheckError> {
        let holds = |s: &NetworkState| goal.eval(s).map(|v| v != 0).map_err(CheckError::Eval);
        if holds(&init)? {
            return Ok(Found {
                path: Some(Vec::new()),
                end: init,
                states: 1,
                truncated: false,
            });
        }
        let mut nodes = vec![Node {
            state: init.clone(),
            parent: usize::MAX,
            step: Step::Delay,
        }];
        let mut seen: HashMap<NetworkState, usize> = HashMap::from([(init, 0)]);
        let mut layer = 0..1;
        let mut truncated = false;
        while !layer.is_empty() {
            let expand = |i: usize| self.successors_with(&nodes[i].state, keep_clocks);
            let succs: Vec<_> = if layer.len() >= PARALLEL_LAYER {
                layer.clone().into_par_iter().map(expand).collect::<Result<_, _>>()?
            } else {
                layer.clone().map(expand).collect::<Result<_, _>>()?
            };
            let start = nodes.len();
            for (parent, list) in layer.clone().zip(succs) {
                for (step, s) in list {
                    if seen.contains_key(&s) {
                        continue;
                    }
                    if nodes.len() >= bound {
                        truncated = true;
                        break;
                    }
                    let hit = holds(&s)?;
                    seen.insert(s.clone(), nodes.len());
                    nodes.push(Node { state: s, parent, step });
                    if hit {
                        let mut path = Vec::new();
                        let mut i = nodes.len() - 1;
                        while i != 0 {
                            path.push(nodes[i].step);
                            i = nodes[i].parent;
                        }
                        path.reverse();
                        let end = nodes.last().expect("just pushed").state.clone();
                        return Ok(Found {
                            path: Some(path),
                            end,
                            states: nodes.len(),
                            truncated: false,
                        });
                    }
                }
                if truncated {
                    break;
                }
            }
            if truncated {
                break;
            }
            layer = start..nodes.len();
        }
        let states = nodes.len();
        Ok(Found {
            path: None,
            end: nodes.swap_remove(0).state,
            states,
            truncated,
        })
    }

    /// Decides `q` by breadth-first exploration of at most `bound` states.
    pub fn check(&self, q: &Query, init: &NetworkState, bound: usize) -> Result<Verdict, CheckError> {
        let (goal, exists) = match &q.form {
            QueryForm::Exists(p) => (self.compile_query(p)?, true),
            QueryForm::Always { ante, cons } => (
                self.compile_query(&TaExpr::bin(
                    crate::model::BinOp::And,
                    ante.clone(),
                    TaExpr::not(cons.clone()),
                ))?,
                false,
            ),
        };
        let keep_clocks = self.query_reads_clocks(&goal);
        let Found {
            path,
            end,
            states,
            truncated: bound_hit,
        } = self.search(init.clone(), &goal, bound.max(1), keep_clocks)?;
        let outcome = match (&path, exists, bound_hit) {
            (Some(_), true, _) => Outcome::Pass,
            (Some(_), false, _) => Outcome::Fail,
            (None, _, true) => Outcome::Inconclusive,
            (None, true, false) => Outcome::Fail,
            (None, false, false) => Outcome::Pass,
        };
        Ok(Verdict {
            outcome,
            trace: path.map(|p| self.trace(&p, end, keep_clocks)),
            states,
            bound_hit,
        })
    }
}

/// Checks one query of `net` from the initial state given by `requester`
/// and `bindings`.
pub fn check_query(
    net: &Network,
    q: &Query,
    requester: &ContextInfo,
    bindings: &Bindings,
    bound: usize,
) -> Result<Verdict, CheckError> {
    let c = Checker::new(net)?;
    let init = c.state_from(&initial_values(net, requester, bindings)?);
    c.check(q, &init, bound)
}
