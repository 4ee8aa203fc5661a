//! Sequential composition `A >> B` and its component rules.

use indexmap::{IndexMap, IndexSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::CompositionError;
use crate::model::validate::service_domains;
use crate::model::{
    constraints_jointly_satisfiable, BinOp, ConfiguredService, Context, Direction, Expr, Nonfunctional,
    Parameter, Price, ProviderTrust, Recommendations, ServiceFunction, TrustGrade, ONE_TIME,
};

/// Joins names of composed services and functions.
pub const CONCAT: &str = "⌢";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricingMode {
    #[default]
    Normal,
    Promotional,
    SpecialSale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustLogic {
    /// Service A is required for service B: B's recommendations dominate.
    #[default]
    BRequiresA,
    /// Buyers of A are likely to buy B: A's recommendations dominate.
    ALeadsToB,
    /// Both are sold as one package; sets are collected externally.
    Packaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustAggregator {
    Avg,
    Choose,
    #[default]
    Glb,
    Lub,
}

/// Externally collected recommendation sets for packaged services.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackagedTrust {
    pub ce: Recommendations,
    pub re: Recommendations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqOptions {
    pub pricing_mode: PricingMode,
    pub trust_logic: TrustLogic,
    pub trust_aggregator: TrustAggregator,
    pub po_a_observable: bool,
    pub b_requires_more: bool,
    pub choose_seed: u64,
    pub packaged: Option<PackagedTrust>,
}

impl Default for SeqOptions {
    fn default() -> Self {
        SeqOptions {
            pricing_mode: PricingMode::Normal,
            trust_logic: TrustLogic::BRequiresA,
            trust_aggregator: TrustAggregator::Glb,
            po_a_observable: true,
            b_requires_more: true,
            choose_seed: 0,
            packaged: None,
        }
    }
}

/// A composite plus the non-fatal notes produced while building it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composed {
    pub service: ConfiguredService,
    pub warnings: Vec<String>,
}

/// Post-provision rules of A; the default leaves them unchanged.
pub type PostRulesHook<'a> = &'a dyn Fn(&Context) -> Context;

pub fn merge_context(a: &Context, b: &Context) -> Result<(Context, Vec<String>), CompositionError> {
    merge_context_with(a, b, &|c: &Context| c.clone())
}

/// Rules are `r'_A ∪ r_B`; information is merged per dimension and B's tag
/// wins where both carry one.
pub fn merge_context_with(
    a: &Context,
    b: &Context,
    post_rules: PostRulesHook<'_>,
) -> Result<(Context, Vec<String>), CompositionError> {
    let a = post_rules(a);
    let mut out = a.clone();
    let mut warnings = Vec::new();
    out.rules.extend(b.rules.iter().cloned());
    for (d, t) in &b.info.typing {
        match out.info.typing.get(d) {
            Some(prev) if prev != t => {
                return Err(CompositionError::ContextTypeConflict {
                    dimension: d.clone(),
                    left: prev.to_string(),
                    right: t.to_string(),
                })
            }
            _ => {
                out.info.typing.insert(d.clone(), t.clone());
            }
        }
    }
    for (d, v) in &b.info.entries {
        if let Some(prev) = out.info.entries.get(d) {
            if prev != v {
                warnings.push(format!("context dimension `{d}`: {prev} replaced by {v}"));
            }
        }
        out.info.entries.insert(d.clone(), v.clone());
    }
    Ok((out, warnings))
}

fn round_half_up_avg(a: TrustGrade, b: TrustGrade) -> TrustGrade {
    TrustGrade((a.0 as u16 + b.0 as u16).div_ceil(2) as u8)
}

fn merge_recs(
    a: &Recommendations,
    b: &Recommendations,
    opts: &SeqOptions,
    rng: &mut ChaCha8Rng,
) -> Recommendations {
    let mut out = Recommendations::new();
    for (who, ga) in a {
        if let Some(gb) = b.get(who) {
            let g = match opts.trust_aggregator {
                TrustAggregator::Avg => round_half_up_avg(*ga, *gb),
                TrustAggregator::Choose => {
                    if rng.gen_bool(0.5) {
                        *ga
                    } else {
                        *gb
                    }
                }
                TrustAggregator::Glb => ga.meet(*gb),
                TrustAggregator::Lub => ga.join(*gb),
            };
            out.insert(who.clone(), g);
        }
    }
    let (dominant, other) = match opts.trust_logic {
        TrustLogic::ALeadsToB => (a, b),
        _ => (b, a),
    };
    for (who, g) in dominant {
        if !other.contains_key(who) {
            out.insert(who.clone(), *g);
        }
    }
    out
}

pub fn aggregate_trust(
    a: &ProviderTrust,
    b: &ProviderTrust,
    opts: &SeqOptions,
) -> Result<ProviderTrust, CompositionError> {
    let pg = a.pg && b.pg;
    if opts.trust_logic == TrustLogic::Packaged {
        let p = opts.packaged.as_ref().ok_or(CompositionError::MissingPackagedTrust)?;
        return Ok(ProviderTrust {
            ce: p.ce.clone(),
            pg,
            re: p.re.clone(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.choose_seed);
    Ok(ProviderTrust {
        ce: merge_recs(&a.ce, &b.ce, opts, &mut rng),
        pg,
        re: merge_recs(&a.re, &b.re, opts, &mut rng),
    })
}

/// Amount of `p` expressed per one-time purchase.
pub fn one_time_amount(p: &Price) -> Result<Expr, CompositionError> {
    if p.unit == ONE_TIME {
        return Ok(p.amount.clone());
    }
    match &p.per {
        Some(per) => Ok(Expr::bin(BinOp::Mul, p.amount.clone(), Expr::var(per.clone()))),
        None => Err(CompositionError::UnitMismatch {
            unit: p.unit.clone(),
        }),
    }
}

pub fn combine_price(a: &Price, b: &Price, mode: PricingMode) -> Result<Price, CompositionError> {
    if a.currency != b.currency {
        return Err(CompositionError::CurrencyMismatch {
            left: a.currency.clone(),
            right: b.currency.clone(),
        });
    }
    let (la, lb, unit, per) = if a.unit == b.unit {
        let per = if a.per == b.per { a.per.clone() } else { None };
        (a.amount.clone(), b.amount.clone(), a.unit.clone(), per)
    } else {
        (one_time_amount(a)?, one_time_amount(b)?, ONE_TIME.to_string(), None)
    };
    let op = match mode {
        PricingMode::Normal => BinOp::Add,
        PricingMode::Promotional => BinOp::Max,
        PricingMode::SpecialSale => BinOp::Min,
    };
    Ok(Price {
        amount: Expr::bin(op, la, lb).simplify(),
        currency: a.currency.clone(),
        unit,
        per,
    })
}

fn both<T: Clone>(a: &Option<T>, b: &Option<T>, f: impl FnOnce(&T, &T) -> T) -> Option<T> {
    match (a, b) {
        (Some(x), Some(y)) => Some(f(x, y)),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

fn union<T: Clone + std::hash::Hash + Eq>(a: &IndexSet<T>, b: &IndexSet<T>) -> IndexSet<T> {
    a.iter().chain(b.iter()).cloned().collect()
}

pub fn combine_nonfunctional(
    a: &Nonfunctional,
    b: &Nonfunctional,
    opts: &SeqOptions,
) -> Result<Nonfunctional, CompositionError> {
    let price = match (&a.price, &b.price) {
        (Some(x), Some(y)) => Some(combine_price(x, y, opts.pricing_mode)?),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    let trust = match (&a.trust, &b.trust) {
        (Some(x), Some(y)) => Some(aggregate_trust(x, y, opts)?),
        (x, y) => x.clone().or_else(|| y.clone()),
    };
    Ok(Nonfunctional {
        safety_time: both(&a.safety_time, &b.safety_time, |x, y| x + y),
        safety_data: both(&a.safety_data, &b.safety_data, union),
        security: both(&a.security, &b.security, union),
        reliability: both(&a.reliability, &b.reliability, |x, y| *x.min(y)),
        availability: both(&a.availability, &b.availability, |x, y| x + y),
        price,
        trust,
    })
}

fn merge_params(
    a: &ConfiguredService,
    b: &ConfiguredService,
) -> Result<IndexMap<String, Parameter>, CompositionError> {
    let inputs: IndexSet<&String> = a
        .input_params()
        .map(|p| &p.name)
        .chain(
            b.input_params()
                .map(|p| &p.name)
                .filter(|n| !a.params.get(*n).is_some_and(|p| p.direction.is_output())),
        )
        .collect();
    let outputs: IndexSet<&String> = a
        .output_params()
        .chain(b.output_params())
        .map(|p| &p.name)
        .collect();

    let mut out: IndexMap<String, Parameter> = IndexMap::new();
    for p in a.params.values().chain(b.params.values()) {
        match out.get_mut(&p.name) {
            None => {
                out.insert(p.name.clone(), p.clone());
            }
            Some(prev) => {
                if prev.dtype != p.dtype {
                    return Err(CompositionError::ParamTypeConflict {
                        name: p.name.clone(),
                        left: prev.dtype.to_string(),
                        right: p.dtype.to_string(),
                    });
                }
                if prev.constraint != p.constraint && !p.constraint.is_true() {
                    prev.constraint = if prev.constraint.is_true() {
                        p.constraint.clone()
                    } else {
                        Expr::bin(BinOp::And, prev.constraint.clone(), p.constraint.clone())
                    };
                }
            }
        }
    }
    for p in out.values_mut() {
        p.direction = match (inputs.contains(&p.name), outputs.contains(&p.name)) {
            (true, true) => Direction::InOut,
            (false, true) => Direction::Output,
            _ => Direction::Input,
        };
    }
    Ok(out)
}

/// `A >> B`.
pub fn seq_compose(
    a: &ConfiguredService,
    b: &ConfiguredService,
    opts: &SeqOptions,
) -> Result<Composed, CompositionError> {
    let mut warnings = Vec::new();
    let params = merge_params(a, b)?;

    let mut attrs = a.attrs.clone();
    for (n, at) in &b.attrs {
        if let Some(prev) = attrs.get(n) {
            if prev != at {
                warnings.push(format!("attribute `{n}`: {} replaced by {}", prev.value, at.value));
            }
        }
        attrs.insert(n.clone(), at.clone());
    }

    let (context, ctx_warnings) = merge_context(&a.context, &b.context)?;
    warnings.extend(ctx_warnings);

    let (fa, fb) = (a.function(), b.function());
    let mut f = ServiceFunction::new(
        format!("{}{CONCAT}{}", fa.name, fb.name),
        format!("{}{CONCAT}{}", fa.result_name, fb.result_name),
    );
    f.inputs = fa
        .inputs
        .iter()
        .chain(fb.inputs.iter().filter(|n| !fa.outputs.contains(*n)))
        .cloned()
        .collect();
    f.addresses = union(&fa.addresses, &fb.addresses);
    f.outputs = union(&fa.outputs, &fb.outputs);
    f.pre = if opts.b_requires_more {
        fa.pre
            .iter()
            .chain(fb.pre.iter().filter(|c| !fa.post.contains(*c)))
            .cloned()
            .collect()
    } else {
        fa.pre.clone()
    };
    f.post = if opts.po_a_observable {
        union(&fa.post, &fb.post)
    } else {
        fb.post.clone()
    };
    f.post_observable = fb.post_observable;

    let mut service = ConfiguredService::new(format!("{}{CONCAT}{}", a.name, b.name), f);
    service.params = params;
    service.attrs = attrs;
    service.context = context;
    service.contract.nonfunctional =
        combine_nonfunctional(a.nonfunctional(), b.nonfunctional(), opts)?;
    service.contract.legal = union(&a.contract.legal, &b.contract.legal);

    check_legal(&service)?;
    Ok(Composed { service, warnings })
}

/// Rejects a composite whose legal rules cannot hold together.
pub(crate) fn check_legal(s: &ConfiguredService) -> Result<(), CompositionError> {
    let cs: Vec<Expr> = s.contract.legal.iter().filter_map(|r| r.as_constraint()).collect();
    let refs: Vec<&Expr> = cs.iter().collect();
    let doms = service_domains(s, &refs);
    match constraints_jointly_satisfiable(refs.iter().copied(), &doms) {
        Ok(Some(_)) => Ok(()),
        Ok(None) => Err(CompositionError::LegalConflict(
            cs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "),
        )),
        Err(_) => Ok(()),
    }
}
