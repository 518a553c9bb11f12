//! Execution-count bounds for actions and interval / value-set
//! approximations of internal and output variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::hierarchy::SituationSource;
use crate::invariants::{Count, InvariantSet};
use crate::model::{Action, Condition, GlobalStep, GrafcetSpec, Topology, ValueExpr, VarKind, VarType};
use crate::reachconc::{GlobalConcurrency, ReachConcResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundReason {
    /// The step is never reachable.
    Unreachable,
    /// The step, or some step of its partial Grafcet, has no positive entry
    /// in any S-invariant.
    UncoveredSInvariant,
    /// A transition activating the step lies on a T-invariant.
    TInvariantLoop,
    /// The step is only reachable after re-entering an active partial
    /// Grafcet.
    Reentry,
    /// Sum of `n · |S^I|` over the entry points reaching the step.
    Product,
    /// An enclosing or forcing step above can be activated unboundedly.
    UnboundedActivator,
}

/// Bound on how often a step can be activated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepBound {
    pub count: Count,
    pub reasons: Vec<BoundReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionBound {
    pub action: String,
    pub count: Count,
    pub reasons: Vec<BoundReason>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionBounds {
    /// Per partial Grafcet, per step.
    pub steps: Vec<Vec<StepBound>>,
    /// Per partial Grafcet, per action.
    pub actions: Vec<Vec<ExecutionBound>>,
}

impl ExecutionBounds {
    pub fn action(&self, partial: usize, index: usize) -> &ExecutionBound {
        &self.actions[partial][index]
    }

    pub fn step(&self, g: GlobalStep) -> &StepBound {
        &self.steps[g.partial][g.step]
    }
}

/// Inputs to the bound computation for one spec.
pub struct BoundInputs<'a> {
    pub spec: &'a GrafcetSpec,
    pub topologies: &'a [Topology],
    pub invariants: &'a [InvariantSet],
    pub results: &'a [Vec<ReachConcResult>],
    pub global: &'a GlobalConcurrency,
    /// Partial Grafcets, superiors first.
    pub order: &'a [usize],
}

/// Activation bound of every step and execution bound of every action.
///
/// A step is activated at most `Σ n · |S^I| · entries(σ)` times, summed over
/// the live initial situations σ that reach it, where `entries` is 1 for
/// initial steps and the activation bound of the enclosing or forcing step
/// otherwise. Unreachable steps get 0; steps not covered by S-invariants or
/// fed by a transition on a T-invariant get infinity.
pub fn bound_executions(input: &BoundInputs<'_>) -> ExecutionBounds {
    let spec = input.spec;
    let mut steps: Vec<Vec<StepBound>> = input
        .topologies
        .iter()
        .map(|t| {
            vec![
                StepBound {
                    count: Count::ZERO,
                    reasons: vec![BoundReason::Unreachable],
                };
                t.step_count
            ]
        })
        .collect();
    for &p in input.order {
        let topo = &input.topologies[p];
        let inv = &input.invariants[p];
        for s in 0..topo.step_count {
            let g = GlobalStep::new(p, s);
            if !input.global.is_reachable(g) {
                continue;
            }
            let mut reasons = Vec::new();
            if !inv.boundedness.covered {
                reasons.push(BoundReason::UncoveredSInvariant);
            }
            if inv.on_loop(&topo.step_pre[s]) {
                reasons.push(BoundReason::TInvariantLoop);
            }
            if !reasons.is_empty() {
                steps[p][s] = StepBound {
                    count: Count::Infinite,
                    reasons,
                };
                continue;
            }
            let n = Count::Finite(inv.boundedness.n.finite().unwrap_or(0));
            let mut total = Count::ZERO;
            let mut any = false;
            let mut unbounded_activator = false;
            for (i, r) in input.results[p].iter().enumerate() {
                if !input.global.live[p][i] {
                    continue;
                }
                if !input.global.reentrant[p] && !r.is_reachable(s) {
                    continue;
                }
                any = true;
                let entries = match r.situation.source {
                    SituationSource::InitialSteps => Count::Finite(1),
                    _ => {
                        let e = r.situation.source.activator().expect("activator");
                        steps[e.partial][e.step].count
                    }
                };
                if entries == Count::Infinite {
                    unbounded_activator = true;
                }
                total = total.plus(n.times(Count::Finite(r.situation.steps.len() as u64)).times(entries));
            }
            steps[p][s] = if !any {
                StepBound {
                    count: Count::Infinite,
                    reasons: vec![BoundReason::Reentry],
                }
            } else if unbounded_activator && total == Count::Infinite {
                StepBound {
                    count: Count::Infinite,
                    reasons: vec![BoundReason::UnboundedActivator],
                }
            } else {
                StepBound {
                    count: total,
                    reasons: vec![BoundReason::Product],
                }
            };
        }
    }
    let actions = spec
        .partials
        .iter()
        .enumerate()
        .map(|(p, pg)| {
            pg.actions
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sb = pg
                        .step_position(a.step())
                        .map(|s| steps[p][s].clone())
                        .unwrap_or(StepBound {
                            count: Count::ZERO,
                            reasons: vec![BoundReason::Unreachable],
                        });
                    ExecutionBound {
                        action: pg.action_id(i),
                        count: sb.count,
                        reasons: sb.reasons,
                    }
                })
                .collect()
        })
        .collect();
    ExecutionBounds { steps, actions }
}

/// Interval end point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ext {
    NegInf,
    Finite(i64),
    PosInf,
}

impl Ext {
    fn from_i128(x: i128) -> Ext {
        match i64::try_from(x) {
            Ok(v) => Ext::Finite(v),
            Err(_) if x < 0 => Ext::NegInf,
            Err(_) => Ext::PosInf,
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => f.write_str("-inf"),
            Ext::Finite(v) => write!(f, "{v}"),
            Ext::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ext::Finite(v) => s.serialize_i64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Interval {
    pub lo: Ext,
    pub hi: Ext,
}

impl Interval {
    pub const TOP: Interval = Interval {
        lo: Ext::NegInf,
        hi: Ext::PosInf,
    };

    pub fn point(v: i64) -> Interval {
        Interval {
            lo: Ext::Finite(v),
            hi: Ext::Finite(v),
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= Ext::Finite(v) && Ext::Finite(v) <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarApprox {
    Int(Interval),
    Bool(BTreeSet<bool>),
}

impl VarApprox {
    pub fn contains(&self, v: i64) -> bool {
        match self {
            VarApprox::Int(i) => i.contains(v),
            VarApprox::Bool(set) => (v == 0 || v == 1) && set.contains(&(v == 1)),
        }
    }
}

impl fmt::Display for VarApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarApprox::Int(i) => write!(f, "{i}"),
            VarApprox::Bool(set) => {
                let items: Vec<&str> = set.iter().map(|b| if *b { "true" } else { "false" }).collect();
                write!(f, "{{{}}}", items.join(", "))
            }
        }
    }
}

impl Serialize for VarApprox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            VarApprox::Int(i) => i.serialize(s),
            VarApprox::Bool(set) => set.serialize(s),
        }
    }
}

/// How a stored action changes an integer variable `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteEffect {
    /// `v := k`, independent of `v`.
    Constant(i64),
    /// `v := v + c`.
    Shift(i64),
    Opaque,
}

pub fn classify_write(var: &str, value: &ValueExpr) -> WriteEffect {
    let ValueExpr::Int(sum) = value else {
        return WriteEffect::Opaque;
    };
    let (k, coeffs) = sum.linear_form();
    let coeffs: Vec<(String, i64)> = coeffs.into_iter().filter(|(_, c)| *c != 0).collect();
    match coeffs.as_slice() {
        [] => WriteEffect::Constant(k),
        [(name, 1)] if name == var => WriteEffect::Shift(k),
        _ => WriteEffect::Opaque,
    }
}

/// Interval of an integer variable from its initial value and its writers
/// with their execution bounds.
///
/// Any final value is the last value assigned by a constant writer (or the
/// initial value) plus the shifts executed after it, each at most as often as
/// its bound allows. The result is hulled with 0.
pub fn int_interval(init: i64, writers: &[(WriteEffect, Count)]) -> Interval {
    let mut base_lo = init as i128;
    let mut base_hi = init as i128;
    let mut up: Option<i128> = Some(0);
    let mut down: Option<i128> = Some(0);
    for &(effect, count) in writers {
        if count == Count::ZERO {
            continue;
        }
        match effect {
            WriteEffect::Opaque => return Interval::TOP,
            WriteEffect::Constant(k) => {
                base_lo = base_lo.min(k as i128);
                base_hi = base_hi.max(k as i128);
            }
            WriteEffect::Shift(0) => {}
            WriteEffect::Shift(c) => {
                let slot = if c > 0 { &mut up } else { &mut down };
                *slot = match (*slot, count) {
                    (Some(acc), Count::Finite(n)) => (c as i128)
                        .checked_mul(n as i128)
                        .and_then(|x| acc.checked_add(x)),
                    _ => None,
                };
            }
        }
    }
    let lo = match down {
        Some(d) => Ext::from_i128(base_lo + d),
        None => Ext::NegInf,
    };
    let hi = match up {
        Some(u) => Ext::from_i128(base_hi + u),
        None => Ext::PosInf,
    };
    Interval {
        lo: lo.min(Ext::Finite(0)),
        hi: hi.max(Ext::Finite(0)),
    }
}

/// Approximation of every internal and output variable.
pub fn approximate_variables(spec: &GrafcetSpec, bounds: &ExecutionBounds) -> BTreeMap<String, VarApprox> {
    let mut out = BTreeMap::new();
    for v in &spec.variables {
        if v.kind == VarKind::Input {
            continue;
        }
        let mut int_writers = Vec::new();
        let mut bools = BTreeSet::from([v.init_value() != 0]);
        for (p, pg) in spec.partials.iter().enumerate() {
            for (i, a) in pg.actions.iter().enumerate() {
                let count = bounds.action(p, i).count;
                match a {
                    Action::Continuous { var, .. } if var == &v.name => {
                        bools.insert(false);
                        if count != Count::ZERO {
                            bools.insert(true);
                        }
                    }
                    Action::Stored { var, value, .. } if var == &v.name => match v.ty {
                        VarType::Int => int_writers.push((classify_write(var, value), count)),
                        VarType::Bool if count != Count::ZERO => match value {
                            ValueExpr::Bool(Condition::Const(b)) => {
                                bools.insert(*b);
                            }
                            ValueExpr::Int(sum) if sum.vars().next().is_none() => {
                                bools.insert(sum.eval(&|_| 0) != 0);
                            }
                            _ => {
                                bools.insert(false);
                                bools.insert(true);
                            }
                        },
                        VarType::Bool => {}
                    },
                    _ => {}
                }
            }
        }
        let approx = match v.ty {
            VarType::Int => VarApprox::Int(int_interval(v.init_value(), &int_writers)),
            VarType::Bool => VarApprox::Bool(bools),
        };
        out.insert(v.name.clone(), approx);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_value;

    fn fin(lo: i64, hi: i64) -> Interval {
        Interval {
            lo: Ext::Finite(lo),
            hi: Ext::Finite(hi),
        }
    }

    #[test]
    fn classification() {
        let v = |t: &str| parse_value(t, Some(VarType::Int)).unwrap();
        assert_eq!(classify_write("k", &v("5")), WriteEffect::Constant(5));
        assert_eq!(classify_write("k", &v("k + 1")), WriteEffect::Shift(1));
        assert_eq!(classify_write("k", &v("k - 2")), WriteEffect::Shift(-2));
        assert_eq!(classify_write("k", &v("1 + k")), WriteEffect::Shift(1));
        assert_eq!(classify_write("k", &v("2 * w + 1")), WriteEffect::Opaque);
        assert_eq!(classify_write("k", &v("2 * k")), WriteEffect::Opaque);
        assert_eq!(classify_write("k", &v("k - k + 3")), WriteEffect::Constant(3));
    }

    #[test]
    fn increments_accumulate() {
        assert_eq!(int_interval(0, &[(WriteEffect::Shift(1), Count::Finite(4))]), fin(0, 4));
    }

    #[test]
    fn constant_is_hulled_with_zero() {
        assert_eq!(int_interval(0, &[(WriteEffect::Constant(5), Count::Finite(1))]), fin(0, 5));
    }

    #[test]
    fn decrements_go_down() {
        assert_eq!(int_interval(0, &[(WriteEffect::Shift(-1), Count::Finite(2))]), fin(-2, 0));
    }

    #[test]
    fn unbounded_and_opaque() {
        let up = int_interval(0, &[(WriteEffect::Shift(1), Count::Infinite)]);
        assert_eq!(up.lo, Ext::Finite(0));
        assert_eq!(up.hi, Ext::PosInf);
        let down = int_interval(3, &[(WriteEffect::Shift(-2), Count::Infinite)]);
        assert_eq!(down, Interval { lo: Ext::NegInf, hi: Ext::Finite(3) });
        assert_eq!(int_interval(0, &[(WriteEffect::Opaque, Count::Finite(1))]), Interval::TOP);
        assert_eq!(int_interval(0, &[(WriteEffect::Opaque, Count::ZERO)]), fin(0, 0));
    }

    #[test]
    fn reset_then_count() {
        // x := 10 then x := x - 1 up to 3 times, or x := x - 1 from 0.
        let i = int_interval(
            0,
            &[
                (WriteEffect::Constant(10), Count::Finite(1)),
                (WriteEffect::Shift(-1), Count::Finite(3)),
            ],
        );
        assert_eq!(i, fin(-3, 10));
    }

    #[test]
    fn serialization() {
        let i = Interval {
            lo: Ext::NegInf,
            hi: Ext::Finite(4),
        };
        assert_eq!(serde_json::to_string(&i).unwrap(), r#"{"lo":"-inf","hi":4}"#);
        let b = VarApprox::Bool(BTreeSet::from([false, true]));
        assert_eq!(serde_json::to_string(&b).unwrap(), "[false,true]");
    }
}
