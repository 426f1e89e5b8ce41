//! Solver-neutral MILP model container.
//!
//! A [`MilpModel`] holds typed variables with bounds, linear constraints,
//! first-class indicator constraints and an optional linear objective.
//! Indicators are stored symbolically; it is up to the solver to honor them.

mod lp_format;

use std::fmt;

use crate::error::MilpError;

pub use lp_format::format_number;

/// Dense, insertion-ordered variable handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub usize);

/// Handle of an indicator constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndicatorId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Ge => lhs >= rhs - tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
        }
    }

    /// Amount by which `lhs rel rhs` is violated (0 when satisfied).
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => (lhs - rhs).max(0.0),
            Relation::Ge => (rhs - lhs).max(0.0),
            Relation::Eq => (lhs - rhs).abs(),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// `Σ coef·var  rel  rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(f64, VarId)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(f64, VarId)>, relation: Relation, rhs: f64) -> Self {
        LinearConstraint {
            terms,
            relation,
            rhs,
        }
    }

    pub fn le(terms: Vec<(f64, VarId)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Le, rhs)
    }

    pub fn ge(terms: Vec<(f64, VarId)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Ge, rhs)
    }

    pub fn eq(terms: Vec<(f64, VarId)>, rhs: f64) -> Self {
        Self::new(terms, Relation::Eq, rhs)
    }

    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, v)| c * values[v.0]).sum()
    }

    pub fn violation(&self, values: &[f64]) -> f64 {
        self.relation.violation(self.lhs(values), self.rhs)
    }
}

/// `binary = active → implied`
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorConstraint {
    pub binary: VarId,
    pub active: bool,
    pub implied: LinearConstraint,
}

impl IndicatorConstraint {
    pub fn active_value(&self) -> f64 {
        if self.active {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: Sense,
    pub terms: Vec<(f64, VarId)>,
    pub constant: f64,
}

impl Objective {
    pub fn value(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(c, v)| c * values[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Named<T> {
    pub name: String,
    pub item: T,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    name: String,
    variables: Vec<Variable>,
    constraints: Vec<Named<LinearConstraint>>,
    indicators: Vec<Named<IndicatorConstraint>>,
    objective: Option<Objective>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarId, MilpError> {
        let name = name.into();
        check_bounds(kind, lower, upper, &name)?;
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            kind,
            lower,
            upper,
            name,
        });
        Ok(id)
    }

    pub fn add_constraint(
        &mut self,
        constraint: LinearConstraint,
    ) -> Result<ConstraintId, MilpError> {
        let name = format!("c{}", self.constraints.len());
        self.add_named_constraint(name, constraint)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        constraint: LinearConstraint,
    ) -> Result<ConstraintId, MilpError> {
        self.check_linear(&constraint)?;
        let id = ConstraintId(self.constraints.len());
        self.constraints.push(Named {
            name: name.into(),
            item: constraint,
        });
        Ok(id)
    }

    pub fn add_indicator(
        &mut self,
        binary: VarId,
        active: bool,
        implied: LinearConstraint,
    ) -> Result<IndicatorId, MilpError> {
        let name = format!("ind{}", self.indicators.len());
        self.add_named_indicator(name, binary, active, implied)
    }

    pub fn add_named_indicator(
        &mut self,
        name: impl Into<String>,
        binary: VarId,
        active: bool,
        implied: LinearConstraint,
    ) -> Result<IndicatorId, MilpError> {
        let var = self.variable_checked(binary)?;
        if var.kind != VarKind::Binary {
            return Err(MilpError::NotBinary(var.name.clone()));
        }
        self.check_linear(&implied)?;
        let id = IndicatorId(self.indicators.len());
        self.indicators.push(Named {
            name: name.into(),
            item: IndicatorConstraint {
                binary,
                active,
                implied,
            },
        });
        Ok(id)
    }

    /// Replaces the bounds of `var` and returns the previous `(lower, upper)`.
    pub fn set_bounds(
        &mut self,
        var: VarId,
        lower: f64,
        upper: f64,
    ) -> Result<(f64, f64), MilpError> {
        let v = self.variable_checked(var)?;
        check_bounds(v.kind, lower, upper, &v.name)?;
        let v = &mut self.variables[var.0];
        let previous = (v.lower, v.upper);
        v.lower = lower;
        v.upper = upper;
        Ok(previous)
    }

    pub fn set_objective(
        &mut self,
        sense: Sense,
        terms: Vec<(f64, VarId)>,
        constant: f64,
    ) -> Result<(), MilpError> {
        for &(c, v) in &terms {
            self.variable_checked(v)?;
            if !c.is_finite() {
                return Err(MilpError::NonFinite(format!(
                    "objective coefficient of {}",
                    self.variables[v.0].name
                )));
            }
        }
        self.objective = Some(Objective {
            sense,
            terms,
            constant,
        });
        Ok(())
    }

    pub fn clear_objective(&mut self) {
        self.objective = None;
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn constraints(&self) -> impl ExactSizeIterator<Item = &LinearConstraint> + '_ {
        self.constraints.iter().map(|c| &c.item)
    }

    pub fn constraint(&self, id: ConstraintId) -> &LinearConstraint {
        &self.constraints[id.0].item
    }

    /// Linear constraint by name, if any.
    pub fn constraint_by_name(&self, name: &str) -> Option<&LinearConstraint> {
        self.constraints
            .iter()
            .find(|c| c.name == name)
            .map(|c| &c.item)
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn indicators(&self) -> impl ExactSizeIterator<Item = &IndicatorConstraint> + '_ {
        self.indicators.iter().map(|c| &c.item)
    }

    pub fn num_indicators(&self) -> usize {
        self.indicators.len()
    }

    /// Largest violation of bounds, linear rows, integrality and active
    /// indicators by `values`. Returns 0 for a satisfying assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        assert_eq!(
            values.len(),
            self.variables.len(),
            "assignment length mismatch"
        );
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind.is_integral() {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for c in self.constraints() {
            worst = worst.max(c.violation(values));
        }
        for ind in self.indicators() {
            if (values[ind.binary.0] - ind.active_value()).abs() <= 0.5 {
                worst = worst.max(ind.implied.violation(values));
            }
        }
        worst
    }

    pub fn export_lp(&self) -> String {
        lp_format::write_lp(self)
    }

    fn variable_checked(&self, id: VarId) -> Result<&Variable, MilpError> {
        self.variables
            .get(id.0)
            .ok_or(MilpError::UnknownVariable(id.0))
    }

    fn check_linear(&self, c: &LinearConstraint) -> Result<(), MilpError> {
        let mut seen = vec![false; self.variables.len()];
        for &(coef, v) in &c.terms {
            let var = self.variable_checked(v)?;
            if seen[v.0] {
                return Err(MilpError::DuplicateTerm(var.name.clone()));
            }
            seen[v.0] = true;
            if !coef.is_finite() {
                return Err(MilpError::NonFinite(format!("coefficient of {}", var.name)));
            }
        }
        if !c.rhs.is_finite() {
            return Err(MilpError::NonFinite("right-hand side".into()));
        }
        Ok(())
    }
}

fn check_bounds(kind: VarKind, lower: f64, upper: f64, name: &str) -> Result<(), MilpError> {
    if lower.is_nan()
        || upper.is_nan()
        || lower > upper
        || lower == f64::INFINITY
        || upper == f64::NEG_INFINITY
    {
        return Err(MilpError::InvalidBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
        return Err(MilpError::InvalidBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_variable_gets_id_zero() {
        let mut m = MilpModel::new("m");
        assert_eq!(
            m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap(),
            VarId(0)
        );
        assert_eq!(
            m.add_variable(VarKind::Binary, 0.0, 1.0, "z").unwrap(),
            VarId(1)
        );
    }

    #[test]
    fn rejects_inverted_bounds() {
        let mut m = MilpModel::new("m");
        assert!(matches!(
            m.add_variable(VarKind::Continuous, 1.0, 0.0, "x"),
            Err(MilpError::InvalidBounds { .. })
        ));
        assert!(m.add_variable(VarKind::Binary, 0.0, 2.0, "z").is_err());
        assert_eq!(m.num_variables(), 0);
    }

    #[test]
    fn constraint_validation() {
        let mut m = MilpModel::new("m");
        let x = m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let y = m.add_variable(VarKind::Continuous, 0.0, 1.0, "y").unwrap();
        let c = LinearConstraint::le(vec![(1.0, x), (1.0, y)], 1.0);
        assert_eq!(m.add_constraint(c.clone()).unwrap(), ConstraintId(0));
        assert_eq!(m.constraint(ConstraintId(0)), &c);

        let dup = LinearConstraint::le(vec![(1.0, x), (2.0, x)], 1.0);
        assert!(matches!(
            m.add_constraint(dup),
            Err(MilpError::DuplicateTerm(_))
        ));
        let unknown = LinearConstraint::le(vec![(1.0, VarId(7))], 1.0);
        assert!(matches!(
            m.add_constraint(unknown),
            Err(MilpError::UnknownVariable(7))
        ));
        assert_eq!(m.num_constraints(), 1);
    }

    #[test]
    fn indicator_requires_binary() {
        let mut m = MilpModel::new("m");
        let x = m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let s = m.add_variable(VarKind::Continuous, 0.0, 1.0, "s").unwrap();
        let z = m.add_variable(VarKind::Binary, 0.0, 1.0, "z").unwrap();
        m.add_indicator(z, true, LinearConstraint::le(vec![(1.0, x)], 0.0))
            .unwrap();
        m.add_indicator(z, false, LinearConstraint::le(vec![(1.0, s)], 0.0))
            .unwrap();
        assert_eq!(m.num_indicators(), 2);
        assert!(matches!(
            m.add_indicator(x, true, LinearConstraint::le(vec![(1.0, s)], 0.0)),
            Err(MilpError::NotBinary(_))
        ));
    }

    #[test]
    fn set_bounds_round_trip() {
        let mut m = MilpModel::new("m");
        let x = m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let before = m.export_lp();
        let prev = m.set_bounds(x, 0.9, 0.9).unwrap();
        assert_eq!(prev, (0.0, 1.0));
        assert_ne!(m.export_lp(), before);
        m.set_bounds(x, prev.0, prev.1).unwrap();
        assert_eq!(m.export_lp(), before);
        assert!(m.set_bounds(x, 2.0, 1.0).is_err());
        assert_eq!(m.variable(x).lower, 0.0);
    }

    #[test]
    fn max_violation_checks_active_indicators_only() {
        let mut m = MilpModel::new("m");
        let x = m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let z = m.add_variable(VarKind::Binary, 0.0, 1.0, "z").unwrap();
        m.add_indicator(z, true, LinearConstraint::le(vec![(1.0, x)], 0.0))
            .unwrap();
        assert_eq!(m.max_violation(&[0.5, 0.0]), 0.0);
        assert_eq!(m.max_violation(&[0.5, 1.0]), 0.5);
        assert_eq!(m.max_violation(&[0.0, 0.5]), 0.5);
    }
}
