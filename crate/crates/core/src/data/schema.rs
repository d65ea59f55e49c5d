use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of dyadic input variables.
pub const NUM_VARIABLES: usize = 7;

/// The seven dyadic inputs, in canonical input-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Allies,
    Contiguity,
    MajorPower,
    Distance,
    Capability,
    Democracy,
    Dependency,
}

impl Variable {
    pub const ALL: [Variable; NUM_VARIABLES] = [
        Variable::Allies,
        Variable::Contiguity,
        Variable::MajorPower,
        Variable::Distance,
        Variable::Capability,
        Variable::Democracy,
        Variable::Dependency,
    ];

    /// The four variables a policy intervention can move.
    pub const CONTROLLABLE: [Variable; 4] = [
        Variable::Democracy,
        Variable::Allies,
        Variable::Capability,
        Variable::Dependency,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Variable> {
        Self::ALL.get(i).copied()
    }

    /// CSV column name.
    pub fn name(self) -> &'static str {
        match self {
            Variable::Allies => "allies",
            Variable::Contiguity => "contiguity",
            Variable::MajorPower => "major_power",
            Variable::Distance => "distance",
            Variable::Capability => "capability",
            Variable::Democracy => "democracy",
            Variable::Dependency => "dependency",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variable::Allies => "Allies",
            Variable::Contiguity => "Contiguity",
            Variable::MajorPower => "MajorPower",
            Variable::Distance => "Distance",
            Variable::Capability => "Capability",
            Variable::Democracy => "Democracy",
            Variable::Dependency => "Dependency",
        }
    }

    /// Accepts the column name or the display label, case-insensitively.
    pub fn parse(s: &str) -> Option<Variable> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s) || v.label().eq_ignore_ascii_case(s))
    }

    pub fn is_controllable(self) -> bool {
        Self::CONTROLLABLE.contains(&self)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Binary,
    Ordinal,
    Continuous,
}

/// Which end of a variable's range is associated with peace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeaceOrientation {
    HighValueFavorsPeace,
    LowValueFavorsPeace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub variable: Variable,
    pub kind: VariableKind,
    pub domain_min: f64,
    pub domain_max: f64,
    pub peace_orientation: PeaceOrientation,
    pub controllable: bool,
}

impl VariableSpec {
    pub fn contains(&self, x: f64) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self.kind {
            VariableKind::Binary => x == 0.0 || x == 1.0,
            _ => x >= self.domain_min && x <= self.domain_max,
        }
    }
}

/// Ordered list of the seven variable specifications.
///
/// Distance and Capability are base-10 logarithms computed upstream
/// (kilometres between capitals, and the stronger/weaker power ratio).
/// Democracy is the dyad minimum on the -10..10 polity scale and Dependency
/// is the dyad minimum of bilateral trade over GDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    specs: Vec<VariableSpec>,
}

impl VariableSchema {
    pub fn standard() -> Self {
        use PeaceOrientation::*;
        use VariableKind::*;
        let spec = |variable, kind, domain_min, domain_max, peace_orientation| VariableSpec {
            variable,
            kind,
            domain_min,
            domain_max,
            peace_orientation,
            controllable: Variable::is_controllable(variable),
        };
        VariableSchema {
            specs: vec![
                spec(Variable::Allies, Binary, 0.0, 1.0, HighValueFavorsPeace),
                spec(Variable::Contiguity, Binary, 0.0, 1.0, LowValueFavorsPeace),
                spec(Variable::MajorPower, Binary, 0.0, 1.0, LowValueFavorsPeace),
                spec(Variable::Distance, Continuous, 0.0, 5.0, HighValueFavorsPeace),
                spec(Variable::Capability, Continuous, 0.0, 10.0, HighValueFavorsPeace),
                spec(Variable::Democracy, Ordinal, -10.0, 10.0, HighValueFavorsPeace),
                spec(Variable::Dependency, Continuous, 0.0, 1.0, HighValueFavorsPeace),
            ],
        }
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn spec(&self, v: Variable) -> &VariableSpec {
        &self.specs[v.index()]
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.variable.name().to_string()).collect()
    }
}

impl Default for VariableSchema {
    fn default() -> Self {
        Self::standard()
    }
}
