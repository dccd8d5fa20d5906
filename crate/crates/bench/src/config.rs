use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    /// Sparse LU factorisation without dropping.
    Direct,
    Fgmres,
    /// Residual-gated constrained GMRES.
    Cgmres,
    /// Constrained GMRES adding one constraint per iteration.
    #[value(name = "cgmres-proto")]
    CgmresProto,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Fgmres => "fgmres",
            SolverKind::Cgmres => "cgmres",
            SolverKind::CgmresProto => "cgmres-proto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondKind {
    None,
    Jacobi,
    Ilut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialGuess {
    Zero,
    /// The previous state (or previous stage derivatives).
    Previous,
}

/// Which constraints a constrained solver imposes, and in what order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintOrder {
    /// All of the problem's constraints in their natural order.
    All,
    Labels(Vec<String>),
}

impl ConstraintOrder {
    pub fn none() -> Self {
        ConstraintOrder::Labels(Vec::new())
    }

    /// Parses `all`, `none`, or a comma-separated list of labels.
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s {
            "all" => Ok(ConstraintOrder::All),
            "none" | "" => Ok(ConstraintOrder::none()),
            _ => {
                let labels: Vec<String> = s.split(',').map(|l| l.trim().to_string()).collect();
                if labels.iter().any(|l| l.is_empty()) {
                    return Err(format!("empty label in constraint list '{s}'"));
                }
                for (i, l) in labels.iter().enumerate() {
                    if labels[..i].contains(l) {
                        return Err(format!("constraint '{l}' listed twice"));
                    }
                }
                Ok(ConstraintOrder::Labels(labels))
            }
        }
    }
}

/// Everything needed to solve one step system.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub solver: SolverKind,
    pub precond: PrecondKind,
    /// Absolute residual tolerance.
    pub tol: f64,
    /// Gate threshold for `cgmres`; `None` means `10 * tol`.
    pub epsilon: Option<f64>,
    /// Maximum Krylov dimension.
    pub max_iters: usize,
    pub ilut_drop: f64,
    pub ilut_fill: f64,
    pub order: ConstraintOrder,
    pub guess: InitialGuess,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            solver: SolverKind::Cgmres,
            precond: PrecondKind::None,
            tol: 1e-6,
            epsilon: None,
            max_iters: 500,
            ilut_drop: 1e-4,
            ilut_fill: 10.0,
            order: ConstraintOrder::All,
            guess: InitialGuess::Zero,
        }
    }
}

impl SolveParams {
    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(10.0 * self.tol)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(format!("--tol must be positive, got {}", self.tol));
        }
        if self.epsilon() < self.tol || self.epsilon().is_nan() {
            return Err(format!(
                "--epsilon ({}) must be at least --tol ({})",
                self.epsilon(),
                self.tol
            ));
        }
        if self.max_iters == 0 {
            return Err("--iters must be at least 1".into());
        }
        if !(self.ilut_drop >= 0.0) {
            return Err(format!("--ilut-drop must be non-negative, got {}", self.ilut_drop));
        }
        if !(self.ilut_fill >= 1.0) {
            return Err(format!("--ilut-fill must be at least 1, got {}", self.ilut_fill));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_parsing() {
        assert_eq!(ConstraintOrder::parse("all").unwrap(), ConstraintOrder::All);
        assert_eq!(ConstraintOrder::parse("none").unwrap(), ConstraintOrder::none());
        assert_eq!(
            ConstraintOrder::parse("mass, energy").unwrap(),
            ConstraintOrder::Labels(vec!["mass".into(), "energy".into()])
        );
        assert!(ConstraintOrder::parse("mass,,energy").is_err());
        assert!(ConstraintOrder::parse("mass,mass").is_err());
    }

    #[test]
    fn epsilon_defaults_to_ten_tol() {
        let p = SolveParams {
            tol: 1e-7,
            ..Default::default()
        };
        assert_eq!(p.epsilon(), 1e-6);
        assert!(p.validate().is_ok());
        let bad = SolveParams {
            epsilon: Some(1e-8),
            ..p
        };
        assert!(bad.validate().is_err());
    }
}
