use std::fmt;

/// Process exit status for a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Input = 2,
    Numerical = 3,
    PartialSimulation = 4,
}

/// Marks an error chain with its exit status.
#[derive(Debug)]
pub struct Tagged(pub ExitKind);

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            ExitKind::Input => write!(f, "input error"),
            ExitKind::Numerical => write!(f, "numerical failure"),
            ExitKind::PartialSimulation => write!(f, "some replications failed"),
        }
    }
}

impl std::error::Error for Tagged {}

pub fn input_error(e: anyhow::Error) -> anyhow::Error {
    e.context(Tagged(ExitKind::Input))
}

/// Core library errors are numerical or input errors by kind.
pub fn core_error(e: twoway::Error) -> anyhow::Error {
    let kind = if e.is_numerical() { ExitKind::Numerical } else { ExitKind::Input };
    anyhow::Error::from(e).context(Tagged(kind))
}

pub fn exit_kind(e: &anyhow::Error) -> ExitKind {
    if let Some(t) = e.downcast_ref::<Tagged>() {
        return t.0;
    }
    match e.chain().find_map(|c| c.downcast_ref::<twoway::Error>()) {
        Some(c) if c.is_numerical() => ExitKind::Numerical,
        _ => ExitKind::Input,
    }
}
