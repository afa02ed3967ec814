//! Qualitative capability table and runtime ordering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{run_scenario, ComparisonReport, HarnessError};
use crate::scenario::{EstimatorKind, Scenario};
use crate::smib::MachineState;

/// Initial estimate far from the truth in rotor angle.
pub fn adversarial_xhat0(s: &Scenario) -> MachineState {
    MachineState::new(3.0, s.params.omega0, 0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub unknown_inputs: bool,
    pub attack: bool,
    pub adversarial: bool,
}

impl Variant {
    pub const fn new(unknown_inputs: bool, attack: bool, adversarial: bool) -> Self {
        Self { unknown_inputs, attack, adversarial }
    }

    pub fn all() -> Vec<Variant> {
        let mut v = Vec::with_capacity(8);
        for adversarial in [false, true] {
            for (unknown_inputs, attack) in [(false, false), (true, false), (false, true), (true, true)] {
                v.push(Variant { unknown_inputs, attack, adversarial });
            }
        }
        v
    }

    pub fn name(&self) -> String {
        let family = match (self.unknown_inputs, self.attack) {
            (false, false) => "clean",
            (true, false) => "unknown-inputs",
            (false, true) => "attack",
            (true, true) => "unknown-inputs+attack",
        };
        format!("{family}/{}", if self.adversarial { "adversarial" } else { "nominal" })
    }

    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone().with_unknown_inputs(self.unknown_inputs).with_attack(self.attack);
        if self.adversarial {
            s.xhat0 = adversarial_xhat0(base);
        }
        s.name = format!("{}:{}", base.name, self.name());
        s
    }
}

/// Runs every variant of `base`.
pub fn run_suite(base: &Scenario, repeats: usize) -> Result<BTreeMap<Variant, ComparisonReport>, HarnessError> {
    let mut out = BTreeMap::new();
    for v in Variant::all() {
        out.insert(v, run_scenario(&v.apply(base), repeats)?.report);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tolerance {
    InitialConditions,
    UnknownInputs,
    CyberAttacks,
    Noise,
}

impl Tolerance {
    pub const ALL: [Tolerance; 4] =
        [Tolerance::InitialConditions, Tolerance::UnknownInputs, Tolerance::CyberAttacks, Tolerance::Noise];

    /// Scenario whose tracking verdict measures this tolerance.
    pub fn variant(self) -> Variant {
        match self {
            Tolerance::InitialConditions => Variant::new(false, false, true),
            Tolerance::UnknownInputs => Variant::new(true, false, false),
            Tolerance::CyberAttacks => Variant::new(false, true, false),
            Tolerance::Noise => Variant::new(false, false, false),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Tolerance::InitialConditions => "initial conditions",
            Tolerance::UnknownInputs => "unknown inputs",
            Tolerance::CyberAttacks => "cyber-attacks",
            Tolerance::Noise => "noise",
        }
    }
}

/// Expected capability; `None` means measured and reported only.
pub fn expected(kind: EstimatorKind, t: Tolerance) -> Option<bool> {
    match (kind, t) {
        (_, Tolerance::Noise) => Some(true),
        (EstimatorKind::Lipschitz, _) => Some(true),
        (EstimatorKind::Uio, Tolerance::CyberAttacks) => None,
        (EstimatorKind::Uio, _) => Some(true),
        _ => Some(false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub measured: bool,
    pub expected: Option<bool>,
}

impl Cell {
    pub fn agrees(&self) -> Option<bool> {
        self.expected.map(|e| e == self.measured)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub rows: Vec<(EstimatorKind, Vec<(Tolerance, Cell)>)>,
}

impl Table1 {
    pub fn cell(&self, kind: EstimatorKind, t: Tolerance) -> Option<Cell> {
        self.rows.iter().find(|(k, _)| *k == kind)?.1.iter().find(|(tt, _)| *tt == t).map(|(_, c)| *c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<10}", "");
        for t in Tolerance::ALL {
            let _ = write!(s, "{:>22}", t.label());
        }
        s.push('\n');
        for (k, cells) in &self.rows {
            let _ = write!(s, "{:<10}", k.name());
            for (_, c) in cells {
                let m = if c.measured { "yes" } else { "no" };
                let verdict = match c.agrees() {
                    Some(true) => "ok",
                    Some(false) => "MISMATCH",
                    None => "reported",
                };
                let _ = write!(s, "{:>22}", format!("{m} ({verdict})"));
            }
            s.push('\n');
        }
        s
    }
}

/// Evaluates the tolerance table from per-variant reports. All eight
/// variants must be present.
pub fn table1_check(reports: &BTreeMap<Variant, ComparisonReport>) -> Result<Table1, HarnessError> {
    for v in Variant::all() {
        if !reports.contains_key(&v) {
            return Err(HarnessError::MissingScenario(v.name()));
        }
    }
    let kinds: Vec<EstimatorKind> = EstimatorKind::ALL
        .into_iter()
        .filter(|k| reports.values().all(|r| r.get(*k).is_some()))
        .collect();
    let rows = kinds
        .into_iter()
        .map(|k| {
            let cells = Tolerance::ALL
                .into_iter()
                .map(|t| {
                    let measured = reports[&t.variant()].get(k).is_some_and(|e| e.tracks());
                    (t, Cell { measured, expected: expected(k, t) })
                })
                .collect();
            (k, cells)
        })
        .collect();
    Ok(Table1 { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeOrdering {
    /// Fastest first.
    pub ordered: Vec<(EstimatorKind, f64)>,
    pub holds: bool,
    pub diagnostic: String,
}

/// Checks `lipschitz < ckf < ukf` on wall-clock runtime.
pub fn runtime_ordering(report: &ComparisonReport) -> RuntimeOrdering {
    let wanted = [EstimatorKind::Lipschitz, EstimatorKind::Ckf, EstimatorKind::Ukf];
    let mut found = Vec::new();
    for k in wanted {
        match report.get(k) {
            Some(e) => found.push((k, e.runtime_s)),
            None => {
                return RuntimeOrdering { ordered: found, holds: false, diagnostic: format!("no {k} trace") };
            }
        }
    }
    let holds = found[0].1 < found[1].1 && found[1].1 < found[2].1;
    let listing: Vec<String> = found.iter().map(|(k, t)| format!("{k} {t:.6} s")).collect();
    let diagnostic = if holds {
        format!("ordering holds: {}", listing.join(" < "))
    } else {
        format!("expected lipschitz < ckf < ukf, measured {}", listing.join(", "))
    };
    let mut ordered = found;
    ordered.sort_by(|a, b| a.1.total_cmp(&b.1));
    RuntimeOrdering { ordered, holds, diagnostic }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::EstimatorSummary;

    fn summary(kind: EstimatorKind, runtime: f64, tracks: bool) -> EstimatorSummary {
        EstimatorSummary {
            estimator: kind,
            diverged_at: None,
            divergence_reason: None,
            rmse_full: vec![0.0; 4],
            rmse_final: vec![if tracks { 0.0 } else { 1.0 }; 4],
            threshold: vec![0.5; 4],
            convergence_time: None,
            attack_rmse: vec![0.0; 4],
            runtime_s: runtime,
        }
    }

    fn report(r: &[(EstimatorKind, f64)]) -> ComparisonReport {
        ComparisonReport { scenario: "t".into(), entries: r.iter().map(|(k, t)| summary(*k, *t, true)).collect() }
    }

    #[test]
    fn reference_timings_are_ordered() {
        for row in [[0.76, 3.28, 6.30], [0.76, 3.27, 6.27]] {
            let r = report(&[
                (EstimatorKind::Lipschitz, row[0]),
                (EstimatorKind::Ckf, row[1]),
                (EstimatorKind::Ukf, row[2]),
            ]);
            let o = runtime_ordering(&r);
            assert!(o.holds, "{}", o.diagnostic);
            assert_eq!(o.ordered[0].0, EstimatorKind::Lipschitz);
        }
    }

    #[test]
    fn equal_timings_fail_with_diagnostic() {
        let r = report(&[(EstimatorKind::Lipschitz, 1.0), (EstimatorKind::Ckf, 1.0), (EstimatorKind::Ukf, 1.0)]);
        let o = runtime_ordering(&r);
        assert!(!o.holds);
        assert!(o.diagnostic.contains("expected lipschitz < ckf < ukf"));
        let partial = report(&[(EstimatorKind::Ckf, 1.0)]);
        assert_eq!(runtime_ordering(&partial).diagnostic, "no lipschitz trace");
    }

    #[test]
    fn missing_variant_is_named() {
        let mut m = BTreeMap::new();
        for v in Variant::all().into_iter().skip(1) {
            m.insert(v, report(&[(EstimatorKind::Ckf, 1.0)]));
        }
        match table1_check(&m) {
            Err(HarnessError::MissingScenario(name)) => assert_eq!(name, "clean/nominal"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_marks_expectations() {
        let mut m = BTreeMap::new();
        for v in Variant::all() {
            let ckf_tracks = !v.unknown_inputs && !v.attack && !v.adversarial;
            m.insert(
                v,
                ComparisonReport {
                    scenario: v.name(),
                    entries: vec![
                        summary(EstimatorKind::Ckf, 1.0, ckf_tracks),
                        summary(EstimatorKind::Uio, 1.0, !v.attack),
                    ],
                },
            );
        }
        let t = table1_check(&m).unwrap();
        for tol in Tolerance::ALL {
            assert_eq!(t.cell(EstimatorKind::Ckf, tol).unwrap().agrees(), Some(true));
        }
        assert_eq!(t.cell(EstimatorKind::Uio, Tolerance::CyberAttacks).unwrap().agrees(), None);
        assert!(t.to_text().contains("reported"));
    }
}
