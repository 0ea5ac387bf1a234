use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AaaResult, ReflectiveRecord, TrackingResult};
use crate::doxastics::DoxasticAttitude;

/// Default pass rate both tracking conditions must reach.
pub const DEFAULT_TAU_TRACK: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Knowledge,
    Gettiered,
    UnjustifiedTrueBelief,
    Disbelief,
    FalseBelief,
    Suspension,
    Ignorance,
}

impl VerdictKind {
    pub const ALL: [VerdictKind; 7] = [
        VerdictKind::Knowledge,
        VerdictKind::Gettiered,
        VerdictKind::UnjustifiedTrueBelief,
        VerdictKind::Disbelief,
        VerdictKind::FalseBelief,
        VerdictKind::Suspension,
        VerdictKind::Ignorance,
    ];
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDiagnostics {
    pub truth: bool,
    pub attitude: DoxasticAttitude,
    pub justified: bool,
    pub tau_track: f64,
    /// Absent when tracking was not sampled.
    pub tracking: Option<TrackingResult>,
    pub aaa: Option<AaaResult>,
    pub reflective: Option<ReflectiveRecord>,
}

impl VerdictDiagnostics {
    pub fn tracking_passed(&self) -> bool {
        self.tracking.is_some_and(|t| t.passes(self.tau_track))
    }

    /// Counterfactually safe (tracking holds) and not lucky (apt).
    pub fn safe_not_lucky(&self) -> bool {
        self.tracking_passed() && self.aaa.is_some_and(|a| a.apt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicVerdict {
    pub kind: VerdictKind,
    pub diagnostics: VerdictDiagnostics,
}

impl EpistemicVerdict {
    pub fn with_aaa(mut self, aaa: AaaResult) -> Self {
        self.diagnostics.aaa = Some(aaa);
        self
    }

    pub fn with_reflective(mut self, r: ReflectiveRecord) -> Self {
        self.diagnostics.reflective = Some(r);
        self
    }

    pub fn is_knowledge(&self) -> bool {
        self.kind == VerdictKind::Knowledge
    }
}

/// Total verdict over the diagnostic tuple.
///
/// Attitude dominates: Suspension and Ignorance classify as themselves and
/// every Disbelief attitude classifies as Disbelief. A belief is false,
/// unjustified, Gettiered (justified but either tracking rate below
/// `tau_track`, or tracking unsampled) or Knowledge.
pub fn classify(
    truth: bool,
    attitude: DoxasticAttitude,
    justified: bool,
    tracking: Option<TrackingResult>,
    tau_track: f64,
) -> EpistemicVerdict {
    let diagnostics = VerdictDiagnostics {
        truth,
        attitude,
        justified,
        tau_track,
        tracking,
        aaa: None,
        reflective: None,
    };
    let kind = match attitude {
        DoxasticAttitude::Ignorance => VerdictKind::Ignorance,
        DoxasticAttitude::Suspension => VerdictKind::Suspension,
        DoxasticAttitude::Disbelief => VerdictKind::Disbelief,
        DoxasticAttitude::Belief if !truth => VerdictKind::FalseBelief,
        DoxasticAttitude::Belief if !justified => VerdictKind::UnjustifiedTrueBelief,
        DoxasticAttitude::Belief if diagnostics.tracking_passed() => VerdictKind::Knowledge,
        DoxasticAttitude::Belief => VerdictKind::Gettiered,
    };
    EpistemicVerdict { kind, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATTITUDES: [DoxasticAttitude; 4] = [
        DoxasticAttitude::Belief,
        DoxasticAttitude::Disbelief,
        DoxasticAttitude::Suspension,
        DoxasticAttitude::Ignorance,
    ];

    fn expected(t: bool, a: DoxasticAttitude, j: bool, track: Option<bool>) -> VerdictKind {
        use DoxasticAttitude as A;
        use VerdictKind as V;
        match (t, a, j, track) {
            (_, A::Ignorance, _, _) => V::Ignorance,
            (_, A::Suspension, _, _) => V::Suspension,
            (_, A::Disbelief, _, _) => V::Disbelief,
            (false, A::Belief, _, _) => V::FalseBelief,
            (true, A::Belief, false, _) => V::UnjustifiedTrueBelief,
            (true, A::Belief, true, Some(true)) => V::Knowledge,
            (true, A::Belief, true, _) => V::Gettiered,
        }
    }

    #[test]
    fn lattice_is_total_and_matches_the_table() {
        let rates = [0.0, 0.5, 0.89, 0.9, 1.0];
        let mut seen = std::collections::BTreeSet::new();
        for t in [true, false] {
            for a in ATTITUDES {
                for j in [true, false] {
                    let mut tracks: Vec<Option<TrackingResult>> = vec![None];
                    for c in rates {
                        for d in rates {
                            tracks.push(Some(TrackingResult::new(c, d, 32)));
                        }
                    }
                    for tr in tracks {
                        let v = classify(t, a, j, tr, DEFAULT_TAU_TRACK);
                        let pass = tr.map(|r| {
                            r.condition_c_pass_rate >= 0.9 && r.condition_d_pass_rate >= 0.9
                        });
                        assert_eq!(v.kind, expected(t, a, j, pass), "{t} {a:?} {j} {tr:?}");
                        assert_eq!(classify(t, a, j, tr, DEFAULT_TAU_TRACK), v);
                        if v.kind == VerdictKind::Gettiered {
                            assert!(v.diagnostics.truth && v.diagnostics.justified);
                            assert_eq!(v.diagnostics.attitude, DoxasticAttitude::Belief);
                        }
                        seen.insert(v.kind);
                    }
                }
            }
        }
        assert_eq!(seen.len(), VerdictKind::ALL.len());
    }

    #[test]
    fn named_cells() {
        let pass = Some(TrackingResult::new(1.0, 1.0, 32));
        let fail_c = Some(TrackingResult::new(0.0, 1.0, 32));
        assert_eq!(
            classify(true, DoxasticAttitude::Belief, true, pass, 0.9).kind,
            VerdictKind::Knowledge
        );
        assert_eq!(
            classify(false, DoxasticAttitude::Belief, true, pass, 0.9).kind,
            VerdictKind::FalseBelief
        );
        assert_eq!(
            classify(true, DoxasticAttitude::Belief, true, fail_c, 0.9).kind,
            VerdictKind::Gettiered
        );
    }

    #[test]
    fn verdict_names_serialize_verbatim() {
        for k in VerdictKind::ALL {
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }
}
