//! Collapse-region topology and probability-weight updates triggered by
//! measurements: single cones, nested stacks, intersecting cones,
//! complement-rule renormalization, and the in-transit ledger on null
//! generators.

mod ledger;
mod scenario;
mod weights;

pub use ledger::{transit_ledger, verify_flow_balance, TransitEntry, TransitLedger};
pub use scenario::Scenario;
pub use weights::{
    apply_measurement, conditioned_weight, sequential_apply, LineProfile, WeightJump, WeightMap,
};

use crate::geometry::{CausalClass, Event, DEFAULT_EPS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollapseError {
    #[error("geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("no measurements in the structure")]
    EmptyStructure,
    #[error("at most 64 measurements are supported, got {0}")]
    TooManyMeasurements(usize),
    #[error("unknown worldline `{0}` referenced by a measurement")]
    UnknownTarget(String),
    #[error("measurement {index}: apex {apex:?} does not lie on target `{target}`")]
    ApexOffTarget {
        index: usize,
        apex: Event,
        target: String,
    },
    #[error("inconsistent outcomes: measurements {first} and {second} both report Found")]
    TwoFound { first: usize, second: usize },
    #[error("inconsistent outcomes on line `{line}`: found and null on the same card")]
    FoundAndNullSameLine { line: String },
    #[error("measurement {index}: null outcome on `{line}` whose weight is already 1")]
    NullOnCertainLine { index: usize, line: String },
    #[error("measurement {index}: found outcome on `{line}` whose weight is already 0")]
    FoundOnExcludedLine { index: usize, line: String },
    #[error("all cards excluded: null outcomes exhaust the distribution")]
    AllExcluded,
    #[error("weight map jump at {at:?} on `{line}` lies on no collapse cone")]
    JumpOffCone { at: Event, line: String },
    #[error("scenario: {0}")]
    Invalid(String),
    #[error("structure is not nested: apices {first} and {second} are not timelike-ordered")]
    NotNested { first: usize, second: usize },
}

/// Result of an inspection: the card was found there, or it was not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Found,
    Null,
}

/// A measurement: an apex spacetime point on a target worldline together
/// with its outcome. Triggers a collapse along the apex's past light cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub apex: Event,
    pub target: String,
    pub outcome: Outcome,
}

impl MeasurementEvent {
    pub fn new(apex: Event, target: impl Into<String>, outcome: Outcome) -> Self {
        MeasurementEvent {
            apex,
            target: target.into(),
            outcome,
        }
    }
}

/// Which measurements' absolute pasts contain a queried point, as a bitmask
/// over measurement ordinals.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct CellSignature {
    bits: u64,
    n: u32,
}

impl CellSignature {
    pub fn empty(n: usize) -> Self {
        CellSignature { bits: 0, n: n as u32 }
    }

    pub fn full(n: usize) -> Self {
        let bits = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        CellSignature { bits, n: n as u32 }
    }

    pub fn insert(&mut self, i: usize) {
        self.bits |= 1 << i;
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits & (1 << i) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full(self.n as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.n as usize).filter(|&i| self.contains(i)).collect()
    }
}

impl std::fmt::Display for CellSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (pos, i) in self.indices().into_iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl std::fmt::Debug for CellSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Display::fmt(self, f)
    }
}

/// Signature plus flags for measurements whose cone the point sits on
/// (within tolerance). Boundary points count as uncollapsed — collapse runs
/// along the cone, not on it — but are flagged so callers can see the
/// ambiguity.
#[derive(Clone, Copy, Debug)]
pub struct CellQuery {
    pub signature: CellSignature,
    pub boundary: CellSignature,
}

impl CellQuery {
    pub fn on_boundary(&self) -> bool {
        !self.boundary.is_empty()
    }
}

/// Where a point sits relative to the whole collapse structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    /// Inside every apex's absolute past (the paper's K-minus).
    Uncollapsed,
    /// Outside the closure of every absolute past (K-plus).
    FullyCollapsed,
    /// Affected by some but not all measurements.
    Transitional(CellSignature),
}

#[derive(Clone, Copy, Debug)]
pub struct RegionQuery {
    pub region: Region,
    pub boundary: CellSignature,
}

/// Causal order of a nested stack of cones, or the first offending pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NestedOrder {
    /// Measurement ordinals from the innermost (earliest) cone outward.
    Nested(Vec<usize>),
    NotNested { first: usize, second: usize },
}

#[derive(Clone, Copy, Debug)]
pub struct LayerQuery {
    /// Number of cones whose absolute past does not contain the point;
    /// layer 0 is the uncollapsed base.
    pub layer: usize,
    pub boundary: CellSignature,
}

/// The collapse topology of a set of measurement apices: membership
/// predicates for the uncollapsed intersection, the fully collapsed
/// complement, and the transitional cells between them.
#[derive(Clone, Debug)]
pub struct CollapseStructure {
    apices: Vec<Event>,
    eps: f64,
}

impl CollapseStructure {
    pub fn from_apices(apices: Vec<Event>) -> Result<Self, CollapseError> {
        if apices.len() > 64 {
            return Err(CollapseError::TooManyMeasurements(apices.len()));
        }
        Ok(CollapseStructure {
            apices,
            eps: DEFAULT_EPS,
        })
    }

    pub fn from_measurements(ms: &[MeasurementEvent]) -> Result<Self, CollapseError> {
        Self::from_apices(ms.iter().map(|m| m.apex).collect())
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn apices(&self) -> &[Event] {
        &self.apices
    }

    pub fn len(&self) -> usize {
        self.apices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apices.is_empty()
    }

    /// The set of apices whose absolute past contains `point`; full set
    /// means uncollapsed, empty set fully collapsed.
    pub fn cell_signature(&self, point: &Event) -> CellQuery {
        let n = self.apices.len();
        let mut signature = CellSignature::empty(n);
        let mut boundary = CellSignature::empty(n);
        for (i, apex) in self.apices.iter().enumerate() {
            match apex.classify(point, self.eps) {
                CausalClass::AbsolutePast => signature.insert(i),
                CausalClass::PastLightCone | CausalClass::Coincident => {
                    signature.insert(i);
                    boundary.insert(i);
                }
                _ => {}
            }
        }
        CellQuery {
            signature,
            boundary,
        }
    }

    pub fn region_of(&self, point: &Event) -> RegionQuery {
        let q = self.cell_signature(point);
        let region = if q.signature.is_full() {
            Region::Uncollapsed
        } else if q.signature.is_empty() {
            Region::FullyCollapsed
        } else {
            Region::Transitional(q.signature)
        };
        RegionQuery {
            region,
            boundary: q.boundary,
        }
    }

    /// If the apices are pairwise timelike-ordered the cones are nested;
    /// returns their causal order, otherwise the first offending pair.
    pub fn nested_order(&self) -> Result<NestedOrder, CollapseError> {
        if self.apices.is_empty() {
            return Err(CollapseError::EmptyStructure);
        }
        for i in 0..self.apices.len() {
            for j in (i + 1)..self.apices.len() {
                let class = self.apices[i].classify(&self.apices[j], self.eps);
                if !matches!(
                    class,
                    CausalClass::AbsoluteFuture | CausalClass::AbsolutePast
                ) {
                    return Ok(NestedOrder::NotNested { first: i, second: j });
                }
            }
        }
        let mut order: Vec<usize> = (0..self.apices.len()).collect();
        order.sort_by(|&a, &b| {
            self.apices[a]
                .t()
                .partial_cmp(&self.apices[b].t())
                .expect("finite apex times")
        });
        Ok(NestedOrder::Nested(order))
    }

    /// Layer index of a point in a nested stack: how many cones have already
    /// collapsed there.
    pub fn layer_of(&self, point: &Event) -> Result<LayerQuery, CollapseError> {
        match self.nested_order()? {
            NestedOrder::Nested(_) => {}
            NestedOrder::NotNested { first, second } => {
                return Err(CollapseError::NotNested { first, second })
            }
        }
        let q = self.cell_signature(point);
        Ok(LayerQuery {
            layer: self.apices.len() - q.signature.len(),
            boundary: q.boundary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Event;

    fn two_apex_structure() -> CollapseStructure {
        CollapseStructure::from_apices(vec![Event::d1(0.0, -2.0), Event::d1(0.0, 2.0)])
            .unwrap()
    }

    #[test]
    fn deep_past_point_sees_both_pasts() {
        let s = two_apex_structure();
        let q = s.cell_signature(&Event::d1(-3.0, 0.0));
        assert!(q.signature.is_full());
        assert!(!q.on_boundary());
    }

    #[test]
    fn nominally_early_point_can_be_collapsed_by_both() {
        // t = -1 is earlier than both apices, yet outside both pasts.
        let s = two_apex_structure();
        let q = s.cell_signature(&Event::d1(-1.0, 0.0));
        assert!(q.signature.is_empty());
    }

    #[test]
    fn future_point_has_empty_signature() {
        let s = CollapseStructure::from_apices(vec![Event::d1(0.0, 0.0)]).unwrap();
        let q = s.cell_signature(&Event::d1(5.0, 0.0));
        assert!(q.signature.is_empty());
    }

    #[test]
    fn regions_partition_the_plane() {
        let s = two_apex_structure();
        assert_eq!(
            s.region_of(&Event::d1(-10.0, 0.0)).region,
            Region::Uncollapsed
        );
        assert_eq!(
            s.region_of(&Event::d1(10.0, 0.0)).region,
            Region::FullyCollapsed
        );
        // Inside exactly one of the two pasts.
        let q = s.region_of(&Event::d1(-2.5, -2.0));
        match q.region {
            Region::Transitional(sig) => {
                assert!(sig.contains(0));
                assert!(!sig.contains(1));
            }
            other => panic!("expected transitional, got {other:?}"),
        }
    }

    #[test]
    fn boundary_points_are_flagged_uncollapsed() {
        let s = CollapseStructure::from_apices(vec![Event::d1(0.0, 0.0)]).unwrap();
        let q = s.cell_signature(&Event::d1(-1.0, 1.0));
        assert!(q.signature.contains(0), "cone points stay on the pre-collapse side");
        assert!(q.boundary.contains(0));
    }

    #[test]
    fn timelike_apices_are_nested_in_causal_order() {
        let s =
            CollapseStructure::from_apices(vec![Event::d1(5.0, 1.0), Event::d1(0.0, 0.0)])
                .unwrap();
        assert_eq!(s.nested_order().unwrap(), NestedOrder::Nested(vec![1, 0]));
    }

    #[test]
    fn spacelike_apices_are_not_nested() {
        let s = two_apex_structure();
        assert_eq!(
            s.nested_order().unwrap(),
            NestedOrder::NotNested { first: 0, second: 1 }
        );
    }

    #[test]
    fn single_apex_is_trivially_nested() {
        let s = CollapseStructure::from_apices(vec![Event::d1(0.0, 0.0)]).unwrap();
        assert_eq!(s.nested_order().unwrap(), NestedOrder::Nested(vec![0]));
    }

    #[test]
    fn layers_count_collapsed_cones() {
        let s =
            CollapseStructure::from_apices(vec![Event::d1(0.0, 0.0), Event::d1(5.0, 1.0)])
                .unwrap();
        assert_eq!(s.layer_of(&Event::d1(2.0, 0.0)).unwrap().layer, 1);
        assert_eq!(s.layer_of(&Event::d1(-10.0, 0.0)).unwrap().layer, 0);
        assert_eq!(s.layer_of(&Event::d1(100.0, 0.0)).unwrap().layer, 2);
    }

    #[test]
    fn layer_of_rejects_intersecting_cones() {
        let s = two_apex_structure();
        assert!(matches!(
            s.layer_of(&Event::d1(0.0, 0.0)),
            Err(CollapseError::NotNested { .. })
        ));
    }
}
