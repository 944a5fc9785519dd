//! Deterministic in-process simulation of three privacy-preserving execution
//! topologies. Nodes are plain structs, the scheduler is a fixed phase
//! sequence keyed by node id, and every cross-node dependency travels as a
//! logged [`message::Message`]. No sockets: the subject under test is the
//! update decomposition and the privacy structure of the message flow.
//!
//! Because every reduction a partition can split is carried as an exact
//! accumulator (see [`crate::exact`]), each mode reproduces the centralized
//! fit bit-for-bit; the equivalence checks in [`audit`] exercise that.

pub mod audit;
pub mod message;
pub mod run;

pub use audit::{audit_privacy, verify_equivalence, EquivalenceReport, Violation};
pub use message::{Message, MessageKind, MessageLog, Payload};
pub use run::{run_distributed, DistributedRun};

use crate::error::{Error, Result};
use crate::inference::UpdateKind;
use crate::types::ProblemShape;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How the label matrix is spread across data sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Sites hold disjoint object subsets with all their columns.
    Row,
    /// Sites hold all objects but disjoint column subsets.
    Column,
    /// Sites hold arbitrary (row group x column group) blocks.
    Arbitrary,
}

/// One base-result column of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColumnRef {
    /// Classifier column index in `0..r1`.
    Classifier(usize),
    /// Clustering column index in `0..r2`.
    Clusterer(usize),
}

/// Distribution topology: row groups, column groups, and (for arbitrary
/// mode) the owner of each (row group, column group) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: Mode,
    /// Disjoint object-index sets covering `0..N`. Row and arbitrary modes.
    #[serde(default)]
    pub row_groups: Vec<Vec<usize>>,
    /// Disjoint column sets covering all `r1 + r2` columns. Column and
    /// arbitrary modes.
    #[serde(default)]
    pub column_groups: Vec<Vec<ColumnRef>>,
    /// Arbitrary mode: (row group, column group) -> client id.
    #[serde(default)]
    pub site_of: BTreeMap<(usize, usize), usize>,
}

/// Logical node address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeId {
    Server,
    Client(usize),
    AuxServer(usize),
    AuxClient(usize),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Server => write!(f, "server"),
            NodeId::Client(i) => write!(f, "client_{i}"),
            NodeId::AuxServer(i) => write!(f, "aux_server_{i}"),
            NodeId::AuxClient(i) => write!(f, "aux_client_{i}"),
        }
    }
}

/// Node class used in update assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Server,
    Client,
    AuxServer,
    AuxClient,
}

/// A node and the scopes it owns.
#[derive(Debug, Clone)]
pub struct NodeRole {
    pub id: NodeId,
    /// Row group indices whose objects this node owns or serves.
    pub row_groups: Vec<usize>,
    /// Column group indices whose columns this node owns.
    pub column_groups: Vec<usize>,
    /// Arbitrary mode: owned (row group, column group) cells.
    pub cells: Vec<(usize, usize)>,
}

/// The static execution plan: which node class runs each update kind, and
/// the concrete node roster.
#[derive(Debug, Clone)]
pub struct ExecutionPlan {
    pub mode: Mode,
    pub nodes: Vec<NodeRole>,
    pub assignments: Vec<(UpdateKind, NodeClass)>,
}

impl ExecutionPlan {
    pub fn assignment(&self, kind: UpdateKind) -> NodeClass {
        self.assignments
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, c)| *c)
            .expect("every update kind is assigned")
    }

    pub fn count(&self, pred: impl Fn(&NodeId) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.id)).count()
    }
}

fn check_cover(groups: &[Vec<usize>], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    for g in groups {
        if g.is_empty() {
            return Err(Error::PlanRejected(format!("empty {what} group")));
        }
        for &i in g {
            if i >= n {
                return Err(Error::PlanRejected(format!("{what} index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::PlanRejected(format!("{what} index {i} in two groups")));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::PlanRejected(format!("{what} groups do not cover")));
    }
    Ok(())
}

fn check_column_cover(groups: &[Vec<ColumnRef>], shape: &ProblemShape) -> Result<()> {
    let mut clf = vec![false; shape.n_classifiers];
    let mut clu = vec![false; shape.n_clusterings];
    for g in groups {
        if g.is_empty() {
            return Err(Error::PlanRejected("empty column group".into()));
        }
        for &c in g {
            let slot = match c {
                ColumnRef::Classifier(l) => clf.get_mut(l),
                ColumnRef::Clusterer(m) => clu.get_mut(m),
            };
            match slot {
                None => return Err(Error::PlanRejected(format!("column {c:?} out of range"))),
                Some(s) if *s => {
                    return Err(Error::PlanRejected(format!("column {c:?} in two groups")))
                }
                Some(s) => *s = true,
            }
        }
    }
    if clf.iter().chain(clu.iter()).any(|&s| !s) {
        return Err(Error::PlanRejected("column groups do not cover".into()));
    }
    Ok(())
}

pub(crate) fn classifier_count(group: &[ColumnRef]) -> usize {
    group
        .iter()
        .filter(|c| matches!(c, ColumnRef::Classifier(_)))
        .count()
}

/// Validate a partition against the problem shape and assign every update
/// kind to a node class.
///
/// The privacy rule enforced here: a node that contributes classifier vote
/// aggregates must hold at least two classifier columns for the rows it
/// reports on, so single-column votes (which would reveal raw labels) can
/// never be formed. Nodes holding no classifier columns simply do not
/// contribute votes.
pub fn plan(spec: &PartitionSpec, shape: &ProblemShape) -> Result<ExecutionPlan> {
    use UpdateKind::*;
    shape.validate()?;
    let estep_object_kinds = [Kappa, Xi, MuN, SigmaN2, EpsN, DeltaN2];

    match spec.mode {
        Mode::Row => {
            if spec.row_groups.is_empty() {
                return Err(Error::PlanRejected("row mode needs row groups".into()));
            }
            check_cover(&spec.row_groups, shape.n_objects, "object")?;
            let mut nodes = vec![NodeRole {
                id: NodeId::Server,
                row_groups: vec![],
                column_groups: vec![],
                cells: vec![],
            }];
            for d in 0..spec.row_groups.len() {
                nodes.push(NodeRole {
                    id: NodeId::Client(d),
                    row_groups: vec![d],
                    column_groups: vec![],
                    cells: vec![],
                });
            }
            let mut assignments: Vec<(UpdateKind, NodeClass)> = estep_object_kinds
                .iter()
                .map(|&k| (k, NodeClass::Client))
                .collect();
            assignments.push((Phi, NodeClass::Client));
            for k in [MStepMu, MStepDelta2, MStepBeta, MStepSigma2] {
                assignments.push((k, NodeClass::Server));
            }
            Ok(ExecutionPlan {
                mode: Mode::Row,
                nodes,
                assignments,
            })
        }
        Mode::Column => {
            if spec.column_groups.is_empty() {
                return Err(Error::PlanRejected("column mode needs column groups".into()));
            }
            check_column_cover(&spec.column_groups, shape)?;
            for (j, g) in spec.column_groups.iter().enumerate() {
                if classifier_count(g) == 1 {
                    return Err(Error::PlanRejected(format!(
                        "column group {j} holds a single classifier column; votes over one column reveal raw labels"
                    )));
                }
            }
            let mut nodes = vec![NodeRole {
                id: NodeId::Server,
                row_groups: vec![],
                column_groups: vec![],
                cells: vec![],
            }];
            for j in 0..spec.column_groups.len() {
                nodes.push(NodeRole {
                    id: NodeId::Client(j),
                    row_groups: vec![],
                    column_groups: vec![j],
                    cells: vec![],
                });
            }
            let mut assignments: Vec<(UpdateKind, NodeClass)> = estep_object_kinds
                .iter()
                .map(|&k| (k, NodeClass::Server))
                .collect();
            assignments.push((Phi, NodeClass::Client));
            assignments.push((MStepMu, NodeClass::Server));
            assignments.push((MStepDelta2, NodeClass::Server));
            assignments.push((MStepBeta, NodeClass::Client));
            assignments.push((MStepSigma2, NodeClass::Server));
            Ok(ExecutionPlan {
                mode: Mode::Column,
                nodes,
                assignments,
            })
        }
        Mode::Arbitrary => {
            check_cover(&spec.row_groups, shape.n_objects, "object")?;
            check_column_cover(&spec.column_groups, shape)?;
            let (nd, nj) = (spec.row_groups.len(), spec.column_groups.len());
            let mut clients: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for d in 0..nd {
                for j in 0..nj {
                    match spec.site_of.get(&(d, j)) {
                        None => {
                            return Err(Error::PlanRejected(format!(
                                "cell ({d}, {j}) has no owning client"
                            )))
                        }
                        Some(&c) => clients.entry(c).or_default().push((d, j)),
                    }
                }
            }
            // Vote privacy per (client, row group): classifier columns a
            // client can aggregate for那 rows come from all its cells there.
            for (&c, cells) in &clients {
                let mut per_row: BTreeMap<usize, usize> = BTreeMap::new();
                for &(d, j) in cells {
                    *per_row.entry(d).or_insert(0) += classifier_count(&spec.column_groups[j]);
                }
                for (d, count) in per_row {
                    if count == 1 {
                        return Err(Error::PlanRejected(format!(
                            "client {c} holds a single classifier column for row group {d}"
                        )));
                    }
                }
            }
            let mut nodes = vec![NodeRole {
                id: NodeId::Server,
                row_groups: vec![],
                column_groups: vec![],
                cells: vec![],
            }];
            for d in 0..nd {
                nodes.push(NodeRole {
                    id: NodeId::AuxServer(d),
                    row_groups: vec![d],
                    column_groups: vec![],
                    cells: vec![],
                });
            }
            for j in 0..nj {
                nodes.push(NodeRole {
                    id: NodeId::AuxClient(j),
                    row_groups: vec![],
                    column_groups: vec![j],
                    cells: vec![],
                });
            }
            for (&c, cells) in &clients {
                let mut rgs: Vec<usize> = cells.iter().map(|&(d, _)| d).collect();
                rgs.sort_unstable();
                rgs.dedup();
                let mut cgs: Vec<usize> = cells.iter().map(|&(_, j)| j).collect();
                cgs.sort_unstable();
                cgs.dedup();
                nodes.push(NodeRole {
                    id: NodeId::Client(c),
                    row_groups: rgs,
                    column_groups: cgs,
                    cells: cells.clone(),
                });
            }
            let mut assignments: Vec<(UpdateKind, NodeClass)> = estep_object_kinds
                .iter()
                .map(|&k| (k, NodeClass::AuxServer))
                .collect();
            assignments.push((Phi, NodeClass::Client));
            assignments.push((MStepMu, NodeClass::Server));
            assignments.push((MStepDelta2, NodeClass::Server));
            assignments.push((MStepBeta, NodeClass::AuxClient));
            assignments.push((MStepSigma2, NodeClass::Server));
            Ok(ExecutionPlan {
                mode: Mode::Arbitrary,
                nodes,
                assignments,
            })
        }
    }
}

/// Split shorthand: contiguous row groups of near-equal size.
pub fn contiguous_row_groups(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let base = n / d;
    let extra = n % d;
    let mut start = 0;
    for g in 0..d {
        let len = base + usize::from(g < extra);
        out.push((start..start + len).collect());
        start += len;
    }
    out
}

/// All columns of a shape in canonical order.
pub fn all_columns(shape: &ProblemShape) -> Vec<ColumnRef> {
    (0..shape.n_classifiers)
        .map(ColumnRef::Classifier)
        .chain((0..shape.n_clusterings).map(ColumnRef::Clusterer))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize, r1: usize, km: Vec<usize>) -> ProblemShape {
        ProblemShape {
            n_objects: n,
            n_classes: 3,
            n_classifiers: r1,
            n_clusterings: km.len(),
            clusters_per_clustering: km,
        }
    }

    #[test]
    fn row_plan_two_clients() {
        let sh = shape(10, 2, vec![3]);
        let spec = PartitionSpec {
            mode: Mode::Row,
            row_groups: contiguous_row_groups(10, 2),
            column_groups: vec![],
            site_of: BTreeMap::new(),
        };
        let p = plan(&spec, &sh).unwrap();
        assert_eq!(p.count(|id| matches!(id, NodeId::Client(_))), 2);
        assert_eq!(p.count(|id| matches!(id, NodeId::Server)), 1);
        assert_eq!(p.assignment(UpdateKind::MStepBeta), NodeClass::Server);
        assert_eq!(p.assignment(UpdateKind::MuN), NodeClass::Client);
    }

    #[test]
    fn column_plan_splits_phi_and_beta() {
        let sh = shape(10, 4, vec![3, 4]);
        let spec = PartitionSpec {
            mode: Mode::Column,
            row_groups: vec![],
            column_groups: vec![
                vec![ColumnRef::Classifier(0), ColumnRef::Classifier(1), ColumnRef::Clusterer(0)],
                vec![ColumnRef::Classifier(2), ColumnRef::Classifier(3), ColumnRef::Clusterer(1)],
            ],
            site_of: BTreeMap::new(),
        };
        let p = plan(&spec, &sh).unwrap();
        assert_eq!(p.count(|id| matches!(id, NodeId::Client(_))), 2);
        assert_eq!(p.assignment(UpdateKind::Phi), NodeClass::Client);
        assert_eq!(p.assignment(UpdateKind::MStepBeta), NodeClass::Client);
        assert_eq!(p.assignment(UpdateKind::MuN), NodeClass::Server);
        assert_eq!(p.assignment(UpdateKind::MStepSigma2), NodeClass::Server);
    }

    #[test]
    fn single_classifier_group_rejected() {
        let sh = shape(10, 3, vec![3]);
        let spec = PartitionSpec {
            mode: Mode::Column,
            row_groups: vec![],
            column_groups: vec![
                vec![ColumnRef::Classifier(0), ColumnRef::Classifier(1)],
                vec![ColumnRef::Classifier(2), ColumnRef::Clusterer(0)],
            ],
            site_of: BTreeMap::new(),
        };
        assert!(matches!(plan(&spec, &sh), Err(Error::PlanRejected(_))));
    }

    /// The six-client layout: four row groups, three column groups, cells
    /// shared so that some clients span several groups.
    pub(crate) fn six_client_site_of() -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        m.insert((0, 0), 0); // client 1: top rows, first columns
        m.insert((0, 1), 1);
        m.insert((0, 2), 1); // client 2 spans two row groups x two column groups
        m.insert((1, 0), 2);
        m.insert((1, 1), 1);
        m.insert((1, 2), 1);
        m.insert((2, 0), 2); // client 3 spans two row groups in column group 0
        m.insert((2, 1), 3);
        m.insert((2, 2), 3);
        m.insert((3, 0), 4);
        m.insert((3, 1), 4);
        m.insert((3, 2), 5);
        m
    }

    pub(crate) fn six_client_columns() -> Vec<Vec<ColumnRef>> {
        vec![
            vec![ColumnRef::Classifier(0), ColumnRef::Classifier(1)],
            vec![ColumnRef::Classifier(2), ColumnRef::Classifier(3), ColumnRef::Clusterer(0)],
            vec![ColumnRef::Clusterer(1), ColumnRef::Clusterer(2)],
        ]
    }

    #[test]
    fn arbitrary_plan_six_clients() {
        let sh = shape(40, 4, vec![3, 3, 4]);
        let spec = PartitionSpec {
            mode: Mode::Arbitrary,
            row_groups: contiguous_row_groups(40, 4),
            column_groups: six_client_columns(),
            site_of: six_client_site_of(),
        };
        let p = plan(&spec, &sh).unwrap();
        assert_eq!(p.count(|id| matches!(id, NodeId::AuxServer(_))), 4);
        assert_eq!(p.count(|id| matches!(id, NodeId::AuxClient(_))), 3);
        assert_eq!(p.count(|id| matches!(id, NodeId::Client(_))), 6);
        assert_eq!(p.count(|id| matches!(id, NodeId::Server)), 1);
        assert_eq!(p.assignment(UpdateKind::MStepBeta), NodeClass::AuxClient);
        assert_eq!(p.assignment(UpdateKind::EpsN), NodeClass::AuxServer);
    }

    #[test]
    fn arbitrary_single_classifier_client_rejected() {
        let sh = shape(8, 2, vec![3]);
        let mut site_of = BTreeMap::new();
        site_of.insert((0, 0), 0);
        site_of.insert((0, 1), 1);
        let spec = PartitionSpec {
            mode: Mode::Arbitrary,
            row_groups: vec![(0..8).collect()],
            column_groups: vec![
                vec![ColumnRef::Classifier(0)],
                vec![ColumnRef::Classifier(1), ColumnRef::Clusterer(0)],
            ],
            site_of,
        };
        let err = plan(&spec, &sh).unwrap_err();
        assert!(matches!(err, Error::PlanRejected(_)), "{err}");
    }

    #[test]
    fn covers_must_be_exact() {
        let sh = shape(6, 2, vec![3]);
        let spec = PartitionSpec {
            mode: Mode::Row,
            row_groups: vec![vec![0, 1, 2], vec![2, 3, 4, 5]],
            column_groups: vec![],
            site_of: BTreeMap::new(),
        };
        assert!(plan(&spec, &sh).is_err());
        let spec = PartitionSpec {
            mode: Mode::Row,
            row_groups: vec![vec![0, 1, 2], vec![3, 4]],
            column_groups: vec![],
            site_of: BTreeMap::new(),
        };
        assert!(plan(&spec, &sh).is_err());
    }
}
