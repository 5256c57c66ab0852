//! Full-detail network: station busbars as fixed-voltage nodes, one node per
//! train position, series branches along each track.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    segment_impedance, ComplexPower, LineImpedance, MsoSpec, PerUnitBase, TrainLoad, TscSpec, ZsoSpec,
};

/// Trains closer than this (km) on one track share a node.
const SAME_POSITION_KM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Ideal source, voltage in kV.
    Station { voltage: Complex64 },
    /// Pantograph node; every load draws its full complex power here and
    /// the branch admittances `1/z_t` sit in the admittance matrix.
    Train { loads: Vec<(String, ComplexPower)>, shunt: Complex64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Ω
    pub z: Complex64,
    /// Free label used to split station powers, e.g. `zso1`.
    pub group: String,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
    pub base: PerUnitBase,
    /// Bus admittance matrix in p.u., including train shunts.
    pub ybus: DMatrix<Complex64>,
}

impl NetworkModel {
    pub fn builder(base: PerUnitBase) -> NetworkBuilder {
        NetworkBuilder { nodes: Vec::new(), branches: Vec::new(), base }
    }

    pub fn station_indices(&self) -> Vec<usize> {
        self.indices(|k| matches!(k, NodeKind::Station { .. }))
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(|k| matches!(k, NodeKind::Train { .. }))
    }

    fn indices(&self, pred: impl Fn(&NodeKind) -> bool) -> Vec<usize> {
        self.nodes.iter().enumerate().filter(|(_, n)| pred(&n.kind)).map(|(i, _)| i).collect()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Moves a station to a new voltage phasor (kV); the admittance matrix
    /// is unaffected.
    pub fn set_station_voltage(&mut self, node: usize, voltage: Complex64) {
        if let NodeKind::Station { voltage: v } = &mut self.nodes[node].kind {
            *v = voltage;
        }
    }

    /// Total complex load (p.u.) drawn at a train node.
    pub(crate) fn node_load_pu(&self, node: usize) -> Complex64 {
        match &self.nodes[node].kind {
            NodeKind::Train { loads, .. } => {
                loads.iter().map(|(_, s)| s.to_complex()).sum::<Complex64>() / self.base.s_base_mva
            }
            NodeKind::Station { .. } => Complex64::new(0.0, 0.0),
        }
    }

    pub(crate) fn node_shunt_pu(&self, node: usize) -> Complex64 {
        match &self.nodes[node].kind {
            NodeKind::Train { shunt, .. } => shunt * self.base.z_base_ohm(),
            NodeKind::Station { .. } => Complex64::new(0.0, 0.0),
        }
    }

    pub(crate) fn z_pu(&self, b: &Branch) -> Complex64 {
        b.z / self.base.z_base_ohm()
    }
}

pub struct NetworkBuilder {
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    base: PerUnitBase,
}

impl NetworkBuilder {
    /// Adds a station busbar at `u_kv∠angle_deg`.
    pub fn station(&mut self, name: impl Into<String>, u_kv: f64, angle_deg: f64) -> usize {
        self.nodes.push(Node {
            name: name.into(),
            kind: NodeKind::Station { voltage: Complex64::from_polar(u_kv, angle_deg.to_radians()) },
        });
        self.nodes.len() - 1
    }

    /// Adds a pantograph node carrying `train`'s load and branch admittance.
    pub fn train_node(&mut self, name: impl Into<String>, train: &TrainLoad) -> usize {
        self.nodes.push(Node {
            name: name.into(),
            kind: NodeKind::Train { loads: vec![(train.id.clone(), train.power)], shunt: train.z_t.inv() },
        });
        self.nodes.len() - 1
    }

    /// Adds a series branch of `z` Ω.
    pub fn branch(&mut self, group: &str, from: usize, to: usize, z: Complex64) {
        self.branches.push(Branch { from, to, z, group: group.to_string() });
    }

    /// Adds one track from `left` to `right` with its trains (positions
    /// measured from `left`).
    pub fn track(
        &mut self,
        group: &str,
        left: usize,
        right: usize,
        z0: LineImpedance,
        length_km: f64,
        trains: &[TrainLoad],
    ) -> Result<()> {
        let mut sorted: Vec<&TrainLoad> = trains.iter().collect();
        sorted.sort_by(|a, b| a.l1.total_cmp(&b.l1));
        let mut prev = left;
        let mut prev_pos = 0.0;
        let mut last_node: Option<(usize, f64)> = None;
        for t in sorted {
            if !(t.l1 > 0.0 && t.l1 < length_km) {
                return Err(Error::Config(format!("train `{}` at {} km outside (0, {length_km})", t.id, t.l1)));
            }
            if let Some((node, pos)) = last_node {
                if t.l1 - pos < SAME_POSITION_KM {
                    if let NodeKind::Train { loads, shunt } = &mut self.nodes[node].kind {
                        loads.push((t.id.clone(), t.power));
                        *shunt += t.z_t.inv();
                    }
                    continue;
                }
            }
            self.nodes.push(Node {
                name: format!("{group}:{}", t.id),
                kind: NodeKind::Train { loads: vec![(t.id.clone(), t.power)], shunt: t.z_t.inv() },
            });
            let node = self.nodes.len() - 1;
            self.branches.push(Branch {
                from: prev,
                to: node,
                z: segment_impedance(z0, t.l1 - prev_pos)?,
                group: group.to_string(),
            });
            prev = node;
            prev_pos = t.l1;
            last_node = Some((node, t.l1));
        }
        self.branches.push(Branch {
            from: prev,
            to: right,
            z: segment_impedance(z0, length_km - prev_pos)?,
            group: group.to_string(),
        });
        Ok(())
    }

    pub fn mso(&mut self, group: &str, left: usize, right: usize, mso: &MsoSpec) -> Result<()> {
        self.track(group, left, right, mso.z0, mso.length_km, &mso.trains)
    }

    /// Both tracks of a zone, joined only at the two busbars.
    pub fn zso(&mut self, group: &str, left: usize, right: usize, zso: &ZsoSpec) -> Result<()> {
        self.mso(group, left, right, &zso.up)?;
        self.mso(group, left, right, &zso.down)
    }

    pub fn build(self) -> Result<NetworkModel> {
        let n = self.nodes.len();
        let stations: Vec<usize> = (0..n).filter(|&i| matches!(self.nodes[i].kind, NodeKind::Station { .. })).collect();
        if stations.len() < 2 {
            return Err(Error::Config("a network needs at least two stations".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for b in &self.branches {
            adj[b.from].push(b.to);
            adj[b.to].push(b.from);
        }
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = stations.iter().copied().collect();
        for &s in &stations {
            seen[s] = true;
        }
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| !seen[i]) {
            return Err(Error::Disconnected(self.nodes[i].name.clone()));
        }

        let zb = self.base.z_base_ohm();
        let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for b in &self.branches {
            let yb = (b.z / zb).inv();
            y[(b.from, b.from)] += yb;
            y[(b.to, b.to)] += yb;
            y[(b.from, b.to)] -= yb;
            y[(b.to, b.from)] -= yb;
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Train { shunt, .. } = node.kind {
                y[(i, i)] += shunt * zb;
            }
        }
        Ok(NetworkModel { nodes: self.nodes, branches: self.branches, base: self.base, ybus: y })
    }
}

/// Names of the cluster station nodes.
pub const NTS1: &str = "N-TS1";
pub const ATS: &str = "A-TS";
pub const NTS2: &str = "N-TS2";

/// Single track between an N-TS (left, 0°) and an A-TS (right, `delta_a`).
pub fn build_network_mso(mso: &MsoSpec, delta_a: f64, base: PerUnitBase) -> Result<NetworkModel> {
    let mut b = NetworkModel::builder(base);
    let l = b.station(NTS1, mso.left.u_n_kv, 0.0);
    let r = b.station(ATS, mso.right.u_n_kv, delta_a);
    b.mso("mso", l, r, mso)?;
    b.build()
}

/// One zone: the N-TS at 0° and the A-TS at `delta_a`; `ats_left` puts the
/// A-TS on the left end.
pub fn build_network_zso(zso: &ZsoSpec, delta_a: f64, ats_left: bool, base: PerUnitBase) -> Result<NetworkModel> {
    let mut b = NetworkModel::builder(base);
    let u = zso.up.left.u_n_kv;
    let n = b.station(if ats_left { NTS2 } else { NTS1 }, u, 0.0);
    let a = b.station(ATS, u, delta_a);
    if ats_left {
        b.zso("zso", a, n, zso)?;
    } else {
        b.zso("zso", n, a, zso)?;
    }
    b.build()
}

/// Whole cluster with groups `zso1` and `zso2`.
pub fn build_network_tsc(tsc: &TscSpec, delta_a: f64) -> Result<NetworkModel> {
    tsc.ensure_valid()?;
    let mut b = NetworkModel::builder(tsc.base);
    let u = tsc.zso1.up.left.u_n_kv;
    let n1 = b.station(NTS1, u, 0.0);
    let a = b.station(ATS, u, delta_a);
    let n2 = b.station(NTS2, u, 0.0);
    b.zso("zso1", n1, a, &tsc.zso1)?;
    b.zso("zso2", a, n2, &tsc.zso2)?;
    b.build()
}
