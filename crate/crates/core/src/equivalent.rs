//! Fixed-topology equivalent of a section with trains, and the station
//! power functions of the A-TS angle built from it.
//!
//! A train draws its complex power at the pantograph. The train branch is
//! replaced by a Norton pair at each station (current source plus parallel
//! impedance), so the station currents become affine in the phasors
//! `e^{j(b1·δ + b2)}`. Station 1 always sits at 0°, station 2 at `δ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    segment_impedance, ComplexPower, LineImpedance, MsoSpec, PerUnitBase, Phasor,
    TrainLoad, TscSpec, ZsoId, ZsoSpec,
};

const DEG: f64 = PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PantographState {
    /// kV
    pub u_t: f64,
    /// Degrees.
    pub delta_t: f64,
    pub feasible: bool,
    /// `1/4 − β`; negative means voltage collapse.
    pub discriminant: f64,
}

impl PantographState {
    pub fn phasor(&self) -> Phasor {
        Phasor::from_degrees(self.u_t, self.delta_t)
    }
}

/// Approximate pantograph voltage of a load `s` at `l1` km on a uniform line
/// of `length` km fed at `u_n` from both ends (left at 0°, right at `delta_a`).
pub fn pantograph_voltage_at(
    z0: LineImpedance,
    length: f64,
    u_n: f64,
    l1: f64,
    s: ComplexPower,
    delta_a: f64,
) -> PantographState {
    let l2 = length - l1;
    let k = l1 * l2 / (length * u_n * u_n);
    let beta = k * (z0.r * s.p + z0.x * s.q);
    let disc = 0.25 - beta;
    let lin = l1 / length * delta_a;
    if disc < 0.0 {
        return PantographState {
            u_t: 0.5 * u_n,
            delta_t: lin,
            feasible: false,
            discriminant: disc,
        };
    }
    let root = disc.sqrt();
    // (1/2 − √(1/4 − β)) = β / (1/2 + √(1/4 − β)), which stays finite as
    // R0·P + X0·Q → 0.
    let phi = (z0.x * s.p - z0.r * s.q) * k / (0.5 + root);
    PantographState {
        u_t: (0.5 + root) * u_n,
        delta_t: lin - phi.to_degrees(),
        feasible: true,
        discriminant: disc,
    }
}

/// Pantograph voltage of `train` in `mso`, the train considered alone.
pub fn pantograph_voltage(mso: &MsoSpec, train: &TrainLoad, delta_a: f64) -> PantographState {
    pantograph_voltage_at(mso.z0, mso.length_km, mso.u_n(), train.l1, train.power, delta_a)
}

/// The same formula written with the constants that `Z0 = 0.15 + j0.55 Ω/km`
/// produces: `a = 11P − 3Q`, `b = 3P + 11Q`, `c = √(5 − L1·L2·b/(L·U_N²))`.
pub fn pantograph_voltage_printed(
    length: f64,
    u_n: f64,
    l1: f64,
    s: ComplexPower,
    delta_a: f64,
) -> PantographState {
    let l2 = length - l1;
    let a = 11.0 * s.p - 3.0 * s.q;
    let b = 3.0 * s.p + 11.0 * s.q;
    let inner = 5.0 - l1 * l2 * b / (length * u_n * u_n);
    let lin = l1 / length * delta_a;
    if inner < 0.0 {
        return PantographState {
            u_t: 0.5 * u_n,
            delta_t: lin,
            feasible: false,
            discriminant: inner / 20.0,
        };
    }
    let c = inner.sqrt();
    let tail = 0.5 - c / (2.0 * 5f64.sqrt());
    let phi = if b == 0.0 { 0.0 } else { a / b * tail };
    PantographState {
        u_t: (0.5 + c / (2.0 * 5f64.sqrt())) * u_n,
        delta_t: lin - phi.to_degrees(),
        feasible: true,
        discriminant: inner / 20.0,
    }
}

/// Exact pantograph voltage of a lone constant-PQ train between two ideal
/// sources, by damped fixed-point iteration with a Newton fallback.
pub fn pantograph_voltage_exact(
    mso: &MsoSpec,
    train: &TrainLoad,
    delta_a: f64,
) -> Result<PantographState> {
    let u_n = mso.u_n();
    let z1 = segment_impedance(mso.z0, train.l1)?;
    let z2 = segment_impedance(mso.z0, mso.length_km - train.l1)?;
    let zl = z1 + z2;
    let v1 = Complex64::new(u_n, 0.0);
    let v2 = Complex64::from_polar(u_n, delta_a * DEG);
    let vth = (v1 * z2 + v2 * z1) / zl;
    let zth = z1 * z2 / zl;
    let s = train.power.to_complex();
    let tol = 1e-10 * u_n;
    let disc = pantograph_voltage(mso, train, delta_a).discriminant;
    let g = |v: Complex64| vth - zth * (s / v).conj();

    let mut v = vth;
    for _ in 0..400 {
        let next = v + 0.7 * (g(v) - v);
        if !next.is_finite() || next.norm() < 1e-12 {
            break;
        }
        let step = (next - v).norm();
        v = next;
        if step < tol && (g(v) - v).norm() < tol {
            return Ok(exact_state(v, disc));
        }
    }

    // Newton on F(v) = v − vth + zth·conj(s/v) in rectangular form.
    let mut v = vth;
    for _ in 0..100 {
        let f = v - vth + zth * (s / v).conj();
        if f.norm() < tol {
            return Ok(exact_state(v, disc));
        }
        // conj(s/v) = conj(s)/conj(v); d/de and d/df of that term.
        let w = s.conj() / (v.conj() * v.conj());
        let d_e = Complex64::new(1.0, 0.0) - zth * w;
        let d_f = Complex64::new(0.0, 1.0) + zth * w * Complex64::new(0.0, 1.0);
        let det = d_e.re * d_f.im - d_f.re * d_e.im;
        if det.abs() < 1e-300 {
            break;
        }
        let de = (-f.re * d_f.im + f.im * d_f.re) / det;
        let df = (-d_e.re * f.im + d_e.im * f.re) / det;
        v += Complex64::new(de, df);
        if !v.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "exact pantograph voltage",
        iterations: 500,
        residual: (v - g(v)).norm() / u_n,
        best_x: v.norm(),
    })
}

fn exact_state(v: Complex64, discriminant: f64) -> PantographState {
    PantographState {
        u_t: v.norm(),
        delta_t: v.arg().to_degrees(),
        feasible: true,
        discriminant,
    }
}

/// Train subsystem current source: `(S/U_t)* − U_t/Z_t`, in kA.
pub fn train_current_source(train: &TrainLoad, u_t: Phasor) -> Result<Phasor> {
    if u_t.magnitude <= 0.0 {
        return Err(Error::ZeroVoltage);
    }
    let u = u_t.to_complex();
    Ok(Phasor::from((train.power.to_complex() / u).conj() - u / train.z_t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Station1,
    Station2,
}

/// Norton pair seen from one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentBranch {
    /// kA
    pub i_src: Phasor,
    /// Ω
    pub z_par: Complex64,
    pub side: Side,
}

/// Norton pair of one train branch using its isolated pantograph voltage.
pub fn equivalent_branch(
    mso: &MsoSpec,
    train: &TrainLoad,
    delta_a: f64,
    side: Side,
) -> Result<EquivalentBranch> {
    let pv = pantograph_voltage(mso, train, delta_a);
    if !pv.feasible {
        return Err(Error::VoltageCollapse {
            train: train.id.clone(),
            discriminant: pv.discriminant,
        });
    }
    let i_ts = train_current_source(train, pv.phasor())?.to_complex();
    let u_n = mso.u_n();
    let z1 = segment_impedance(mso.z0, train.l1)?;
    let z2 = segment_impedance(mso.z0, mso.length_km - train.l1)?;
    let zt = train.z_t;
    let zl = z1 + z2;
    let d = z1 * zt + z2 * zt + z1 * z2;
    let (far, v_far) = match side {
        Side::Station1 => (z2, Complex64::from_polar(u_n, delta_a * DEG)),
        Side::Station2 => (z1, Complex64::new(u_n, 0.0)),
    };
    let i_src = v_far / zl + far * zt / d * (i_ts - v_far / far);
    let z_par = zl * d / (far * far);
    Ok(EquivalentBranch {
        i_src: Phasor::from(i_src),
        z_par,
        side,
    })
}

/// Parallel combination of Norton pairs on the same side.
pub fn aggregate_branches(branches: &[EquivalentBranch]) -> Result<EquivalentBranch> {
    let first = branches.first().ok_or(Error::EmptyAggregate)?;
    if branches.iter().any(|b| b.side != first.side) {
        return Err(Error::MixedSides);
    }
    let i: Complex64 = branches.iter().map(|b| b.i_src.to_complex()).sum();
    let y: Complex64 = branches.iter().map(|b| b.z_par.inv()).sum();
    Ok(EquivalentBranch {
        i_src: Phasor::from(i),
        z_par: y.inv(),
        side: first.side,
    })
}

/// How trains on the same track see each other when their pantograph
/// voltages are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Every train is solved alone and its branch shunt term uses the
    /// approximate pantograph voltage.
    Isolated,
    /// Each train's voltage drop includes the drop caused by the other
    /// trains on its track, and the subsystem draws exactly `(S/U_t)*`.
    #[default]
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
pub struct ModelOptions {
    #[serde(default)]
    pub coupling: Coupling,
}

/// A train inside an [`EquivalentSection`], with the impedance of the track
/// it actually runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionTrain {
    pub load: TrainLoad,
    pub track_z0: LineImpedance,
}

/// Single-section model: station 1 at 0°, station 2 at `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentSection {
    pub length_km: f64,
    pub u_n_kv: f64,
    /// Per-km impedance of the station-to-station path (Z0/2 for a ZSO).
    pub line: LineImpedance,
    pub trains: Vec<SectionTrain>,
    pub base: PerUnitBase,
    /// Positions measured from the right station of the source spec.
    pub mirrored: bool,
}

impl EquivalentSection {
    pub fn from_mso(mso: &MsoSpec) -> Self {
        EquivalentSection {
            length_km: mso.length_km,
            u_n_kv: mso.u_n(),
            line: mso.z0,
            trains: mso
                .trains
                .iter()
                .map(|t| SectionTrain {
                    load: t.clone(),
                    track_z0: mso.z0,
                })
                .collect(),
            base: PerUnitBase {
                s_base_mva: crate::model::DEFAULT_S_BASE_MVA,
                v_base_kv: mso.u_n(),
            },
            mirrored: false,
        }
    }

    pub fn with_base(mut self, base: PerUnitBase) -> Self {
        self.base = base;
        self
    }

    /// Swaps the station roles: positions become `L − l1`.
    pub fn mirrored(mut self) -> Self {
        for t in &mut self.trains {
            t.load.l1 = self.length_km - t.load.l1;
        }
        self.mirrored = !self.mirrored;
        self
    }
}

/// Collapses the two tracks of a ZSO into one section with Z0/2, keeping
/// every train at its own position.
pub fn reduce_zso(zso: &ZsoSpec) -> Result<EquivalentSection> {
    if zso.up.length_km != zso.down.length_km {
        return Err(Error::MismatchedTracks {
            up: zso.up.length_km,
            down: zso.down.length_km,
        });
    }
    let mut section = EquivalentSection::from_mso(&zso.up);
    section.line = zso.up.z0.halved();
    section.trains.extend(zso.down.trains.iter().map(|t| SectionTrain {
        load: t.clone(),
        track_z0: zso.down.z0,
    }));
    Ok(section)
}

/// Section of one ZSO of a cluster, oriented so that station 1 is the N-TS
/// and station 2 the A-TS.
pub fn zso_section(tsc: &TscSpec, which: ZsoId) -> Result<EquivalentSection> {
    let section = reduce_zso(tsc.zso(which))?.with_base(tsc.base);
    Ok(match which {
        ZsoId::One => section,
        ZsoId::Two => section.mirrored(),
    })
}

/// One exponential term `a·e^{j(b1·δ + b2)} + c` of a station current (kA),
/// δ in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PfTerm {
    pub a: Complex64,
    pub b1: f64,
    pub b2: f64,
    pub c: Complex64,
}

/// Station output current as a sum of terms; the station power is
/// `U_N·e^{jθ}·conj(current)` with `θ = 0` for station 1 and `θ = δ` for
/// station 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationFunction {
    pub terms: Vec<PfTerm>,
    pub rotated: bool,
}

impl StationFunction {
    fn current(&self, d: f64) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for t in &self.terms {
            let e = t.a * Complex64::from_polar(1.0, t.b1 * d + t.b2);
            out[0] += e + t.c;
            out[1] += e * Complex64::new(0.0, t.b1);
            out[2] -= e * (t.b1 * t.b1);
        }
        out
    }

    /// Power (MVA) and its first two derivatives per radian.
    fn eval(&self, u_n: f64, d: f64) -> [Complex64; 3] {
        let [i, di, d2i] = self.current(d);
        let (i, di, d2i) = (i.conj(), di.conj(), d2i.conj());
        if !self.rotated {
            return [i * u_n, di * u_n, d2i * u_n];
        }
        let r = Complex64::from_polar(u_n, d);
        let j = Complex64::new(0.0, 1.0);
        [
            r * i,
            r * (j * i + di),
            r * (-i + 2.0 * j * di + d2i),
        ]
    }
}

/// Station complex powers of a section as functions of the A-TS angle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFunction {
    pub u_n_kv: f64,
    pub s_base_mva: f64,
    pub n_trains: usize,
    pub mirrored: bool,
    pub station1: StationFunction,
    pub station2: StationFunction,
}

/// Values and derivatives per degree, in p.u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerJet {
    pub s1: [Complex64; 3],
    pub s2: [Complex64; 3],
}

impl PowerJet {
    pub fn p1(&self) -> [f64; 3] {
        self.s1.map(|c| c.re)
    }
    pub fn q1(&self) -> [f64; 3] {
        self.s1.map(|c| c.im)
    }
    pub fn p2(&self) -> [f64; 3] {
        self.s2.map(|c| c.re)
    }
    pub fn q2(&self) -> [f64; 3] {
        self.s2.map(|c| c.im)
    }
}

/// One of the four real station quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quantity {
    P1,
    P2,
    Q1,
    Q2,
}

impl Quantity {
    pub fn pick(self, jet: &PowerJet) -> [f64; 3] {
        match self {
            Quantity::P1 => jet.p1(),
            Quantity::P2 => jet.p2(),
            Quantity::Q1 => jet.q1(),
            Quantity::Q2 => jet.q2(),
        }
    }
}

impl PowerFunction {
    /// Station powers in MW / MVar at `delta_a` degrees.
    pub fn evaluate(&self, delta_a: f64) -> (ComplexPower, ComplexPower) {
        let d = delta_a * DEG;
        (
            self.station1.eval(self.u_n_kv, d)[0].into(),
            self.station2.eval(self.u_n_kv, d)[0].into(),
        )
    }

    /// Powers and first/second derivatives with respect to `delta_a`
    /// degrees, in p.u. of the section base.
    pub fn jet(&self, delta_a: f64) -> PowerJet {
        let d = delta_a * DEG;
        let scale = [1.0, DEG, DEG * DEG].map(|k| k / self.s_base_mva);
        let apply = |v: [Complex64; 3]| [v[0] * scale[0], v[1] * scale[1], v[2] * scale[2]];
        PowerJet {
            s1: apply(self.station1.eval(self.u_n_kv, d)),
            s2: apply(self.station2.eval(self.u_n_kv, d)),
        }
    }

    /// A real quantity and its two derivatives, p.u. per degree.
    pub fn quantity(&self, q: Quantity, delta_a: f64) -> [f64; 3] {
        q.pick(&self.jet(delta_a))
    }
}

/// Builds the station power functions of `section`.
pub fn build_power_functions(section: &EquivalentSection, opts: ModelOptions) -> Result<PowerFunction> {
    let u = section.u_n_kv;
    let uc = Complex64::new(u, 0.0);
    let zp = segment_impedance(section.line, section.length_km)?;
    // Direct exchange between the stations through the line.
    let mut src1 = PfTerm { a: -uc / zp, b1: 1.0, b2: 0.0, c: uc / zp };
    let mut src2 = PfTerm { a: uc / zp, b1: 1.0, b2: 0.0, c: -uc / zp };
    let mut t1 = Vec::with_capacity(section.trains.len() + 1);
    let mut t2 = Vec::with_capacity(section.trains.len() + 1);

    for (k, st) in section.trains.iter().enumerate() {
        let train = &st.load;
        let load = match opts.coupling {
            Coupling::Isolated => train.power,
            Coupling::Mutual => effective_load(section, k),
        };
        let pv = pantograph_voltage_at(st.track_z0, section.length_km, u, train.l1, load, 0.0);
        if !pv.feasible {
            return Err(Error::VoltageCollapse {
                train: train.id.clone(),
                discriminant: pv.discriminant,
            });
        }
        let b1 = train.l1 / section.length_km;
        let b2 = pv.delta_t * DEG;
        let z1 = segment_impedance(st.track_z0, train.l1)?;
        let z2 = segment_impedance(st.track_z0, section.length_km - train.l1)?;
        let zl = z1 + z2;
        let s_conj = train.power.to_complex().conj();
        match opts.coupling {
            Coupling::Mutual => {
                let j = s_conj / pv.u_t;
                t1.push(PfTerm { a: j * z2 / zl, b1, b2, c: Complex64::new(0.0, 0.0) });
                t2.push(PfTerm { a: j * z1 / zl, b1, b2, c: Complex64::new(0.0, 0.0) });
            }
            Coupling::Isolated => {
                let zt = train.z_t;
                let d = z1 * zt + z2 * zt + z1 * z2;
                // i_ts = (conj(S)/|U_t| − |U_t|/Z_t)·e^{jθ}
                let k_ts = s_conj / pv.u_t - pv.u_t / zt;
                t1.push(PfTerm { a: k_ts * z2 * zt / d, b1, b2, c: uc * (zt + z2) / d - uc / zl });
                src1.a += -uc * zt / d + uc / zl;
                t2.push(PfTerm { a: k_ts * z1 * zt / d, b1, b2, c: -uc * zt / d + uc / zl });
                src2.a += uc * (zt + z1) / d - uc / zl;
            }
        }
    }
    t1.push(src1);
    t2.push(src2);
    Ok(PowerFunction {
        u_n_kv: u,
        s_base_mva: section.base.s_base_mva,
        n_trains: section.trains.len(),
        mirrored: section.mirrored,
        station1: StationFunction { terms: t1, rotated: false },
        station2: StationFunction { terms: t2, rotated: true },
    })
}

/// Load seen at train `k`'s pantograph once the other trains on its track are
/// folded in through the transfer-impedance ratio.
fn effective_load(section: &EquivalentSection, k: usize) -> ComplexPower {
    let l = section.length_km;
    let me = &section.trains[k].load;
    let own = me.l1 * (l - me.l1);
    section
        .trains
        .iter()
        .filter(|o| same_track(o, &section.trains[k]))
        .map(|o| {
            let lo = me.l1.min(o.load.l1);
            let hi = me.l1.max(o.load.l1);
            o.load.power * (lo * (l - hi) / own)
        })
        .fold(ComplexPower::ZERO, |acc, s| acc + s)
}

fn same_track(a: &SectionTrain, b: &SectionTrain) -> bool {
    a.load.track == b.load.track
}

/// Convenience: power function of one ZSO of a cluster.
pub fn zso_power_function(tsc: &TscSpec, which: ZsoId, opts: ModelOptions) -> Result<PowerFunction> {
    build_power_functions(&zso_section(tsc, which)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{StationSpec, Track};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const U: f64 = 27.5;

    fn mso_with(trains: Vec<TrainLoad>) -> MsoSpec {
        let mut m = MsoSpec::new(40.0, LineImpedance::default(), StationSpec::nts(U), StationSpec::ats(U));
        m.trains = trains;
        m
    }

    fn train(l1: f64, p: f64, q: f64) -> TrainLoad {
        TrainLoad::new(format!("T{l1}"), l1, ComplexPower::new(p, q), Track::Up)
    }

    /// Station powers of a track with constant-PQ trains, solved by nodal
    /// fixed point on the exact ladder (independent of the equivalent model).
    fn ladder_powers(m: &MsoSpec, delta: f64) -> (Complex64, Complex64) {
        let mut pos: Vec<&TrainLoad> = m.trains.iter().collect();
        pos.sort_by(|a, b| a.l1.total_cmp(&b.l1));
        let v1 = Complex64::new(U, 0.0);
        let v2 = Complex64::from_polar(U, delta * DEG);
        let n = pos.len();
        let mut x: Vec<f64> = vec![0.0];
        x.extend(pos.iter().map(|t| t.l1));
        x.push(m.length_km);
        let z: Vec<Complex64> = x.windows(2).map(|w| m.z0.to_complex() * (w[1] - w[0])).collect();
        let mut v: Vec<Complex64> = (1..=n).map(|i| v1 + (v2 - v1) * (x[i] / m.length_km)).collect();
        for _ in 0..2000 {
            let mut next = v.clone();
            for i in 0..n {
                let left = if i == 0 { v1 } else { v[i - 1] };
                let right = if i + 1 == n { v2 } else { v[i + 1] };
                let y = z[i].inv() + z[i + 1].inv();
                let load = (pos[i].power.to_complex() / v[i]).conj();
                next[i] = (left / z[i] + right / z[i + 1] - load) / y;
            }
            v = next;
        }
        let first = if n == 0 { v2 } else { v[0] };
        let last = if n == 0 { v1 } else { v[n - 1] };
        let i1 = (v1 - first) / z[0];
        let i2 = (v2 - last) / z[n];
        (v1 * i1.conj(), v2 * i2.conj())
    }

    #[test]
    fn midpoint_typical_train_example() {
        let m = mso_with(vec![]);
        let t = train(20.0, 4.0, 0.5);
        let pv = pantograph_voltage(&m, &t, 0.0);
        assert!(pv.feasible);
        assert!((pv.u_t - 27.178).abs() < 1e-3, "{pv:?}");
        assert!((pv.delta_t + 1.629).abs() < 1e-3, "{pv:?}");
        let printed = pantograph_voltage_printed(40.0, U, 20.0, t.power, 0.0);
        assert_relative_eq!(pv.u_t, printed.u_t, max_relative = 1e-14);
        assert_relative_eq!(pv.delta_t, printed.delta_t, max_relative = 1e-12);
        let exact = pantograph_voltage_exact(&m, &t, 0.0).unwrap();
        // The closed form drops a second-order term: about 0.04 % of U_N here.
        assert!((exact.u_t - pv.u_t).abs() < 0.015, "{exact:?}");
        assert!((exact.delta_t - pv.delta_t).abs() < 0.005, "{exact:?}");
    }

    #[test]
    fn unloaded_pantograph_follows_the_line() {
        let m = mso_with(vec![]);
        let t = train(10.0, 0.0, 0.0);
        let pv = pantograph_voltage(&m, &t, 8.0);
        assert_eq!(pv.u_t, U);
        assert_relative_eq!(pv.delta_t, 2.0, epsilon = 1e-12);
        let exact = pantograph_voltage_exact(&m, &t, 0.0).unwrap();
        let approx0 = pantograph_voltage(&m, &t, 0.0);
        assert_relative_eq!(exact.u_t, approx0.u_t, epsilon = 1e-9);
        assert!(exact.delta_t.abs() < 1e-9);
    }

    #[test]
    fn heavy_midpoint_load_collapses() {
        // β = 400·(0.15·P)/(40·27.5²) > 1/4 once P > 126 MW.
        let pv = pantograph_voltage(&mso_with(vec![]), &train(20.0, 200.0, 0.0), 0.0);
        assert!(!pv.feasible);
        assert!(pv.discriminant < 0.0);
    }

    #[test]
    fn exact_pantograph_is_mirror_symmetric_at_midpoint() {
        let m = mso_with(vec![]);
        let t = train(20.0, 4.0, 0.5);
        let a = pantograph_voltage_exact(&m, &t, 0.0).unwrap();
        let mut swapped = m.clone();
        std::mem::swap(&mut swapped.left, &mut swapped.right);
        let b = pantograph_voltage_exact(&swapped, &t, 0.0).unwrap();
        assert_relative_eq!(a.u_t, b.u_t, epsilon = 1e-12);
        assert_relative_eq!(a.delta_t, b.delta_t, epsilon = 1e-12);
    }

    #[test]
    fn current_source_examples() {
        let idle = train(10.0, 0.0, 0.0);
        let i = train_current_source(&idle, Phasor::new(27.5, 0.0)).unwrap().to_complex();
        assert_relative_eq!(i.re, -0.0275, epsilon = 1e-15);
        assert!(i.im.abs() < 1e-15);

        let far = train(10.0, 4.0, 0.5).with_z_t(Complex64::new(1e300, 0.0));
        let i = train_current_source(&far, Phasor::new(27.5, 0.0)).unwrap();
        assert_relative_eq!(i.magnitude, (4f64.hypot(0.5)) / 27.5, epsilon = 1e-12);
        assert_relative_eq!(i.angle_deg(), -(0.5f64 / 4.0).atan().to_degrees(), epsilon = 1e-9);
        assert!((i.magnitude - 0.1466).abs() < 1e-4);

        // Finite Z_t: the two terms add.
        let t = train(10.0, 4.0, 0.5);
        let u = Complex64::new(27.0, -1.0);
        let i = train_current_source(&t, Phasor::from(u)).unwrap().to_complex();
        let expect = (Complex64::new(4.0, 0.5) / u).conj() - u / 1000.0;
        assert_relative_eq!((i - expect).norm(), 0.0, epsilon = 1e-14);

        assert!(matches!(train_current_source(&t, Phasor::new(0.0, 0.0)), Err(Error::ZeroVoltage)));
    }

    #[test]
    fn midpoint_branches_mirror() {
        let m = mso_with(vec![]);
        let t = train(20.0, 4.0, 0.5);
        let a = equivalent_branch(&m, &t, 0.0, Side::Station1).unwrap();
        let b = equivalent_branch(&m, &t, 0.0, Side::Station2).unwrap();
        assert_relative_eq!((a.z_par - b.z_par).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(a.i_src.magnitude, b.i_src.magnitude, epsilon = 1e-12);
        assert_relative_eq!(a.i_src.angle, b.i_src.angle, epsilon = 1e-12);
    }

    #[test]
    fn vanishing_train_leaves_the_line() {
        let m = mso_with(vec![]);
        let t = train(12.0, 0.0, 0.0).with_z_t(Complex64::new(1e15, 0.0));
        // The source's own term U_N∠δ/(Z1 + Z2) is cancelled by the divider
        // term; the exchange is carried by the direct line alone.
        let b = equivalent_branch(&m, &t, 5.0, Side::Station1).unwrap();
        let line = (Complex64::from_polar(U, 5.0 * DEG) / m.section_impedance()).norm();
        assert!(b.i_src.magnitude < 1e-9 * line, "{b:?}");
        assert!(b.z_par.norm() > 1e12);
    }

    #[test]
    fn branches_reproduce_port_currents() {
        // Norton pairs plus the direct line give the same station current as
        // solving the train node directly.
        let m = mso_with(vec![]);
        let t = train(13.0, 3.0, 0.4);
        let delta = 7.0;
        let v1 = Complex64::new(U, 0.0);
        let v2 = Complex64::from_polar(U, delta * DEG);
        let pv = pantograph_voltage(&m, &t, delta);
        let i_ts = train_current_source(&t, pv.phasor()).unwrap().to_complex();
        let (z1, z2, zt) = (m.z0.to_complex() * 13.0, m.z0.to_complex() * 27.0, t.z_t);
        let vt = (v1 / z1 + v2 / z2 - i_ts) / (z1.inv() + z2.inv() + zt.inv());
        let b1 = equivalent_branch(&m, &t, delta, Side::Station1).unwrap();
        let b2 = equivalent_branch(&m, &t, delta, Side::Station2).unwrap();
        let zl = z1 + z2;
        let i1 = (v1 - v2) / zl + v1 / b1.z_par + b1.i_src.to_complex();
        let i2 = (v2 - v1) / zl + v2 / b2.z_par + b2.i_src.to_complex();
        assert!((i1 - (v1 - vt) / z1).norm() < 1e-12);
        assert!((i2 - (v2 - vt) / z2).norm() < 1e-12);
    }

    #[test]
    fn aggregation_laws() {
        let m = mso_with(vec![]);
        let b = equivalent_branch(&m, &train(10.0, 4.0, 0.5), 3.0, Side::Station1).unwrap();
        assert_eq!(aggregate_branches(&[b]).unwrap().i_src.magnitude, b.i_src.magnitude);
        let two = aggregate_branches(&[b, b]).unwrap();
        assert_relative_eq!(two.i_src.magnitude, 2.0 * b.i_src.magnitude, max_relative = 1e-14);
        assert_relative_eq!((two.z_par - b.z_par / 2.0).norm(), 0.0, epsilon = 1e-9 * b.z_par.norm());
        assert!(matches!(aggregate_branches(&[]), Err(Error::EmptyAggregate)));
        let other = equivalent_branch(&m, &train(10.0, 4.0, 0.5), 3.0, Side::Station2).unwrap();
        assert!(matches!(aggregate_branches(&[b, other]), Err(Error::MixedSides)));
    }

    #[test]
    fn zso_reduction() {
        let mut zso = ZsoSpec::new(40.0, LineImpedance::default(), StationSpec::nts(U), StationSpec::ats(U));
        let empty = reduce_zso(&zso).unwrap();
        assert!(empty.trains.is_empty());
        assert_eq!(empty.line, LineImpedance::new(0.075, 0.275));
        zso.push_train(train(10.0, 4.0, 0.5));
        let one = reduce_zso(&zso).unwrap();
        assert_eq!(one.trains.len(), 1);
        assert_eq!(one.trains[0].load.l1, 10.0);
        assert_eq!(one.trains[0].track_z0, LineImpedance::default());
        zso.down.length_km = 39.0;
        assert!(matches!(reduce_zso(&zso), Err(Error::MismatchedTracks { .. })));
    }

    #[test]
    fn one_train_per_track_doubles_single_track_powers() {
        let mut zso = ZsoSpec::new(40.0, LineImpedance::default(), StationSpec::nts(U), StationSpec::ats(U));
        zso.push_train(train(15.0, 4.0, 0.5));
        let mut down = train(15.0, 4.0, 0.5);
        down.track = Track::Down;
        zso.push_train(down);
        let pf = build_power_functions(&reduce_zso(&zso).unwrap(), ModelOptions::default()).unwrap();
        let single = build_power_functions(&EquivalentSection::from_mso(&zso.up), ModelOptions::default()).unwrap();
        for d in [-10.0, 0.0, 6.0] {
            let (a1, a2) = pf.evaluate(d);
            let (b1, b2) = single.evaluate(d);
            assert_relative_eq!(a1.p, 2.0 * b1.p, max_relative = 1e-12);
            assert_relative_eq!(a2.q, 2.0 * b2.q, max_relative = 1e-12);
        }
    }

    #[test]
    fn no_trains_gives_line_exchange() {
        let pf = build_power_functions(&EquivalentSection::from_mso(&mso_with(vec![])), ModelOptions::default()).unwrap();
        let (s1, s2) = pf.evaluate(0.0);
        assert!(s1.p.abs() < 1e-12 && s1.q.abs() < 1e-12 && s2.p.abs() < 1e-12 && s2.q.abs() < 1e-12);
        // U²·[R(1 − cos δ) − X sin δ]/|Z|² at δ = 5°.
        let z = Complex64::new(6.0, 22.0);
        let d = 5.0 * DEG;
        let p1 = U * U * (z.re * (1.0 - d.cos()) - z.im * d.sin()) / z.norm_sqr();
        let p2 = U * U * (z.re * (1.0 - d.cos()) + z.im * d.sin()) / z.norm_sqr();
        let (s1, s2) = pf.evaluate(5.0);
        assert_relative_eq!(s1.p, p1, max_relative = 1e-12);
        assert_relative_eq!(s2.p, p2, max_relative = 1e-12);
    }

    #[test]
    fn term_count_is_trains_plus_one() {
        let m = mso_with(vec![train(10.0, 4.0, 0.5)]);
        for coupling in [Coupling::Isolated, Coupling::Mutual] {
            let pf = build_power_functions(&EquivalentSection::from_mso(&m), ModelOptions { coupling }).unwrap();
            assert_eq!(pf.station1.terms.len(), 2);
            assert_eq!(pf.station2.terms.len(), 2);
            assert_eq!(pf.n_trains, 1);
        }
    }

    #[test]
    fn single_train_matches_ladder_solution() {
        let m = mso_with(vec![train(10.0, 4.0, 0.5)]);
        for coupling in [Coupling::Isolated, Coupling::Mutual] {
            let pf = build_power_functions(&EquivalentSection::from_mso(&m), ModelOptions { coupling }).unwrap();
            for d in [-20.0, -5.0, 0.0, 5.0, 20.0] {
                let (s1, s2) = pf.evaluate(d);
                let (e1, e2) = ladder_powers(&m, d);
                // Within 0.1 MW: the pantograph formula is approximate.
                assert!((s1.to_complex() - e1).norm() < 0.1, "{coupling:?} {d}: {s1:?} vs {e1}");
                assert!((s2.to_complex() - e2).norm() < 0.1, "{coupling:?} {d}: {s2:?} vs {e2}");
            }
        }
    }

    #[test]
    fn single_train_power_slopes() {
        let m = mso_with(vec![train(10.0, 4.0, 0.5)]);
        let pf = build_power_functions(&EquivalentSection::from_mso(&m), ModelOptions::default()).unwrap();
        for i in 0..=40 {
            let d = -20.0 + i as f64;
            let jet = pf.jet(d);
            assert!(jet.p2()[1] > 0.0 && jet.p1()[1] < 0.0);
        }
    }

    fn arb_section() -> impl Strategy<Value = EquivalentSection> {
        let t = (1.0..39.0f64, -4.8..4.8f64, 0.0..0.5f64, prop::bool::ANY);
        prop::collection::vec(t, 0..5).prop_map(|ts| {
            let mut zso = ZsoSpec::new(40.0, LineImpedance::default(), StationSpec::nts(U), StationSpec::ats(U));
            for (i, (l1, p, q, up)) in ts.into_iter().enumerate() {
                let mut t = TrainLoad::new(format!("T{i}"), l1, ComplexPower::new(p, q), Track::Up);
                if !up {
                    t.track = Track::Down;
                }
                zso.push_train(t);
            }
            reduce_zso(&zso).unwrap()
        })
    }

    proptest! {
        #[test]
        fn printed_form_identity(l1 in 0.5..39.5f64, p in -4.8..4.8f64, q in -0.5..0.5f64, d in -20.0..20.0f64) {
            let s = ComplexPower::new(p, q);
            let g = pantograph_voltage_at(LineImpedance::default(), 40.0, U, l1, s, d);
            let printed = pantograph_voltage_printed(40.0, U, l1, s, d);
            prop_assert!((g.u_t - printed.u_t).abs() <= 1e-12 * U);
            prop_assert!((g.delta_t - printed.delta_t).abs() <= 1e-9);
        }

        #[test]
        fn derivatives_match_finite_differences(section in arb_section(), d in -19.0..19.0f64) {
            for coupling in [Coupling::Isolated, Coupling::Mutual] {
                let pf = build_power_functions(&section, ModelOptions { coupling }).unwrap();
                let h = 1e-5f64.to_degrees();
                let (a, b) = (pf.jet(d + h), pf.jet(d - h));
                let jet = pf.jet(d);
                for q in [Quantity::P1, Quantity::P2, Quantity::Q1, Quantity::Q2] {
                    let fd = (q.pick(&a)[0] - q.pick(&b)[0]) / (2.0 * h);
                    let an = q.pick(&jet)[1];
                    prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-6), "{q:?}: {fd} vs {an}");
                    let fd2 = (q.pick(&a)[1] - q.pick(&b)[1]) / (2.0 * h);
                    let an2 = q.pick(&jet)[2];
                    prop_assert!((fd2 - an2).abs() <= 1e-6 * an2.abs().max(1e-8), "{q:?}'': {fd2} vs {an2}");
                }
            }
        }

        #[test]
        fn mirror_swaps_stations(section in arb_section(), d in -20.0..20.0f64) {
            let pf = build_power_functions(&section, ModelOptions::default()).unwrap();
            let mirrored = build_power_functions(&section.clone().mirrored(), ModelOptions::default()).unwrap();
            let (s1, s2) = pf.evaluate(d);
            let (m1, m2) = mirrored.evaluate(-d);
            prop_assert!((s1.to_complex() - m2.to_complex()).norm() < 1e-9);
            prop_assert!((s2.to_complex() - m1.to_complex()).norm() < 1e-9);
        }

        #[test]
        fn train_order_does_not_matter(section in arb_section(), d in -20.0..20.0f64) {
            let pf = build_power_functions(&section, ModelOptions::default()).unwrap();
            let mut rev = section.clone();
            rev.trains.reverse();
            let pr = build_power_functions(&rev, ModelOptions::default()).unwrap();
            let (a1, a2) = pf.evaluate(d);
            let (b1, b2) = pr.evaluate(d);
            prop_assert!((a1.to_complex() - b1.to_complex()).norm() < 1e-10);
            prop_assert!((a2.to_complex() - b2.to_complex()).norm() < 1e-10);
        }

        #[test]
        fn aggregation_is_permutation_invariant(l in prop::collection::vec((1.0..39.0f64, -4.8..4.8f64), 1..5)) {
            let m = mso_with(vec![]);
            let bs: Vec<_> = l.iter().map(|(l1, p)| equivalent_branch(&m, &train(*l1, *p, 0.3), 4.0, Side::Station2).unwrap()).collect();
            let a = aggregate_branches(&bs).unwrap();
            let mut rev = bs.clone();
            rev.reverse();
            let b = aggregate_branches(&rev).unwrap();
            prop_assert!((a.i_src.to_complex() - b.i_src.to_complex()).norm() <= 1e-12 * a.i_src.magnitude.max(1.0));
            prop_assert!((a.z_par - b.z_par).norm() <= 1e-12 * a.z_par.norm());
        }
    }
}
