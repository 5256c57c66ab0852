//! Domain types shared by every stage: phasors, powers, line data, trains and
//! the station/section topology of a traction station cluster.
//!
//! Units follow one contract throughout: power in MW / MVar, voltage in kV,
//! current in kA, impedance in Ω, length in km. With these units `MW·Ω = kV²`,
//! so the voltage-drop expressions need no conversion factors. Angles are
//! radians inside computations and degrees on every external surface.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default catenary voltage of a 2×25 kV style AC railway feed.
pub const DEFAULT_U_N_KV: f64 = 27.5;
/// Default system base for per-unit tolerances.
pub const DEFAULT_S_BASE_MVA: f64 = 100.0;

/// Wraps an angle in radians into `(-π, π]`.
pub fn wrap_angle(rad: f64) -> f64 {
    let mut a = rad % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasor {
    pub magnitude: f64,
    /// Radians, normalized to `(-π, π]`.
    pub angle: f64,
}

impl Phasor {
    pub fn new(magnitude: f64, angle: f64) -> Self {
        if magnitude < 0.0 {
            return Phasor {
                magnitude: -magnitude,
                angle: wrap_angle(angle + PI),
            };
        }
        Phasor {
            magnitude,
            angle: wrap_angle(angle),
        }
    }

    pub fn from_degrees(magnitude: f64, angle_deg: f64) -> Self {
        Self::new(magnitude, angle_deg.to_radians())
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle.to_degrees()
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.angle)
    }
}

impl From<Complex64> for Phasor {
    fn from(c: Complex64) -> Self {
        let (m, a) = c.to_polar();
        Phasor::new(m, a)
    }
}

impl From<Phasor> for Complex64 {
    fn from(p: Phasor) -> Self {
        p.to_complex()
    }
}

impl fmt::Display for Phasor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}∠{:.4}°", self.magnitude, self.angle_deg())
    }
}

/// Complex power; negative `p` means the load is regenerating.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPower {
    #[serde(rename = "p_mw")]
    pub p: f64,
    #[serde(rename = "q_mvar")]
    pub q: f64,
}

impl ComplexPower {
    pub const ZERO: ComplexPower = ComplexPower { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        ComplexPower { p, q }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.p, self.q)
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite()
    }
}

impl From<Complex64> for ComplexPower {
    fn from(c: Complex64) -> Self {
        ComplexPower { p: c.re, q: c.im }
    }
}

impl std::ops::Add for ComplexPower {
    type Output = ComplexPower;
    fn add(self, rhs: ComplexPower) -> ComplexPower {
        ComplexPower::new(self.p + rhs.p, self.q + rhs.q)
    }
}

impl std::ops::Mul<f64> for ComplexPower {
    type Output = ComplexPower;
    fn mul(self, k: f64) -> ComplexPower {
        ComplexPower::new(self.p * k, self.q * k)
    }
}

/// Per-kilometre series impedance of a catenary track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineImpedance {
    /// Ω/km
    pub r: f64,
    /// Ω/km
    pub x: f64,
}

impl LineImpedance {
    pub const fn new(r: f64, x: f64) -> Self {
        LineImpedance { r, x }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }

    /// Two identical tracks in parallel.
    pub fn halved(self) -> Self {
        LineImpedance::new(self.r / 2.0, self.x / 2.0)
    }
}

impl Default for LineImpedance {
    fn default() -> Self {
        LineImpedance::new(0.15, 0.55)
    }
}

/// Impedance of `length_km` of uniform line.
pub fn segment_impedance(z0: LineImpedance, length_km: f64) -> Result<Complex64> {
    if length_km < 0.0 || length_km.is_nan() {
        return Err(Error::NegativeLength(length_km));
    }
    Ok(z0.to_complex() * length_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Up,
    Down,
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Track::Up => f.write_str("up"),
            Track::Down => f.write_str("down"),
        }
    }
}

/// Complex impedances are written as `{"r": .., "x": ..}` in documents.
pub(crate) mod complex_rx {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Rx {
        r: f64,
        x: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        Rx { r: z.re, x: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let rx = Rx::deserialize(d)?;
        Ok(Complex64::new(rx.r, rx.x))
    }
}

fn default_z_t() -> Complex64 {
    Complex64::new(1000.0, 0.0)
}

/// One train at a fixed position inside a single-track section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLoad {
    pub id: String,
    /// Distance from the left station of its section, km.
    #[serde(rename = "l1_km")]
    pub l1: f64,
    #[serde(flatten)]
    pub power: ComplexPower,
    /// Train branch impedance used by the equivalent circuit, Ω.
    #[serde(rename = "z_t_ohm", with = "complex_rx", default = "default_z_t")]
    pub z_t: Complex64,
    pub track: Track,
}

impl TrainLoad {
    pub fn new(id: impl Into<String>, l1: f64, power: ComplexPower, track: Track) -> Self {
        TrainLoad {
            id: id.into(),
            l1,
            power,
            z_t: default_z_t(),
            track,
        }
    }

    pub fn with_z_t(mut self, z_t: Complex64) -> Self {
        self.z_t = z_t;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationKind {
    /// Synchronized station pinned at 0°.
    #[serde(rename = "N-TS")]
    Nts,
    /// Station with an adjustable output phase angle.
    #[serde(rename = "A-TS")]
    Ats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationSpec {
    pub kind: StationKind,
    pub u_n_kv: f64,
}

impl StationSpec {
    pub fn nts(u_n_kv: f64) -> Self {
        StationSpec {
            kind: StationKind::Nts,
            u_n_kv,
        }
    }

    pub fn ats(u_n_kv: f64) -> Self {
        StationSpec {
            kind: StationKind::Ats,
            u_n_kv,
        }
    }
}

/// Minimum supply organization: two stations joined by one track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsoSpec {
    pub length_km: f64,
    pub z0: LineImpedance,
    pub left: StationSpec,
    pub right: StationSpec,
    #[serde(default)]
    pub trains: Vec<TrainLoad>,
}

impl MsoSpec {
    pub fn new(length_km: f64, z0: LineImpedance, left: StationSpec, right: StationSpec) -> Self {
        MsoSpec {
            length_km,
            z0,
            left,
            right,
            trains: Vec::new(),
        }
    }

    pub fn u_n(&self) -> f64 {
        self.left.u_n_kv
    }

    /// Total series impedance between the two stations.
    pub fn section_impedance(&self) -> Complex64 {
        self.z0.to_complex() * self.length_km
    }
}

/// Zone supply organization: the up and down tracks between the same
/// stations, paralleled only at the station busbars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZsoSpec {
    pub up: MsoSpec,
    pub down: MsoSpec,
}

impl ZsoSpec {
    pub fn new(length_km: f64, z0: LineImpedance, left: StationSpec, right: StationSpec) -> Self {
        let mso = MsoSpec::new(length_km, z0, left, right);
        ZsoSpec {
            up: mso.clone(),
            down: mso,
        }
    }

    pub fn track(&self, track: Track) -> &MsoSpec {
        match track {
            Track::Up => &self.up,
            Track::Down => &self.down,
        }
    }

    pub fn track_mut(&mut self, track: Track) -> &mut MsoSpec {
        match track {
            Track::Up => &mut self.up,
            Track::Down => &mut self.down,
        }
    }

    pub fn trains(&self) -> impl Iterator<Item = &TrainLoad> {
        self.up.trains.iter().chain(self.down.trains.iter())
    }

    pub fn train_count(&self) -> usize {
        self.up.trains.len() + self.down.trains.len()
    }

    /// Adds a train to the track named by `train.track`.
    pub fn push_train(&mut self, train: TrainLoad) {
        self.track_mut(train.track).trains.push(train);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerUnitBase {
    pub s_base_mva: f64,
    pub v_base_kv: f64,
}

impl Default for PerUnitBase {
    fn default() -> Self {
        PerUnitBase {
            s_base_mva: DEFAULT_S_BASE_MVA,
            v_base_kv: DEFAULT_U_N_KV,
        }
    }
}

impl PerUnitBase {
    pub fn power_to_pu(&self, mva: f64) -> f64 {
        mva / self.s_base_mva
    }

    pub fn power_from_pu(&self, pu: f64) -> f64 {
        pu * self.s_base_mva
    }

    pub fn voltage_to_pu(&self, kv: f64) -> f64 {
        kv / self.v_base_kv
    }

    pub fn voltage_from_pu(&self, pu: f64) -> f64 {
        pu * self.v_base_kv
    }

    pub fn z_base_ohm(&self) -> f64 {
        self.v_base_kv * self.v_base_kv / self.s_base_mva
    }
}

/// Closed interval of phase angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    /// Returns `None` unless `lo <= hi`.
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(AngleInterval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        AngleInterval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_interval(&self, other: &AngleInterval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn intersect(&self, other: &AngleInterval) -> Option<AngleInterval> {
        AngleInterval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Multiplies both bounds by `factor` (scaling about 0°).
    pub fn scaled(&self, factor: f64) -> AngleInterval {
        let (a, b) = (self.lo * factor, self.hi * factor);
        AngleInterval {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    /// `n` evenly spaced angles from `lo` to `hi` inclusive.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => (0..n)
                .map(|i| self.lo + self.width() * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl fmt::Display for AngleInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.4}°, {:.4}°]", self.lo, self.hi)
    }
}

/// Traction station cluster: N-TS1 - ZSO1 - A-TS - ZSO2 - N-TS2.
///
/// Train positions in `zso1` are measured from N-TS1, in `zso2` from the
/// A-TS; both count in the direction N-TS1 → N-TS2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TscSpec {
    pub zso1: ZsoSpec,
    pub zso2: ZsoSpec,
    /// Allowed A-TS angle range, degrees.
    pub delta_limits: AngleInterval,
    pub alpha_margin: f64,
    pub q_cir_max_mvar: f64,
    #[serde(default)]
    pub base: PerUnitBase,
}

impl Default for TscSpec {
    fn default() -> Self {
        TscSpec::uniform(40.0, LineImpedance::default(), DEFAULT_U_N_KV)
    }
}

impl TscSpec {
    /// Both zones of equal length and impedance with the default limits
    /// (±20°, margin 0.95, 0.2 MVar circulation allowance, 100 MVA base).
    pub fn uniform(length_km: f64, z0: LineImpedance, u_n_kv: f64) -> Self {
        let n = StationSpec::nts(u_n_kv);
        let a = StationSpec::ats(u_n_kv);
        TscSpec {
            zso1: ZsoSpec::new(length_km, z0, n, a),
            zso2: ZsoSpec::new(length_km, z0, a, n),
            delta_limits: AngleInterval { lo: -20.0, hi: 20.0 },
            alpha_margin: 0.95,
            q_cir_max_mvar: 0.2,
            base: PerUnitBase {
                s_base_mva: DEFAULT_S_BASE_MVA,
                v_base_kv: u_n_kv,
            },
        }
    }

    pub fn zso(&self, which: ZsoId) -> &ZsoSpec {
        match which {
            ZsoId::One => &self.zso1,
            ZsoId::Two => &self.zso2,
        }
    }

    pub fn zso_mut(&mut self, which: ZsoId) -> &mut ZsoSpec {
        match which {
            ZsoId::One => &mut self.zso1,
            ZsoId::Two => &mut self.zso2,
        }
    }

    pub fn train_count(&self) -> usize {
        self.zso1.train_count() + self.zso2.train_count()
    }

    pub fn trains(&self) -> impl Iterator<Item = &TrainLoad> {
        self.zso1.trains().chain(self.zso2.trains())
    }

    pub fn clear_trains(&mut self) {
        for zso in [&mut self.zso1, &mut self.zso2] {
            zso.up.trains.clear();
            zso.down.trains.clear();
        }
    }

    /// Runs [`validate_topology`] and turns error-severity findings into an
    /// [`Error::InvalidTopology`].
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<Violation> = validate_topology(self)
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTopology(errors))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZsoId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl fmt::Display for ZsoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZsoId::One => f.write_str("zso1"),
            ZsoId::Two => f.write_str("zso2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    /// Accepted by downstream stages, reported for the operator.
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub severity: Severity,
}

impl Violation {
    fn error(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
            severity: Severity::Error,
        }
    }

    fn warning(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
            severity: Severity::Warning,
        }
    }
}

/// Ratio `|z_t| / |L·Z0|` below which the per-train superposition of the
/// equivalent model is reported as unreliable.
pub const SUPERPOSITION_RATIO: f64 = 10.0;

fn check_station(field: &str, st: &StationSpec, kind: StationKind, out: &mut Vec<Violation>) {
    if st.kind != kind {
        out.push(Violation::error(field, format!("expected {kind:?} station")));
    }
    if !(st.u_n_kv > 0.0 && st.u_n_kv.is_finite()) {
        out.push(Violation::error(format!("{field}.u_n_kv"), "nominal voltage must be > 0"));
    }
}

fn check_mso(field: &str, mso: &MsoSpec, track: Track, out: &mut Vec<Violation>) {
    if !(mso.length_km > 0.0 && mso.length_km.is_finite()) {
        out.push(Violation::error(format!("{field}.length_km"), "length must be > 0"));
    }
    if !(mso.z0.r > 0.0 && mso.z0.x > 0.0) {
        out.push(Violation::error(format!("{field}.z0"), "r and x must be > 0"));
    }
    let section = mso.section_impedance().norm();
    for (i, t) in mso.trains.iter().enumerate() {
        let tf = format!("{field}.trains[{i}]");
        if !(t.l1 > 0.0 && t.l1 < mso.length_km) {
            out.push(Violation::error(
                format!("{tf}.l1_km"),
                format!("position out of range (0, {})", mso.length_km),
            ));
        }
        if !t.power.is_finite() {
            out.push(Violation::error(format!("{tf}.power"), "power must be finite"));
        }
        if t.track != track {
            out.push(Violation::error(format!("{tf}.track"), format!("train listed on the {track} track")));
        }
        let zt = t.z_t.norm();
        if !(zt.is_finite() && zt > 0.0) {
            out.push(Violation::error(format!("{tf}.z_t_ohm"), "branch impedance must be finite and non-zero"));
        } else if zt < SUPERPOSITION_RATIO * section {
            out.push(Violation::warning(
                format!("{tf}.z_t_ohm"),
                format!(
                    "superposition validity violated: |z_t| = {zt:.3} Ω < {SUPERPOSITION_RATIO}·|L·Z0| = {:.3} Ω",
                    SUPERPOSITION_RATIO * section
                ),
            ));
        }
    }
}

/// Lists every broken invariant of `spec`. An empty list means the
/// topology is usable; warnings do not block downstream stages.
pub fn validate_topology(spec: &TscSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, zso, left, right) in [
        ("zso1", &spec.zso1, StationKind::Nts, StationKind::Ats),
        ("zso2", &spec.zso2, StationKind::Ats, StationKind::Nts),
    ] {
        for (tname, track, mso) in [("up", Track::Up, &zso.up), ("down", Track::Down, &zso.down)] {
            let f = format!("{name}.{tname}");
            check_station(&format!("{f}.left"), &mso.left, left, &mut out);
            check_station(&format!("{f}.right"), &mso.right, right, &mut out);
            check_mso(&f, mso, track, &mut out);
        }
        if zso.up.left != zso.down.left || zso.up.right != zso.down.right {
            out.push(Violation::error(name, "up and down tracks must share both stations"));
        }
        if zso.up.length_km != zso.down.length_km {
            out.push(Violation::error(format!("{name}.down.length_km"), "track lengths differ"));
        }
    }
    if spec.zso1.up.right != spec.zso2.up.left {
        out.push(Violation::error("zso2.up.left", "both zones must share the same A-TS"));
    }
    let u = spec.zso1.up.left.u_n_kv;
    let stations = [spec.zso1.up.right, spec.zso2.up.right];
    if stations.iter().any(|s| (s.u_n_kv - u).abs() > 1e-12 * u.abs().max(1.0)) {
        out.push(Violation::error("stations", "all stations must share the same U_N"));
    }
    let d = spec.delta_limits;
    if !(d.lo <= 0.0 && d.hi >= 0.0 && (d.lo + d.hi).abs() <= 1e-9) {
        out.push(Violation::error("delta_limits", "must be a symmetric interval containing 0°"));
    }
    if d.hi >= 90.0 {
        out.push(Violation::error("delta_limits", "must lie inside (-90°, 90°)"));
    }
    if !(0.0..=1.0).contains(&spec.alpha_margin) {
        out.push(Violation::error("alpha_margin", "must lie in [0, 1]"));
    }
    if !(spec.q_cir_max_mvar >= 0.0 && spec.q_cir_max_mvar.is_finite()) {
        out.push(Violation::error("q_cir_max_mvar", "must be >= 0"));
    }
    if !(spec.base.s_base_mva > 0.0 && spec.base.v_base_kv > 0.0) {
        out.push(Violation::error("base", "s_base and v_base must be > 0"));
    }
    out
}
