//! Characteristic fault frequencies of an induction motor from its nameplate
//! and bearing parameters (motor current signature analysis).
//!
//! Formulas:
//!
//! - rotor bar defect: `f1 (1 ± 2 n s)`
//! - inter-turn short circuit: `k f1 ∓ m fr`, `k` odd
//! - bearing outer race: `(n/2) fr (1 - (Db/Dp) cos β)`
//! - bearing inner race: `(n/2) fr (1 + (Db/Dp) cos β)`
//! - rolling element: `(Dp / (2 Db)) fr (1 - ((Db/Dp) cos β)^2)`
//!
//! Every emitted frequency lies strictly inside `(0, fs/2)`; out-of-band
//! candidates are dropped and counted in [`FrequencySet::dropped`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequencies closer than this are considered identical.
pub const DEDUP_TOLERANCE_HZ: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultType {
    #[serde(alias = "RBD")]
    RotorBarDefect,
    #[serde(alias = "ITSC")]
    InterTurnShortCircuit,
    #[serde(alias = "BPFO")]
    BearingOuterRace,
    #[serde(alias = "BPFI")]
    BearingInnerRace,
    #[serde(alias = "BSF")]
    BearingRollingElement,
}

impl FaultType {
    pub const ALL: [FaultType; 5] = [
        FaultType::RotorBarDefect,
        FaultType::InterTurnShortCircuit,
        FaultType::BearingOuterRace,
        FaultType::BearingInnerRace,
        FaultType::BearingRollingElement,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            FaultType::RotorBarDefect => "RBD",
            FaultType::InterTurnShortCircuit => "ITSC",
            FaultType::BearingOuterRace => "BPFO",
            FaultType::BearingInnerRace => "BPFI",
            FaultType::BearingRollingElement => "BSF",
        }
    }

    pub fn is_bearing(self) -> bool {
        matches!(
            self,
            FaultType::BearingOuterRace | FaultType::BearingInnerRace | FaultType::BearingRollingElement
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultType::RotorBarDefect => "RotorBarDefect",
            FaultType::InterTurnShortCircuit => "InterTurnShortCircuit",
            FaultType::BearingOuterRace => "BearingOuterRace",
            FaultType::BearingInnerRace => "BearingInnerRace",
            FaultType::BearingRollingElement => "BearingRollingElement",
        }
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingGeometry {
    pub n_elements: u32,
    pub ball_diameter_m: f64,
    pub pitch_diameter_m: f64,
    #[serde(default)]
    pub contact_angle_rad: f64,
}

impl BearingGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements == 0 {
            return Err(Error::invalid("bearing.n_elements", "must be positive"));
        }
        if !(self.ball_diameter_m.is_finite() && self.ball_diameter_m > 0.0) {
            return Err(Error::invalid("bearing.ball_diameter_m", "must be a positive number"));
        }
        if !(self.pitch_diameter_m.is_finite() && self.pitch_diameter_m > 0.0) {
            return Err(Error::invalid("bearing.pitch_diameter_m", "must be a positive number"));
        }
        if self.ball_diameter_m >= self.pitch_diameter_m {
            return Err(Error::invalid(
                "bearing.ball_diameter_m",
                "must be smaller than pitch_diameter_m",
            ));
        }
        let beta = self.contact_angle_rad;
        if !(beta.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&beta)) {
            return Err(Error::invalid("bearing.contact_angle_rad", "must lie in [0, pi/2)"));
        }
        if self.diameter_ratio_cos() >= 1.0 {
            return Err(Error::invalid(
                "bearing",
                "(ball_diameter / pitch_diameter) * cos(contact_angle) must be below 1",
            ));
        }
        Ok(())
    }

    /// `(Db / Dp) cos β`.
    fn diameter_ratio_cos(&self) -> f64 {
        self.ball_diameter_m / self.pitch_diameter_m * self.contact_angle_rad.cos()
    }
}

/// The engine parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    #[serde(default)]
    pub name: String,
    pub supply_frequency_hz: f64,
    pub slip: f64,
    pub pole_pairs: u32,
    /// Derived as `f1 (1 - s) / p` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotor_frequency_hz: Option<f64>,
    pub sampling_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearing: Option<BearingGeometry>,
    /// Informational only; no frequency formula consumes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotor_bars: Option<u32>,
}

impl MotorParams {
    /// 1.5 kW, 4098 Hz acquisition, s = 0.073, p = 2, fr = 23.17 Hz.
    pub fn motor_a() -> Self {
        MotorParams {
            name: "Motor A".into(),
            supply_frequency_hz: 50.0,
            slip: 0.073,
            pole_pairs: 2,
            rotor_frequency_hz: Some(23.17),
            sampling_rate_hz: 4098.0,
            bearing: None,
            rotor_bars: None,
        }
    }

    /// 17 kW, 10 kHz acquisition, s = 0.028, p = 2, fr = 23.33 Hz, 34 rotor bars.
    pub fn motor_b() -> Self {
        MotorParams {
            name: "Motor B".into(),
            supply_frequency_hz: 50.0,
            slip: 0.028,
            pole_pairs: 2,
            rotor_frequency_hz: Some(23.33),
            sampling_rate_hz: 10_000.0,
            bearing: None,
            rotor_bars: Some(34),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f1 = self.supply_frequency_hz;
        if !(f1.is_finite() && f1 > 0.0) {
            return Err(Error::invalid("supply_frequency_hz", "must be a positive number"));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 2.0 * f1) {
            return Err(Error::invalid(
                "sampling_rate_hz",
                "must exceed twice the supply frequency",
            ));
        }
        if !(self.slip.is_finite() && (0.0..1.0).contains(&self.slip)) {
            return Err(Error::invalid("slip", "must lie in [0, 1)"));
        }
        if self.pole_pairs == 0 {
            return Err(Error::invalid("pole_pairs", "must be positive"));
        }
        if let Some(fr) = self.rotor_frequency_hz {
            if !(fr.is_finite() && fr > 0.0) {
                return Err(Error::invalid("rotor_frequency_hz", "must be a positive number"));
            }
        }
        if let Some(bearing) = &self.bearing {
            bearing.validate()?;
        }
        Ok(())
    }

    /// Rotor (shaft) frequency, given or derived from slip and pole pairs.
    pub fn rotor_frequency(&self) -> f64 {
        self.rotor_frequency_hz
            .unwrap_or_else(|| self.supply_frequency_hz * (1.0 - self.slip) / self.pole_pairs as f64)
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sampling_rate_hz / 2.0
    }
}

/// Harmonic orders `n` (rotor bar), `k` and `m` (inter-turn short circuit).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonicOrders {
    pub rotor_orders: Vec<u32>,
    pub itsc_k: Vec<u32>,
    pub itsc_m: Vec<u32>,
}

impl Default for HarmonicOrders {
    fn default() -> Self {
        HarmonicOrders {
            rotor_orders: vec![1, 2, 3],
            itsc_k: vec![1, 3],
            itsc_m: vec![1, 2, 3],
        }
    }
}

impl HarmonicOrders {
    pub fn validate(&self) -> Result<()> {
        for (field, list) in [
            ("orders.rotor_orders", &self.rotor_orders),
            ("orders.itsc_k", &self.itsc_k),
            ("orders.itsc_m", &self.itsc_m),
        ] {
            if list.is_empty() {
                return Err(Error::invalid(field, "must not be empty"));
            }
            if list.contains(&0) {
                return Err(Error::invalid(field, "entries must be positive"));
            }
        }
        if let Some(k) = self.itsc_k.iter().find(|k| *k % 2 == 0) {
            return Err(Error::invalid("orders.itsc_k", format!("{k} is not odd")));
        }
        Ok(())
    }
}

/// The characteristic frequencies of one fault type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub fault: FaultType,
    /// Sorted ascending, deduplicated, strictly inside `(0, fs/2)`.
    pub frequencies_hz: Vec<f64>,
    /// Candidates discarded for being non-positive or at/above Nyquist.
    #[serde(default)]
    pub dropped: usize,
}

impl FrequencySet {
    fn from_candidates(fault: FaultType, candidates: impl IntoIterator<Item = f64>, nyquist: f64) -> Self {
        let mut kept = Vec::new();
        let mut dropped = 0;
        for f in candidates {
            if f > 0.0 && f < nyquist {
                kept.push(f);
            } else {
                dropped += 1;
            }
        }
        kept.sort_by(f64::total_cmp);
        kept.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOLERANCE_HZ);
        FrequencySet {
            fault,
            frequencies_hz: kept,
            dropped,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_hz.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frequencies_hz.len()
    }
}

/// `f1 (1 ± 2 n s)` for every rotor order `n`.
pub fn rotor_bar_frequencies(params: &MotorParams, orders: &HarmonicOrders) -> Result<FrequencySet> {
    params.validate()?;
    if orders.rotor_orders.is_empty() {
        return Err(Error::invalid("orders.rotor_orders", "must not be empty"));
    }
    if orders.rotor_orders.contains(&0) {
        return Err(Error::invalid("orders.rotor_orders", "entries must be positive"));
    }
    if params.slip == 0.0 {
        return Err(Error::ZeroSlip);
    }
    let f1 = params.supply_frequency_hz;
    let s = params.slip;
    let candidates = orders.rotor_orders.iter().flat_map(|&n| {
        let offset = 2.0 * n as f64 * s;
        [f1 * (1.0 - offset), f1 * (1.0 + offset)]
    });
    Ok(FrequencySet::from_candidates(
        FaultType::RotorBarDefect,
        candidates,
        params.nyquist_hz(),
    ))
}

/// `k f1 ∓ m fr` over the `(k, m)` grid.
pub fn itsc_frequencies(params: &MotorParams, orders: &HarmonicOrders) -> Result<FrequencySet> {
    params.validate()?;
    for (field, list) in [("orders.itsc_k", &orders.itsc_k), ("orders.itsc_m", &orders.itsc_m)] {
        if list.is_empty() {
            return Err(Error::invalid(field, "must not be empty"));
        }
        if list.contains(&0) {
            return Err(Error::invalid(field, "entries must be positive"));
        }
    }
    if let Some(k) = orders.itsc_k.iter().find(|k| *k % 2 == 0) {
        return Err(Error::invalid("orders.itsc_k", format!("{k} is not odd")));
    }
    let f1 = params.supply_frequency_hz;
    let fr = params.rotor_frequency();
    let mut candidates = Vec::with_capacity(2 * orders.itsc_k.len() * orders.itsc_m.len());
    for &k in &orders.itsc_k {
        for &m in &orders.itsc_m {
            let centre = k as f64 * f1;
            let offset = m as f64 * fr;
            candidates.push(centre - offset);
            candidates.push(centre + offset);
        }
    }
    Ok(FrequencySet::from_candidates(
        FaultType::InterTurnShortCircuit,
        candidates,
        params.nyquist_hz(),
    ))
}

/// BPFO, BPFI or BSF for the configured bearing.
pub fn bearing_frequencies(params: &MotorParams, fault: FaultType) -> Result<FrequencySet> {
    if !fault.is_bearing() {
        return Err(Error::NotBearingFault { fault });
    }
    params.validate()?;
    let bearing = params.bearing.as_ref().ok_or(Error::MissingBearing(fault))?;
    let fr = params.rotor_frequency();
    let n = bearing.n_elements as f64;
    let ratio = bearing.diameter_ratio_cos();
    let f = match fault {
        FaultType::BearingOuterRace => n / 2.0 * fr * (1.0 - ratio),
        FaultType::BearingInnerRace => n / 2.0 * fr * (1.0 + ratio),
        FaultType::BearingRollingElement => {
            bearing.pitch_diameter_m / (2.0 * bearing.ball_diameter_m) * fr * (1.0 - ratio * ratio)
        }
        _ => unreachable!(),
    };
    Ok(FrequencySet::from_candidates(fault, [f], params.nyquist_hz()))
}

/// The fault-frequency mapping for a set of fault types.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultFrequencyMap(BTreeMap<FaultType, FrequencySet>);

impl FaultFrequencyMap {
    pub fn get(&self, fault: FaultType) -> Option<&FrequencySet> {
        self.0.get(&fault)
    }

    pub fn insert(&mut self, set: FrequencySet) {
        self.0.insert(set.fault, set);
    }

    pub fn iter(&self) -> impl Iterator<Item = &FrequencySet> {
        self.0.values()
    }

    pub fn faults(&self) -> impl Iterator<Item = FaultType> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Faults whose frequencies all fell outside the band.
    pub fn out_of_band(&self) -> Vec<FaultType> {
        self.0.values().filter(|s| s.is_empty()).map(|s| s.fault).collect()
    }

    /// Sorted, deduplicated union of every fault's frequencies.
    pub fn union(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.0.values().flat_map(|s| s.frequencies_hz.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all.dedup_by(|b, a| (*b - *a).abs() <= DEDUP_TOLERANCE_HZ);
        all
    }
}

/// Characteristic frequencies for each requested fault type.
pub fn fault_frequency_map(
    params: &MotorParams,
    faults: &[FaultType],
    orders: &HarmonicOrders,
) -> Result<FaultFrequencyMap> {
    if faults.is_empty() {
        return Err(Error::invalid("faults", "at least one fault type is required"));
    }
    let mut map = FaultFrequencyMap::default();
    for &fault in faults {
        let set = match fault {
            FaultType::RotorBarDefect => rotor_bar_frequencies(params, orders),
            FaultType::InterTurnShortCircuit => itsc_frequencies(params, orders),
            _ => bearing_frequencies(params, fault),
        }
        .map_err(|e| Error::Fault {
            fault,
            source: Box::new(e),
        })?;
        map.insert(set);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn only(orders: (&[u32], &[u32], &[u32])) -> HarmonicOrders {
        HarmonicOrders {
            rotor_orders: orders.0.to_vec(),
            itsc_k: orders.1.to_vec(),
            itsc_m: orders.2.to_vec(),
        }
    }

    fn bearing_motor() -> MotorParams {
        MotorParams {
            bearing: Some(BearingGeometry {
                n_elements: 8,
                ball_diameter_m: 0.003,
                pitch_diameter_m: 0.01,
                contact_angle_rad: 0.0,
            }),
            ..MotorParams::motor_a()
        }
    }

    #[test]
    fn rotor_bar_motor_a() {
        let set = rotor_bar_frequencies(&MotorParams::motor_a(), &only((&[1], &[1], &[1]))).unwrap();
        assert!(close(&set.frequencies_hz, &[42.7, 57.3], 1e-9), "{:?}", set);
    }

    #[test]
    fn rotor_bar_motor_b() {
        let set = rotor_bar_frequencies(&MotorParams::motor_b(), &only((&[1, 2], &[1], &[1]))).unwrap();
        assert!(close(&set.frequencies_hz, &[44.4, 47.2, 52.8, 55.6], 1e-9), "{:?}", set);
    }

    #[test]
    fn rotor_bar_zero_slip_rejected() {
        let params = MotorParams {
            slip: 0.0,
            ..MotorParams::motor_a()
        };
        assert!(matches!(
            rotor_bar_frequencies(&params, &HarmonicOrders::default()),
            Err(Error::ZeroSlip)
        ));
    }

    #[test]
    fn rotor_bar_drops_non_positive() {
        // 1 - 2*3*0.4 < 0
        let params = MotorParams {
            slip: 0.4,
            ..MotorParams::motor_a()
        };
        let set = rotor_bar_frequencies(&params, &only((&[3], &[1], &[1]))).unwrap();
        assert_eq!(set.dropped, 1);
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn itsc_motor_a() {
        let set = itsc_frequencies(&MotorParams::motor_a(), &only((&[1], &[1], &[1]))).unwrap();
        assert!(close(&set.frequencies_hz, &[26.83, 73.17], 1e-9), "{:?}", set);
    }

    #[test]
    fn itsc_motor_b() {
        let set = itsc_frequencies(&MotorParams::motor_b(), &only((&[1], &[1], &[1, 2]))).unwrap();
        assert!(close(&set.frequencies_hz, &[3.34, 26.67, 73.33, 96.66], 1e-9), "{:?}", set);
    }

    #[test]
    fn itsc_rejects_bad_orders() {
        let p = MotorParams::motor_a();
        assert!(itsc_frequencies(&p, &only((&[1], &[1], &[0]))).is_err());
        assert!(itsc_frequencies(&p, &only((&[1], &[1], &[]))).is_err());
        assert!(itsc_frequencies(&p, &only((&[1], &[2], &[1]))).is_err());
    }

    #[test]
    fn itsc_uses_derived_rotor_frequency() {
        let params = MotorParams {
            rotor_frequency_hz: None,
            ..MotorParams::motor_a()
        };
        assert!((params.rotor_frequency() - 23.175).abs() < 1e-12);
        let set = itsc_frequencies(&params, &only((&[1], &[1], &[1]))).unwrap();
        assert!(close(&set.frequencies_hz, &[26.825, 73.175], 1e-9));
    }

    #[test]
    fn itsc_drops_above_nyquist() {
        let params = MotorParams {
            sampling_rate_hz: 160.0,
            ..MotorParams::motor_a()
        };
        let set = itsc_frequencies(&params, &only((&[1], &[1], &[1]))).unwrap();
        // 73.17 < 80 kept, 26.83 kept
        assert_eq!(set.len(), 2);
        let set = itsc_frequencies(&params, &only((&[1], &[3], &[1]))).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.dropped, 2);
    }

    #[test]
    fn bearing_values() {
        let params = bearing_motor();
        let bpfo = bearing_frequencies(&params, FaultType::BearingOuterRace).unwrap();
        let bpfi = bearing_frequencies(&params, FaultType::BearingInnerRace).unwrap();
        assert!((bpfo.frequencies_hz[0] - 64.876).abs() < 1e-9);
        assert!((bpfi.frequencies_hz[0] - 120.484).abs() < 1e-9);
        let bsf = bearing_frequencies(&params, FaultType::BearingRollingElement).unwrap();
        let expected = 0.01 / (2.0 * 0.003) * 23.17 * (1.0 - 0.09);
        assert!((bsf.frequencies_hz[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn bearing_requires_geometry() {
        let err = bearing_frequencies(&MotorParams::motor_a(), FaultType::BearingOuterRace).unwrap_err();
        assert!(matches!(err, Error::MissingBearing(FaultType::BearingOuterRace)));
    }

    #[test]
    fn bearing_rejects_right_angle_and_bad_diameters() {
        let mut params = bearing_motor();
        params.bearing.as_mut().unwrap().contact_angle_rad = std::f64::consts::FRAC_PI_2;
        assert!(bearing_frequencies(&params, FaultType::BearingInnerRace).is_err());
        let mut params = bearing_motor();
        params.bearing.as_mut().unwrap().ball_diameter_m = 0.02;
        assert!(bearing_frequencies(&params, FaultType::BearingInnerRace).is_err());
        assert!(bearing_frequencies(&bearing_motor(), FaultType::RotorBarDefect).is_err());
    }

    #[test]
    fn map_motor_a() {
        let orders = only((&[1], &[1], &[1]));
        let map = fault_frequency_map(
            &MotorParams::motor_a(),
            &[FaultType::RotorBarDefect, FaultType::InterTurnShortCircuit],
            &orders,
        )
        .unwrap();
        assert!(close(&map.get(FaultType::RotorBarDefect).unwrap().frequencies_hz, &[42.7, 57.3], 1e-9));
        assert!(close(
            &map.get(FaultType::InterTurnShortCircuit).unwrap().frequencies_hz,
            &[26.83, 73.17],
            1e-9
        ));
        assert!(close(&map.union(), &[26.83, 42.7, 57.3, 73.17], 1e-9));
        assert!(map.out_of_band().is_empty());
    }

    #[test]
    fn map_errors() {
        let orders = HarmonicOrders::default();
        assert!(fault_frequency_map(&MotorParams::motor_a(), &[], &orders).is_err());
        let err = fault_frequency_map(&MotorParams::motor_a(), &[FaultType::BearingOuterRace], &orders).unwrap_err();
        match err {
            Error::Fault { fault, .. } => assert_eq!(fault, FaultType::BearingOuterRace),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn params_validation() {
        let mut p = MotorParams::motor_a();
        p.sampling_rate_hz = 90.0;
        assert!(p.validate().is_err());
        let mut p = MotorParams::motor_a();
        p.slip = 1.0;
        assert!(p.validate().is_err());
        let mut p = MotorParams::motor_a();
        p.supply_frequency_hz = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn motor_params_json_roundtrip() {
        let json = r#"{"name":"x","supply_frequency_hz":50,"slip":0.05,"pole_pairs":2,"sampling_rate_hz":1000,
            "bearing":{"n_elements":9,"ball_diameter_m":0.0079,"pitch_diameter_m":0.0335}}"#;
        let p: MotorParams = serde_json::from_str(json).unwrap();
        p.validate().unwrap();
        assert_eq!(p.bearing.unwrap().contact_angle_rad, 0.0);
        assert!((p.rotor_frequency() - 23.75).abs() < 1e-12);
    }
}
