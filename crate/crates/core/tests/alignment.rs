use std::f64::consts::LN_2;

use rotor_floquet::basis::UnitBridge;
use rotor_floquet::observables::{alignment_spectrum, propagate_ensemble, thermal_ensemble};
use rotor_floquet::propagation::{kick_strength_from_pulse, polarizability_for_kick, PulseShape, PulseTrainSpec, TauFraction};

const B: f64 = 0.1141;
const D: f64 = 4.0e-8;
const INTENSITY: f64 = 1.5e12;
const FWHM: f64 = 500e-15;

fn icl() -> UnitBridge {
    UnitBridge::new(B, D, Some(polarizability_for_kick(10.0, INTENSITY, FWHM))).unwrap()
}

#[test]
fn unkicked_thermal_trace_is_flat() {
    let bridge = icl();
    let ensemble = thermal_ensemble(5.0, &bridge, &bridge.spectrum().unwrap()).unwrap();
    let train = PulseTrainSpec::delta(0.0, TauFraction::new(1, 3).unwrap(), 1).unwrap();
    let run = propagate_ensemble(&ensemble, &train, 120).unwrap();
    let trace = run.alignment_trace(1, 50.0, run.nyquist_samples(1, 50.0).unwrap()).unwrap();
    let (lo, hi) = trace.values.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo < 1e-12, "{}", hi - lo);
    assert!((trace.values[0] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn spectral_lines_sit_on_populated_beats() {
    let bridge = icl();
    let spectrum = bridge.spectrum().unwrap();
    let p = kick_strength_from_pulse(&bridge, INTENSITY, FWHM).unwrap();
    let train = PulseTrainSpec::new(p, TauFraction::new(1, 3).unwrap(), 4, PulseShape::Gaussian { fwhm: bridge.to_reduced_time(FWHM) }).unwrap();
    let run = propagate_ensemble(&thermal_ensemble(5.0, &bridge, &spectrum).unwrap(), &train, 200).unwrap();

    let broadening = 0.33;
    let window = 8.0 * 2.0 * (2.0 * LN_2).sqrt() / (broadening / bridge.energy_unit_cm());
    let trace = run.alignment_trace(4, window, 4 * run.nyquist_samples(4, window).unwrap()).unwrap();
    let s = alignment_spectrum(&trace, broadening, Some(&bridge)).unwrap();

    let pops = run.populations(4).unwrap();
    let beats: Vec<f64> = (0..pops.len() - 2)
        .filter(|&j| pops[j] > 1e-6 && pops[j + 2] > 1e-6)
        .map(|j| (spectrum.energy(j as u32 + 2) - spectrum.energy(j as u32)) * bridge.energy_unit_cm())
        .collect();
    let top = s.magnitudes.iter().copied().fold(0.0, f64::max);
    let peaks: Vec<f64> = (1..s.magnitudes.len() - 1)
        .filter(|&k| s.magnitudes[k] > 0.05 * top && s.magnitudes[k] >= s.magnitudes[k - 1] && s.magnitudes[k] > s.magnitudes[k + 1])
        .map(|k| s.frequencies[k])
        .collect();
    assert!(peaks.len() > 5);
    for f in peaks {
        let nearest = beats.iter().map(|b| (b - f).abs()).fold(f64::MAX, f64::min);
        assert!(nearest < 0.5 * broadening, "line at {f} cm^-1 is {nearest} from the nearest populated beat");
    }
}
