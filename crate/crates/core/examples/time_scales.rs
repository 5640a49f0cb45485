//! Building time scales and inspecting their jump operators.
use tsl::timescale::{Component, ScaleGenerator, ScaleSpec, TimeScale};

fn show(name: &str, ts: &TimeScale, probes: &[f64]) -> tsl::Result<()> {
    println!("{name}: [{}, {}]", ts.min(), ts.max());
    for &t in probes {
        let c = ts.classify(t)?;
        println!(
            "  t = {t:<6} sigma = {:<8} rho = {:<8} mu = {:<8} dense = {}",
            ts.sigma(t)?,
            ts.rho(t)?,
            ts.graininess(t)?,
            c.dense()
        );
    }
    Ok(())
}

fn main() -> tsl::Result<()> {
    let z = ScaleGenerator::Integers { a: 0, b: 4 }.generate()?;
    show("integers 0..4", &z, &[0.0, 2.0, 4.0])?;

    let q = ScaleGenerator::QScale { q: 2.0, k_min: 0, k_max: 4 }.generate()?;
    show("2^k, k = 0..4", &q, &[1.0, 4.0, 16.0])?;

    let mixed = TimeScale::new([
        Component::Point(0.0),
        Component::Interval(1.0, 2.0),
        Component::Point(3.0),
    ])?;
    show("{0} + [1,2] + {3}", &mixed, &[0.0, 1.0, 1.5, 2.0, 3.0])?;
    println!("  kappa max = {}", mixed.kappa().max());
    println!("  scattered points = {:?}", mixed.enumerate_scattered());

    // Scales also load from JSON.
    let spec = ScaleSpec::from_json(r#"{"generator":{"hstep":{"a":0.0,"b":1.0,"h":0.25}}}"#)?;
    let h = spec.build()?;
    show("hstep 0.25", &h, &[0.0, 0.5])?;
    println!("  restricted to [0.25, 0.75]: {:?}", h.restrict(0.25, 0.75)?.enumerate_scattered());

    if let Err(e) = mixed.sigma(0.5) {
        println!("0.5 is not in the scale: {e}");
    }
    Ok(())
}
