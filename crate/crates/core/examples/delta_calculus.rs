//! Delta derivatives and integrals on a scattered scale and on a mixed one.
use tsl::delta::{delta_derivative, delta_integral, ScaleFn};
use tsl::timescale::{Component, ScaleGenerator, TimeScale};

fn main() -> tsl::Result<()> {
    let f = ScaleFn::new(|t: f64| t * t);

    // On the integers f^Δ(t) = 2t + 1 and ∫_0^n t Δt = n(n-1)/2.
    let z = ScaleGenerator::Integers { a: 0, b: 5 }.generate()?;
    for t in 0..5 {
        let t = t as f64;
        println!("Z: (t^2)^Δ({t}) = {}", delta_derivative(&z, &f, t)?);
    }
    let id = ScaleFn::new(|t| t);
    println!("Z: ∫_0^5 t Δt = {}", delta_integral(&z, &id, 0.0, 5.0)?);

    // On [0,1] ∪ {2} the derivative is ordinary inside and a quotient at 1.
    let ts = TimeScale::new([Component::Interval(0.0, 1.0), Component::Point(2.0)])?;
    for t in [0.0, 0.5, 1.0] {
        println!("[0,1]∪{{2}}: (t^2)^Δ({t}) = {:.10}", delta_derivative(&ts, &f, t)?);
    }
    // ∫_0^1 t^2 dt + μ(1)·f(1) = 1/3 + 1
    println!("[0,1]∪{{2}}: ∫_0^2 t^2 Δt = {:.12}", delta_integral(&ts, &f, 0.0, 2.0)?);
    Ok(())
}
