use adjsurv::{adjusted_surv, simulate_dgp, DgpSpec, EstimationOptions, Method, MethodSpec};

#[test]
fn reproduce() {
    let spec = DgpSpec { n: 500, ..DgpSpec::default() };
    let ms = MethodSpec::new(Method::AiptwPseudo).with_treatment("x").with_outcome("x");
    let data = simulate_dgp(&spec, 3005).unwrap();
    let res = adjusted_surv(&data, &ms, &EstimationOptions::default());
    eprintln!("3005 -> {:?}", res.as_ref().map(|_| "ok").map_err(|e| e.to_string()));
}
