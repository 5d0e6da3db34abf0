//! Moving parameters between the interpretable and the estimable space.

use bilinear_lgm::model::{GrowthFactors, OriginalParams};
use bilinear_lgm::reparam::{f_mean, from_reparam, from_reparam_cellwise, h_mean, jac_f, jac_h, to_reparam};
use bilinear_lgm::simgen::{condition_to_params, SimCondition};
use nalgebra::Vector4;

fn main() {
    let means = Vector4::new(100.0, -5.0, -3.4, 2.5);
    let prime = f_mean(&means);
    println!("original means     {:?}", means.as_slice());
    println!("reparameterized    {:?}", prime.as_slice());
    println!("back again         {:?}", h_mean(&prime, means[3]).as_slice());

    // The two displayed Jacobians are not exact inverses: the product differs
    // from the identity in the intercept/knot cell by the first slope mean.
    let product = jac_f(&means) * jac_h(means[3]);
    println!("jac_f * jac_h =\n{product:.3}");

    let mut cond = SimCondition::base();
    cond.knot_sd = 0.6;
    let theta: OriginalParams = condition_to_params(&cond).unwrap();
    let theta_prime = to_reparam(&theta);
    let back = from_reparam(&theta_prime);
    let cellwise = from_reparam_cellwise(&theta_prime);
    println!("psi' (estimable space):\n{:.4}", theta_prime.psi_prime);
    println!("psi recovered:\n{:.4}", back.psi);
    println!(
        "max |matrix - cellwise| on psi: {:.2e}",
        (back.psi - cellwise.psi).abs().max()
    );

    let person = GrowthFactors {
        eta0: 98.0,
        eta1: -4.5,
        eta2: -2.0,
        gamma: 4.8,
    };
    let r = person.to_reparam(theta.alpha[3]);
    println!(
        "individual {person:?}\n  -> {r:?}\n  -> {:?}",
        r.to_original(theta.alpha[3])
    );
}
