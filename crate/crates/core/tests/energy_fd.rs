mod common;

#[test]
fn every_energy_matches_finite_differences() {
    for row in common::energy_suite(100, 7) {
        println!("{:16} grad {:.2e} hess {:.2e}", row.name, row.grad, row.hess);
        assert!(row.grad < 1e-6, "{} gradient error {:e}", row.name, row.grad);
        assert!(row.hess < 1e-5, "{} hessian error {:e}", row.name, row.hess);
    }
}
