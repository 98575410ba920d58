// Upload cost of a Gaussian head versus a linear head.
//
// cargo run --example comm_overhead

use fedfda::federation::compute_comm_overhead;

pub fn main() {
    for (name, classes, dim, backbone) in [
        ("EMNIST CNN", 62, 128, 115_776),
        ("CIFAR CNN", 100, 128, 106_400),
        ("benchmark MLP", 5, 16, 24 * 32 + 32 + 32 * 16 + 16),
    ] {
        let o = compute_comm_overhead(classes, dim, backbone);
        println!(
            "{name:<14} linear {:>6}  gaussian {:>6}  overhead {:.3}%",
            o.linear_params,
            o.gaussian_params,
            100.0 * o.overhead_fraction
        );
    }
}
