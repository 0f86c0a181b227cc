// Frequency cubes, their slab decomposition, spectral windows and lattice
// points on circles.

use strichartz_lab::lattice::{
    circle_points, enumerate_cube, max_circle_count, slab_decompose, slab_thickness, window_enumerate, BSamples,
    Cube,
};
use strichartz_lab::{ManifoldSpec, Q};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let (n1, n2) = (Q::from_integer(64), Q::from_integer(8));
    let cube = Cube::integer(&[40, 20], 8)?;
    let points = enumerate_cube(&cube, 0, 1 << 20)?;
    let slabs = slab_decompose(&cube, n1, n2, 0, 1 << 20)?;
    println!(
        "cube {:?}+[0,8]^2: {} points, thickness {}, {} slabs",
        [40, 20],
        points.len(),
        slab_thickness(n1, n2),
        slabs.len()
    );
    for s in slabs.iter().take(4) {
        println!("  slab m={:>3}: {} points", s.m, s.points.len());
    }
    let total: usize = slabs.iter().map(|s| s.points.len()).sum();
    assert_eq!(total, points.len());

    let spec = ManifoldSpec::new(vec![2], 1)?;
    let window = window_enumerate(Q::from_integer(6), &spec, 1 << 20)?;
    println!("window 6 <= |xi| <= 12 on {spec}: {} frequencies", window.len());

    println!("points on n1^2 + n2^2 = 325: {:?}", circle_points(325));
    let best = max_circle_count(Q::from_integer(2), 257..=512, &BSamples::Exhaustive, 1 << 30)?;
    println!("max points of a circle in a 2x2 box, 257 <= A <= 512: {}", best.max_count);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
