//! Bounded components of the plane minus the epicycloid, their windings and the orbit-count bounds.

use forced_kepler::curve::Catalog;
use forced_kepler::planar::{analyze_complement, erode_component, multiplicity_bounds};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "epicycloid".into());
    let set = Catalog::parse(&name).unwrap().build().unwrap();
    let map = analyze_complement(&set.curves()[0], 1024).unwrap();
    println!("{name}: r = {}, s = {}", map.r(), map.s());
    for c in map.bounded() {
        let region = erode_component(&map, c.id, 0.05).unwrap();
        println!(
            "  component {} winding {} representative ({:.3}, {:.3}) cells {} eroded cells {}",
            c.id, c.winding, c.representative[0], c.representative[1], c.cell_count, region.cells.len()
        );
    }
    let b = multiplicity_bounds(&map);
    println!("attractive bound {}, repulsive bound {}", b.attractive_bound, b.repulsive_bound);
    if let Some(note) = b.note {
        println!("note: {note}");
    }
}
