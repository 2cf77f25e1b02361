//! Homology rank of a curve complement in space, tunnel numbers and the resulting bounds.

use serde::{Deserialize, Serialize};

use crate::curve::{self_intersections, Catalog, CurveError, CurveSet, DoublePoint};

pub const DEFAULT_SAMPLES: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkData {
    pub components: usize,
    pub double_points: usize,
    /// First Betti number of the complement, `double_points + components`.
    pub homology_rank: usize,
    pub catalog_name: Option<String>,
    pub tunnel_number: Option<usize>,
    pub crossings: Vec<DoublePoint>,
}

/// `r = d + c` from the transverse double points of the set.
pub fn homology_rank(set: &CurveSet, samples: usize) -> Result<LinkData, CurveError> {
    let tol = 1e-9 * set.radius().max(1.0);
    let crossings = self_intersections(set, samples, tol, 1e-3)?;
    let c = set.component_count();
    Ok(LinkData {
        components: c,
        double_points: crossings.len(),
        homology_rank: crossings.len() + c,
        catalog_name: None,
        tunnel_number: None,
        crossings,
    })
}

/// Link data of a catalog entry, with its tunnel number attached.
pub fn catalog_link(cat: &Catalog) -> Result<LinkData, CurveError> {
    let mut link = homology_rank(&cat.build()?, DEFAULT_SAMPLES)?;
    link.catalog_name = Some(cat.label());
    link.tunnel_number = tunnel_number(cat);
    Ok(link)
}

/// Tunnel number of a catalog knot or link, if it is a knot or link at all.
pub fn tunnel_number(cat: &Catalog) -> Option<usize> {
    match *cat {
        Catalog::Circle { .. } => Some(0),
        Catalog::Trefoil | Catalog::Figure8 | Catalog::Hopf => Some(1),
        Catalog::Torus { p, q } => Some(if p.min(q) == 1 { 0 } else { 1 }),
        Catalog::Granny => Some(2),
        Catalog::Unlink { c, .. } => Some(c - 1),
        Catalog::Epicycloid | Catalog::Arc { .. } | Catalog::Segment | Catalog::Lemniscate { .. } => None,
    }
}

/// Tunnel number by catalog name, e.g. `granny` or `unlink(3)`.
pub fn tunnel_catalog(name: &str) -> Option<usize> {
    let name = name.trim();
    // unlink(c) alone names the link type; the separation does not matter here
    let cat = if name.starts_with("unlink") && !name.contains(',') && name.contains('(') {
        Catalog::parse(&name.replace(')', ", 4)")).ok()?
    } else {
        Catalog::parse(name).ok()?
    };
    tunnel_number(&cat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds3d {
    /// `r - c + 1`, the degree lower bound.
    pub degree_bound: i64,
    /// `2t + 1` when the tunnel number is known.
    pub morse_bound: Option<usize>,
}

pub fn bounds_3d(link: &LinkData) -> Bounds3d {
    Bounds3d {
        degree_bound: link.homology_rank as i64 - link.components as i64 + 1,
        morse_bound: link.tunnel_number.map(|t| 2 * t + 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(name: &str) -> LinkData {
        catalog_link(&Catalog::parse(name).unwrap()).unwrap()
    }

    #[test]
    fn ranks() {
        let u = link("unknot");
        assert_eq!((u.double_points, u.components, u.homology_rank), (0, 1, 1));
        let l = link("unlink(2, 4)");
        assert_eq!((l.double_points, l.components, l.homology_rank), (0, 2, 2));
        let f = link("lemniscate(3)");
        assert_eq!((f.double_points, f.components, f.homology_rank), (1, 1, 2));
    }

    #[test]
    fn tunnel_table() {
        assert_eq!(tunnel_catalog("unknot"), Some(0));
        assert_eq!(tunnel_catalog("trefoil"), Some(1));
        assert_eq!(tunnel_catalog("torus(3, 5)"), Some(1));
        assert_eq!(tunnel_catalog("granny"), Some(2));
        assert_eq!(tunnel_catalog("unlink(3)"), Some(2));
        assert_eq!(tunnel_catalog("hopf"), Some(1));
        assert_eq!(tunnel_catalog("nonsense"), None);
    }

    #[test]
    fn bounds() {
        assert_eq!(
            bounds_3d(&link("unknot")),
            Bounds3d { degree_bound: 1, morse_bound: Some(1) }
        );
        assert_eq!(
            bounds_3d(&link("trefoil")),
            Bounds3d { degree_bound: 1, morse_bound: Some(3) }
        );
        assert_eq!(
            bounds_3d(&link("unlink(2, 4)")),
            Bounds3d { degree_bound: 1, morse_bound: Some(3) }
        );
        assert_eq!(bounds_3d(&link("granny")).morse_bound, Some(5));
    }
}
