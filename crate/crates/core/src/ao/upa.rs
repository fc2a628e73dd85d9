use crate::channel::Apv;
use crate::error::{Error, Result};

/// Near-square `rows × cols = m` grid with spacing `spacing`, centred at the
/// origin, rows along y and columns along x.
pub fn upa_layout(m: usize, spacing: f64, region_a: f64) -> Result<Apv> {
    if m == 0 {
        return Err(Error::invalid("array needs at least one antenna"));
    }
    let rows = (1..=m)
        .rev()
        .filter(|&r| m.is_multiple_of(r) && r * r <= m)
        .max()
        .unwrap_or(1);
    let cols = m / rows;
    let width = (cols - 1) as f64 * spacing;
    let height = (rows - 1) as f64 * spacing;
    if width > region_a * (1.0 + 1e-12) || height > region_a * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "{rows}x{cols} array with spacing {spacing} m exceeds the {region_a} m region"
        )));
    }
    let mut positions = Vec::with_capacity(m);
    for r in 0..rows {
        for c in 0..cols {
            positions.push([c as f64 * spacing - width / 2.0, r as f64 * spacing - height / 2.0]);
        }
    }
    Ok(Apv::new(positions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_antennas_form_a_square() {
        let a = upa_layout(4, 0.05, 0.3).unwrap();
        let mut got: Vec<_> = a.positions().to_vec();
        got.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let want = [[-0.025, -0.025], [-0.025, 0.025], [0.025, -0.025], [0.025, 0.025]];
        for (g, w) in got.iter().zip(want) {
            assert!((g[0] - w[0]).abs() < 1e-15 && (g[1] - w[1]).abs() < 1e-15);
        }
        assert!((a.min_pairwise_distance() - 0.05).abs() < 1e-15);
        for m in [6, 8, 10] {
            let a = upa_layout(m, 0.05, 0.3).unwrap();
            assert!(crate::pso::min_distance_feasible(&a, 0.05), "m = {m}");
        }
    }

    #[test]
    fn shapes_and_rejection() {
        assert_eq!(upa_layout(8, 0.05, 0.3).unwrap().len(), 8);
        assert!(upa_layout(8, 0.05, 0.3).unwrap().in_region(0.3));
        assert!(upa_layout(1, 0.05, 0.3).unwrap().positions()[0] == [0.0, 0.0]);
        assert!(upa_layout(13, 0.05, 0.3).is_err());
        assert!(upa_layout(0, 0.05, 0.3).is_err());
    }
}
