//! Conservative transfer of cell data between two hierarchies over the same
//! domain.

use crate::mesh::{prolong_conservative, restrict_all, PatchHierarchy};

/// Moves the field `u` (one value per cell of `old`) onto `new`.
///
/// Cells present at the same resolution in both hierarchies are copied
/// (after synchronising `old`'s covered cells with their children); cells
/// new to a level are filled by conservative limited linear refinement from
/// the next coarser level of `new`; covered cells of `new` are finally
/// restricted. The volume integral over valid cells is preserved and no
/// negative values are created from positive data.
pub fn transfer_field(old: &PatchHierarchy, new: &PatchHierarchy, u: &[f64]) -> Vec<f64> {
    let mut src = u.to_vec();
    restrict_all(old, &mut src);
    let mut out = vec![0.0; new.ncells()];
    let mut fresh = vec![false; new.ncells()];
    for l in 0..new.nlevels() {
        let old_level = (l < old.nlevels()).then(|| old.level(l));
        let mut any_fresh = false;
        for p in &new.level(l).patches {
            for c in p.bx.cells() {
                let i = p.flat(c);
                match old_level.and_then(|ol| ol.flat(c)) {
                    Some(j) => out[i] = src[j],
                    None => {
                        fresh[i] = true;
                        any_fresh = true;
                    }
                }
            }
        }
        if any_fresh {
            prolong_conservative(new, l, &mut out, |i| fresh[i]);
        }
    }
    restrict_all(new, &mut out);
    out
}

/// [`transfer_field`] applied to each of the stacked fields of `u`.
pub fn transfer_state(old: &PatchHierarchy, new: &PatchHierarchy, u: &[f64]) -> Vec<f64> {
    let n = old.ncells();
    assert_eq!(
        u.len() % n,
        0,
        "state length is not a multiple of the cell count"
    );
    u.chunks(n)
        .flat_map(|f| transfer_field(old, new, f))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, IndexBox};

    fn field(h: &PatchHierarchy) -> Vec<f64> {
        let mut u =
            h.sample(|x| 1e-3 + (x[0] - 0.4).powi(2) * (1.0 + x[1]) + (8.0 * x[2]).sin().abs());
        restrict_all(h, &mut u);
        u
    }

    #[test]
    fn same_hierarchy_is_a_bitwise_copy() {
        let refine = vec![vec![IndexBox::new([2, 2, 2], [5, 5, 5])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &refine).unwrap();
        let u = field(&h);
        assert_eq!(transfer_field(&h, &h, &u), u);
    }

    #[test]
    fn conservative_and_positive_both_ways() {
        let coarse = PatchHierarchy::uniform(Domain::unit_cube(), [8, 8, 8]).unwrap();
        let fine = PatchHierarchy::build(
            Domain::unit_cube(),
            [8, 8, 8],
            &[
                vec![IndexBox::new([0, 0, 0], [7, 7, 7])],
                vec![
                    IndexBox::new([2, 2, 2], [9, 9, 9]),
                    IndexBox::new([12, 0, 0], [15, 3, 3]),
                ],
            ],
        )
        .unwrap();
        let u = field(&coarse);
        let up = transfer_field(&coarse, &fine, &u);
        let total = coarse.integrate(&u);
        assert!((fine.integrate(&up) - total).abs() <= 1e-12 * total);
        assert!(up.iter().all(|&v| v > 0.0));
        let down = transfer_field(&fine, &coarse, &up);
        assert!((coarse.integrate(&down) - total).abs() <= 1e-12 * total);
        // Refining then coarsening returns the original averages.
        for (a, b) in down.iter().zip(&u) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }
}
