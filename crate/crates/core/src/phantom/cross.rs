use crate::preproc::Template;
use crate::{Image, Mask};

/// White plus-shaped caliper of the given arm length with a one-pixel black
/// outline. The template is `2 * arm + 3` pixels square; its support is the
/// cross and the outline, everything else is "don't care".
pub fn cross_template(arm: usize) -> Template {
    let n = 2 * arm + 3;
    let ctr = arm + 1;
    let on_cross = |r: usize, c: usize| {
        (r == ctr || c == ctr) && r.abs_diff(ctr) <= arm && c.abs_diff(ctr) <= arm
    };
    let image = Image::from_fn(n, n, |r, c| on_cross(r, c) as u8 as f32);
    let support = Mask::from_fn(n, n, |r, c| {
        (r.saturating_sub(1)..=(r + 1).min(n - 1))
            .any(|rr| (c.saturating_sub(1)..=(c + 1).min(n - 1)).any(|cc| on_cross(rr, cc)))
    });
    Template::masked(image, support).expect("cross template is well formed")
}

/// Writes the template's support pixels centred on each position, clipped to
/// the image.
pub fn burn_crosses(image: &mut Image, positions: &[(usize, usize)], template: &Template) {
    let (tr, tc) = template.dims();
    let (cr, cc) = template.center();
    for &(pr, pc) in positions {
        for r in 0..tr {
            for c in 0..tc {
                if !template.support().get(r, c) {
                    continue;
                }
                let (ir, ic) = (
                    pr as isize + r as isize - cr as isize,
                    pc as isize + c as isize - cc as isize,
                );
                if ir >= 0
                    && ic >= 0
                    && (ir as usize) < image.rows()
                    && (ic as usize) < image.cols()
                {
                    image.set(ir as usize, ic as usize, template.image().get(r, c));
                }
            }
        }
    }
}

/// Top and bottom foreground pixel of the column with the most foreground;
/// ties go to the leftmost column. `None` for an empty mask.
pub fn deepest_column_endpoints(mask: &Mask) -> Option<[(usize, usize); 2]> {
    let (rows, cols) = mask.dims();
    let mut best: Option<(usize, usize)> = None;
    for c in 0..cols {
        let count = (0..rows).filter(|&r| mask.get(r, c)).count();
        if count > 0 && best.is_none_or(|(_, n)| count > n) {
            best = Some((c, count));
        }
    }
    let (c, _) = best?;
    let top = (0..rows).find(|&r| mask.get(r, c))?;
    let bottom = (0..rows).rev().find(|&r| mask.get(r, c))?;
    Some([(top, c), (bottom, c)])
}
