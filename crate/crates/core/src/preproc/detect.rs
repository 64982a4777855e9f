use crate::{Error, Image, Mask, Result};

/// A matching template: pixel values plus the support on which they count.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    image: Image,
    support: Mask,
}

impl Template {
    /// Template whose every pixel takes part in the match.
    pub fn new(image: Image) -> Self {
        let support = Mask::from_fn(image.rows(), image.cols(), |_, _| true);
        Self { image, support }
    }

    pub fn masked(image: Image, support: Mask) -> Result<Self> {
        if image.dims() != support.dims() {
            return Err(Error::shape(format!(
                "template {:?} vs support {:?}",
                image.dims(),
                support.dims()
            )));
        }
        if support.is_empty() {
            return Err(Error::config("template support is empty"));
        }
        Ok(Self { image, support })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn support(&self) -> &Mask {
        &self.support
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }

    pub fn center(&self) -> (usize, usize) {
        (self.image.rows() / 2, self.image.cols() / 2)
    }

    /// Half the larger side; also the non-maximum suppression radius.
    pub fn radius(&self) -> usize {
        self.image.rows().max(self.image.cols()) / 2
    }

    /// Union of the support placed at each centre, clipped to `rows x cols`.
    pub fn footprint(&self, rows: usize, cols: usize, centers: &[(usize, usize)]) -> Mask {
        let mut out = Mask::new(rows, cols);
        let (cr, cc) = self.center();
        for &(pr, pc) in centers {
            for (r, c) in self.support_offsets() {
                let (ir, ic) = (pr as isize + r - cr as isize, pc as isize + c - cc as isize);
                if ir >= 0 && ic >= 0 && (ir as usize) < rows && (ic as usize) < cols {
                    out.set(ir as usize, ic as usize, true);
                }
            }
        }
        out
    }

    fn support_offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (rows, cols) = self.dims();
        (0..rows)
            .flat_map(move |r| (0..cols).map(move |c| (r, c)))
            .filter(|&(r, c)| self.support.get(r, c))
            .map(|(r, c)| (r as isize, c as isize))
    }
}

/// Centres `(row, col)` of template matches.
///
/// Candidates are positions where the template fits entirely inside the
/// image and the normalized cross-correlation over the template support
/// reaches `threshold`. Patches with zero variance are skipped. Greedy
/// non-maximum suppression keeps the best score within the template radius
/// (Chebyshev distance), and a candidate is dropped unless its share of
/// strong Sobel edges is at least half that of the template itself.
pub fn detect_crosses(
    image: &Image,
    template: &Template,
    threshold: f64,
) -> Result<Vec<(usize, usize)>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config(format!(
            "detection threshold {threshold} outside (0, 1]"
        )));
    }
    let (rows, cols) = image.dims();
    let (tr, tc) = template.dims();
    if tr > rows || tc > cols {
        return Err(Error::shape(format!(
            "template {tr}x{tc} larger than image {rows}x{cols}"
        )));
    }
    let offsets: Vec<(usize, usize)> = template
        .support_offsets()
        .map(|(r, c)| (r as usize, c as usize))
        .collect();
    let n = offsets.len() as f64;
    let values: Vec<f64> = offsets
        .iter()
        .map(|&(r, c)| template.image.get(r, c) as f64)
        .collect();
    let t_mean = values.iter().sum::<f64>() / n;
    let centred: Vec<f64> = values.iter().map(|v| v - t_mean).collect();
    let t_norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
    if t_norm == 0.0 {
        return Ok(Vec::new());
    }

    let (cr, cc) = template.center();
    let mut candidates = Vec::new();
    for r0 in 0..=rows - tr {
        for c0 in 0..=cols - tc {
            let (mut sum, mut sum_sq, mut dot) = (0.0, 0.0, 0.0);
            for (&(r, c), &t) in offsets.iter().zip(&centred) {
                let p = image.get(r0 + r, c0 + c) as f64;
                sum += p;
                sum_sq += p * p;
                dot += p * t;
            }
            let var = sum_sq - sum * sum / n;
            if var <= 1e-12 * n {
                continue;
            }
            let score = dot / (var.sqrt() * t_norm);
            if score >= threshold {
                candidates.push((score, r0 + cr, c0 + cc));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let radius = template.radius();
    let edges = edge_map(image, template);
    let template_edges = edge_fraction(&edge_map(&template.image, template), template, (cr, cc));
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (_, r, c) in candidates {
        if kept
            .iter()
            .any(|&(kr, kc)| kr.abs_diff(r) <= radius && kc.abs_diff(c) <= radius)
        {
            continue;
        }
        if edge_fraction(&edges, template, (r, c)) >= 0.5 * template_edges {
            kept.push((r, c));
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Marks pixels whose Sobel magnitude (normalized so a unit step gives 0.5)
/// exceeds a quarter of the template's intensity range.
fn edge_map(image: &Image, template: &Template) -> Mask {
    let t = template.image.data();
    let lo = t.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = t.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let level = 0.25 * (hi - lo) as f64;
    let (rows, cols) = image.dims();
    let at = |r: isize, c: isize| {
        image.get(
            r.clamp(0, rows as isize - 1) as usize,
            c.clamp(0, cols as isize - 1) as usize,
        ) as f64
    };
    Mask::from_fn(rows, cols, |r, c| {
        let (r, c) = (r as isize, c as isize);
        let gx = at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1)
            - at(r - 1, c - 1)
            - 2.0 * at(r, c - 1)
            - at(r + 1, c - 1);
        let gy = at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1)
            - at(r - 1, c - 1)
            - 2.0 * at(r - 1, c)
            - at(r - 1, c + 1);
        gx.hypot(gy) / 8.0 > level
    })
}

/// Share of template-support pixels that are edges, with the template centred at `center`.
fn edge_fraction(edges: &Mask, template: &Template, center: (usize, usize)) -> f64 {
    let (cr, cc) = template.center();
    let (rows, cols) = edges.dims();
    let (mut hits, mut total) = (0usize, 0usize);
    for (r, c) in template.support_offsets() {
        let (ir, ic) = (
            center.0 as isize + r - cr as isize,
            center.1 as isize + c - cc as isize,
        );
        if ir >= 0 && ic >= 0 && (ir as usize) < rows && (ic as usize) < cols {
            total += 1;
            hits += edges.get(ir as usize, ic as usize) as usize;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}
