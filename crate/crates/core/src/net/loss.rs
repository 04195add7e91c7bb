use serde::{Deserialize, Serialize};

use crate::autodiff::{CustomOp, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::numeric::invariant_sum;

/// Whether in-class and out-class attraction are sums or means of
/// similarities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteNorm {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for SilhouetteNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::invalid(format!("silhouette normalisation must be `sum` or `mean`, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for SilhouetteNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Mean => "mean",
        })
    }
}

/// Which competing class sets `Out`: the one with the least summed
/// similarity (`farthest`) or the most (`nearest`, as in the usual
/// distance-based silhouette).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SilhouetteOut {
    #[default]
    Farthest,
    Nearest,
}

impl std::str::FromStr for SilhouetteOut {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "farthest" => Ok(Self::Farthest),
            "nearest" => Ok(Self::Nearest),
            _ => Err(Error::invalid(format!("silhouette out-class must be `farthest` or `nearest`, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for SilhouetteOut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Farthest => "farthest",
            Self::Nearest => "nearest",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SilhouetteOpts {
    pub norm: SilhouetteNorm,
    pub out: SilhouetteOut,
}

/// Per-vertex silhouette pieces over a similarity matrix of labelled rows.
struct Terms {
    sil: f64,
    d_in: f64,
    d_out: f64,
    in_scale: f64,
    out_class: usize,
    out_scale: f64,
}

struct Silhouette {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    present: Vec<usize>,
    opts: SilhouetteOpts,
}

impl Silhouette {
    fn new(labels: &[usize], opts: SilhouetteOpts) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("silhouette needs at least one labelled vertex"));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); k];
        for (r, &l) in labels.iter().enumerate() {
            members[l].push(r);
        }
        let present: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
        if present.len() < 2 {
            return Err(Error::invalid("silhouette needs at least 2 classes among the labelled vertices"));
        }
        Ok(Self {
            labels: labels.to_vec(),
            members,
            present,
            opts,
        })
    }

    fn terms(&self, s: &Tensor, i: usize) -> Terms {
        let own = self.labels[i];
        let mut buf = Vec::new();

        buf.extend(self.members[own].iter().filter(|&&j| j != i).map(|&j| s.get(i, j)));
        let n_same = buf.len();
        let in_scale = match self.opts.norm {
            SilhouetteNorm::Sum => 1.0,
            SilhouetteNorm::Mean if n_same > 0 => 1.0 / n_same as f64,
            SilhouetteNorm::Mean => 0.0,
        };
        let inn = invariant_sum(&mut buf) * in_scale;

        let nearest = self.opts.out == SilhouetteOut::Nearest;
        let mut out = if nearest { f64::NEG_INFINITY } else { f64::INFINITY };
        let mut out_class = own;
        let mut out_scale = 1.0;
        for &c in self.present.iter().filter(|&&c| c != own) {
            buf.clear();
            buf.extend(self.members[c].iter().map(|&j| s.get(i, j)));
            let scale = match self.opts.norm {
                SilhouetteNorm::Sum => 1.0,
                SilhouetteNorm::Mean => 1.0 / buf.len() as f64,
            };
            let v = invariant_sum(&mut buf) * scale;
            if (nearest && v > out) || (!nearest && v < out) {
                out = v;
                out_class = c;
                out_scale = scale;
            }
        }

        let (sil, d_in, d_out) = if inn == 0.0 && out == 0.0 {
            (0.0, 0.0, 0.0)
        } else if inn >= out {
            (1.0 - out / inn, out / (inn * inn), -1.0 / inn)
        } else {
            (inn / out - 1.0, 1.0 / out, -inn / (out * out))
        };
        Terms {
            sil,
            d_in,
            d_out,
            in_scale,
            out_class,
            out_scale,
        }
    }

    fn loss(&self, s: &Tensor) -> (f64, Vec<f64>) {
        let sils: Vec<f64> = (0..self.labels.len()).map(|i| self.terms(s, i).sil).collect();
        let mut per: Vec<f64> = sils.iter().map(|x| 0.5 * (1.0 - x)).collect();
        (invariant_sum(&mut per), sils)
    }
}

impl CustomOp for Silhouette {
    fn name(&self) -> &'static str {
        "silhouette"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Vec<Tensor> {
        let s = inputs[0];
        let g = grad.item();
        let mut out = Tensor::zeros(s.rows(), s.cols());
        for i in 0..self.labels.len() {
            let t = self.terms(s, i);
            let c_in = -0.5 * g * t.d_in * t.in_scale;
            let c_out = -0.5 * g * t.d_out * t.out_scale;
            for &j in &self.members[self.labels[i]] {
                if j != i {
                    out.set(i, j, out.get(i, j) + c_in);
                }
            }
            for &j in &self.members[t.out_class] {
                if t.out_class != self.labels[i] {
                    out.set(i, j, out.get(i, j) + c_out);
                }
            }
        }
        vec![out]
    }
}

/// Silhouette loss `Σ ½(1 − Sil)` of the rows of `y` (one per labelled
/// vertex, class `labels[r]`), on the tape.
pub(crate) fn silhouette_on_tape(tape: &mut Tape, y: Var, labels: &[usize], opts: SilhouetteOpts) -> Result<Var> {
    if tape.value(y).rows() != labels.len() {
        return Err(Error::shape("one label per embedding row required"));
    }
    let op = Silhouette::new(labels, opts)?;
    let s = tape.cosine_sim(y)?;
    let (loss, _) = op.loss(tape.value(s));
    tape.custom(&[s], Tensor::scalar(loss), Box::new(op))
}

fn labelled_rows(emb: &Tensor, labels: &[Option<usize>], labeled: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    if labels.len() != emb.rows() {
        return Err(Error::shape(format!("{} labels for {} embedding rows", labels.len(), emb.rows())));
    }
    let mut ls = Vec::with_capacity(labeled.len());
    for &v in labeled {
        match labels.get(v).copied().flatten() {
            Some(l) => ls.push(l),
            None => return Err(Error::invalid(format!("vertex {v} is not labelled"))),
        }
    }
    Ok((emb.select_rows(labeled), ls))
}

/// Silhouette loss over `labeled` and its gradient with respect to every
/// row of `emb`.
pub fn silhouette_loss(
    emb: &Tensor,
    labels: &[Option<usize>],
    labeled: &[usize],
    opts: SilhouetteOpts,
) -> Result<(f64, Tensor)> {
    let (rows, ls) = labelled_rows(emb, labels, labeled)?;
    let mut tape = Tape::new();
    let y = tape.variable(rows)?;
    let loss = silhouette_on_tape(&mut tape, y, &ls, opts)?;
    tape.backward(loss)?;
    let g = tape.grad(y).expect("variable receives a gradient");
    let mut full = Tensor::zeros(emb.rows(), emb.cols());
    for (k, &v) in labeled.iter().enumerate() {
        for (o, x) in full.row_mut(v).iter_mut().zip(g.row(k)) {
            *o += x;
        }
    }
    Ok((tape.value(loss).item(), full))
}

/// `Sil` of every vertex in `labeled`, in that order.
pub fn silhouette_scores(
    emb: &Tensor,
    labels: &[Option<usize>],
    labeled: &[usize],
    opts: SilhouetteOpts,
) -> Result<Vec<f64>> {
    let (rows, ls) = labelled_rows(emb, labels, labeled)?;
    let op = Silhouette::new(&ls, opts)?;
    let s = crate::autodiff::cosine_sim_matrix(&rows);
    Ok(op.loss(&s).1)
}

/// `n − Σ probs[r][labels[r]]` and its gradient with respect to `probs`.
pub fn discriminator_loss(probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let mut tape = Tape::new();
    let p = tape.variable(probs.clone())?;
    let loss = discriminator_loss_on_tape(&mut tape, p, labels)?;
    tape.backward(loss)?;
    Ok((tape.value(loss).item(), tape.grad(p).expect("variable").clone()))
}

pub(crate) fn discriminator_loss_on_tape(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var> {
    let rows = tape.value(probs).rows();
    if rows != labels.len() {
        return Err(Error::shape(format!("{rows} probability rows for {} labels", labels.len())));
    }
    let picked = tape.pick(probs, labels)?;
    let total = tape.sum(picked)?;
    let neg = tape.scale(total, -1.0)?;
    tape.shift(neg, labels.len() as f64)
}

/// `enc + γ · disc`.
pub fn total_loss(enc: f64, disc: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(enc + gamma * disc)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("γ must be finite and non-negative, got {gamma}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ls: &[usize]) -> Vec<Option<usize>> {
        ls.iter().map(|&l| Some(l)).collect()
    }

    #[test]
    fn two_against_one() {
        let y = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ls = labels(&[0, 0, 1]);
        let s = silhouette_scores(&y, &ls, &[0, 1, 2], SilhouetteOpts::default()).unwrap();
        assert_eq!(s, vec![0.5, 0.5, -1.0]);
        let (loss, _) = silhouette_loss(&y, &ls, &[0, 1, 2], SilhouetteOpts::default()).unwrap();
        assert_eq!(loss, 0.25 + 0.25 + 1.0);
    }

    #[test]
    fn one_per_class_identical() {
        let y = Tensor::filled(2, 3, 0.4);
        let (loss, _) = silhouette_loss(&y, &labels(&[0, 1]), &[0, 1], SilhouetteOpts::default()).unwrap();
        assert_eq!(loss, 2.0);
    }

    #[test]
    fn degenerate_zero_attraction() {
        // vertex 0 alone in class 0 and antipodal to vertex 1, the only
        // member of class 1
        let y = Tensor::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let s = silhouette_scores(&y, &labels(&[0, 1, 1]), &[0, 1, 2], SilhouetteOpts::default()).unwrap();
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn scores_bounded() {
        let y = Tensor::from_rows(&[vec![0.3, -0.2], vec![0.9, 0.1], vec![-0.5, 0.4], vec![0.2, 0.2]]).unwrap();
        for norm in [SilhouetteNorm::Sum, SilhouetteNorm::Mean] {
            for out in [SilhouetteOut::Farthest, SilhouetteOut::Nearest] {
                let s = silhouette_scores(&y, &labels(&[0, 1, 0, 1]), &[0, 1, 2, 3], SilhouetteOpts { norm, out }).unwrap();
                assert!(s.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn out_class_choice() {
        // class 1 sits at 60° from vertex 0 (similarity 0.75), class 2 is
        // orthogonal (0.5)
        let h = 3f64.sqrt() / 2.0;
        let y = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.5, h], vec![0.0, 1.0]]).unwrap();
        let ls = labels(&[0, 0, 1, 2]);
        let far = silhouette_scores(&y, &ls, &[0, 1, 2, 3], SilhouetteOpts::default()).unwrap();
        assert!((far[0] - 0.5).abs() < 1e-12, "{far:?}");
        let opts = SilhouetteOpts {
            out: SilhouetteOut::Nearest,
            ..Default::default()
        };
        let near = silhouette_scores(&y, &ls, &[0, 1, 2, 3], opts).unwrap();
        assert!((near[0] - 0.25).abs() < 1e-12, "{near:?}");
    }

    #[test]
    fn needs_two_classes() {
        let y = Tensor::filled(2, 2, 1.0);
        assert!(silhouette_loss(&y, &labels(&[0, 0]), &[0, 1], SilhouetteOpts::default()).is_err());
        assert!(silhouette_loss(&y, &[Some(0), None], &[0, 1], SilhouetteOpts::default()).is_err());
    }

    #[test]
    fn uniform_discriminator_loss() {
        let probs = Tensor::filled(10, 4, 0.25);
        let ls = vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1];
        let (loss, grad) = discriminator_loss(&probs, &ls).unwrap();
        assert_eq!(loss, 7.5);
        assert_eq!(grad.get(0, 0), -1.0);
        assert_eq!(grad.get(0, 1), 0.0);
        let perfect = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(discriminator_loss(&perfect, &[0, 1]).unwrap().0, 0.0);
        assert!(discriminator_loss(&perfect, &[0]).is_err());
    }

    #[test]
    fn total_loss_rules() {
        assert_eq!(total_loss(1.0, 2.0, 0.5).unwrap(), 2.0);
        assert_eq!(total_loss(1.25, 7.0, 0.0).unwrap(), 1.25);
        assert!(total_loss(1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn norm_parses() {
        assert_eq!("mean".parse::<SilhouetteNorm>().unwrap(), SilhouetteNorm::Mean);
        assert!("median".parse::<SilhouetteNorm>().is_err());
        assert_eq!("nearest".parse::<SilhouetteOut>().unwrap(), SilhouetteOut::Nearest);
        assert!("closest".parse::<SilhouetteOut>().is_err());
    }
}
