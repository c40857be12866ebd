use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use super::{devectorize, vectorize};
use crate::linalg::{dagger, I, ZERO};
use crate::model::Operator;
use crate::{Error, Result};

/// Which generator of a quench protocol a Liouvillian represents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiouvillianTag {
    /// Base dissipation only (`ℒ₀`).
    Unperturbed,
    /// Base dissipation plus the bond quench (`ℒ₁`).
    Quenched,
    Custom(String),
}

impl LiouvillianTag {
    pub fn label(&self) -> &str {
        match self {
            LiouvillianTag::Unperturbed => "L0",
            LiouvillianTag::Quenched => "L1",
            LiouvillianTag::Custom(s) => s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    matrix: Mat<c64>,
    tag: LiouvillianTag,
    charges: Option<Vec<u32>>,
}

impl Liouvillian {
    /// Assembles
    /// `−i(I⊗H − Hᵀ⊗I) + Σ [Ō⊗O − ½ I⊗(O†O) − ½ (O†O)ᵀ⊗I]`.
    pub fn assemble(h: &Operator, jumps: &[Operator]) -> Result<Self> {
        let d = h.dim();
        if h.matrix().ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "Hamiltonian must be square",
                expected: d,
                found: h.matrix().ncols(),
            });
        }
        for o in jumps {
            if o.dim() != d || o.matrix().ncols() != d {
                return Err(Error::DimensionMismatch {
                    context: "jump operator dimension",
                    expected: d,
                    found: o.dim(),
                });
            }
        }
        let n = d * d;
        let mut m = Mat::<c64>::zeros(n, n);
        // left action Kₗρ with Kₗ = −iH − ½ΣO†O, right action ρKᵣ with Kᵣ = iH − ½ΣO†O
        let mut left = Mat::<c64>::from_fn(d, d, |i, j| -I * h.matrix()[(i, j)]);
        let mut right = Mat::<c64>::from_fn(d, d, |i, j| I * h.matrix()[(i, j)]);
        for o in jumps {
            let odo = dagger(o.matrix()) * o.matrix();
            for j in 0..d {
                for i in 0..d {
                    left[(i, j)] -= odo[(i, j)] * 0.5;
                    right[(i, j)] -= odo[(i, j)] * 0.5;
                }
            }
        }
        add_identity_kron(&mut m, &left, &right, d);
        for o in jumps {
            add_conj_kron(&mut m, o.matrix(), d);
        }
        Ok(Self {
            dim: d,
            matrix: m,
            tag: LiouvillianTag::Custom("custom".into()),
            charges: None,
        })
    }

    pub fn with_tag(mut self, tag: LiouvillianTag) -> Self {
        self.tag = tag;
        self
    }

    /// Attaches per-basis-state particle numbers. The generator must not couple
    /// `|i⟩⟨j|` blocks with different `N_i − N_j`; that is checked here.
    pub fn with_number_sectors(mut self, charges: Vec<u32>) -> Result<Self> {
        if charges.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "particle-number labels",
                expected: self.dim,
                found: charges.len(),
            });
        }
        let d = self.dim;
        let diff = |k: usize| charges[k % d] as i64 - charges[k / d] as i64;
        for c in 0..d * d {
            for r in 0..d * d {
                if diff(r) != diff(c) && self.matrix[(r, c)].norm() > 1e-14 {
                    return Err(Error::param(
                        "charges",
                        "generator mixes particle-number-difference sectors",
                    ));
                }
            }
        }
        self.charges = Some(charges);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn tag(&self) -> &LiouvillianTag {
        &self.tag
    }

    pub fn charges(&self) -> Option<&[u32]> {
        self.charges.as_deref()
    }

    /// Vectorized indices `i + D·j` with equal particle number on both sides.
    /// Without charge labels every index qualifies.
    pub fn sector_indices(&self) -> Vec<usize> {
        let d = self.dim;
        match &self.charges {
            None => (0..d * d).collect(),
            Some(c) => (0..d * d).filter(|&k| c[k % d] == c[k / d]).collect(),
        }
    }

    /// `ℒ[ρ]` as a matrix.
    pub fn apply(&self, rho: &Mat<c64>) -> Result<Mat<c64>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "density matrix vs Liouvillian",
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        devectorize(&(&self.matrix * vectorize(rho)))
    }

    /// `‖vec(I)† ℒ‖_max`; zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        (0..n)
            .map(|c| (0..d).map(|i| self.matrix[(i + d * i, c)]).sum::<c64>().norm())
            .fold(0.0, f64::max)
    }
}

/// `m += I⊗Kₗ + Kᵣᵀ⊗I`.
fn add_identity_kron(m: &mut Mat<c64>, left: &Mat<c64>, right: &Mat<c64>, d: usize) {
    for b in 0..d {
        for j in 0..d {
            for i in 0..d {
                // I ⊗ Kₗ: diagonal block (b, b) holds Kₗ
                let v = left[(i, j)];
                if v != ZERO {
                    m[(i + d * b, j + d * b)] += v;
                }
                // Kᵣᵀ ⊗ I: block (i, j) holds Kᵣ[j, i]·I
                let v = right[(j, i)];
                if v != ZERO {
                    m[(b + d * i, b + d * j)] += v;
                }
            }
        }
    }
}

/// `m += Ō ⊗ O`, skipping structural zeros.
fn add_conj_kron(m: &mut Mat<c64>, o: &Mat<c64>, d: usize) {
    let nz: Vec<(usize, usize, c64)> = (0..d)
        .flat_map(|j| (0..d).map(move |i| (i, j)))
        .filter_map(|(i, j)| {
            let v = o[(i, j)];
            (v != ZERO).then_some((i, j, v))
        })
        .collect();
    for &(ia, ja, va) in &nz {
        let va = va.conj();
        for &(ib, jb, vb) in &nz {
            m[(ib + d * ia, jb + d * ja)] += va * vb;
        }
    }
}
