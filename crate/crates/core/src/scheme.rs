//! Interior and boundary derivative stencils, and the flat control vector.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Four-point staggered first-derivative stencil, offsets `j = -1..=2`.
///
/// At a u-node `i` it combines `p_{i+j-1/2}`; at a half-node `i+1/2` it
/// combines `u_{i+j}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteriorStencil {
    pub coeffs: [f64; 4],
}

impl InteriorStencil {
    pub fn second_order() -> Self {
        InteriorStencil {
            coeffs: [0.0, -1.0, 1.0, 0.0],
        }
    }

    pub fn fourth_order() -> Self {
        InteriorStencil {
            coeffs: [1.0 / 24.0, -27.0 / 24.0, 27.0 / 24.0, -1.0 / 24.0],
        }
    }

    /// Preset by formal order; only 2 and 4 exist.
    pub fn of_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::second_order()),
            4 => Ok(Self::fourth_order()),
            other => Err(Error::invalid(format!(
                "interior order must be 2 or 4, got {other}"
            ))),
        }
    }

    /// `sum_j a_j`; zero for a consistent first derivative.
    pub fn zeroth_moment(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// `sum_j (j - 1/2) a_j`; one for a consistent first derivative.
    pub fn first_moment(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, a)| (idx as f64 - 1.5) * a)
            .sum()
    }
}

/// The four coefficient groups of a boundary scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientGroup {
    /// Left `du/dx` at the half-node 1/2.
    U,
    /// Right `du/dx` at the half-node N-1/2.
    UTilde,
    /// Left `dp/dx` at node 1.
    P,
    /// Right `dp/dx` at node N-1.
    PTilde,
}

impl CoefficientGroup {
    pub const ALL: [CoefficientGroup; 4] = [
        CoefficientGroup::U,
        CoefficientGroup::UTilde,
        CoefficientGroup::P,
        CoefficientGroup::PTilde,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CoefficientGroup::U => "alpha_u",
            CoefficientGroup::UTilde => "alpha_u_tilde",
            CoefficientGroup::P => "alpha_p",
            CoefficientGroup::PTilde => "alpha_p_tilde",
        }
    }
}

/// Boundary derivative stencils of width `J + 1` on both sides.
///
/// Left rows: `(dp/dx)_1 = (1/h) sum_j alpha_p[j] p_{j+1/2}` and
/// `(du/dx)_{1/2} = (1/h) sum_j alpha_u[j] u_j`. Right rows use the tilde
/// coefficients on reversed indices with an overall minus sign:
/// `(dp/dx)_{N-1} = -(1/h) sum_j alpha_p_tilde[j] p_{N-j-1/2}` and
/// `(du/dx)_{N-1/2} = -(1/h) sum_j alpha_u_tilde[j] u_{N-j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScheme {
    pub alpha_u: Vec<f64>,
    pub alpha_u_tilde: Vec<f64>,
    pub alpha_p: Vec<f64>,
    pub alpha_p_tilde: Vec<f64>,
}

impl BoundaryScheme {
    pub fn new(
        alpha_u: Vec<f64>,
        alpha_u_tilde: Vec<f64>,
        alpha_p: Vec<f64>,
        alpha_p_tilde: Vec<f64>,
    ) -> Result<Self> {
        let width = alpha_u.len();
        if width == 0 {
            return Err(Error::invalid("boundary stencil needs at least one coefficient"));
        }
        check_len("alpha_u_tilde", width, alpha_u_tilde.len())?;
        check_len("alpha_p", width, alpha_p.len())?;
        check_len("alpha_p_tilde", width, alpha_p_tilde.len())?;
        Ok(BoundaryScheme {
            alpha_u,
            alpha_u_tilde,
            alpha_p,
            alpha_p_tilde,
        })
    }

    /// One-sided first differences `(f_1 - f_0)/h` on every side, padded
    /// with zeros up to width `J + 1`.
    pub fn classical(j: usize) -> Result<Self> {
        if j < 1 {
            return Err(Error::invalid("the classical scheme needs J >= 1"));
        }
        let mut stencil = vec![0.0; j + 1];
        stencil[0] = -1.0;
        stencil[1] = 1.0;
        Ok(BoundaryScheme {
            alpha_u: stencil.clone(),
            alpha_u_tilde: stencil.clone(),
            alpha_p: stencil.clone(),
            alpha_p_tilde: stencil,
        })
    }

    /// `J`, the stencil width minus one.
    pub fn j(&self) -> usize {
        self.alpha_u.len() - 1
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout::new(self.j())
    }

    pub fn group(&self, group: CoefficientGroup) -> &[f64] {
        match group {
            CoefficientGroup::U => &self.alpha_u,
            CoefficientGroup::UTilde => &self.alpha_u_tilde,
            CoefficientGroup::P => &self.alpha_p,
            CoefficientGroup::PTilde => &self.alpha_p_tilde,
        }
    }

    /// Checks `J + 1 <= N - 1`.
    pub fn validate_for(&self, n_cells: usize) -> Result<()> {
        if self.j() + 1 > n_cells - 1 {
            return Err(Error::invalid(format!(
                "stencil width {} too large for {} cells",
                self.j() + 1,
                n_cells
            )));
        }
        Ok(())
    }

    pub fn to_control(&self) -> ControlVector {
        let layout = self.layout();
        let mut v = vec![0.0; layout.len()];
        for group in CoefficientGroup::ALL {
            for (j, a) in self.group(group).iter().enumerate() {
                v[layout.index(group, j)] = *a;
            }
        }
        ControlVector(v)
    }

    pub fn from_control(j: usize, control: &ControlVector) -> Result<Self> {
        let layout = ControlLayout::new(j);
        check_len("control vector", layout.len(), control.len())?;
        let pick = |group| -> Vec<f64> {
            (0..=j).map(|k| control.0[layout.index(group, k)]).collect()
        };
        Ok(BoundaryScheme {
            alpha_u: pick(CoefficientGroup::U),
            alpha_u_tilde: pick(CoefficientGroup::UTilde),
            alpha_p: pick(CoefficientGroup::P),
            alpha_p_tilde: pick(CoefficientGroup::PTilde),
        })
    }

    /// Swap left and right stencils (the x -> 1 - x mirror of the scheme).
    pub fn mirrored(&self) -> Self {
        BoundaryScheme {
            alpha_u: self.alpha_u_tilde.clone(),
            alpha_u_tilde: self.alpha_u.clone(),
            alpha_p: self.alpha_p_tilde.clone(),
            alpha_p_tilde: self.alpha_p.clone(),
        }
    }
}

/// Index map for the flat control vector
/// `[a^u_0..a^u_J, ~a^u_J..~a^u_0, a^p_0..a^p_J, ~a^p_J..~a^p_0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlLayout {
    j: usize,
}

impl ControlLayout {
    pub fn new(j: usize) -> Self {
        ControlLayout { j }
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn width(&self) -> usize {
        self.j + 1
    }

    pub fn len(&self) -> usize {
        4 * self.width()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, group: CoefficientGroup, k: usize) -> usize {
        debug_assert!(k <= self.j);
        let w = self.width();
        match group {
            CoefficientGroup::U => k,
            CoefficientGroup::UTilde => w + (self.j - k),
            CoefficientGroup::P => 2 * w + k,
            CoefficientGroup::PTilde => 3 * w + (self.j - k),
        }
    }
}

/// Flat vector in control space (coefficients, perturbations or gradients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector(pub Vec<f64>);

impl ControlVector {
    pub fn zeros(len: usize) -> Self {
        ControlVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &ControlVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl From<Vec<f64>> for ControlVector {
    fn from(v: Vec<f64>) -> Self {
        ControlVector(v)
    }
}
