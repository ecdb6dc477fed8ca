//! Extrinsic geometry at a chart point: frames, second fundamental form,
//! position split, shape operators, mean curvature and curvature via the
//! Gauss equation.
//!
//! Two representations coexist. [`GeometryFrame`] holds plain values at one
//! point and is built from a [`JetPoint`](crate::dsl::JetPoint). [`TaylorGeometry`]
//! carries the same objects as Taylor jets so that fields such as the potential
//! of `x^T` can be differentiated exactly.
//!
//! Index conventions: chart indices `i, j, k, l` run over `0..n`, ambient
//! components over `0..m`. The Riemann tensor is `R_ijkl = g(R(∂_i, ∂_j)∂_k, ∂_l)`
//! with `R(X, Y) = [∇_X, ∇_Y] - ∇_[X,Y]`; the unit 2-sphere has scalar curvature +2.

mod curvature;
mod frame;
mod taylor;

use thiserror::Error;

use crate::dsl::DslError;

pub use curvature::{curvature, CurvaturePack};
pub use frame::{
    build_frame, mean_curvature, normal_derivative_xn, position_split, shape_operator, GeometryFrame, NormalDerivative,
    PositionSplit, RANK_TOLERANCE,
};
pub(crate) use frame::shape_operator_unchecked;
pub use taylor::{laplacian_xt, TaylorGeometry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("tangent basis is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },
    #[error("jet order {have} is too low, {needed} required")]
    OrderTooLow { needed: usize, have: usize },
    #[error("vector is not normal to the tangent space (tangential residual {residual:.3e})")]
    NotNormal { residual: f64 },
    #[error("singular metric in jet inversion")]
    SingularMetric,
    #[error(transparent)]
    Dsl(#[from] DslError),
}
