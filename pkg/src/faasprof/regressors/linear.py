"""L2-regularized linear regression via an exact direct solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ModelError


@dataclass(frozen=True)
class RidgeModel:
    coefficients: np.ndarray
    alpha: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.coefficients.shape[0]:
            raise ModelError(
                f"ridge expects {self.coefficients.shape[0]} features, got shape {X.shape}"
            )
        return X @ self.coefficients

    def params(self) -> dict:
        return {"coefficients": self.coefficients.tolist(), "alpha": self.alpha}

    @classmethod
    def from_params(cls, params: dict) -> "RidgeModel":
        return cls(np.asarray(params["coefficients"], dtype=float), params["alpha"])


def fit_ridge(X: np.ndarray, y: np.ndarray, alpha: float) -> RidgeModel:
    """Solve (XᵀX + αI)β = Xᵀy with a pivoted direct factorization.

    No implicit intercept: callers wanting an affine offset should center or
    normalize the target. A singular system (possible only at α=0 with collinear
    columns) is rejected with a hint to use α > 0.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if alpha < 0:
        raise ModelError("ridge: alpha must be >= 0")
    gram = X.T @ X + alpha * np.eye(X.shape[1])
    rhs = X.T @ y
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"ridge: singular system ({exc}); use alpha > 0") from None
    residual = np.linalg.norm(gram @ beta - rhs)
    tolerance = 1e-6 * max(1.0, float(np.linalg.norm(rhs)))
    if not np.all(np.isfinite(beta)) or residual > tolerance:
        raise ModelError("ridge: system is numerically singular; use alpha > 0")
    return RidgeModel(beta, float(alpha))
