"""Principal component analysis over feature vectors.

With standardization on (the default), dimensions are centered and scaled
by their population standard deviation before the eigendecomposition.
When there are no more samples than dimensions the components come from
the small n x n Gram matrix instead of the d x d covariance (the
eigenface trick); both routes agree on the nonzero spectrum and, up to
sign, on the retained basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# eigenvalues at or below this fraction of the largest count as zero
RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted projection: x -> basis^T applied to the centered (and, when
    standardized, scaled) input.

    basis is (d, k) with orthonormal columns ordered by decreasing
    eigenvalue; eigenvalues holds the k retained values and spectrum the
    full computed one (both descending, clamped at zero). k never exceeds
    the numerical rank, so it can be smaller than what was requested.
    total_variance is the trace of the fitted covariance.
    """

    mean: np.ndarray
    scale: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    spectrum: np.ndarray
    total_variance: float
    standardized: bool
    n_requested: int

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    @property
    def n_dimensions(self) -> int:
        return self.basis.shape[0]

    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.n_components)
        return self.eigenvalues / self.total_variance

    def transform(self, data: np.ndarray) -> np.ndarray:
        """Project rows of data, shape (m, d) -> (m, k)."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] != self.n_dimensions:
            raise ValueError(
                f"expected (m, {self.n_dimensions}) data, got {data.shape}")
        return ((data - self.mean) / self.scale) @ self.basis

    def truncated(self, k: int) -> "PcaModel":
        """Copy of this model keeping only the first k components."""
        if not 1 <= k <= self.n_components:
            raise ValueError(f"k must be in [1, {self.n_components}]")
        return PcaModel(self.mean, self.scale, self.basis[:, :k],
                        self.eigenvalues[:k], self.spectrum,
                        self.total_variance, self.standardized, k)


def project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Coordinates of x in the component basis.

    A d-vector gives a k-vector; an (m, d) matrix gives (m, k) rows.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return model.transform(x[None, :])[0]
    return model.transform(x)


def standardize_stats(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and population std; constant dimensions get
    scale 1 so they pass through as exact zeros after centering."""
    mean = data.mean(axis=0)
    scale = data.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def fit_pca(data: np.ndarray, n_components: int, standardize: bool = True,
            method: str = "auto", skip_leading: int = 0) -> PcaModel:
    """Fit PCA on rows of data, shape (n, d).

    method selects the eigendecomposition route: "gram" works on the n x n
    matrix Z Z^T / n, "direct" on the d x d matrix Z^T Z / n, "auto" picks
    gram when n <= d. The basis keeps min(n_components, numerical rank)
    columns (at most n - 1); each column is sign-fixed so its
    largest-magnitude entry is positive. skip_leading discards that many
    top components before retention starts.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("data must be 2-D (samples x dimensions)")
    n, d = data.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit PCA")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if skip_leading < 0:
        raise ValueError("skip_leading must be >= 0")
    if method not in ("auto", "gram", "direct"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "gram" if n <= d else "direct"

    if standardize:
        mean, scale = standardize_stats(data)
    else:
        mean = data.mean(axis=0)
        scale = np.ones(d)
    z = (data - mean) / scale

    if method == "gram":
        gram = (z @ z.T) / n
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1]
        spectrum = np.maximum(eigvals[order], 0.0)
        lo, hi = _retained_range(spectrum, n_components, skip_leading, n)
        basis = z.T @ eigvecs[:, order[lo:hi]]
        if hi > lo:
            basis = basis / np.linalg.norm(basis, axis=0)
    else:
        cov = (z.T @ z) / n
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1]
        spectrum = np.maximum(eigvals[order], 0.0)
        lo, hi = _retained_range(spectrum, n_components, skip_leading, n)
        basis = eigvecs[:, order[lo:hi]]

    basis = _fix_signs(np.ascontiguousarray(basis))
    return PcaModel(mean=mean, scale=scale, basis=basis,
                    eigenvalues=spectrum[lo:hi], spectrum=spectrum,
                    total_variance=float(np.sum(spectrum)),
                    standardized=bool(standardize), n_requested=n_components)


def _retained_range(spectrum: np.ndarray, n_components: int,
                    skip_leading: int, n: int) -> tuple[int, int]:
    limit = min(_numerical_rank(spectrum), n - 1)
    if skip_leading >= limit:
        raise ValueError(
            f"skip_leading={skip_leading} leaves no components "
            f"(rank limit {limit})")
    return skip_leading, min(skip_leading + n_components, limit)


def _numerical_rank(descending_eigvals: np.ndarray) -> int:
    if descending_eigvals.size == 0 or descending_eigvals[0] <= 0:
        return 0
    return int(np.sum(descending_eigvals > RANK_RTOL * descending_eigvals[0]))


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if basis.shape[1] == 0:
        return basis
    anchor = np.argmax(np.abs(basis), axis=0)
    flips = basis[anchor, np.arange(basis.shape[1])] < 0
    basis[:, flips] *= -1.0
    return basis
