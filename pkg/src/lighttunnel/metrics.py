"""Identifiability metrics for learned latent representations.

Covers the correlation-based scores (Pearson matrix, MCC with the optimal
latent-to-factor permutation, Spearman), graph recovery (edge-matched
thresholding and structural Hamming distance), block-identifiability R^2
for view pairs, and grouped R^2/Spearman matrices with their diagonal and
separation summaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .exceptions import (
    ConstantColumnError,
    NotBinaryError,
    RangeError,
    SchemaError,
    ShapeError,
)
from .inputs import FACTOR_COLUMNS
from .readout import r2_score, readout_r2


def _as_table(x, prefix):
    if isinstance(x, pd.DataFrame):
        try:
            return x.to_numpy(dtype=np.float64), [str(c) for c in x.columns]
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"table has non-numeric columns: {exc}") from exc
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, [f"{prefix}{j}" for j in range(arr.shape[1])]


def _check_columns(arr, labels, who):
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{who} table contains non-finite values")
    std = arr.std(axis=0)
    for j, s in enumerate(std):
        if s == 0.0:
            raise ConstantColumnError(f"{who} column {labels[j]!r} is constant")


def correlation_matrix(truth, learned) -> pd.DataFrame:
    """Pearson correlations, truth variables as rows, learned as columns."""
    t, t_labels = _as_table(truth, "z")
    l, l_labels = _as_table(learned, "zhat")
    if len(t) != len(l):
        raise ShapeError(f"row counts differ: {len(t)} truth vs {len(l)} learned")
    if len(t) < 2:
        raise ShapeError("need at least 2 rows to correlate")
    _check_columns(t, t_labels, "truth")
    _check_columns(l, l_labels, "learned")
    tc = t - t.mean(axis=0)
    lc = l - l.mean(axis=0)
    C = (tc.T @ lc) / (len(t) * t.std(axis=0)[:, None] * l.std(axis=0)[None, :])
    return pd.DataFrame(np.clip(C, -1.0, 1.0), index=t_labels, columns=l_labels)


def mcc(truth, learned):
    """Mean of matched absolute correlations under the best permutation.

    Returns ``(score, permutation)`` where ``permutation[j]`` is the learned
    column matched to truth column j.
    """
    C = correlation_matrix(truth, learned)
    if C.shape[0] != C.shape[1]:
        raise ShapeError(f"need equally many truth and learned columns, "
                         f"got {C.shape[0]} vs {C.shape[1]}")
    if C.shape[0] > 20:
        raise ShapeError(f"{C.shape[0]} columns exceed the supported 20")
    weights = np.abs(C.to_numpy())
    rows, cols = linear_sum_assignment(weights, maximize=True)
    score = float(weights[rows, cols].mean())
    return score, tuple(int(c) for c in cols[np.argsort(rows)])


def _check_adjacency(A, who):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{who} adjacency must be square, got shape {A.shape}")
    vals = np.unique(A)
    if not np.all(np.isin(vals, (0, 1))):
        raise NotBinaryError(f"{who} adjacency has entries other than 0/1: {vals}")
    if np.any(np.diag(A) != 0):
        raise NotBinaryError(f"{who} adjacency has a nonzero diagonal")
    return A.astype(np.int64)


def shd(A, Ahat) -> int:
    """Structural Hamming distance; a reversed edge counts as two errors."""
    A = _check_adjacency(A, "true")
    Ahat = _check_adjacency(Ahat, "estimated")
    if A.shape != Ahat.shape:
        raise ShapeError(f"adjacency shapes differ: {A.shape} vs {Ahat.shape}")
    return int(np.abs(A - Ahat).sum())


def threshold_to_match(A_cont, k: int) -> np.ndarray:
    """Keep the k largest off-diagonal |entries| as edges, zero the rest.

    Ties at the cutoff keep the entry with the lexicographically smaller
    (row, col) index.
    """
    A = np.asarray(A_cont, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"adjacency must be square, got shape {A.shape}")
    d = A.shape[0]
    if not 0 <= k <= d * d - d:
        raise RangeError("k", k, f"[0, {d * d - d}]")
    cells = [(-abs(A[i, j]), i, j) for i in range(d) for j in range(d) if i != j]
    cells.sort()
    out = np.zeros((d, d), dtype=np.int64)
    for _, i, j in cells[:k]:
        out[i, j] = 1
    return out


def spearman(x, y) -> float:
    """Pearson correlation of average-tie ranks."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or len(x) < 2:
        raise ShapeError(f"need two equal columns of length >= 2, "
                         f"got {x.shape} and {y.shape}")
    for name, v in (("x", x), ("y", y)):
        if np.all(v == v[0]):
            raise ConstantColumnError(f"{name} is constant; rank correlation undefined")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


def block_r2(encodings: dict, factors, pair, content=None, views=None,
             readout: str = "rff", seed: int = 0) -> dict:
    """Held-out R^2 of each factor from the content block of a view pair.

    ``encodings`` maps view names to (n, d_hat) arrays aligned with the
    factor table. ``content`` gives the encoding column indices of the
    content block (all columns when omitted). Scores of the two views are
    averaged per factor.
    """
    a, b = pair
    if views is not None:
        for v in (a, b):
            if v not in views.outputs:
                raise SchemaError(f"view {v!r} not in the view specification")
    f_arr, f_labels = _as_table(factors, "z")
    per_view = []
    for v in (a, b):
        if v not in encodings:
            raise SchemaError(f"no encodings supplied for view {v!r}")
        E = np.asarray(encodings[v], dtype=np.float64)
        if E.ndim != 2 or len(E) != len(f_arr):
            raise ShapeError(f"view {v!r} encodings shaped {E.shape} do not "
                             f"align with {len(f_arr)} factor rows")
        block = E if content is None else E[:, list(content)]
        scores = {}
        for j, fname in enumerate(f_labels):
            r2, _, _ = readout_r2(block, f_arr[:, j], kind=readout, seed=seed)
            scores[fname] = r2
        per_view.append(scores)
    return {f: (per_view[0][f] + per_view[1][f]) / 2.0 for f in f_labels}


@dataclass
class GroupedScores:
    """Grouped readout matrices plus their summary scalars.

    ``r2`` holds raw held-out scores (possibly negative); ``r2_display`` is
    floored at zero, and the diagonal/separation summaries are computed on
    the floored matrix. Spearman entries are absolute rank correlations of
    prediction against truth.
    """

    r2: pd.DataFrame
    r2_display: pd.DataFrame
    spearman: pd.DataFrame
    r2_diag: float
    r2_sep: float
    spearman_diag: float
    spearman_sep: float


def _diag_sep(matrix: pd.DataFrame):
    matched = [matrix.loc[g, g] for g in matrix.index if g in matrix.columns]
    off = [matrix.loc[g, f] for g in matrix.index for f in matrix.columns if g != f]
    diag = float(np.mean(matched)) if matched else float("nan")
    sep = float(np.max(off)) if off else float("nan")
    return diag, sep


def grouped_corr_matrices(latents, factors, groups: dict, readout: str = "rff",
                          seed: int = 0) -> GroupedScores:
    """Readout score of every (latent group, factor) pair.

    ``groups`` maps each factor name (plus an optional ``"na"`` group for
    leftover dimensions) to its latent column indices; together the groups
    must partition the latent columns.
    """
    L, _ = _as_table(latents, "zhat")
    f_arr, f_labels = _as_table(factors, "z")
    if len(L) != len(f_arr):
        raise ShapeError(f"row counts differ: {len(L)} latents vs {len(f_arr)} factors")
    allowed = set(f_labels) | {"na"}
    bad = set(groups) - allowed
    if bad:
        raise SchemaError(f"unknown group labels {sorted(bad)}; expected factor "
                          f"names or 'na'")
    missing = set(f_labels) - set(groups)
    if missing:
        raise SchemaError(f"groups missing for factors {sorted(missing)}")
    claimed = [c for cols in groups.values() for c in cols]
    if sorted(claimed) != list(range(L.shape[1])):
        raise ShapeError(f"groups must partition the {L.shape[1]} latent columns, "
                         f"got {sorted(claimed)}")

    order = [g for g in list(f_labels) + ["na"] if g in groups]
    r2 = pd.DataFrame(0.0, index=order, columns=f_labels)
    rho = pd.DataFrame(0.0, index=order, columns=f_labels)
    for g in order:
        block = L[:, list(groups[g])]
        for j, fname in enumerate(f_labels):
            score, y_hold, pred = readout_r2(block, f_arr[:, j], kind=readout, seed=seed)
            r2.loc[g, fname] = score
            # A flatlined prediction carries no rank information.
            rho.loc[g, fname] = 0.0 if np.all(pred == pred[0]) else abs(spearman(pred, y_hold))
    display = r2.clip(lower=0.0)
    r2_diag, r2_sep = _diag_sep(display)
    s_diag, s_sep = _diag_sep(rho)
    return GroupedScores(r2=r2, r2_display=display, spearman=rho,
                         r2_diag=r2_diag, r2_sep=r2_sep,
                         spearman_diag=s_diag, spearman_sep=s_sep)


@dataclass
class EncodingTable:
    """Row-aligned pairing of learned codes with ground-truth factors."""

    codes: pd.DataFrame
    factors: pd.DataFrame
    groups: dict = None

    def validate(self) -> "EncodingTable":
        if len(self.codes) != len(self.factors):
            raise ShapeError(f"row counts differ: {len(self.codes)} codes vs "
                             f"{len(self.factors)} factors")
        if len(self.codes) < 2:
            raise ShapeError("need at least 2 rows")
        for name, frame in (("codes", self.codes), ("factors", self.factors)):
            arr = frame.to_numpy(dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} table contains missing or non-finite values")
        return self

    @classmethod
    def from_frames(cls, codes: pd.DataFrame, factors: pd.DataFrame,
                    groups: dict = None) -> "EncodingTable":
        factor_cols = [c for c in FACTOR_COLUMNS if c in factors.columns]
        if factor_cols:
            factors = factors[factor_cols]
        return cls(codes=codes.reset_index(drop=True),
                   factors=factors.reset_index(drop=True), groups=groups).validate()
