"""Engineered feature channels: uniform-pattern LBP and dense HOG.

LBP codes each interior pixel by thresholding a circle of P interpolated
neighbors against the center, keeps one histogram bin per uniform pattern
(at most two circular 0/1 transitions) plus a single bin for everything
else, and concatenates per-block histograms over a grid. HOG accumulates
gradient-magnitude votes into 9 unsigned orientation bins per cell and
L2-normalizes overlapping 2x2-cell blocks.

The third channel (raw pixels) is plain vectorization, see preprocess.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

HOG_BINS = 9
HOG_BIN_WIDTH = 180.0 / HOG_BINS
HOG_BLOCK_EPS = 1e-6

# sample offsets this close to an integer snap exactly (axis-aligned points)
_SNAP_TOL = 1e-9

_MAX_P = 16  # the code table has 2^P entries


@dataclass(frozen=True)
class LbpConfig:
    """Uniform-LBP parameters: P sampling points on a circle of radius R,
    histograms over a (grid_y, grid_x) partition of the code image."""

    p: int = 8
    r: float = 1.0
    grid: tuple[int, int] = (6, 6)

    def __post_init__(self):
        if self.p < 4 or self.p > _MAX_P:
            raise ValueError(f"P must be in [4, {_MAX_P}]")
        if self.r < 1:
            raise ValueError("R must be >= 1")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def bins_per_block(self) -> int:
        return self.p * (self.p - 1) + 3

    @property
    def descriptor_length(self) -> int:
        return self.grid[0] * self.grid[1] * self.bins_per_block


@dataclass(frozen=True)
class HogConfig:
    """HOG parameters. Blocks are fixed at 2x2 cells with a one-cell stride
    (50% overlap) and 9 unsigned orientation bins over [0, 180)."""

    cell: tuple[int, int] = (8, 8)

    def __post_init__(self):
        if self.cell[0] < 2 or self.cell[1] < 2:
            raise ValueError("cell sides must be >= 2 pixels")

    def descriptor_length(self, image_hw: tuple[int, int]) -> int:
        n_cy = image_hw[0] // self.cell[0]
        n_cx = image_hw[1] // self.cell[1]
        return max(n_cy - 1, 0) * max(n_cx - 1, 0) * 4 * HOG_BINS


# ---------------------------------------------------------------------------
# LBP
# ---------------------------------------------------------------------------

def neighbor_offsets(p: int, r: float) -> tuple[np.ndarray, np.ndarray]:
    """(dy, dx) sample offsets for the P neighbors, counterclockwise from
    the +x axis (dy points down rows, so dy = -R sin, dx = +R cos)."""
    angles = 2.0 * np.pi * np.arange(p) / p
    dy = -r * np.sin(angles)
    dx = r * np.cos(angles)
    snap_y = np.abs(dy - np.round(dy)) < _SNAP_TOL
    snap_x = np.abs(dx - np.round(dx)) < _SNAP_TOL
    dy[snap_y] = np.round(dy[snap_y])
    dx[snap_x] = np.round(dx[snap_x])
    return dy, dx


def _split_offsets(p: int, r: float):
    """Integer and fractional parts of each neighbor offset, computed once
    so that per-pixel and whole-image code paths interpolate identically."""
    dys, dxs = neighbor_offsets(p, r)
    iy = np.floor(dys).astype(np.int64)
    ix = np.floor(dxs).astype(np.int64)
    return iy, dys - iy, ix, dxs - ix


@lru_cache(maxsize=8)
def uniform_code_table(p: int) -> np.ndarray:
    """Map each raw P-bit code to its histogram bin.

    Uniform codes (<= 2 circular transitions) occupy bins 0..U-1 in
    ascending code order; all non-uniform codes share the final bin.
    """
    table = np.empty(1 << p, dtype=np.int64)
    nonuniform_bin = p * (p - 1) + 2
    next_bin = 0
    for code in range(1 << p):
        rotated = (code >> 1) | ((code & 1) << (p - 1))
        if bin(code ^ rotated).count("1") <= 2:
            table[code] = next_bin
            next_bin += 1
        else:
            table[code] = nonuniform_bin
    assert next_bin == nonuniform_bin
    return table


def lbp_code(image: np.ndarray, y: int, x: int, p: int, r: float) -> int:
    """Raw LBP code at one pixel; bit k set iff neighbor k >= center."""
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    m = int(np.ceil(r))
    if not (m <= y < h - m and m <= x < w - m):
        raise ValueError("neighborhood of radius R does not fit at (y, x)")
    iy, fy, ix, fx = _split_offsets(p, r)
    center = image[y, x]
    code = 0
    for k in range(p):
        y0, x0 = y + iy[k], x + ix[k]
        y1 = y0 + 1 if fy[k] > 0 else y0
        x1 = x0 + 1 if fx[k] > 0 else x0
        value = (image[y0, x0] * (1 - fy[k]) * (1 - fx[k])
                 + image[y0, x1] * (1 - fy[k]) * fx[k]
                 + image[y1, x0] * fy[k] * (1 - fx[k])
                 + image[y1, x1] * fy[k] * fx[k])
        if value >= center:
            code |= 1 << k
    return code


def lbp_code_image(image: np.ndarray, p: int, r: float) -> np.ndarray:
    """LBP codes for every interior pixel, shape (H-2*ceil(R), W-2*ceil(R)).

    The border of ceil(R) pixels lacks a full neighborhood and is excluded.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    m = int(np.ceil(r))
    hh, ww = h - 2 * m, w - 2 * m
    if hh < 1 or ww < 1:
        raise ValueError("image too small for LBP radius")
    iy, fy, ix, fx = _split_offsets(p, r)
    center = image[m:h - m, m:w - m]
    codes = np.zeros((hh, ww), dtype=np.int64)
    for k in range(p):
        y0, x0 = m + iy[k], m + ix[k]
        y1 = y0 + 1 if fy[k] > 0 else y0
        x1 = x0 + 1 if fx[k] > 0 else x0
        value = (image[y0:y0 + hh, x0:x0 + ww] * (1 - fy[k]) * (1 - fx[k])
                 + image[y0:y0 + hh, x1:x1 + ww] * (1 - fy[k]) * fx[k]
                 + image[y1:y1 + hh, x0:x0 + ww] * fy[k] * (1 - fx[k])
                 + image[y1:y1 + hh, x1:x1 + ww] * fy[k] * fx[k])
        codes |= (value >= center).astype(np.int64) << k
    return codes


def _block_edges(extent: int, blocks: int) -> np.ndarray:
    """Block boundaries under truncating division; the last block absorbs
    any remainder rows/columns."""
    base = extent // blocks
    edges = np.arange(blocks + 1, dtype=np.int64) * base
    edges[-1] = extent
    return edges


def lbp_descriptor(image: np.ndarray, cfg: LbpConfig) -> np.ndarray:
    """Concatenated per-block uniform-pattern histograms (row-major blocks).

    Every interior pixel votes exactly once, so the descriptor sums to the
    interior pixel count.
    """
    codes = lbp_code_image(image, cfg.p, cfg.r)
    gy, gx = cfg.grid
    hi, wi = codes.shape
    if hi < gy or wi < gx:
        raise ValueError("LBP interior smaller than the block grid")
    binned = uniform_code_table(cfg.p)[codes]
    n_bins = cfg.bins_per_block
    ye = _block_edges(hi, gy)
    xe = _block_edges(wi, gx)
    out = np.empty(gy * gx * n_bins, dtype=np.float64)
    pos = 0
    for by in range(gy):
        for bx in range(gx):
            block = binned[ye[by]:ye[by + 1], xe[bx]:xe[bx + 1]]
            out[pos:pos + n_bins] = np.bincount(block.ravel(), minlength=n_bins)
            pos += n_bins
    return out


# ---------------------------------------------------------------------------
# HOG
# ---------------------------------------------------------------------------

def hog_gradients(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference gradients with replicated borders: (gy, gx)."""
    image = np.asarray(image, dtype=np.float64)
    padded_x = np.pad(image, ((0, 0), (1, 1)), mode="edge")
    padded_y = np.pad(image, ((1, 1), (0, 0)), mode="edge")
    gx = padded_x[:, 2:] - padded_x[:, :-2]
    gy = padded_y[2:, :] - padded_y[:-2, :]
    return gy, gx


def hog_cell_histograms(image: np.ndarray, cell: tuple[int, int]) -> np.ndarray:
    """Per-cell 9-bin orientation histograms, shape (nCy, nCx, 9).

    Votes are gradient magnitudes split linearly between the two nearest
    bin centers (10, 30, ..., 170 degrees, circular over 180). Pixels
    beyond the last full cell are dropped.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    cy, cx = cell
    n_cy, n_cx = h // cy, w // cx
    if n_cy < 1 or n_cx < 1:
        raise ValueError("image smaller than one cell")
    gy, gx = hog_gradients(image)
    gy = gy[:n_cy * cy, :n_cx * cx]
    gx = gx[:n_cy * cy, :n_cx * cx]
    mag = np.sqrt(gx * gx + gy * gy)
    ang = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    pos = (ang - HOG_BIN_WIDTH / 2.0) / HOG_BIN_WIDTH
    lower = np.floor(pos)
    frac = pos - lower
    bin_lo = np.mod(lower.astype(np.int64), HOG_BINS)
    bin_hi = np.mod(bin_lo + 1, HOG_BINS)
    vote_lo = mag * (1.0 - frac)
    vote_hi = mag * frac

    rows = np.repeat(np.arange(n_cy * cy) // cy, n_cx * cx)
    cols = np.tile(np.arange(n_cx * cx) // cx, n_cy * cy)
    cell_base = (rows * n_cx + cols) * HOG_BINS
    # interleave each pixel's (lo, hi) votes so accumulation order matches
    # a row-major per-pixel loop exactly
    flat_idx = np.column_stack(
        [cell_base + bin_lo.ravel(), cell_base + bin_hi.ravel()]).ravel()
    flat_votes = np.column_stack([vote_lo.ravel(), vote_hi.ravel()]).ravel()
    hists = np.zeros(n_cy * n_cx * HOG_BINS, dtype=np.float64)
    np.add.at(hists, flat_idx, flat_votes)
    return hists.reshape(n_cy, n_cx, HOG_BINS)


def hog_descriptor(image: np.ndarray, cfg: HogConfig) -> np.ndarray:
    """Dense HOG over 2x2-cell blocks at one-cell stride, blocks row-major.

    Each block's 36 values (4 cells x 9 bins, cells row-major) are
    L2-normalized as v / sqrt(|v|^2 + eps^2), which maps all-zero blocks
    to zero.
    """
    image = np.asarray(image, dtype=np.float64)
    cy, cx = cfg.cell
    if image.shape[0] < 2 * cy or image.shape[1] < 2 * cx:
        raise ValueError("image smaller than one 2x2-cell block")
    cells = hog_cell_histograms(image, cfg.cell)
    n_cy, n_cx = cells.shape[:2]
    out = np.empty((n_cy - 1) * (n_cx - 1) * 4 * HOG_BINS, dtype=np.float64)
    pos = 0
    for by in range(n_cy - 1):
        for bx in range(n_cx - 1):
            vec = np.concatenate([
                cells[by, bx], cells[by, bx + 1],
                cells[by + 1, bx], cells[by + 1, bx + 1],
            ])
            norm = np.sqrt(np.sum(vec * vec) + HOG_BLOCK_EPS * HOG_BLOCK_EPS)
            out[pos:pos + 4 * HOG_BINS] = vec / norm
            pos += 4 * HOG_BINS
    return out
