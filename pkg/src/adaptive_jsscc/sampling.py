"""Saliency-driven block compressed sensing.

The transmitter splits an image into ``B x B`` blocks, scores every block with a
small SNR-aware scanning network, turns the scores into a per-block row budget
``q_i`` under the overall ratio ``r``, and keeps the leading ``q_i`` rows of one
shared orthonormal base matrix for each block. The measured coefficients are
mapped back to pixel space (``x_i = A_q^T A_q s_i``) before channel coding.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .acam import make_acam
from .errors import ConfigError, GeometryError
from .imaging import check_geometry


# --------------------------------------------------------------------------- base matrix


def init_base_matrix(n: int, seed: int = 0) -> torch.Tensor:
    """Orthonormal ``n x n`` matrix from the SVD of a Gaussian draw.

    Rows are the right-singular vectors ordered by descending singular value,
    so every leading sub-block ``A[:q]`` is itself row-orthonormal.
    """
    if n < 1:
        raise ConfigError(f"base matrix dimension must be >= 1, got {n}")
    attempt = seed
    while True:
        rng = np.random.default_rng(attempt)
        g = rng.standard_normal((n, n))
        try:
            _, s, vt = np.linalg.svd(g)
        except np.linalg.LinAlgError:
            attempt += 1
            continue
        if np.all(np.isfinite(vt)) and s[-1] > 0:
            return torch.from_numpy(vt.copy())
        attempt += 1


class BaseMatrix(nn.Module):
    """Trainable shared sampling matrix ``A`` (N x N)."""

    def __init__(self, n: int, seed: int = 0, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.n = n
        self.A = nn.Parameter(init_base_matrix(n, seed).to(dtype))

    def leading(self, q: int) -> torch.Tensor:
        return self.A[:q]


def sample_block(
    s: torch.Tensor, A: torch.Tensor, q: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Measure one vectorized block with the first ``q`` rows and align it back.

    Returns ``(y, x)`` with ``y = A_q s`` and ``x = A_q^T y``.
    """
    n = A.shape[0]
    if not 1 <= q <= n:
        raise ConfigError(f"row count q={q} outside [1, {n}]")
    a_q = A[:q]
    y = a_q @ s
    return y, a_q.T @ y


def row_mask(
    q: torch.Tensor, n: int, q_soft: torch.Tensor | None = None, temperature: float = 2.0
) -> torch.Tensor:
    """``(..., n)`` mask selecting the first ``q`` rows per block.

    With ``q_soft`` the forward value is unchanged but gradients reach
    ``q_soft`` through a sigmoid relaxation (straight-through estimator).
    """
    idx = torch.arange(n, dtype=torch.float64 if q_soft is None else q_soft.dtype)
    hard = (idx < q.unsqueeze(-1)).to(idx.dtype)
    if q_soft is None:
        return hard
    soft = torch.sigmoid((q_soft.unsqueeze(-1) - idx - 0.5) / temperature)
    return hard + (soft - soft.detach())


def measure(blocks: torch.Tensor, A: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Masked coefficients ``(b, C, l, N)``; rows past ``q_i`` are zero."""
    coeff = torch.einsum("mn,bcln->bclm", A, blocks)
    return coeff * mask.unsqueeze(1).to(coeff.dtype)


def align(coeff: torch.Tensor, A: torch.Tensor) -> torch.Tensor:
    """Map (masked) coefficients back to pixel space: ``A^T y`` per block."""
    return torch.einsum("mn,bclm->bcln", A, coeff)


# --------------------------------------------------------------------------- allocation


@dataclass
class SamplingPlan:
    """Per-block row counts for one image."""

    q: np.ndarray  # (Hb, Wb) int
    n: int
    ratio: float

    @property
    def grid(self) -> tuple[int, int]:
        return tuple(self.q.shape)  # type: ignore[return-value]

    @property
    def ratios(self) -> np.ndarray:
        return self.q / self.n

    @property
    def budget(self) -> int:
        return int(self.q.sum())


def total_budget(ratio: float, n: int, count: int) -> int:
    if not (0.0 < ratio <= 1.0):
        raise ConfigError(f"sampling ratio must lie in (0, 1], got {ratio}")
    budget = int(round(ratio * n * count))
    if budget < count:
        raise ConfigError(
            f"ratio {ratio} gives {budget} rows for {count} blocks; every block needs at least one"
        )
    return budget


def allocate(saliency: np.ndarray, ratio: float, n: int, count: int | None = None) -> SamplingPlan:
    """Proportional row allocation with clamping and an exact-budget repair.

    ``q_i = clamp(round(M_i Q), 1, N)``; while the sum overshoots, decrement the
    block with the largest ``q_i (1 - M_i)``; while it undershoots, increment
    the block with the largest ``M_i (N - q_i)``. Ties go to the lowest index.
    """
    m = np.asarray(saliency, dtype=np.float64)
    grid = m.shape if m.ndim == 2 else (1, m.size)
    m = m.reshape(-1)
    count = m.size if count is None else count
    if m.size != count:
        raise GeometryError(f"saliency has {m.size} entries for {count} blocks")
    budget = total_budget(ratio, n, count)
    q = np.clip(np.rint(m * budget), 1, n).astype(np.int64)
    excess = int(q.sum()) - budget
    while excess > 0:
        prio = np.where(q > 1, q * (1.0 - m), -np.inf)
        q[int(np.argmax(prio))] -= 1
        excess -= 1
    while excess < 0:
        prio = np.where(q < n, m * (n - q), -np.inf)
        q[int(np.argmax(prio))] += 1
        excess += 1
    return SamplingPlan(q=q.reshape(grid), n=n, ratio=float(ratio))


def uniform_saliency(grid: tuple[int, int]) -> np.ndarray:
    return np.full(grid, 1.0 / (grid[0] * grid[1]))


def build_ratio_map(plan: SamplingPlan) -> np.ndarray:
    """The ``(Hb, Wb)`` grid of per-block ratios ``q_i / N`` shared with the receiver."""
    return plan.q / plan.n


def save_ratio_map(path: str | Path, ratio_map: np.ndarray, n: int) -> None:
    """Text grid: a ``Hb Wb N`` header line, then one row of ratios per block row."""
    grid = np.asarray(ratio_map, dtype=np.float64)
    lines = [f"{grid.shape[0]} {grid.shape[1]} {n}"]
    lines += [" ".join(float(v).hex() for v in row) for row in grid]
    Path(path).write_text("\n".join(lines) + "\n")


def load_ratio_map(path: str | Path) -> tuple[np.ndarray, int]:
    header, *rows = Path(path).read_text().strip().splitlines()
    hb, wb, n = (int(v) for v in header.split())
    grid = np.array([[float.fromhex(v) for v in row.split()] for row in rows], dtype=np.float64)
    if grid.shape != (hb, wb):
        raise GeometryError(f"ratio map body {grid.shape} disagrees with header {(hb, wb)}")
    return grid, n


# --------------------------------------------------------------------------- networks


def to_block_images(x: torch.Tensor, block_size: int) -> torch.Tensor:
    """``(b, C, H, W) -> (b * l, C, B, B)``, blocks in row-major order."""
    b, c, h, w = x.shape
    hb, wb = check_geometry(h, w, block_size)
    return (
        x.reshape(b, c, hb, block_size, wb, block_size)
        .permute(0, 2, 4, 1, 3, 5)
        .reshape(b * hb * wb, c, block_size, block_size)
    )


def from_block_images(x: torch.Tensor, batch: int, grid: tuple[int, int]) -> torch.Tensor:
    hb, wb = grid
    _, c, bs, _ = x.shape
    return (
        x.reshape(batch, hb, wb, c, bs, bs)
        .permute(0, 3, 1, 4, 2, 5)
        .reshape(batch, c, hb * bs, wb * bs)
    )


class SemanticNet(nn.Module):
    """Small convolutional stack with an ACAM after every hidden layer.

    Applied to every block independently, so identical blocks always give
    identical outputs. Serves both as the transmitter's scanning network and as
    the receiver's per-iteration semantic extractor.
    """

    def __init__(self, in_channels: int, width: int = 16, out_channels: int = 1,
                 depth: int = 2, use_acam: bool = True):
        super().__init__()
        self.convs = nn.ModuleList()
        self.acts = nn.ModuleList()
        self.acams = nn.ModuleList()
        ch = in_channels
        for _ in range(depth):
            self.convs.append(nn.Conv2d(ch, width, 3, padding=1))
            self.acts.append(nn.PReLU())
            self.acams.append(make_acam(width, use_acam))
            ch = width
        self.head = nn.Conv2d(ch, out_channels, 1)

    def forward(self, x: torch.Tensor, mu: float | torch.Tensor, block_size: int) -> torch.Tensor:
        b, _, h, w = x.shape
        grid = (h // block_size, w // block_size)
        t = to_block_images(x, block_size)
        mu_t = torch.as_tensor(mu, dtype=x.dtype)
        if mu_t.ndim:
            mu_t = mu_t.repeat_interleave(grid[0] * grid[1])
        for conv, act, acam in zip(self.convs, self.acts, self.acams):
            t = acam(act(conv(t)), mu_t)
        return from_block_images(self.head(t), b, grid)


class ScanningNetwork(nn.Module):
    """Image + SNR -> per-block saliency ``M`` (nonnegative, sums to 1 per image)."""

    def __init__(self, in_channels: int, width: int = 16, depth: int = 2, use_acam: bool = True):
        super().__init__()
        self.body = SemanticNet(in_channels, width, 1, depth, use_acam)

    def forward(self, img: torch.Tensor, mu: float | torch.Tensor, block_size: int) -> torch.Tensor:
        score = F.softplus(self.body(img, mu, block_size)) + 1e-6
        per_block = F.avg_pool2d(score, block_size)[:, 0]
        return per_block / per_block.sum(dim=(1, 2), keepdim=True)


def scan_saliency(net: ScanningNetwork, img: torch.Tensor, mu: float, block_size: int) -> torch.Tensor:
    return net(img, mu, block_size)
