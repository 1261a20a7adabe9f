"""Unrolled proximal gradient reconstruction guided by the shared ratio map.

Each of the ``n_iter`` rounds takes a gradient step on the per-block data term
``0.5 * ||A_q x_i - y_i||^2`` and then applies a learned residual proximal
network to the whole folded image, conditioned on features extracted from the
ratio map and the SNR.

The receiver never sees the transmitter's measurements, so the data term is
anchored to pseudo-measurements ``y_i = A_q x_i`` taken from the decoder output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .imaging import BlockSet, fold, unfold, upsample_blocks
from .sampling import SemanticNet, align, measure


class ProxNet(nn.Module):
    """Residual proximal mapping. The last layer starts at zero, so an untrained
    network leaves its input unchanged."""

    def __init__(self, in_channels: int, out_channels: int, width: int = 16, depth: int = 3):
        super().__init__()
        layers: list[nn.Module] = []
        ch = in_channels
        for _ in range(depth - 1):
            layers += [nn.Conv2d(ch, width, 3, padding=1), nn.PReLU()]
            ch = width
        self.body = nn.Sequential(*layers)
        self.last = nn.Conv2d(ch, out_channels, 3, padding=1)
        nn.init.zeros_(self.last.weight)
        nn.init.zeros_(self.last.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.last(self.body(x))


@dataclass
class PgdState:
    k: int
    estimate: torch.Tensor  # image-shaped X^(k)
    measurements: torch.Tensor  # (b, C, l, N), zero past q_i
    fidelity: list[torch.Tensor] = field(default_factory=list)


def data_fidelity(blocks: torch.Tensor, A: torch.Tensor, mask: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Per-block ``0.5 * ||A_q x_i - y_i||^2``, shape ``(b, C, l)``."""
    r = measure(blocks, A, mask) - y
    return 0.5 * r.square().sum(dim=-1)


def pgd_step(
    blocks: torch.Tensor, A: torch.Tensor, mask: torch.Tensor, y: torch.Tensor, rho: torch.Tensor | float
) -> torch.Tensor:
    """``v_i = x_i - rho * A_q^T (A_q x_i - y_i)`` for every block at once."""
    residual = measure(blocks, A, mask) - y
    return blocks - rho * align(residual, A)


class Reconstructor(nn.Module):
    def __init__(
        self,
        channels: int,
        n_iter: int = 11,
        extract_channels: int = 4,
        extract_width: int = 8,
        extract_depth: int = 2,
        prox_width: int = 16,
        prox_depth: int = 3,
        use_acam: bool = True,
        rho_init: float = 0.5,
    ):
        super().__init__()
        self.n_iter = n_iter
        self.rho = nn.Parameter(torch.full((n_iter,), float(rho_init)))
        self.extractors = nn.ModuleList(
            SemanticNet(1, extract_width, extract_channels, extract_depth, use_acam) for _ in range(n_iter)
        )
        self.prox = nn.ModuleList(
            ProxNet(channels + extract_channels, channels, prox_width, prox_depth) for _ in range(n_iter)
        )

    def init_state(
        self,
        x_hat: torch.Tensor,
        A: torch.Tensor,
        mask: torch.Tensor,
        block_size: int,
        dither: float = 0.0,
        generator: torch.Generator | None = None,
        measurements: torch.Tensor | None = None,
    ) -> PgdState:
        if measurements is None:
            measurements = measure(unfold(x_hat, block_size).blocks, A, mask)
        start = x_hat
        if dither > 0:
            noise = torch.rand(x_hat.shape, generator=generator, dtype=torch.float64).to(x_hat.dtype)
            start = x_hat + dither * (2.0 * noise - 1.0)
        return PgdState(k=0, estimate=start, measurements=measurements)

    def prox_step(
        self, v: BlockSet, features: torch.Tensor, k: int
    ) -> torch.Tensor:
        img = fold(v)
        if features.shape[-2:] != img.shape[-2:]:
            raise ValueError(f"feature map {tuple(features.shape)} does not match image {tuple(img.shape)}")
        return img + self.prox[k](torch.cat([img, features], dim=1))

    def forward(
        self,
        x_hat: torch.Tensor,
        ratio_map: torch.Tensor,
        mu: float | torch.Tensor,
        A: torch.Tensor,
        mask: torch.Tensor,
        block_size: int,
        n_iter: int | None = None,
        dither: float = 0.0,
        generator: torch.Generator | None = None,
        measurements: torch.Tensor | None = None,
        track_fidelity: bool = False,
    ) -> torch.Tensor | tuple[torch.Tensor, list[torch.Tensor]]:
        """Run the unrolled loop and return the clamped estimate.

        ``ratio_map`` is ``(b, H/B, W/B)``; ``mask`` is the ``(b, l, N)`` row mask
        implied by it. With ``track_fidelity`` also returns the per-block data
        term before the first and after every round.
        """
        rounds = self.n_iter if n_iter is None else n_iter
        state = self.init_state(x_hat, A, mask, block_size, dither, generator, measurements)
        ratio_img = upsample_blocks(ratio_map.to(x_hat.dtype), block_size)
        if track_fidelity:
            state.fidelity.append(data_fidelity(unfold(state.estimate, block_size).blocks, A, mask, state.measurements))
        for k in range(rounds):
            features = self.extractors[k](ratio_img, mu, block_size)
            blocks = unfold(state.estimate, block_size)
            v = pgd_step(blocks.blocks, A, mask, state.measurements, self.rho[k])
            state.estimate = self.prox_step(BlockSet(v, blocks.block_size, blocks.grid), features, k)
            state.k = k + 1
            if track_fidelity:
                state.fidelity.append(
                    data_fidelity(unfold(state.estimate, block_size).blocks, A, mask, state.measurements)
                )
        out = state.estimate.clamp(0.0, 1.0)
        return (out, state.fidelity) if track_fidelity else out
