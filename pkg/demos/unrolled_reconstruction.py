"""Unrolled proximal gradient reconstruction with the learned step turned off.

With zero proximal networks the loop is plain projected gradient descent on
each block's data term, so it converges to the least-squares solution
``A_q^T y``. The data term is printed after every round.
"""

import torch

from adaptive_jsscc.imaging import BlockSet, fold, unfold
from adaptive_jsscc.reconstruction import Reconstructor
from adaptive_jsscc.sampling import align, init_base_matrix, measure, row_mask

B = 8
A = init_base_matrix(B * B, seed=0)
q = torch.tensor([[8.0, 16.0, 32.0, 64.0]], dtype=torch.float64)
mask = row_mask(q, B * B)
ratio_map = (q / (B * B)).reshape(1, 2, 2)

s = torch.rand(1, 1, 16, 16, dtype=torch.float64)
y = measure(unfold(s, B).blocks, A, mask)

rec = Reconstructor(1, n_iter=11, rho_init=0.7).double()
with torch.no_grad():
    for p in rec.prox.parameters():
        p.zero_()
    out, fidelity = rec(torch.zeros_like(s), ratio_map, 10.0, A, mask, B, measurements=y, track_fidelity=True)

for k, f in enumerate(fidelity):
    print(f"round {k:2d}: data term per block {[f'{v:.2e}' for v in f[0, 0].tolist()]}")
oracle = fold(BlockSet(align(y, A), B, (2, 2))).clamp(0, 1)
print("max deviation from least-squares solution:", float((out - oracle).abs().max()))
