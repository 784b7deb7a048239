#!/usr/bin/env python3
"""Desk-scale checks of the convergence conditions, plus where they break.

First the bundled diagnostics: consensus conditions on the combination
matrix, error contraction under a verified isometry constant, support
identification under the adaptive step size, and unbiasedness of the
final estimates. Then a look at the contraction precondition itself:
the order-3s isometry constant delta must sit below 1/3, and enumerating
partial-Hadamard frames shows how narrow that regime is -- at 16 columns
it holds with 14 rows and sparsity 1, and is already unreachable with
12 rows at sparsity 2 (any choice of 12 rows leaves some column pair
with Gram entry >= 1/3).
"""

from greedinet.harness import partial_hadamard_frame, verify_theory
from greedinet.linalg import rip_constant_bruteforce

print(verify_theory(master_seed=7).as_text())

print("\nisometry constants of l x 16 partial Hadamard frames:")
print("   l   order t   delta_t   contraction needs delta_3s < 1/3")
for l, t in ((14, 2), (14, 3), (12, 3), (12, 6)):
    d = rip_constant_bruteforce(partial_hadamard_frame(l, 16), t)
    verdict = "ok for s=%d" % (t // 3) if t % 3 == 0 and d < 1 / 3 else (
        "too large" if t % 3 == 0 else "")
    print(f"  {l:2d}   {t:7d}   {d:7.4f}   {verdict}")
