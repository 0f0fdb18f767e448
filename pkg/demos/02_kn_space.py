"""
The cluster-size / coherence-order random walk
==============================================

States are labelled by the cluster size K and the coherence order n. Each
move grows or shrinks the cluster by one and shifts n by two. The second
moment of the coherence distribution grows exponentially before the finite
size N caps it.
"""

import numpy as np

from globotoc import kn
from globotoc.mqc import cluster_size_fit

N = 400
t, m2, K = kn.otoc_series_kn(N, 60, mode="rate", dt=0.1)

print(" t     sum n^2 g_n    <K>")
for i in range(0, t.size, 5):
    print(f"{t[i]:4.1f} {m2[i]:12.2f} {K[i]:8.2f}")

sat = kn.stationary_kn(N, "rate").second_moment()
print(f"\nstationary second moment {sat:.1f} (N = {N})")

# growth rate from the window well below saturation
win = (m2 > 3) & (m2 < 0.2 * sat)
rate = np.polyfit(t[win], np.log(m2[win]), 1)[0]
print(f"exponential rate in the window: {rate:.3f}")

# a small system, as an MQC spectrum
small = kn.mqc_from_kn(kn.stationary_kn(21))
print(f"\nN = 21 stationary spectrum, Gaussian cluster size K = {cluster_size_fit(small).K:.1f}")
for n, g in zip(small.n_values, small.g):
    if n >= 0 and g > 1e-3:
        print(f"  g_{n:<3d} = {g:.4f}")
