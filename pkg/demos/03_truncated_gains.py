"""
Gains from a finite scheduling window
=====================================

Approximate the Kalman gain using only the last tau scheduling samples and
watch the remainder shrink as the window grows.
"""
import numpy as np

from lpvss.gainapprox import decay_study
from lpvss.models import two_state_lpv
from lpvss.simulate import SimConfig, gen_scheduling

model = two_state_lpv()
ens = [gen_scheduling(SimConfig(120, seed=k, scheduling_kind="uniform-random-walk"),
                      model.scheduling_set) for k in range(10)]

taus = [1, 2, 3, 4, 6, 8, 12]
curve = decay_study(model, ens, taus, stride=4)

for tau, med, worst in zip(curve.taus, curve.stat("remainder", "median"),
                           curve.stat("remainder", "max")):
    print(f"tau={tau:>2}  median ||K - K_tau|| = {med:.2e}   max = {worst:.2e}")
print("share of samples where a longer window helps:", np.round(curve.decay_fraction, 3))
