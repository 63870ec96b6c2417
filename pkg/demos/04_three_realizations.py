"""
One system, three realizations
==============================

A scalar LPV system given as a difference equation, a one-state
realization that needs p[t+1] and divides by it, and a two-state
realization with plain affine dependence on p[t]. Driven by the same
(u, e, p), all three give the same output.
"""
import numpy as np

from lpvss.example1 import (Example1Config, equivalence_check, generate_signals,
                            simulate_augmented_ss, simulate_io, simulate_rational_ss)

cfg = Example1Config(horizon=8, seed=2)
u, e, p = generate_signals(cfg)
np.set_printoptions(precision=4, suppress=True)
print("p        :", p[:-1])
print("io       :", simulate_io(u, e, p[:-1]))
print("rational :", simulate_rational_ss(u, e, p))
print("augmented:", simulate_augmented_ss(u, e, p[:-1]))

worst, _ = equivalence_check(Example1Config(horizon=100, seed=0), trials=200)
print(f"max |difference| over 200 random runs: {worst:.2e}")

# the one-state form breaks down as p approaches zero
try:
    simulate_rational_ss([0.0, 0.0], [1.0, 0.0], [0.5, 1e-4, 0.5])
except ArithmeticError as exc:
    print("rational realization:", exc)
