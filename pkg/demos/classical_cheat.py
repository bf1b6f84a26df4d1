"""
Cheating without entanglement
=============================

A dishonest Alice commits to 0 and later claims 1 by announcing guessed
outcomes. Each guess is right only half of the time on the positions Bob
checks, so the success rate decays geometrically.
"""
# %%
import numpy as np

from qbclab.protocol import Simulation, UnveilResult
from qbclab.protocols import BB84Bob, ClassicalGuess, bb84_protocol, classical_guess_success, optimal_announcement_success

rng = np.random.default_rng(11)
print(" n  exact     closed    sampled   best fixed announcement")
for n in range(1, 7):
    sim = Simulation(bb84_protocol(n), ClassicalGuess(n), BB84Bob(n))
    exact = sim.outcome_distribution(0, 1)[UnveilResult.ONE] if n <= 4 else float("nan")
    runs = sim.sample_runs(0, rng, 10_000, 1)
    sampled = runs.count(UnveilResult.ONE) / len(runs)
    print(f"{n:2d}  {exact:.6f}  {classical_guess_success(n):.6f}  {sampled:.4f}    "
          f"{optimal_announcement_success(n):.6f}")

# %%
# The last column searches over every fixed announcement. It does at least as
# well as the single-flip guess, yet still vanishes as n grows.
