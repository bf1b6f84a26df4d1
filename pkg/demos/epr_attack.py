"""
The EPR attack on BB84
======================

Alice sends halves of Bell pairs instead of prepared qubits and postpones
her measurements. At opening time she measures in whichever basis matches
the bit she wants to claim, and Bob accepts every decided run.
"""
# %%
import numpy as np

from qbclab.protocol import Simulation, UnveilResult
from qbclab.protocols import BB84Bob, EPRAttack, bb84_protocol

for n in (1, 2, 3, 4):
    sim = Simulation(bb84_protocol(n), EPRAttack(n), BB84Bob(n))
    for target in (0, 1):
        d = sim.outcome_distribution(0, target)
        decided = 1 - d[UnveilResult.BOTTOM]
        print(f"n={n} claim {target}: decoded as claimed {d[UnveilResult.of(target)] / decided:.3f} "
              f"of decided runs, rejected {d[UnveilResult.BOTTOM]:.4f}")

# %%
# Sampling a larger instance
# --------------------------
n, trials = 6, 10_000
sim = Simulation(bb84_protocol(n), EPRAttack(n), BB84Bob(n))
rng = np.random.default_rng(5)
for target in (0, 1):
    runs = sim.sample_runs(0, rng, trials, target)
    wrong = runs.count(UnveilResult.of(1 - target))
    print(f"n={n} claim {target}: {trials - runs.count(UnveilResult.BOTTOM)} decided, {wrong} read the other bit")
