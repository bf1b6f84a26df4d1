"""
Steering a commitment after the fact
====================================

The generic attack purifies Alice's commit, compares the purified states for
both bit values and builds a unitary on Alice's side that moves one into the
best reachable approximation of the other. For BB84 the two purifications
already agree, so the unitary is trivial. The toy fixture rotates Bob's qubit
by alpha and shows how the attack degrades as the views separate.
"""
# %%
import math

import numpy as np

from qbclab.attack import PurificationAttack, exact_attack_report, fidelity_audit, mc_attack_report, sample_attack
from qbclab.protocols import bb84_protocol, toy_protocol

for n in (1, 2, 3):
    attack = PurificationAttack(bb84_protocol(n))
    plan = attack.plan(())
    rep = exact_attack_report(bb84_protocol(n), attack=attack)
    print(f"bb84 n={n}: F'={plan.fidelity:.12f} distance of U from identity {plan.identity_deviation:.1e} "
          f"success among decided runs {rep.conditional_success:.3f}")

# %%
# Toy fixture
# -----------
# Audit fidelity and partner overlap both equal cos(alpha); the attack is
# accepted with probability cos(alpha)^2, which meets the F'^2 floor.
rng = np.random.default_rng(3)
print("alpha     cos      F'       success  sampled")
for alpha in np.linspace(0, math.pi / 2, 5):
    spec = toy_protocol(alpha)
    attack = PurificationAttack(spec)
    exact = exact_attack_report(spec, attack=attack).expected_success
    mc = mc_attack_report(spec, sample_attack(spec, rng, 10_000, attack=attack), attack=attack)
    print(f"{alpha:.4f}  {math.cos(alpha):.4f}  {fidelity_audit(spec):.4f}  {exact:.4f}   "
          f"{mc.expected_success:.4f} +- {mc.success_stderr:.4f}")
