"""
BB84 commitment, honestly run
=============================

Alice commits to a bit by preparing n qubits in one of two conjugate bases,
then opens it by announcing the bit and her measurement outcomes.
"""
# %%
# Bob's view hides the bit
# ------------------------
# Bob's reduced state is maximally mixed for either value, so the two views
# coincide exactly.
from qbclab.attack import fidelity_audit
from qbclab.cli import demo_bb84
from qbclab.protocol import Idle, Simulation, UnveilResult, concealment_report
from qbclab.protocols import bb84_protocol

print(demo_bb84(2))

for n in range(1, 5):
    spec = bb84_protocol(n)
    rep = concealment_report(spec, spec.honest_alice(), Idle())
    print(f"n={n}: trace distance {rep.trace_distance:.1e}, audit fidelity {fidelity_audit(spec):.12f}")

# %%
# Opening the commitment
# ----------------------
# Bob measures each qubit in a random basis. He can only reject when none of
# his bases matched, which happens with probability (3/4)^n; he never reads
# the wrong bit.
for n in range(1, 5):
    spec = bb84_protocol(n)
    sim = Simulation(spec, spec.honest_alice(), spec.honest_bob())
    dist = sim.outcome_distribution(1, 1)
    print(f"n={n}: Pr[1]={dist[UnveilResult.ONE]:.6f} Pr[0]={dist[UnveilResult.ZERO]:.1f} "
          f"Pr[reject]={dist[UnveilResult.BOTTOM]:.6f} (3/4)^n={0.75**n:.6f}")
