"""Statistical guarantees for unseen pairs: the two PAC bound routes.

Route 1 estimates the pair-Lipschitz interval on held-out pairs and pays
a growth-function penalty; route 2 keeps the training interval and pays
the observed validation violation rate. The table shows where each wins.
"""

from expclr import (pac_bound_one_sided, pac_bound_training_interval,
                    pac_bound_validation_interval, pac_curve)

DELTA = 0.05   # confidence 1 - delta
P_VAL = 0.05   # validation pairs observed outside the training interval

print(f"confidence {1 - DELTA:.0%}, observed violation rate {P_VAL}\n")
print(f"{'n_val':>9} {'route 1 (val interval)':>24} {'route 2 (train interval)':>26} {'winner':>9}")
curve = pac_curve([100, 1000, 10000, 100000, 1000000], DELTA, P_VAL)
for (n, b1, b2), winner in zip(curve.rows, curve.winners()):
    tag = "route 1" if winner == "validation_interval" else "route 2"
    flag = " (vacuous)" if min(b1, b2) > 1 else ""
    print(f"{n:>9} {b1:>24.5f} {b2:>26.5f} {tag:>9}{flag}")
print(f"\nroute 1 overtakes route 2 from n_val = {curve.crossover_n}")

n = 1000
print(f"\nreference values at n_val = {n}, delta = {DELTA}:")
print(f"  two-sided validation interval : {pac_bound_validation_interval(n, DELTA):.5f}")
print(f"  training interval + P_val     : {pac_bound_training_interval(P_VAL, n, DELTA):.6f}")
print(f"  one-sided upper bound         : {pac_bound_one_sided(n, DELTA):.5f}")
print("the one-sided variant always beats the two-sided one (smaller growth term)")
