"""How detection quality translates into collision risk and spurious turns.

Run: python3 demos/collision_math.py
"""

from pssl import analytics

# At 30 frames per second and 0.5 m/s the last metre before a wall gives the
# detector s = 30 chances to notice it.
s, fps, speed = 30, 30, 0.5

print("independent misses")
for tpr in (0.95, 0.6, 0.3):
    print(f"  tpr {tpr:.2f}: collision probability {analytics.collision_prob_iid(tpr, s):.3e}")

# Consecutive frames look alike, so a miss tends to repeat. With p_ident the
# chance that a classification copies the previous one, the risk is far higher.
print("persistent misses (p_ident 0.8)")
omega = analytics.persistence_transition(0.8, 0.95)
print(f"  stay-negative transition {omega:.2f}")
print(f"  collision probability {analytics.collision_prob_markov(0.8, 0.95, s):.3e}")

# False positives cost turns rather than crashes.
print("spurious turns per metre")
for fpr in (0.05, 0.0017):
    print(f"  fpr {fpr}: {analytics.spurious_turn_rate(fpr, fps, speed):.3f}")
