"""Tree shares: splitting ownership of a cell into disjoint fractions.

A share is a binary tree with boolean leaves. ``[L]`` is the left half,
``[LR]`` the right quarter of that half, and so on. Two shares join only
when they do not overlap.
"""
from barrierlogic import shares as sh

L, R = sh.parse_share("[L]"), sh.parse_share("[R]")
LL, LR = sh.parse_share("[LL]"), sh.parse_share("[LR]")

print("Split the full share in two:")
print(f"  [L] + [R]   = {sh.format_share(sh.join(L, R))}")
print("Keep splitting the left half:")
print(f"  [LL] + [LR] = {sh.format_share(sh.join(LL, LR))}")
print("Overlapping shares have no join:")
print(f"  [L] + [LR]  = {sh.join(L, LR)}")
print("Subtraction recovers the missing piece:")
print(f"  full - [LL] = {sh.format_share(sh.minus(sh.FULL, LL))}")
print(f"  [LR] <= [L]: {sh.leq(LR, L)}   [R] <= [L]: {sh.leq(R, L)}")

print(f"\nThere are {len(sh.trees_up_to(3))} canonical trees of depth <= 3.")
