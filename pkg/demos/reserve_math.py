"""
Reserves of a concentrated position
===================================

A position of liquidity ``L`` on the sqrt-price interval ``[pl, pu]`` holds
only token x below the interval, only token y above it, and a mix inside.
This script tabulates the reserves and the position value across prices,
and compares a symmetric position with simply holding the deposit.
"""

import math

from lpconc import Position, PriceInterval, hold_value, liquidity_for_symmetric, reserves_for

###############################################################################
# A small position on [1, 3]

pos = Position(6.0, PriceInterval(1.0, 3.0))
print(" sqrt price       x        y    value")
for price in (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 5.0):
    r = reserves_for(pos, price)
    print(f"{price:11.2f} {r.x:8.4f} {r.y:8.4f} {r.value(price):8.4f}")

###############################################################################
# Depositing 100,000 USDC worth at ETH = 1350 for several interval widths.
# Narrow intervals get more liquidity (and fees) per dollar, but lose more
# against holding when the price moves.

W, p0 = 100_000.0, math.sqrt(1350.0)
p1 = math.sqrt(1350.0 * 1.2)
print("\n alpha   liquidity   value at +20%   vs hold")
for alpha in (1.01, 1.05, 1.2, 2.0, 4.0):
    position, deposit = liquidity_for_symmetric(W, p0, alpha)
    lp = reserves_for(position, p1).value(p1)
    hodl = hold_value(deposit, p1)
    print(f"{alpha:6.2f} {position.liquidity:11.1f} {lp:15.2f} {100 * (lp / hodl - 1):8.3f}%")
