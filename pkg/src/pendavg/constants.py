"""Mode frequencies and periods of the linearized double pendulum.

The small-oscillation pendulum with equal masses and equal stem lengths,
written in the rescaled time in which gravity drops out, has the two
normal-mode frequencies

    omega1 = sqrt(2 - sqrt(2))   (in-phase, slow mode)
    omega2 = sqrt(2 + sqrt(2))   (anti-phase, fast mode)

Everything downstream (orbit families, quadrature ranges, resonance
periods) is derived from these two numbers, so they are computed here
once from the radicals and never parsed from decimal text.
"""

import math

SQRT2 = math.sqrt(2.0)

OMEGA1 = math.sqrt(2.0 - SQRT2)
OMEGA2 = math.sqrt(2.0 + SQRT2)

T1 = 2.0 * math.pi / OMEGA1
T2 = 2.0 * math.pi / OMEGA2
