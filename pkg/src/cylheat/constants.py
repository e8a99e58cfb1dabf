"""Physical constants (CODATA 2018 exact/recommended decimals, SI units)."""

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K
C = 299792458.0  # m / s
EULER_GAMMA = 0.57721566490153286061
