"""Physical constants shared across the package (SI units)."""

MU_EARTH = 3.986004418e14  # m^3/s^2
R_EARTH = 6_378_000.0  # m, equatorial radius used by the mission presets
J2_EARTH = 1.08263e-3
G0 = 9.80665  # m/s^2, standard gravity

TWO_PI = 6.283185307179586
