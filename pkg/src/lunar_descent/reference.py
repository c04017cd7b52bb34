"""Published Argonaut descent figures kept as fixture constants.

The fuel-optimal rows come from a collocation solver that this package does
not reproduce; they are only used to report the propellant penalty of the
guided trajectory.
"""

# waypoint: (time s, altitude m, downrange m, vertical vel m/s, horizontal vel m/s, pitch deg, mass kg)
OPTIMAL_TIMELINE = {
    "MBB": (0.0, 30000.0, 472230.0, 0.0, 1681.6, 0.0, 7000.0),
    "PGA": (525.1, 920.0, 497.1, -43.2, 42.1, 33.5, 4079.4),
    "LGA": (536.7, 500.0, 214.7, -26.8, 13.4, 80.0, 4020.7),
    "VGA": (569.4, 30.0, 0.0, -2.0, 0.0, 90.0, 3923.6),
    "MECO": (584.4, 0.0, 0.0, -2.0, 0.0, 90.0, 3894.2),
}

SUBOPTIMAL_TIMELINE = {
    "MBB": (0.0, 30000.0, 473757.6, 0.0, 1681.6, -4.5, 7000.0),
    "PGA": (526.3, 898.3, 622.9, -40.3, 39.1, 31.7, 4072.8),
    "LGA": (538.5, 498.4, 323.0, -24.4, 17.4, 80.0, 4018.5),
    "VGA": (579.0, 30.0, 0.0, -2.0, 0.0, 90.0, 3908.4),
    "MECO": (594.0, 0.0, 0.0, -2.0, 0.0, 90.0, 3879.1),
}

# scenario: (hda1 m, hda2 m, tof s, braking+pitch-up kg, powered kg, vertical kg, total kg, dv m/s)
OPTIMAL_PROPELLANT = {
    "N": (0.0, 0.0, 584.4, 2979.3, 97.1, 29.4, 3105.8, 1898.4),
    "F": (-100.0, 0.0, 585.2, 2979.3, 99.9, 29.4, 3108.7, 1900.8),
    "FF": (-100.0, -20.0, 585.8, 2979.3, 101.4, 29.4, 3110.1, 1902.0),
    "FB": (-100.0, 20.0, 585.0, 2979.3, 99.1, 29.4, 3107.8, 1900.1),
    "B": (100.0, 0.0, 584.1, 2979.3, 97.8, 29.4, 3106.6, 1899.1),
    "BF": (100.0, -20.0, 584.1, 2979.3, 97.7, 29.4, 3106.4, 1898.9),
    "BB": (100.0, 20.0, 584.4, 2979.3, 98.8, 29.4, 3107.5, 1899.8),
}

SUBOPTIMAL_PROPELLANT = {
    "N": (0.0, 0.0, 594.0, 2972.2, 119.4, 29.3, 3120.9, 1911.0),
    "F": (-100.0, 0.0, 595.9, 2972.2, 123.5, 29.3, 3125.1, 1914.5),
    "FF": (-100.0, -20.0, 598.9, 2972.2, 129.2, 29.2, 3130.7, 1919.2),
    "FB": (-100.0, 20.0, 595.9, 2972.2, 123.8, 29.3, 3125.4, 1914.8),
    "B": (100.0, 0.0, 595.9, 2972.2, 124.0, 29.3, 3125.5, 1914.8),
    "BF": (100.0, -20.0, 595.9, 2972.2, 123.9, 29.3, 3125.4, 1914.8),
    "BB": (100.0, 20.0, 595.9, 2972.2, 124.5, 29.3, 3126.0, 1915.3),
}

SUBOPTIMAL_PENALTY = {"N": 15.1, "F": 16.4, "FF": 20.6, "FB": 17.6, "B": 18.9, "BF": 19.0, "BB": 18.5}

SCENARIO_CODES = ("N", "F", "FF", "FB", "B", "BF", "BB")
