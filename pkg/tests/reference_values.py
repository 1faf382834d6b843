"""Published table values used as fixed arithmetic fixtures."""

# (precision %, recall %, F2 %) as printed for the four companies, RF then DL-AE
F2_ROWS = [
    (47.97, 47.44, 47.54),
    (38.29, 76.95, 64.02),
    (68.13, 70.16, 69.75),
    (56.35, 85.37, 77.40),
    (48.30, 46.06, 46.49),
    (39.11, 74.12, 62.86),
    (74.22, 81.91, 80.24),
    (64.74, 90.10, 83.55),
]

# (reach, #CNV, printed CVR %)
CVR_ROWS = [
    (309963, 1043, "0.34"),
    (154981, 399, "0.26"),
    (101109, 220, "0.22"),
    (404433, 592, "0.15"),
    (119076, 3679, "3.09"),
    (77385, 2245, "2.90"),
    (61881, 2003, "3.24"),
    (91658, 2771, "3.02"),
]

TALLY = (30, 9, 7)  # wins, ties, losses over 46 production campaigns
