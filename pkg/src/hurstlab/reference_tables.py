"""Published root-MISE values of the four estimators (case -> n -> estimator ->
values at alpha = 0.2, 0.3, 0.4, 0.5), 100 replications per Hurst function.

Cases H1..H4 are smooth Hurst functions; C1.5 and C0.6 are random Hurst
functions of regularity 1.5- and 0.6-, pooled over 50 trajectories.
"""

ALPHAS = (0.2, 0.3, 0.4, 0.5)
SIZES = (2000, 6000)
CASES = ("H1", "H2", "H3", "H4", "C1.5", "C0.6")

SQRT_MISE = {
    "H1": {
        2000: {
            "QV": (0.044, 0.055, 0.073, 0.104),
            "QV2": (0.041, 0.051, 0.069, 0.096),
            "IR": (0.111, 0.137, 0.186, 0.26),
            "IR2": (0.061, 0.077, 0.106, 0.145),
        },
        6000: {
            "QV": (0.026, 0.035, 0.053, 0.079),
            "QV2": (0.025, 0.033, 0.05, 0.074),
            "IR": (0.065, 0.091, 0.128, 0.202),
            "IR2": (0.037, 0.049, 0.076, 0.115),
        },
    },
    "H2": {
        2000: {
            "QV": (0.17, 0.076, 0.075, 0.101),
            "QV2": (0.17, 0.073, 0.072, 0.096),
            "IR": (0.115, 0.143, 0.184, 0.247),
            "IR2": (0.059, 0.071, 0.098, 0.135),
        },
        6000: {
            "QV": (0.115, 0.045, 0.051, 0.074),
            "QV2": (0.114, 0.044, 0.048, 0.07),
            "IR": (0.07, 0.094, 0.134, 0.195),
            "IR2": (0.036, 0.046, 0.069, 0.103),
        },
    },
    "H3": {
        2000: {
            "QV": (0.362, 0.125, 0.084, 0.102),
            "QV2": (0.362, 0.123, 0.08, 0.096),
            "IR": (0.129, 0.133, 0.171, 0.229),
            "IR2": (0.093, 0.071, 0.091, 0.124),
        },
        6000: {
            "QV": (0.26, 0.078, 0.056, 0.077),
            "QV2": (0.26, 0.077, 0.052, 0.072),
            "IR": (0.078, 0.089, 0.125, 0.18),
            "IR2": (0.057, 0.047, 0.065, 0.097),
        },
    },
    "H4": {
        2000: {
            "QV": (0.321, 0.165, 0.121, 0.12),
            "QV2": (0.32, 0.164, 0.117, 0.112),
            "IR": (0.178, 0.138, 0.16, 0.21),
            "IR2": (0.165, 0.098, 0.091, 0.112),
        },
        6000: {
            "QV": (0.251, 0.136, 0.074, 0.084),
            "QV2": (0.251, 0.135, 0.071, 0.078),
            "IR": (0.158, 0.088, 0.115, 0.164),
            "IR2": (0.148, 0.062, 0.067, 0.091),
        },
    },
    "C1.5": {
        2000: {
            "QV": (0.261, 0.113, 0.088, 0.103),
            "QV2": (0.261, 0.112, 0.085, 0.098),
            "IR": (0.139, 0.141, 0.175, 0.233),
            "IR2": (0.098, 0.077, 0.093, 0.128),
        },
        6000: {
            "QV": (0.164, 0.067, 0.055, 0.074),
            "QV2": (0.164, 0.066, 0.053, 0.07),
            "IR": (0.084, 0.094, 0.131, 0.186),
            "IR2": (0.054, 0.047, 0.066, 0.098),
        },
    },
    "C0.6": {
        2000: {
            "QV": (0.14, 0.087, 0.083, 0.096),
            "QV2": (0.14, 0.086, 0.081, 0.094),
            "IR": (0.148, 0.156, 0.192, 0.249),
            "IR2": (0.088, 0.078, 0.096, 0.135),
        },
        6000: {
            "QV": (0.129, 0.067, 0.057, 0.074),
            "QV2": (0.13, 0.067, 0.056, 0.071),
            "IR": (0.096, 0.106, 0.143, 0.201),
            "IR2": (0.066, 0.052, 0.067, 0.103),
        },
    },
}


def reference_value(case: str, n: int, estimator: str, alpha: float) -> float | None:
    try:
        row = SQRT_MISE[case][n][estimator.upper()]
    except KeyError:
        return None
    for a, v in zip(ALPHAS, row):
        if abs(a - alpha) < 1e-9:
            return v
    return None
