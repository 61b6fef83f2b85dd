"""Circuit-killing DoS lab for onion-routing networks.

Subpackages cover the pipeline end to end: synthetic relay populations and
lifecycle traces (``network``), bandwidth-weighted path selection
(``pathsel``), attacker modeling (``attacker``), the closed-form
effectiveness model (``analytic``), trace-replay simulation (``replay``),
and two detection algorithms (``detect_exact``, ``detect_prob``).
"""

__version__ = "0.1.0"
