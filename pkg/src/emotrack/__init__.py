"""Character-centered emotion tracking over short stories.

The pipeline labels each character's role per story event, queries a
pluggable commonsense-inference backend for unstated events, scores the
eight Plutchik emotions by geometric mean of first-word probabilities,
and classifies against calibrated per-(emotion, role) thresholds.
"""

__version__ = "0.1.0"
