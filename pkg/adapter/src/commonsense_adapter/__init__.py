"""Inference server for commonsense continuations and word probabilities.

Wraps a causal language model (a transformer fine-tuned on event
knowledge, COMET-style) behind a two-operation JSON protocol: greedy
``generate`` for a relation-conditioned continuation and ``word_prob``
for the probability that the continuation starts with a given word.
"""

__version__ = "0.1.0"
