"""Reference external black box for the rule-explanation toolchain.

Trains a scikit-learn multi-layer perceptron on a prepared binary dataset
(the artifacts written by `ruleseeker prepare`) and serves predictions over
the line-delimited JSON wire protocol v1 on stdin/stdout.
"""

from .server import OracleSession, main, serve

__all__ = ["OracleSession", "main", "serve"]
