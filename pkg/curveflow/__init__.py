"""curveflow - level-set mean curvature flow with driving and source terms."""

__version__ = "0.1.0"
