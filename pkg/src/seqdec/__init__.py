"""Sequential decision models, belief learning, POMDP solvers and the four policy classes."""

__version__ = "0.1.0"
