"""Nested multilevel Monte Carlo for expectations of the form
E[max{E[X|Y], pi(Y)}], with antithetic inner estimates and antithetic
Milstein path coupling."""

__version__ = "0.1.0"
