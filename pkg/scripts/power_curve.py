"""Empirical power of the likelihood-ratio (gamma = 0) test of rate 1 in the
exponential model, with the normal approximation drawn dashed."""

from _common import main

if __name__ == "__main__":
    main("power-curve", __doc__.splitlines()[0])
