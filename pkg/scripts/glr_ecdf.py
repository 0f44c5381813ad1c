"""Null distribution of the two-component mixture GLR.

Data come from N(0, 1) (weight zero on N(0.5, 1)); the statistic is compared
with 0.5 delta_0 + 0.5 chi2_1 for n = 200, 500, 1000.
"""

from _common import main

if __name__ == "__main__":
    main("glr-ecdf", __doc__.splitlines()[0])
